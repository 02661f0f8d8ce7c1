//! Ground-truth generators and brute-force oracles for validation: planted
//! topic corpora, Gaussian spatial mixtures with closed-form density ratios,
//! and a sort-based density-ratio evaluation that the indexed estimator must
//! match exactly.
//!
//! All randomness comes from seeded ChaCha8 streams (Gaussians via
//! Box-Muller), so every artifact is a pure function of its spec.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dre::{DreError, LabeledPoint, MixtureWeights, RatioSample};
use crate::ingest::{IncidentRecord, ProjectedPoint, Projection};
use crate::kdtree::{dist2, IndexError};
use crate::textpipe::{BagOfWords, Corpus, Dictionary};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("corpus spec needs t >= 1, vocab_per_topic >= 1, docs >= 1, doc_length >= 1")]
    BadCorpusSpec,
    #[error("topic_mixing must lie in [0, 1], got {0}")]
    BadMixing(f64),
    #[error("mixture spec needs matching centers/sigmas/rho, positive sigmas, rho on the simplex")]
    BadMixtureSpec,
}

/// Spec for a corpus with disjoint per-topic vocabulary blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedCorpusSpec {
    pub t: usize,
    pub vocab_per_topic: usize,
    pub docs: usize,
    /// Mean document length; actual lengths are Poisson (min 1).
    pub doc_length: usize,
    /// Fraction of each document's words drawn uniformly from the full
    /// vocabulary instead of the document's own block.
    pub topic_mixing: f64,
    pub seed: u64,
}

/// A generated corpus plus its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCorpus {
    /// Bags over the designed dictionary (all `t * vocab_per_topic` terms,
    /// ids in block-major order).
    pub corpus: Corpus,
    /// One-sentence narrative per document (the words, space-joined).
    pub narratives: Vec<String>,
    /// Planted dominant topic per document.
    pub doc_topics: Vec<usize>,
    /// Planted word-id blocks, one per topic.
    pub topic_blocks: Vec<Vec<u32>>,
}

fn term_name(block: usize, word: usize) -> String {
    format!("t{block:02}w{word:03}")
}

/// Poisson sample by the product method; exact inversion of the uniform
/// stream, fine for the desk-scale means used here.
fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    let limit = (-mean).exp();
    let mut product = 1.0 - rng.gen::<f64>(); // (0, 1]
    let mut count = 0usize;
    while product > limit {
        product *= 1.0 - rng.gen::<f64>();
        count += 1;
    }
    count
}

pub fn generate_corpus(spec: &PlantedCorpusSpec) -> Result<PlantedCorpus, SynthError> {
    if spec.t == 0 || spec.vocab_per_topic == 0 || spec.docs == 0 || spec.doc_length == 0 {
        return Err(SynthError::BadCorpusSpec);
    }
    if !(0.0..=1.0).contains(&spec.topic_mixing) {
        return Err(SynthError::BadMixing(spec.topic_mixing));
    }
    let vocab = spec.t * spec.vocab_per_topic;
    let terms: Vec<String> = (0..spec.t)
        .flat_map(|k| (0..spec.vocab_per_topic).map(move |w| term_name(k, w)))
        .collect();
    let dictionary = Dictionary::from_terms(terms).expect("vocab >= 1");
    let topic_blocks: Vec<Vec<u32>> = (0..spec.t)
        .map(|k| {
            ((k * spec.vocab_per_topic) as u32..((k + 1) * spec.vocab_per_topic) as u32).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut docs = Vec::with_capacity(spec.docs);
    let mut narratives = Vec::with_capacity(spec.docs);
    let mut doc_topics = Vec::with_capacity(spec.docs);
    for d in 0..spec.docs {
        let topic = d % spec.t;
        let len = poisson(&mut rng, spec.doc_length as f64).max(1);
        let mut words = Vec::with_capacity(len);
        for _ in 0..len {
            let id = if rng.gen::<f64>() < spec.topic_mixing {
                rng.gen_range(0..vocab as u32)
            } else {
                (topic * spec.vocab_per_topic) as u32 + rng.gen_range(0..spec.vocab_per_topic as u32)
            };
            words.push(id);
        }
        let narrative = words
            .iter()
            .map(|&id| dictionary.term(id).expect("designed id"))
            .collect::<Vec<_>>()
            .join(" ");
        let mut counts: Vec<(u32, u32)> = Vec::new();
        words.sort_unstable();
        for &id in &words {
            match counts.last_mut() {
                Some((w, c)) if *w == id => *c += 1,
                _ => counts.push((id, 1)),
            }
        }
        docs.push(BagOfWords {
            doc_id: format!("synth-{d:05}"),
            counts,
        });
        narratives.push(narrative);
        doc_topics.push(topic);
    }

    Ok(PlantedCorpus {
        corpus: Corpus { dictionary, docs },
        narratives,
        doc_topics,
        topic_blocks,
    })
}

/// Spec for an M-component planar Gaussian mixture; component m carries
/// label m.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMixtureSpec {
    pub centers: Vec<(f64, f64)>,
    pub sigmas: Vec<f64>,
    pub rho: Vec<f64>,
    pub n: usize,
    pub seed: u64,
}

impl SpatialMixtureSpec {
    fn validate(&self) -> Result<(), SynthError> {
        let m = self.centers.len();
        if m == 0
            || self.sigmas.len() != m
            || self.rho.len() != m
            || self.n == 0
            || self.sigmas.iter().any(|&s| !(s > 0.0))
            || self.rho.iter().any(|&r| !(r > 0.0))
            || (self.rho.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(SynthError::BadMixtureSpec);
        }
        Ok(())
    }
}

/// Closed-form densities of the generating mixture, evaluable anywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDensity {
    centers: Vec<(f64, f64)>,
    sigmas: Vec<f64>,
    rho: Vec<f64>,
}

impl MixtureDensity {
    pub fn component(&self, m: usize, x: ProjectedPoint) -> f64 {
        let (cx, cy) = self.centers[m];
        let s2 = self.sigmas[m] * self.sigmas[m];
        let d2 = (x.x - cx) * (x.x - cx) + (x.y - cy) * (x.y - cy);
        (-d2 / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2)
    }

    pub fn overall(&self, x: ProjectedPoint) -> f64 {
        (0..self.rho.len())
            .map(|m| self.rho[m] * self.component(m, x))
            .sum()
    }

    /// The true relative density r_m(x) = f_m(x) / f(x).
    pub fn ratio(&self, m: usize, x: ProjectedPoint) -> f64 {
        self.component(m, x) / self.overall(x)
    }

    pub fn ratios(&self, x: ProjectedPoint) -> Vec<f64> {
        (0..self.rho.len()).map(|m| self.ratio(m, x)).collect()
    }
}

/// One standard Gaussian pair by Box-Muller from the uniform stream.
pub fn gauss_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1 = 1.0 - rng.gen::<f64>(); // (0, 1], keeps ln finite
    let u2 = rng.gen::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * std::f64::consts::PI * u2;
    (r * angle.cos(), r * angle.sin())
}

/// Draw n labeled points: label ~ Multinomial(rho), location ~ that
/// component's Gaussian. Returns the points and the analytic density handle.
pub fn generate_mixture(
    spec: &SpatialMixtureSpec,
) -> Result<(Vec<LabeledPoint>, MixtureDensity), SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut points = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let u = rng.gen::<f64>();
        let mut label = spec.rho.len() - 1;
        let mut cum = 0.0;
        for (m, &r) in spec.rho.iter().enumerate() {
            cum += r;
            if u < cum {
                label = m;
                break;
            }
        }
        let (z1, z2) = gauss_pair(&mut rng);
        let (cx, cy) = spec.centers[label];
        points.push(LabeledPoint {
            p: ProjectedPoint {
                x: cx + spec.sigmas[label] * z1,
                y: cy + spec.sigmas[label] * z2,
            },
            label: label as u32,
        });
    }
    Ok((
        points,
        MixtureDensity {
            centers: spec.centers.clone(),
            sigmas: spec.sigmas.clone(),
            rho: spec.rho.clone(),
        },
    ))
}

/// Density-ratio evaluation by a full distance sort per query: the
/// independent oracle for the indexed estimator. Same contract, same
/// arithmetic primitives, different search path.
pub fn brute_force_dre(
    points: &[LabeledPoint],
    weights: &MixtureWeights,
    x: ProjectedPoint,
    k: usize,
) -> Result<RatioSample, DreError> {
    if weights.n() != points.len() as u64 {
        return Err(DreError::WeightsMismatch {
            weights: weights.n(),
            index: points.len(),
        });
    }
    if k == 0 || k > points.len() {
        return Err(IndexError::KOutOfRange {
            k,
            n: points.len(),
        }
        .into());
    }
    let q = [x.x, x.y];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(q, [p.p.x, p.p.y])).collect();
    d2.sort_unstable_by(f64::total_cmp);
    let radius = d2[k - 1].sqrt();

    let mut counts = vec![0u64; weights.n_labels()];
    for p in points {
        if dist2(q, [p.p.x, p.p.y]).sqrt() <= radius {
            counts[p.label as usize] += 1;
        }
    }
    let g = counts
        .iter()
        .enumerate()
        .map(|(m, &n_m_local)| (n_m_local * weights.n()) as f64 / (k as u64 * weights.count(m)) as f64)
        .collect();
    Ok(RatioSample { g, counts, radius })
}

/// Greedy one-to-one matching of model topics to planted blocks: repeatedly
/// take the highest remaining score. `score[model][block]`, square.
pub fn greedy_match(score: &[Vec<f64>]) -> Vec<usize> {
    let t = score.len();
    let mut assignment = vec![usize::MAX; t];
    let mut used_model = vec![false; t];
    let mut used_block = vec![false; t];
    for _ in 0..t {
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for (m, row) in score.iter().enumerate() {
            if used_model[m] {
                continue;
            }
            for (b, &s) in row.iter().enumerate() {
                if !used_block[b] && s > best.0 {
                    best = (s, m, b);
                }
            }
        }
        assignment[best.1] = best.2;
        used_model[best.1] = true;
        used_block[best.2] = true;
    }
    assignment
}

pub fn topic_label(k: usize) -> String {
    format!("T{k:02}")
}

/// A full synthetic incident set: narratives from a planted corpus, each
/// located by its planted topic's Gaussian component and labeled with the
/// synthetic call type [`topic_label`]. The locations use a second RNG
/// stream off the corpus seed, and are mapped to lat/lon through the given
/// projection so the records run the real pipeline unchanged.
pub fn generate_incidents(
    spec: &PlantedCorpusSpec,
    centers: &[(f64, f64)],
    sigmas: &[f64],
    projection: &Projection,
) -> Result<(Vec<IncidentRecord>, PlantedCorpus), SynthError> {
    if centers.len() != spec.t || sigmas.len() != spec.t || sigmas.iter().any(|&s| !(s > 0.0)) {
        return Err(SynthError::BadMixtureSpec);
    }
    let planted = generate_corpus(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let records = planted
        .doc_topics
        .iter()
        .zip(&planted.narratives)
        .zip(&planted.corpus.docs)
        .map(|((&topic, narrative), bag)| {
            let (z1, z2) = gauss_pair(&mut rng);
            let (cx, cy) = centers[topic];
            let p = ProjectedPoint {
                x: cx + sigmas[topic] * z1,
                y: cy + sigmas[topic] * z2,
            };
            let (lat, lon) = projection.invert(p);
            IncidentRecord {
                id: bag.doc_id.clone(),
                narrative: narrative.clone(),
                call_type: topic_label(topic),
                lat,
                lon,
                timestamp: None,
            }
        })
        .collect();
    Ok((records, planted))
}
