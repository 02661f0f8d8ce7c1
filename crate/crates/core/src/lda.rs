//! Latent Dirichlet Allocation trained by collapsed Gibbs sampling.
//!
//! Token-topic assignments z are resampled from the standard collapsed
//! conditional p(z = k) ~ (n_dk + alpha) * (n_kw + eta_w) / (n_k + V*eta_w),
//! with the doc-side denominator dropped as constant in k. The topic-word
//! rows (phi) and document mixtures (theta) are smoothed count estimates
//! averaged over post-burn-in sweeps. Training is single-threaded with a
//! fixed token order, so a seed pins the model bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::matrix_io::{self, MatrixIoError};
use crate::textpipe::{BagOfWords, Corpus};

pub const DEFAULT_ETA_W: f64 = 0.01;
pub const DEFAULT_ITERS: usize = 1000;
pub const DEFAULT_BURN_IN: usize = 500;
/// Post-burn-in sweeps are averaged every this many sweeps.
pub const SAMPLE_LAG: usize = 10;
/// Count-table consistency is verified every this many sweeps.
const CHECK_EVERY: usize = 50;

/// The conventional symmetric document-topic prior.
pub fn default_alpha(t: usize) -> f64 {
    50.0 / t as f64
}

#[derive(Debug, Error)]
pub enum LdaError {
    #[error("topic count must be >= 1")]
    BadTopicCount,
    #[error("iters ({iters}) must exceed burn_in ({burn_in})")]
    BadIterationSplit { iters: usize, burn_in: usize },
    #[error("{0} must be positive")]
    BadHyperparameter(&'static str),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("word id {word} outside model vocabulary of {vocab}")]
    VocabMismatch { word: u32, vocab: usize },
    #[error("corpus has {corpus} docs but the model carries {model} mixtures")]
    DocCountMismatch { corpus: usize, model: usize },
    #[error(transparent)]
    Io(#[from] MatrixIoError),
}

#[derive(Debug, Clone, Copy)]
pub struct LdaParams {
    pub t: usize,
    pub alpha: f64,
    pub eta_w: f64,
    pub iters: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl LdaParams {
    pub fn new(t: usize, seed: u64) -> Self {
        LdaParams {
            t,
            alpha: default_alpha(t),
            eta_w: DEFAULT_ETA_W,
            iters: DEFAULT_ITERS,
            burn_in: DEFAULT_BURN_IN,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    /// Topic-word distributions, t x vocab, rows sum to 1.
    pub phi: Array2<f64>,
    /// Document-topic mixtures, docs x t, rows sum to 1.
    pub theta: Array2<f64>,
    pub t: usize,
    pub alpha: f64,
    pub eta_w: f64,
    pub seed: u64,
    pub iters: usize,
    pub burn_in: usize,
    /// How many count-consistency checkpoints passed during training.
    pub checkpoints_passed: usize,
}

struct Sampler {
    t: usize,
    vocab: usize,
    alpha: f64,
    eta: f64,
    /// Token word ids per document, expanded in (doc, ascending word id,
    /// repetition) order.
    tokens: Vec<Vec<u32>>,
    z: Vec<Vec<u32>>,
    ndk: Vec<f64>, // docs x t
    nkw: Vec<f64>, // t x vocab
    nk: Vec<f64>,  // t
}

impl Sampler {
    fn new(corpus: &Corpus, t: usize, alpha: f64, eta: f64, rng: &mut ChaCha8Rng) -> Self {
        let vocab = corpus.vocab_size();
        let docs = corpus.n_docs();
        let tokens: Vec<Vec<u32>> = corpus
            .docs
            .iter()
            .map(|bag| {
                let mut toks = Vec::with_capacity(bag.total() as usize);
                for &(w, c) in &bag.counts {
                    toks.extend(std::iter::repeat(w).take(c as usize));
                }
                toks
            })
            .collect();
        let mut s = Sampler {
            t,
            vocab,
            alpha,
            eta,
            z: tokens.iter().map(|d| vec![0u32; d.len()]).collect(),
            tokens,
            ndk: vec![0.0; docs * t],
            nkw: vec![0.0; t * vocab],
            nk: vec![0.0; t],
        };
        for d in 0..s.tokens.len() {
            for i in 0..s.tokens[d].len() {
                let k = rng.gen_range(0..t) as u32;
                s.z[d][i] = k;
                s.bump(d, s.tokens[d][i], k, 1.0);
            }
        }
        s
    }

    #[inline]
    fn bump(&mut self, d: usize, w: u32, k: u32, delta: f64) {
        self.ndk[d * self.t + k as usize] += delta;
        self.nkw[k as usize * self.vocab + w as usize] += delta;
        self.nk[k as usize] += delta;
    }

    fn sweep(&mut self, rng: &mut ChaCha8Rng, weights: &mut Vec<f64>) {
        let v_eta = self.vocab as f64 * self.eta;
        for d in 0..self.tokens.len() {
            for i in 0..self.tokens[d].len() {
                let w = self.tokens[d][i];
                let old = self.z[d][i];
                self.bump(d, w, old, -1.0);

                weights.clear();
                let mut total = 0.0;
                for k in 0..self.t {
                    let p = (self.ndk[d * self.t + k] + self.alpha)
                        * (self.nkw[k * self.vocab + w as usize] + self.eta)
                        / (self.nk[k] + v_eta);
                    total += p;
                    weights.push(total);
                }
                let u = rng.gen::<f64>() * total;
                let new = weights
                    .iter()
                    .position(|&cum| u < cum)
                    .unwrap_or(self.t - 1) as u32;

                self.z[d][i] = new;
                self.bump(d, w, new, 1.0);
            }
        }
    }

    /// Count tables must stay consistent with the raw assignments:
    /// per-document topic counts sum to the document length, and per-topic
    /// word counts sum to the topic's total mass.
    fn check_consistency(&self) {
        for (d, toks) in self.tokens.iter().enumerate() {
            let row_sum: f64 = self.ndk[d * self.t..(d + 1) * self.t].iter().sum();
            assert_eq!(row_sum, toks.len() as f64, "ndk row sum broke at doc {d}");
        }
        let mut mass_by_topic = vec![0.0; self.t];
        for d in 0..self.tokens.len() {
            for k in 0..self.t {
                mass_by_topic[k] += self.ndk[d * self.t + k];
            }
        }
        for k in 0..self.t {
            let word_sum: f64 = self.nkw[k * self.vocab..(k + 1) * self.vocab].iter().sum();
            assert_eq!(word_sum, self.nk[k], "nkw row sum broke at topic {k}");
            assert_eq!(mass_by_topic[k], self.nk[k], "ndk mass broke at topic {k}");
        }
    }

    fn phi_estimate(&self) -> Array2<f64> {
        let v_eta = self.vocab as f64 * self.eta;
        Array2::from_shape_fn((self.t, self.vocab), |(k, w)| {
            (self.nkw[k * self.vocab + w] + self.eta) / (self.nk[k] + v_eta)
        })
    }

    fn theta_estimate(&self) -> Array2<f64> {
        let t_alpha = self.t as f64 * self.alpha;
        Array2::from_shape_fn((self.tokens.len(), self.t), |(d, k)| {
            (self.ndk[d * self.t + k] + self.alpha)
                / (self.tokens[d].len() as f64 + t_alpha)
        })
    }
}

pub fn train_lda(corpus: &Corpus, params: LdaParams) -> Result<LdaModel, LdaError> {
    if params.t < 1 {
        return Err(LdaError::BadTopicCount);
    }
    if params.iters <= params.burn_in {
        return Err(LdaError::BadIterationSplit {
            iters: params.iters,
            burn_in: params.burn_in,
        });
    }
    if !(params.alpha > 0.0) {
        return Err(LdaError::BadHyperparameter("alpha"));
    }
    if !(params.eta_w > 0.0) {
        return Err(LdaError::BadHyperparameter("eta_w"));
    }
    if corpus.n_docs() == 0 || corpus.vocab_size() == 0 {
        return Err(LdaError::EmptyCorpus);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut sampler = Sampler::new(corpus, params.t, params.alpha, params.eta_w, &mut rng);
    let mut weights = Vec::with_capacity(params.t);

    let mut phi_acc = Array2::<f64>::zeros((params.t, corpus.vocab_size()));
    let mut theta_acc = Array2::<f64>::zeros((corpus.n_docs(), params.t));
    let mut samples = 0usize;
    let mut checkpoints_passed = 0usize;

    for sweep in 1..=params.iters {
        sampler.sweep(&mut rng, &mut weights);
        if sweep % CHECK_EVERY == 0 {
            sampler.check_consistency();
            checkpoints_passed += 1;
        }
        if sweep > params.burn_in && (sweep - params.burn_in - 1) % SAMPLE_LAG == 0 {
            phi_acc += &sampler.phi_estimate();
            theta_acc += &sampler.theta_estimate();
            samples += 1;
        }
    }
    sampler.check_consistency();
    checkpoints_passed += 1;

    let scale = 1.0 / samples as f64;
    Ok(LdaModel {
        phi: phi_acc * scale,
        theta: theta_acc * scale,
        t: params.t,
        alpha: params.alpha,
        eta_w: params.eta_w,
        seed: params.seed,
        iters: params.iters,
        burn_in: params.burn_in,
        checkpoints_passed,
    })
}

impl LdaModel {
    pub fn from_parts(
        phi: Array2<f64>,
        theta: Array2<f64>,
        alpha: f64,
        eta_w: f64,
        seed: u64,
    ) -> Self {
        let t = phi.nrows();
        LdaModel {
            phi,
            theta,
            t,
            alpha,
            eta_w,
            seed,
            iters: 0,
            burn_in: 0,
            checkpoints_passed: 0,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.phi.ncols()
    }

    pub fn n_docs(&self) -> usize {
        self.theta.nrows()
    }

    /// Plug-in log likelihood: sum over tokens of
    /// log sum_k theta_dk * phi_kw.
    pub fn log_likelihood(&self, corpus: &Corpus) -> Result<f64, LdaError> {
        if corpus.n_docs() != self.n_docs() {
            return Err(LdaError::DocCountMismatch {
                corpus: corpus.n_docs(),
                model: self.n_docs(),
            });
        }
        let mut ll = 0.0;
        for (d, bag) in corpus.docs.iter().enumerate() {
            for &(w, c) in &bag.counts {
                if w as usize >= self.vocab_size() {
                    return Err(LdaError::VocabMismatch {
                        word: w,
                        vocab: self.vocab_size(),
                    });
                }
                let p: f64 = (0..self.t)
                    .map(|k| self.theta[(d, k)] * self.phi[(k, w as usize)])
                    .sum();
                ll += f64::from(c) * p.ln();
            }
        }
        Ok(ll)
    }

    /// Mixture for an unseen document: Gibbs sampling with phi frozen,
    /// averaging the smoothed mixture over the second half of the sweeps.
    /// An empty document comes back uniform with the degenerate flag set.
    pub fn infer_doc_topics(
        &self,
        new_doc: &BagOfWords,
        iters: usize,
        seed: u64,
    ) -> Result<(Vec<f64>, bool), LdaError> {
        let uniform = vec![1.0 / self.t as f64; self.t];
        if new_doc.counts.is_empty() {
            return Ok((uniform, true));
        }
        let mut tokens = Vec::with_capacity(new_doc.total() as usize);
        for &(w, c) in &new_doc.counts {
            if w as usize >= self.vocab_size() {
                return Err(LdaError::VocabMismatch {
                    word: w,
                    vocab: self.vocab_size(),
                });
            }
            tokens.extend(std::iter::repeat(w).take(c as usize));
        }
        let iters = iters.max(2);
        let burn = iters / 2;
        let len = tokens.len() as f64;
        let t_alpha = self.t as f64 * self.alpha;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ndk = vec![0.0f64; self.t];
        let mut z = vec![0u32; tokens.len()];
        for zi in z.iter_mut() {
            let k = rng.gen_range(0..self.t) as u32;
            *zi = k;
            ndk[k as usize] += 1.0;
        }

        let mut acc = vec![0.0f64; self.t];
        let mut samples = 0usize;
        let mut cum = Vec::with_capacity(self.t);
        for sweep in 1..=iters {
            for (i, &w) in tokens.iter().enumerate() {
                let old = z[i] as usize;
                ndk[old] -= 1.0;
                cum.clear();
                let mut total = 0.0;
                for k in 0..self.t {
                    total += (ndk[k] + self.alpha) * self.phi[(k, w as usize)];
                    cum.push(total);
                }
                let u = rng.gen::<f64>() * total;
                let new = cum.iter().position(|&c| u < c).unwrap_or(self.t - 1);
                z[i] = new as u32;
                ndk[new] += 1.0;
            }
            if sweep > burn {
                for k in 0..self.t {
                    acc[k] += (ndk[k] + self.alpha) / (len + t_alpha);
                }
                samples += 1;
            }
        }
        let weights: Vec<f64> = acc.iter().map(|a| a / samples as f64).collect();
        Ok((weights, false))
    }

    /// Mixtures for every training document, row per doc.
    pub fn all_doc_topics(&self) -> Vec<Vec<f64>> {
        self.theta.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    /// Persist as `<stem>.meta`, `<stem>.phi.txt`, `<stem>.theta.txt`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(), LdaError> {
        let mut fields = BTreeMap::new();
        fields.insert("kind".into(), "lda".into());
        fields.insert("t".into(), self.t.to_string());
        fields.insert("vocab".into(), self.vocab_size().to_string());
        fields.insert("docs".into(), self.n_docs().to_string());
        fields.insert("alpha".into(), format!("{:.16e}", self.alpha));
        fields.insert("eta_w".into(), format!("{:.16e}", self.eta_w));
        fields.insert("iters".into(), self.iters.to_string());
        fields.insert("burn_in".into(), self.burn_in.to_string());
        fields.insert("seed".into(), self.seed.to_string());
        matrix_io::save_header(&fields, &dir.join(format!("{stem}.meta")))?;
        matrix_io::save_matrix(&self.phi, &dir.join(format!("{stem}.phi.txt")))?;
        matrix_io::save_matrix(&self.theta, &dir.join(format!("{stem}.theta.txt")))?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self, LdaError> {
        let meta_path = dir.join(format!("{stem}.meta"));
        let fields = matrix_io::load_header(&meta_path)?;
        let t: usize = matrix_io::header_field(&fields, "t", &meta_path)?;
        let alpha: f64 = matrix_io::header_field(&fields, "alpha", &meta_path)?;
        let eta_w: f64 = matrix_io::header_field(&fields, "eta_w", &meta_path)?;
        let iters: usize = matrix_io::header_field(&fields, "iters", &meta_path)?;
        let burn_in: usize = matrix_io::header_field(&fields, "burn_in", &meta_path)?;
        let seed: u64 = matrix_io::header_field(&fields, "seed", &meta_path)?;
        let phi = matrix_io::load_matrix(&dir.join(format!("{stem}.phi.txt")))?;
        let theta = matrix_io::load_matrix(&dir.join(format!("{stem}.theta.txt")))?;
        Ok(LdaModel {
            phi,
            theta,
            t,
            alpha,
            eta_w,
            seed,
            iters,
            burn_in,
            checkpoints_passed: 0,
        })
    }
}
