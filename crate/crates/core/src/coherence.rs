//! UMass topic coherence: for a topic's top words, sum over ordered pairs
//! ln((D(w_i, w_j) + 1) / D(w_i)) where D counts documents containing the
//! word(s) and i < j means w_i is the more document-frequent word (ties by
//! id, which is lexicographic term order). Higher is more coherent.

use thiserror::Error;

use crate::lda::{self, LdaParams};
use crate::nmf::{self, NmfParams};
use crate::textpipe::Corpus;

#[derive(Debug, Error)]
pub enum CoherenceError {
    #[error("term id {0} never occurs in the indexed corpus")]
    TermAbsent(u32),
    #[error("term id {0} outside the indexed vocabulary")]
    TermOutOfRange(u32),
    #[error("sweep range needs t_max >= t_min >= 2, got {t_min}..={t_max}")]
    BadRange { t_min: usize, t_max: usize },
    #[error("nmf trainer: {0}")]
    Nmf(#[from] nmf::NmfError),
    #[error("lda trainer: {0}")]
    Lda(#[from] lda::LdaError),
}

/// Per-term document postings over a corpus; single-term counts are lengths,
/// pair counts are sorted-list intersections computed on demand.
#[derive(Debug, Clone)]
pub struct DocFreqIndex {
    postings: Vec<Vec<u32>>,
    n_docs: usize,
}

impl DocFreqIndex {
    pub fn build(corpus: &Corpus) -> Self {
        let mut postings = vec![Vec::new(); corpus.vocab_size()];
        for (d, bag) in corpus.docs.iter().enumerate() {
            for &(w, _) in &bag.counts {
                postings[w as usize].push(d as u32);
            }
        }
        DocFreqIndex {
            postings,
            n_docs: corpus.n_docs(),
        }
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// D(w): number of documents containing the word.
    pub fn doc_freq(&self, w: u32) -> Result<u64, CoherenceError> {
        self.postings
            .get(w as usize)
            .map(|p| p.len() as u64)
            .ok_or(CoherenceError::TermOutOfRange(w))
    }

    /// D(w_i, w_j): number of documents containing both words. Symmetric.
    pub fn pair_freq(&self, wi: u32, wj: u32) -> Result<u64, CoherenceError> {
        let a = self
            .postings
            .get(wi as usize)
            .ok_or(CoherenceError::TermOutOfRange(wi))?;
        let b = self
            .postings
            .get(wj as usize)
            .ok_or(CoherenceError::TermOutOfRange(wj))?;
        let (mut i, mut j, mut count) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    count += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(count)
    }

    /// Sort word ids by document frequency descending, ties by id ascending
    /// (ids are assigned in lexicographic term order).
    pub fn order_by_frequency(&self, words: &[u32]) -> Result<Vec<u32>, CoherenceError> {
        let mut keyed: Vec<(u64, u32)> = words
            .iter()
            .map(|&w| Ok((self.doc_freq(w)?, w)))
            .collect::<Result<_, CoherenceError>>()?;
        keyed.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        Ok(keyed.into_iter().map(|(_, w)| w).collect())
    }
}

/// Coherence of one ordered word list: sum over i < j of
/// ln((D(w_i, w_j) + 1) / D(w_i)). The caller supplies the order (most
/// document-frequent first); every word must occur somewhere in the corpus.
pub fn umass_topic(top_words: &[u32], index: &DocFreqIndex) -> Result<f64, CoherenceError> {
    for &w in top_words {
        if index.doc_freq(w)? == 0 {
            return Err(CoherenceError::TermAbsent(w));
        }
    }
    let mut score = 0.0;
    for i in 0..top_words.len() {
        for j in (i + 1)..top_words.len() {
            let d_i = index.doc_freq(top_words[i])?;
            let d_ij = index.pair_freq(top_words[i], top_words[j])?;
            score += ((d_ij + 1) as f64 / d_i as f64).ln();
        }
    }
    Ok(score)
}

/// Mean [`umass_topic`] over a model's per-topic top-word lists, each list
/// frequency-ordered first.
pub fn umass_model(
    topic_top_words: &[Vec<u32>],
    index: &DocFreqIndex,
) -> Result<f64, CoherenceError> {
    let mut total = 0.0;
    for words in topic_top_words {
        let ordered = index.order_by_frequency(words)?;
        total += umass_topic(&ordered, index)?;
    }
    Ok(total / topic_top_words.len() as f64)
}

/// The `n` heaviest word ids of a weight vector, ties by id ascending.
pub fn top_ids(weights: &[f64], n: usize) -> Vec<u32> {
    let mut order: Vec<u32> = (0..weights.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        weights[b as usize]
            .total_cmp(&weights[a as usize])
            .then(a.cmp(&b))
    });
    order.truncate(n);
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trainer {
    Nmf,
    Lda,
}

impl std::str::FromStr for Trainer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nmf" => Ok(Trainer::Nmf),
            "lda" => Ok(Trainer::Lda),
            other => Err(format!("unknown trainer {other:?} (expected nmf or lda)")),
        }
    }
}

impl std::fmt::Display for Trainer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Trainer::Nmf => "nmf",
            Trainer::Lda => "lda",
        })
    }
}

/// Trainer settings shared across a sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    /// Top words per topic entering the coherence sum.
    pub n_top: usize,
    pub nmf_max_iters: usize,
    pub nmf_tol: f64,
    pub lda_iters: usize,
    pub lda_burn_in: usize,
    pub lda_eta_w: f64,
    /// None picks 50/t per model.
    pub lda_alpha: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_top: 10,
            nmf_max_iters: nmf::DEFAULT_MAX_ITERS,
            nmf_tol: nmf::DEFAULT_TOL,
            lda_iters: lda::DEFAULT_ITERS,
            lda_burn_in: lda::DEFAULT_BURN_IN,
            lda_eta_w: lda::DEFAULT_ETA_W,
            lda_alpha: None,
        }
    }
}

/// Train one model per t in `t_min..=t_max` and score each; deterministic
/// given the seed (model t uses stream seed + t).
pub fn coherence_sweep(
    corpus: &Corpus,
    t_min: usize,
    t_max: usize,
    trainer: Trainer,
    seed: u64,
    config: &SweepConfig,
) -> Result<Vec<(usize, f64)>, CoherenceError> {
    if t_min < 2 || t_max < t_min {
        return Err(CoherenceError::BadRange { t_min, t_max });
    }
    let index = DocFreqIndex::build(corpus);
    let mut rows = Vec::with_capacity(t_max - t_min + 1);
    for t in t_min..=t_max {
        let model_seed = seed.wrapping_add(t as u64);
        let top_lists: Vec<Vec<u32>> = match trainer {
            Trainer::Nmf => {
                let model = nmf::train_nmf(
                    corpus,
                    NmfParams {
                        t,
                        max_iters: config.nmf_max_iters,
                        tol: config.nmf_tol,
                        seed: model_seed,
                    },
                )?;
                (0..t)
                    .map(|k| top_ids(&model.w.column(k).to_vec(), config.n_top))
                    .collect()
            }
            Trainer::Lda => {
                let model = lda::train_lda(
                    corpus,
                    LdaParams {
                        t,
                        alpha: config.lda_alpha.unwrap_or_else(|| lda::default_alpha(t)),
                        eta_w: config.lda_eta_w,
                        iters: config.lda_iters,
                        burn_in: config.lda_burn_in,
                        seed: model_seed,
                    },
                )?;
                (0..t)
                    .map(|k| top_ids(&model.phi.row(k).to_vec(), config.n_top))
                    .collect()
            }
        };
        rows.push((t, umass_model(&top_lists, &index)?));
    }
    Ok(rows)
}
