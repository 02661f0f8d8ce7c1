//! Nonnegative matrix factorization of the term-document count matrix by
//! multiplicative updates on the squared Frobenius objective.
//!
//! The corpus matrix C (vocab x docs) is approximated by W * H with W
//! (vocab x topics) and H (topics x docs) elementwise nonnegative. Updates
//! follow the standard alternating multiplicative rules, which keep entries
//! nonnegative and never increase the objective; C stays sparse throughout,
//! so cost scales with the token count rather than vocab x docs.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::matrix_io::{self, MatrixIoError};
use crate::textpipe::{Corpus, Dictionary};

/// Added to update denominators to avoid division by zero.
const EPS: f64 = 1e-12;

pub const DEFAULT_MAX_ITERS: usize = 400;
pub const DEFAULT_TOL: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum NmfError {
    #[error("topic count {t} out of range (need 1 <= t <= min(vocab={vocab}, docs={docs}))")]
    TopicCountOutOfRange { t: usize, vocab: usize, docs: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("topic index {0} out of range for {1} topics")]
    TopicIndexOutOfRange(usize, usize),
    #[error("doc index {0} out of range for {1} docs")]
    DocIndexOutOfRange(usize, usize),
    #[error(transparent)]
    Io(#[from] MatrixIoError),
}

#[derive(Debug, Clone, Copy)]
pub struct NmfParams {
    pub t: usize,
    pub max_iters: usize,
    /// Stop when the relative objective decrease falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl NmfParams {
    pub fn new(t: usize, seed: u64) -> Self {
        NmfParams {
            t,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmfModel {
    /// Word-topic weights, vocab x t; each column sums to 1 unless the topic
    /// died to all zeros.
    pub w: Array2<f64>,
    /// Topic-document weights, t x docs, carrying the scale folded out of W.
    pub h: Array2<f64>,
    pub t: usize,
    pub seed: u64,
    pub iters_run: usize,
    /// Objective value after initialization, then after every iteration.
    pub objective_trace: Vec<f64>,
}

struct SparseCounts {
    /// (doc, word, count) triplets.
    triplets: Vec<(u32, u32, f64)>,
    norm2: f64,
}

impl SparseCounts {
    fn from_corpus(corpus: &Corpus) -> Self {
        let mut triplets = Vec::new();
        let mut norm2 = 0.0;
        for (j, doc) in corpus.docs.iter().enumerate() {
            for &(v, c) in &doc.counts {
                let c = f64::from(c);
                triplets.push((j as u32, v, c));
                norm2 += c * c;
            }
        }
        SparseCounts { triplets, norm2 }
    }

    /// ||C - W H||_F^2 = ||C||^2 - 2 <C, WH> + tr((W'W)(HH')).
    fn objective(&self, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
        let mut inner = 0.0;
        for &(j, v, c) in &self.triplets {
            let wh = w
                .row(v as usize)
                .iter()
                .zip(h.column(j as usize))
                .map(|(a, b)| a * b)
                .sum::<f64>();
            inner += c * wh;
        }
        let wtw = w.t().dot(w);
        let hht = h.dot(&h.t());
        let wh_norm2 = (&wtw * &hht).sum();
        self.norm2 - 2.0 * inner + wh_norm2
    }
}

/// Train by alternating multiplicative updates from a seeded strictly
/// positive uniform init. Stops at `max_iters` or when the relative
/// objective decrease drops below `tol`. W columns are normalized to sum 1
/// afterwards, with the scale folded into H.
pub fn train_nmf(corpus: &Corpus, params: NmfParams) -> Result<NmfModel, NmfError> {
    let (vocab, docs) = (corpus.vocab_size(), corpus.n_docs());
    if vocab == 0 || docs == 0 {
        return Err(NmfError::EmptyCorpus);
    }
    let t = params.t;
    if t < 1 || t > vocab.min(docs) {
        return Err(NmfError::TopicCountOutOfRange { t, vocab, docs });
    }

    let counts = SparseCounts::from_corpus(corpus);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    // Uniform in (0, 1]: strictly positive so no entry is dead at birth.
    let mut w = Array2::from_shape_simple_fn((vocab, t), || 1.0 - rng.gen::<f64>());
    let mut h = Array2::from_shape_simple_fn((t, docs), || 1.0 - rng.gen::<f64>());

    let mut objective_trace = vec![counts.objective(&w, &h)];
    let mut iters_run = 0;
    for _ in 0..params.max_iters {
        // H <- H * (W'C) / (W'W H + eps)
        let mut numer_h = Array2::zeros((t, docs));
        for &(j, v, c) in &counts.triplets {
            let wrow = w.row(v as usize);
            let mut col = numer_h.column_mut(j as usize);
            for (dst, &wv) in col.iter_mut().zip(wrow) {
                *dst += wv * c;
            }
        }
        let denom_h = w.t().dot(&w).dot(&h);
        ndarray::Zip::from(&mut h)
            .and(&numer_h)
            .and(&denom_h)
            .for_each(|hv, &n: &f64, &d: &f64| *hv *= n / (d + EPS));

        // W <- W * (C H') / (W H H' + eps)
        let mut numer_w = Array2::zeros((vocab, t));
        for &(j, v, c) in &counts.triplets {
            let hcol = h.column(j as usize);
            let mut row = numer_w.row_mut(v as usize);
            for (dst, &hv) in row.iter_mut().zip(hcol) {
                *dst += hv * c;
            }
        }
        let denom_w = w.dot(&h.dot(&h.t()));
        ndarray::Zip::from(&mut w)
            .and(&numer_w)
            .and(&denom_w)
            .for_each(|wv, &n: &f64, &d: &f64| *wv *= n / (d + EPS));

        let obj = counts.objective(&w, &h);
        let prev = *objective_trace.last().expect("trace nonempty");
        objective_trace.push(obj);
        iters_run += 1;
        if prev > 0.0 && (prev - obj) / prev < params.tol {
            break;
        }
    }

    // Normalize W columns to sum 1, folding the scale into H rows.
    for k in 0..t {
        let s = w.column(k).sum();
        if s > 0.0 {
            w.column_mut(k).mapv_inplace(|v| v / s);
            h.row_mut(k).mapv_inplace(|v| v * s);
        }
    }

    Ok(NmfModel {
        w,
        h,
        t,
        seed: params.seed,
        iters_run,
        objective_trace,
    })
}

impl NmfModel {
    /// The `n` heaviest terms of a topic's W column, ties lexicographic.
    pub fn top_words(
        &self,
        topic: usize,
        n: usize,
        dict: &Dictionary,
    ) -> Result<Vec<(String, f64)>, NmfError> {
        if topic >= self.t {
            return Err(NmfError::TopicIndexOutOfRange(topic, self.t));
        }
        let col: Vec<f64> = self.w.column(topic).to_vec();
        Ok(dict.top_terms(&col, n))
    }

    /// A document's topic mixture: its H column renormalized to sum 1. An
    /// all-zero column comes back uniform with the degenerate flag set.
    pub fn doc_topics(&self, doc: usize) -> Result<(Vec<f64>, bool), NmfError> {
        let docs = self.h.ncols();
        if doc >= docs {
            return Err(NmfError::DocIndexOutOfRange(doc, docs));
        }
        let col: Vec<f64> = self.h.column(doc).to_vec();
        let s: f64 = col.iter().sum();
        if s > 0.0 {
            Ok((col.iter().map(|v| v / s).collect(), false))
        } else {
            Ok((vec![1.0 / self.t as f64; self.t], true))
        }
    }

    /// Mixtures for every document, row per doc.
    pub fn all_doc_topics(&self) -> Vec<Vec<f64>> {
        (0..self.h.ncols())
            .map(|d| self.doc_topics(d).expect("in range").0)
            .collect()
    }

    pub fn reconstruction_error(&self) -> f64 {
        *self.objective_trace.last().expect("trace nonempty")
    }

    /// Persist as `<stem>.meta`, `<stem>.w.txt`, `<stem>.h.txt`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(), NmfError> {
        let mut fields = BTreeMap::new();
        fields.insert("kind".into(), "nmf".into());
        fields.insert("t".into(), self.t.to_string());
        fields.insert("vocab".into(), self.w.nrows().to_string());
        fields.insert("docs".into(), self.h.ncols().to_string());
        fields.insert("seed".into(), self.seed.to_string());
        fields.insert("iters".into(), self.iters_run.to_string());
        matrix_io::save_header(&fields, &dir.join(format!("{stem}.meta")))?;
        matrix_io::save_matrix(&self.w, &dir.join(format!("{stem}.w.txt")))?;
        matrix_io::save_matrix(&self.h, &dir.join(format!("{stem}.h.txt")))?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self, NmfError> {
        let meta_path = dir.join(format!("{stem}.meta"));
        let fields = matrix_io::load_header(&meta_path)?;
        let t: usize = matrix_io::header_field(&fields, "t", &meta_path)?;
        let seed: u64 = matrix_io::header_field(&fields, "seed", &meta_path)?;
        let iters_run: usize = matrix_io::header_field(&fields, "iters", &meta_path)?;
        let w = matrix_io::load_matrix(&dir.join(format!("{stem}.w.txt")))?;
        let h = matrix_io::load_matrix(&dir.join(format!("{stem}.h.txt")))?;
        Ok(NmfModel {
            w,
            h,
            t,
            seed,
            iters_run,
            objective_trace: Vec::new(),
        })
    }
}

/// Sanity accessor used by tests: max column-sum deviation from 1 over
/// non-dead topics.
pub fn max_column_sum_error(model: &NmfModel) -> f64 {
    model
        .w
        .sum_axis(Axis(0))
        .iter()
        .filter(|s| **s > 0.0)
        .map(|s| (s - 1.0).abs())
        .fold(0.0, f64::max)
}
