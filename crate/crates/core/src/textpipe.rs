//! Narrative preprocessing: tokenize, drop stopwords, append 2-grams, prune
//! by a corpus-wide TF-IDF quantile, then build the dictionary and sparse
//! bag-of-words corpus.
//!
//! Every stage is a pure function of its input plus the stoplist, so the
//! whole pipeline is deterministic: same bytes in, bit-identical corpus out.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

/// The 179-word English stoplist bundled as a data file.
const BUNDLED_STOPLIST: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Error)]
pub enum TextError {
    #[error("tf-idf needs at least 2 documents, got {0}")]
    TooFewDocs(usize),
    #[error("quantile must lie in [0, 1), got {0}")]
    BadQuantile(f64),
    #[error("empty vocabulary: no terms survived preprocessing")]
    EmptyVocabulary,
    #[error("stoplist is empty")]
    EmptyStoplist,
    #[error("{path}:{line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> TextError {
    TextError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A narrative after tokenization: a list of sentences, each a list of
/// lowercase `[a-z0-9]` tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizedDoc {
    pub sentences: Vec<Vec<String>>,
}

impl TokenizedDoc {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(String::as_str)
    }
}

/// Lowercase a raw token and strip every character outside `[a-z0-9]`.
fn normalize_token(raw: &str) -> String {
    raw.chars()
        .flat_map(char::to_lowercase)
        .filter(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
        .collect()
}

/// Split a narrative into sentences on `. ! ?`, then into whitespace-delimited
/// tokens, lowercased and stripped of everything outside `[a-z0-9]`. Empty
/// tokens and empty sentences are dropped.
pub fn tokenize(text: &str) -> TokenizedDoc {
    let sentences = text
        .split(['.', '!', '?'])
        .map(|sentence| {
            sentence
                .split_whitespace()
                .map(normalize_token)
                .filter(|t| !t.is_empty())
                .collect::<Vec<_>>()
        })
        .filter(|s| !s.is_empty())
        .collect();
    TokenizedDoc { sentences }
}

/// Drop every token found in the stoplist, preserving order. Sentences left
/// empty are removed.
pub fn remove_stopwords(doc: &TokenizedDoc, stoplist: &HashSet<String>) -> TokenizedDoc {
    let sentences = doc
        .sentences
        .iter()
        .map(|s| {
            s.iter()
                .filter(|t| !stoplist.contains(*t))
                .cloned()
                .collect::<Vec<_>>()
        })
        .filter(|s| !s.is_empty())
        .collect();
    TokenizedDoc { sentences }
}

/// Append the 2-gram `w1_w2` for every adjacent token pair in each sentence,
/// after the unigrams. A single-token sentence gains nothing.
pub fn add_bigrams(doc: &TokenizedDoc) -> TokenizedDoc {
    let sentences = doc
        .sentences
        .iter()
        .map(|s| {
            let mut out = s.clone();
            out.extend(s.windows(2).map(|w| format!("{}_{}", w[0], w[1])));
            out
        })
        .collect();
    TokenizedDoc { sentences }
}

/// One (document, distinct term) TF-IDF row. `term` indexes
/// [`ScoreTable::terms`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub doc: u32,
    pub term: u32,
    pub tf: u32,
    pub idf: f64,
    pub score: f64,
}

/// TF-IDF scores for a document set, with terms interned in lexicographic
/// order (the same order the final dictionary would use).
#[derive(Debug, Clone)]
pub struct ScoreTable {
    pub terms: Vec<String>,
    pub rows: Vec<ScoreRow>,
    term_index: HashMap<String, u32>,
}

impl ScoreTable {
    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.term_index.get(term).copied()
    }
}

/// Score every (document, distinct term) pair: `score = tf * idf` with
/// `idf = ln(N / df)`, `N` the document count and `df` the number of
/// documents containing the term. A term present in all documents gets
/// idf = 0 exactly.
pub fn score_tfidf(docs: &[TokenizedDoc]) -> Result<ScoreTable, TextError> {
    if docs.len() < 2 {
        return Err(TextError::TooFewDocs(docs.len()));
    }
    let n_docs = docs.len();

    // Per-document term counts, then a document-frequency tally. The merge
    // is additive so the result is independent of document order.
    let per_doc: Vec<HashMap<&str, u32>> = docs
        .iter()
        .map(|d| {
            let mut counts = HashMap::new();
            for t in d.tokens() {
                *counts.entry(t).or_insert(0) += 1;
            }
            counts
        })
        .collect();

    let mut df: HashMap<&str, u32> = HashMap::new();
    for counts in &per_doc {
        for term in counts.keys() {
            *df.entry(term).or_insert(0) += 1;
        }
    }

    let mut terms: Vec<String> = df.keys().map(|t| t.to_string()).collect();
    terms.sort_unstable();
    let term_index: HashMap<String, u32> = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();

    let mut rows = Vec::new();
    for (doc_idx, counts) in per_doc.iter().enumerate() {
        let mut doc_rows: Vec<ScoreRow> = counts
            .iter()
            .map(|(term, &tf)| {
                let term_id = term_index[*term];
                let idf = (n_docs as f64 / f64::from(df[term])).ln();
                ScoreRow {
                    doc: doc_idx as u32,
                    term: term_id,
                    tf,
                    idf,
                    score: f64::from(tf) * idf,
                }
            })
            .collect();
        doc_rows.sort_unstable_by_key(|r| r.term);
        rows.extend(doc_rows);
    }

    Ok(ScoreTable {
        terms,
        rows,
        term_index,
    })
}

/// Outcome of a TF-IDF prune pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneReport {
    /// The score threshold actually applied (None when there were no pairs).
    pub threshold: Option<f64>,
    pub pairs_total: usize,
    pub pairs_removed: usize,
    pub occurrences_removed: usize,
}

/// Remove low TF-IDF occurrences. The threshold is one corpus-wide quantile
/// of all (doc, term) scores; an occurrence is dropped only when its own
/// document's score for that term is strictly below the threshold, so ties
/// at the threshold survive (and a degenerate all-equal corpus keeps
/// everything).
pub fn prune_low_tfidf(
    docs: &[TokenizedDoc],
    scores: &ScoreTable,
    quantile: f64,
) -> Result<(Vec<TokenizedDoc>, PruneReport), TextError> {
    if !(0.0..1.0).contains(&quantile) {
        return Err(TextError::BadQuantile(quantile));
    }
    if scores.rows.is_empty() {
        return Ok((
            docs.to_vec(),
            PruneReport {
                threshold: None,
                pairs_total: 0,
                pairs_removed: 0,
                occurrences_removed: 0,
            },
        ));
    }

    let mut sorted: Vec<f64> = scores.rows.iter().map(|r| r.score).collect();
    sorted.sort_unstable_by(f64::total_cmp);
    let cut = ((quantile * sorted.len() as f64).ceil() as usize).min(sorted.len() - 1);
    let threshold = sorted[cut];

    // Terms to drop, per document.
    let mut removed: Vec<HashSet<u32>> = vec![HashSet::new(); docs.len()];
    let mut pairs_removed = 0;
    for row in &scores.rows {
        if row.score < threshold {
            removed[row.doc as usize].insert(row.term);
            pairs_removed += 1;
        }
    }

    let mut occurrences_removed = 0;
    let pruned = docs
        .iter()
        .enumerate()
        .map(|(doc_idx, doc)| {
            let drop = &removed[doc_idx];
            let sentences = doc
                .sentences
                .iter()
                .map(|s| {
                    s.iter()
                        .filter(|t| {
                            let gone = scores.term_id(t).is_some_and(|id| drop.contains(&id));
                            if gone {
                                occurrences_removed += 1;
                            }
                            !gone
                        })
                        .cloned()
                        .collect::<Vec<_>>()
                })
                .filter(|s| !s.is_empty())
                .collect();
            TokenizedDoc { sentences }
        })
        .collect();

    Ok((
        pruned,
        PruneReport {
            threshold: Some(threshold),
            pairs_total: scores.rows.len(),
            pairs_removed,
            occurrences_removed,
        },
    ))
}

/// The corpus vocabulary: distinct terms with contiguous ids assigned in
/// lexicographic term order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dictionary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
}

impl Dictionary {
    pub fn from_terms(terms: Vec<String>) -> Result<Self, TextError> {
        if terms.is_empty() {
            return Err(TextError::EmptyVocabulary);
        }
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Dictionary { terms, index })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: u32) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// The `n` heaviest entries of a weight vector over this vocabulary,
    /// sorted by weight descending with ties broken by term (ascending).
    pub fn top_terms(&self, weights: &[f64], n: usize) -> Vec<(String, f64)> {
        let mut order: Vec<u32> = (0..self.terms.len() as u32).collect();
        order.sort_unstable_by(|&a, &b| {
            weights[b as usize]
                .total_cmp(&weights[a as usize])
                .then_with(|| self.terms[a as usize].cmp(&self.terms[b as usize]))
        });
        order
            .into_iter()
            .take(n)
            .map(|id| (self.terms[id as usize].clone(), weights[id as usize]))
            .collect()
    }

    /// Write as `term<TAB>id` lines, id-ascending (equivalently, term-sorted).
    pub fn save(&self, path: &Path) -> Result<(), TextError> {
        let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
        for (id, term) in self.terms.iter().enumerate() {
            writeln!(w, "{term}\t{id}").map_err(|e| io_err(path, e))?;
        }
        w.flush().map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
        let mut terms = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| io_err(path, e))?;
            let fmt = |msg: String| TextError::Format {
                path: path.display().to_string(),
                line: lineno + 1,
                msg,
            };
            let (term, id) = line
                .split_once('\t')
                .ok_or_else(|| fmt("expected term<TAB>id".into()))?;
            let id: usize = id.parse().map_err(|_| fmt(format!("bad id {id:?}")))?;
            if id != terms.len() {
                return Err(fmt(format!("ids must be contiguous, expected {}", terms.len())));
            }
            terms.push(term.to_string());
        }
        Dictionary::from_terms(terms)
    }
}

/// Build the dictionary over every distinct term in the (pruned) documents.
pub fn build_dictionary(docs: &[TokenizedDoc]) -> Result<Dictionary, TextError> {
    let vocab: BTreeSet<&str> = docs.iter().flat_map(TokenizedDoc::tokens).collect();
    Dictionary::from_terms(vocab.into_iter().map(str::to_string).collect())
}

/// A document as a sparse count vector: `(word id, count)` pairs with ids
/// ascending and counts >= 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BagOfWords {
    pub doc_id: String,
    pub counts: Vec<(u32, u32)>,
}

impl BagOfWords {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&(_, c)| u64::from(c)).sum()
    }
}

/// Count term multiplicities against a dictionary. Terms missing from the
/// dictionary are skipped; the second value reports how many occurrences
/// were skipped.
pub fn vectorize(doc: &TokenizedDoc, doc_id: &str, dict: &Dictionary) -> (BagOfWords, usize) {
    let mut counts: HashMap<u32, u32> = HashMap::new();
    let mut skipped = 0;
    for token in doc.tokens() {
        match dict.id(token) {
            Some(id) => *counts.entry(id).or_insert(0) += 1,
            None => skipped += 1,
        }
    }
    let mut counts: Vec<(u32, u32)> = counts.into_iter().collect();
    counts.sort_unstable_by_key(|&(id, _)| id);
    (
        BagOfWords {
            doc_id: doc_id.to_string(),
            counts,
        },
        skipped,
    )
}

/// A processed document set: dictionary plus one bag-of-words per document.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub dictionary: Dictionary,
    pub docs: Vec<BagOfWords>,
}

impl Corpus {
    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.dictionary.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.docs.iter().map(BagOfWords::total).sum()
    }

    /// One `doc_id id:count id:count ...` line per document, ids ascending.
    pub fn save_docs(&self, path: &Path) -> Result<(), TextError> {
        let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
        for doc in &self.docs {
            write!(w, "{}", doc.doc_id).map_err(|e| io_err(path, e))?;
            for &(id, count) in &doc.counts {
                write!(w, " {id}:{count}").map_err(|e| io_err(path, e))?;
            }
            writeln!(w).map_err(|e| io_err(path, e))?;
        }
        w.flush().map_err(|e| io_err(path, e))
    }

    pub fn load(dict_path: &Path, docs_path: &Path) -> Result<Self, TextError> {
        let dictionary = Dictionary::load(dict_path)?;
        let reader = BufReader::new(File::open(docs_path).map_err(|e| io_err(docs_path, e))?);
        let mut docs = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| io_err(docs_path, e))?;
            let fmt = |msg: String| TextError::Format {
                path: docs_path.display().to_string(),
                line: lineno + 1,
                msg,
            };
            let mut parts = line.split(' ');
            let doc_id = parts
                .next()
                .filter(|s| !s.is_empty())
                .ok_or_else(|| fmt("missing doc id".into()))?
                .to_string();
            let mut counts = Vec::new();
            for pair in parts {
                let (id, count) = pair
                    .split_once(':')
                    .ok_or_else(|| fmt(format!("expected id:count, got {pair:?}")))?;
                let id: u32 = id.parse().map_err(|_| fmt(format!("bad word id {id:?}")))?;
                let count: u32 = count
                    .parse()
                    .map_err(|_| fmt(format!("bad count {count:?}")))?;
                if id as usize >= dictionary.len() {
                    return Err(fmt(format!("word id {id} outside dictionary")));
                }
                if count == 0 {
                    return Err(fmt("zero count".into()));
                }
                if let Some(&(prev, _)) = counts.last() {
                    if id <= prev {
                        return Err(fmt("word ids must be strictly ascending".into()));
                    }
                }
                counts.push((id, count));
            }
            docs.push(BagOfWords { doc_id, counts });
        }
        Ok(Corpus { dictionary, docs })
    }
}

/// Normalize stoplist entries with the same character rule as the tokenizer,
/// so entries like "you're" match the token "youre".
fn normalize_stoplist<I: IntoIterator<Item = S>, S: AsRef<str>>(
    entries: I,
) -> HashSet<String> {
    entries
        .into_iter()
        .map(|e| normalize_token(e.as_ref()))
        .filter(|e| !e.is_empty())
        .collect()
}

/// The bundled 179-word English stoplist, tokenizer-normalized.
pub fn default_stoplist() -> HashSet<String> {
    normalize_stoplist(BUNDLED_STOPLIST.lines())
}

/// Load a one-term-per-line stoplist file, tokenizer-normalized.
pub fn load_stoplist(path: &Path) -> Result<HashSet<String>, TextError> {
    let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut entries = Vec::new();
    for line in reader.lines() {
        entries.push(line.map_err(|e| io_err(path, e))?);
    }
    let set = normalize_stoplist(entries);
    if set.is_empty() {
        return Err(TextError::EmptyStoplist);
    }
    Ok(set)
}

/// Per-stage token tallies for the preprocessing report.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PipelineStats {
    pub docs: usize,
    pub tokens_tokenized: usize,
    pub tokens_after_stopwords: usize,
    pub tokens_after_bigrams: usize,
    pub tokens_after_prune: usize,
    pub tfidf_pairs: usize,
    pub tfidf_pairs_removed: usize,
    pub tfidf_threshold: Option<f64>,
    pub vocab_size: usize,
    pub oov_skipped: usize,
}

/// Run the full pipeline over `(doc id, narrative)` pairs.
pub fn run_pipeline(
    docs: &[(String, String)],
    stoplist: &HashSet<String>,
    quantile: f64,
) -> Result<(Corpus, PipelineStats), TextError> {
    if stoplist.is_empty() {
        return Err(TextError::EmptyStoplist);
    }
    let tokenized: Vec<TokenizedDoc> = docs.iter().map(|(_, text)| tokenize(text)).collect();
    let tokens_tokenized = tokenized.iter().map(TokenizedDoc::token_count).sum();

    let stopped: Vec<TokenizedDoc> = tokenized
        .iter()
        .map(|d| remove_stopwords(d, stoplist))
        .collect();
    let tokens_after_stopwords = stopped.iter().map(TokenizedDoc::token_count).sum();

    let with_bigrams: Vec<TokenizedDoc> = stopped.iter().map(add_bigrams).collect();
    let tokens_after_bigrams = with_bigrams.iter().map(TokenizedDoc::token_count).sum();

    let scores = score_tfidf(&with_bigrams)?;
    let (pruned, report) = prune_low_tfidf(&with_bigrams, &scores, quantile)?;
    let tokens_after_prune = pruned.iter().map(TokenizedDoc::token_count).sum();

    let dictionary = build_dictionary(&pruned)?;
    let mut oov_skipped = 0;
    let bags = pruned
        .iter()
        .zip(docs)
        .map(|(doc, (id, _))| {
            let (bag, skipped) = vectorize(doc, id, &dictionary);
            oov_skipped += skipped;
            bag
        })
        .collect();

    let vocab_size = dictionary.len();
    Ok((
        Corpus {
            dictionary,
            docs: bags,
        },
        PipelineStats {
            docs: docs.len(),
            tokens_tokenized,
            tokens_after_stopwords,
            tokens_after_bigrams,
            tokens_after_prune,
            tfidf_pairs: report.pairs_total,
            tfidf_pairs_removed: report.pairs_removed,
            tfidf_threshold: report.threshold,
            vocab_size,
            oov_skipped,
        },
    ))
}
