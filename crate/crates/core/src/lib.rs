//! Incident-narrative analysis toolkit: text preprocessing into bag-of-words,
//! NMF and LDA topic models, UMass coherence scoring, and kNN-based spatial
//! density-ratio estimation with smoothed heatmap rasters.
//!
//! The pieces compose into one chain: [`ingest`] loads incident records,
//! [`textpipe`] turns narratives into a sparse corpus, [`nmf`] / [`lda`]
//! learn topics, [`coherence`] scores them, and [`dre`] / [`kde`] map where
//! each label (topic or call type) concentrates relative to the overall
//! incident density. [`render`] writes the rasters as images and [`synth`]
//! provides seeded generators with known ground truth for validation.

pub mod coherence;
pub mod dre;
pub mod ingest;
pub mod kde;
pub mod kdtree;
pub mod lda;
pub mod matrix_io;
pub mod nmf;
pub mod render;
pub mod synth;
pub mod textpipe;

pub use ingest::{IncidentRecord, ProjectedPoint, Projection};
pub use textpipe::{BagOfWords, Corpus, Dictionary, TokenizedDoc};
