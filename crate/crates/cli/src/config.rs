//! Run configuration: a flat `key = value` text file with command-line
//! overrides. Defaults follow the published pipeline settings (tf-idf
//! quantile 0.2, k = 50, 1000x1000 grid, topic-weight threshold 0.5, 4,000
//! KDE samples). Every run writes the resolved configuration back out as a
//! snapshot.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hotspot_core::ingest::InputFormat;

use crate::CliError;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub format: InputFormat,
    pub out: PathBuf,
    pub run_id: String,
    pub stoplist: Option<PathBuf>,
    pub tfidf_quantile: f64,
    pub topics: usize,
    pub seed: u64,
    pub n_top: usize,

    pub nmf_max_iters: usize,
    pub nmf_tol: f64,
    pub lda_alpha: Option<f64>,
    pub lda_eta: f64,
    pub lda_iters: usize,
    pub lda_burn_in: usize,

    pub k: usize,
    pub resolution: usize,
    pub smooth_bandwidth_cells: f64,
    pub kde_bandwidth_m: Option<f64>,
    pub threshold: f64,
    pub n_samples: usize,
    /// Sparsity mask for grid maxima: cells whose kNN radius exceeds this
    /// fraction of the bbox diagonal are excluded from the masked max.
    pub radius_cutoff_frac: f64,

    pub t_min: usize,
    pub t_max: usize,

    pub synth_docs: usize,
    pub synth_vocab_per_topic: usize,
    pub synth_doc_length: usize,
    pub synth_mixing: f64,
    pub synth_sigma_m: f64,
    pub synth_radius_m: f64,
    pub synth_base_lat: f64,
    pub synth_base_lon: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            format: InputFormat::Csv,
            out: PathBuf::from("out"),
            run_id: "run".into(),
            stoplist: None,
            tfidf_quantile: 0.2,
            topics: 5,
            seed: 42,
            n_top: 10,
            nmf_max_iters: hotspot_core::nmf::DEFAULT_MAX_ITERS,
            nmf_tol: hotspot_core::nmf::DEFAULT_TOL,
            lda_alpha: None,
            lda_eta: hotspot_core::lda::DEFAULT_ETA_W,
            lda_iters: hotspot_core::lda::DEFAULT_ITERS,
            lda_burn_in: hotspot_core::lda::DEFAULT_BURN_IN,
            k: 50,
            resolution: 1000,
            smooth_bandwidth_cells: 8.0,
            kde_bandwidth_m: None,
            threshold: 0.5,
            n_samples: 4000,
            radius_cutoff_frac: 0.1,
            t_min: 2,
            t_max: 19,
            synth_docs: 2000,
            synth_vocab_per_topic: 100,
            synth_doc_length: 50,
            synth_mixing: 0.1,
            synth_sigma_m: 800.0,
            synth_radius_m: 3000.0,
            synth_base_lat: 33.7,
            synth_base_lon: -84.5,
        }
    }
}

fn bad(key: &str, value: &str) -> CliError {
    CliError::Config(format!("bad value for {key}: {value:?}"))
}

impl RunConfig {
    /// Parse a config file, then apply `key=value` overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut config = RunConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::Config(format!(
                        "{}:{}: expected key = value",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                config.set(key.trim(), value.trim())?;
            }
        }
        for (key, value) in overrides {
            config.set(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
            value.parse().map_err(|_| bad(key, value))
        }
        fn parse_opt<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>, CliError> {
            if value.is_empty() {
                Ok(None)
            } else {
                parse(key, value).map(Some)
            }
        }
        match key {
            "input" => self.input = parse_opt(key, value)?,
            "format" => self.format = value.parse().map_err(|e: String| CliError::Config(e))?,
            "out" => self.out = parse(key, value)?,
            "run_id" => self.run_id = value.to_string(),
            "stoplist" => self.stoplist = parse_opt(key, value)?,
            "tfidf_quantile" => self.tfidf_quantile = parse(key, value)?,
            "topics" => self.topics = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "n_top" => self.n_top = parse(key, value)?,
            "nmf_max_iters" => self.nmf_max_iters = parse(key, value)?,
            "nmf_tol" => self.nmf_tol = parse(key, value)?,
            "lda_alpha" => self.lda_alpha = parse_opt(key, value)?,
            "lda_eta" => self.lda_eta = parse(key, value)?,
            "lda_iters" => self.lda_iters = parse(key, value)?,
            "lda_burn_in" => self.lda_burn_in = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "resolution" => self.resolution = parse(key, value)?,
            "smooth_bandwidth_cells" => self.smooth_bandwidth_cells = parse(key, value)?,
            "kde_bandwidth_m" => self.kde_bandwidth_m = parse_opt(key, value)?,
            "threshold" => self.threshold = parse(key, value)?,
            "n_samples" => self.n_samples = parse(key, value)?,
            "radius_cutoff_frac" => self.radius_cutoff_frac = parse(key, value)?,
            "t_min" => self.t_min = parse(key, value)?,
            "t_max" => self.t_max = parse(key, value)?,
            "synth_docs" => self.synth_docs = parse(key, value)?,
            "synth_vocab_per_topic" => self.synth_vocab_per_topic = parse(key, value)?,
            "synth_doc_length" => self.synth_doc_length = parse(key, value)?,
            "synth_mixing" => self.synth_mixing = parse(key, value)?,
            "synth_sigma_m" => self.synth_sigma_m = parse(key, value)?,
            "synth_radius_m" => self.synth_radius_m = parse(key, value)?,
            "synth_base_lat" => self.synth_base_lat = parse(key, value)?,
            "synth_base_lon" => self.synth_base_lon = parse(key, value)?,
            other => return Err(CliError::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(0.0..1.0).contains(&self.tfidf_quantile) {
            return Err(CliError::Config(format!(
                "tfidf_quantile must lie in [0, 1), got {}",
                self.tfidf_quantile
            )));
        }
        if !(0.0 < self.threshold && self.threshold <= 1.0) {
            return Err(CliError::Config(format!(
                "threshold must lie in (0, 1], got {}",
                self.threshold
            )));
        }
        if self.topics == 0 || self.k == 0 || self.resolution < 2 {
            return Err(CliError::Config(
                "topics and k must be >= 1, resolution >= 2".into(),
            ));
        }
        Ok(())
    }

    /// The documents-already-preprocessed artifacts live here.
    pub fn dictionary_path(&self) -> PathBuf {
        self.out.join("dictionary.tsv")
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.out.join("corpus.txt")
    }

    pub fn model_stem(&self, method: &str, t: usize) -> String {
        format!("{method}_t{t}")
    }

    /// Resolved key = value snapshot, keys sorted; written as `run.config`.
    pub fn snapshot(&self) -> String {
        let opt_path = |p: &Option<PathBuf>| {
            p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
        };
        let opt_f64 = |v: &Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let mut pairs: Vec<(&str, String)> = vec![
            ("format", self.format.to_string()),
            ("input", opt_path(&self.input)),
            ("k", self.k.to_string()),
            ("kde_bandwidth_m", opt_f64(&self.kde_bandwidth_m)),
            ("lda_alpha", opt_f64(&self.lda_alpha)),
            ("lda_burn_in", self.lda_burn_in.to_string()),
            ("lda_eta", self.lda_eta.to_string()),
            ("lda_iters", self.lda_iters.to_string()),
            ("n_samples", self.n_samples.to_string()),
            ("n_top", self.n_top.to_string()),
            ("nmf_max_iters", self.nmf_max_iters.to_string()),
            ("nmf_tol", self.nmf_tol.to_string()),
            ("out", self.out.display().to_string()),
            ("radius_cutoff_frac", self.radius_cutoff_frac.to_string()),
            ("resolution", self.resolution.to_string()),
            ("run_id", self.run_id.clone()),
            ("seed", self.seed.to_string()),
            ("smooth_bandwidth_cells", self.smooth_bandwidth_cells.to_string()),
            ("stoplist", opt_path(&self.stoplist)),
            ("synth_base_lat", self.synth_base_lat.to_string()),
            ("synth_base_lon", self.synth_base_lon.to_string()),
            ("synth_doc_length", self.synth_doc_length.to_string()),
            ("synth_docs", self.synth_docs.to_string()),
            ("synth_mixing", self.synth_mixing.to_string()),
            ("synth_radius_m", self.synth_radius_m.to_string()),
            ("synth_sigma_m", self.synth_sigma_m.to_string()),
            ("synth_vocab_per_topic", self.synth_vocab_per_topic.to_string()),
            ("t_max", self.t_max.to_string()),
            ("t_min", self.t_min.to_string()),
            ("threshold", self.threshold.to_string()),
            ("tfidf_quantile", self.tfidf_quantile.to_string()),
            ("topics", self.topics.to_string()),
        ];
        pairs.sort_by_key(|(k, _)| *k);
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn defaults_match_published_settings() {
        let c = RunConfig::default();
        assert_eq!(c.tfidf_quantile, 0.2);
        assert_eq!(c.k, 50);
        assert_eq!(c.resolution, 1000);
        assert_eq!(c.threshold, 0.5);
        assert_eq!(c.n_samples, 4000);
        assert_eq!((c.t_min, c.t_max), (2, 19));
    }

    #[test]
    fn file_then_overrides() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# comment\ntopics = 7\nk = 25  # trailing comment\n\nseed = 1").unwrap();
        let config = RunConfig::load(
            Some(f.path()),
            &[("k".to_string(), "10".to_string())],
        )
        .unwrap();
        assert_eq!(config.topics, 7);
        assert_eq!(config.k, 10);
        assert_eq!(config.seed, 1);
    }

    #[test]
    fn unknown_key_and_bad_values_are_config_errors() {
        let mut config = RunConfig::default();
        assert!(matches!(
            config.set("nope", "1"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            config.set("topics", "x"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            RunConfig::load(None, &[("tfidf_quantile".into(), "1.0".into())]),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn snapshot_is_sorted_and_complete() {
        let snap = RunConfig::default().snapshot();
        let keys: Vec<&str> = snap
            .lines()
            .map(|l| l.split(" = ").next().unwrap())
            .collect();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        assert_eq!(keys, sorted);
        assert!(snap.contains("tfidf_quantile = 0.2"));
        assert!(snap.contains("n_samples = 4000"));
        // Round-trips through the parser.
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(snap.as_bytes()).unwrap();
        let reloaded = RunConfig::load(Some(f.path()), &[]).unwrap();
        assert_eq!(reloaded.snapshot(), snap);
    }
}
