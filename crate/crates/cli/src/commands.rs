//! The pipeline subcommands. Each one reads the resolved config, writes its
//! artifacts under the output directory, refreshes the `run.config`
//! snapshot, and merges its headline numbers into `run.summary`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde_json::json;

use hotspot_core::coherence::{self, SweepConfig, Trainer};
use hotspot_core::dre::{self, MixtureWeights};
use hotspot_core::ingest::{self, IncidentRecord, ProjectedPoint, Projection};
use hotspot_core::kde::{self, DensityGrid};
use hotspot_core::kdtree::SpatialIndex;
use hotspot_core::lda::{self, LdaModel, LdaParams};
use hotspot_core::nmf::{self, NmfModel, NmfParams};
use hotspot_core::render::{self, Colormap, Scale};
use hotspot_core::synth;
use hotspot_core::textpipe::{self, Corpus};

use crate::config::RunConfig;
use crate::{summary, CliError};

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn classify_text(e: textpipe::TextError) -> CliError {
    match e {
        textpipe::TextError::BadQuantile(_) => CliError::Config(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn classify_nmf(e: nmf::NmfError) -> CliError {
    match e {
        nmf::NmfError::TopicCountOutOfRange { .. } => CliError::Config(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn classify_lda(e: lda::LdaError) -> CliError {
    match e {
        lda::LdaError::BadTopicCount
        | lda::LdaError::BadIterationSplit { .. }
        | lda::LdaError::BadHyperparameter(_) => CliError::Config(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn classify_dre(e: dre::DreError) -> CliError {
    match e {
        dre::DreError::BadResolution(_) | dre::DreError::BadBandwidth(_) => {
            CliError::Config(e.to_string())
        }
        other => CliError::Data(other.to_string()),
    }
}

fn prepare_out(config: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&config.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", config.out.display())))?;
    std::fs::write(config.out.join("run.config"), config.snapshot())
        .map_err(|e| CliError::Data(format!("cannot write run.config: {e}")))?;
    Ok(())
}

/// Load the configured input, writing quarantined-row diagnostics next to
/// the other artifacts.
fn load_input(config: &RunConfig) -> Result<Vec<IncidentRecord>, CliError> {
    let input = config
        .input
        .as_ref()
        .ok_or_else(|| CliError::Config("no input file configured".into()))?;
    let (records, diagnostics) = ingest::load_incidents(input, config.format).map_err(data)?;
    if !diagnostics.is_empty() {
        ingest::write_diagnostics(&diagnostics, &config.out.join("quarantine.jsonl"))
            .map_err(data)?;
    }
    Ok(records)
}

fn load_corpus(config: &RunConfig) -> Result<Corpus, CliError> {
    Corpus::load(&config.dictionary_path(), &config.corpus_path()).map_err(|e| {
        CliError::Data(format!(
            "cannot load corpus (run `preprocess` first?): {e}"
        ))
    })
}

fn stoplist(config: &RunConfig) -> Result<std::collections::HashSet<String>, CliError> {
    match &config.stoplist {
        Some(path) => textpipe::load_stoplist(path).map_err(classify_text),
        None => Ok(textpipe::default_stoplist()),
    }
}

fn check_finite(values: impl IntoIterator<Item = f64>, what: &str) -> Result<(), CliError> {
    for v in values {
        if !v.is_finite() {
            return Err(CliError::Numeric(format!("non-finite value in {what}")));
        }
    }
    Ok(())
}

/// Ingest the raw incidents and persist the preprocessed corpus:
/// `dictionary.tsv`, `corpus.txt`, quarantine diagnostics, and a per-stage
/// stats report in the summary.
pub fn cmd_preprocess(config: &RunConfig) -> Result<(), CliError> {
    prepare_out(config)?;
    let records = load_input(config)?;
    let docs: Vec<(String, String)> = records
        .iter()
        .map(|r| (r.id.clone(), r.narrative.clone()))
        .collect();
    let stops = stoplist(config)?;
    let (corpus, stats) =
        textpipe::run_pipeline(&docs, &stops, config.tfidf_quantile).map_err(classify_text)?;
    corpus.dictionary.save(&config.dictionary_path()).map_err(data)?;
    corpus.save_docs(&config.corpus_path()).map_err(data)?;
    summary::merge(
        &config.out,
        "preprocess",
        serde_json::to_value(&stats).map_err(data)?,
    )?;
    println!(
        "preprocess: {} docs, vocab {}, tokens {} -> {} after prune",
        stats.docs, stats.vocab_size, stats.tokens_after_bigrams, stats.tokens_after_prune
    );
    Ok(())
}

enum Model {
    Nmf(NmfModel),
    Lda(LdaModel),
}

fn train_model(
    config: &RunConfig,
    corpus: &Corpus,
    method: Trainer,
    t: usize,
) -> Result<Model, CliError> {
    match method {
        Trainer::Nmf => {
            let model = nmf::train_nmf(
                corpus,
                NmfParams {
                    t,
                    max_iters: config.nmf_max_iters,
                    tol: config.nmf_tol,
                    seed: config.seed,
                },
            )
            .map_err(classify_nmf)?;
            check_finite(model.objective_trace.iter().copied(), "nmf objective")?;
            Ok(Model::Nmf(model))
        }
        Trainer::Lda => {
            let model = lda::train_lda(
                corpus,
                LdaParams {
                    t,
                    alpha: config.lda_alpha.unwrap_or_else(|| lda::default_alpha(t)),
                    eta_w: config.lda_eta,
                    iters: config.lda_iters,
                    burn_in: config.lda_burn_in,
                    seed: config.seed,
                },
            )
            .map_err(classify_lda)?;
            Ok(Model::Lda(model))
        }
    }
}

/// Train one topic model, persist it, and write the top-words report
/// (top five words with weights, per topic).
pub fn cmd_train(config: &RunConfig, method: Trainer, t: usize) -> Result<(), CliError> {
    prepare_out(config)?;
    let corpus = load_corpus(config)?;
    let model = train_model(config, &corpus, method, t)?;
    let stem = config.model_stem(&method.to_string(), t);

    let report_path = config.out.join(format!("{stem}.topwords.tsv"));
    let mut report = BufWriter::new(File::create(&report_path).map_err(data)?);
    writeln!(report, "topic\tword\tweight").map_err(data)?;

    let mut headline = serde_json::Map::new();
    match &model {
        Model::Nmf(m) => {
            m.save(&config.out, &stem).map_err(data)?;
            for k in 0..t {
                for (word, weight) in m.top_words(k, 5, &corpus.dictionary).map_err(data)? {
                    writeln!(report, "{k}\t{word}\t{weight:.6}").map_err(data)?;
                }
            }
            headline.insert("objective".into(), json!(m.reconstruction_error()));
            headline.insert("iters_run".into(), json!(m.iters_run));
        }
        Model::Lda(m) => {
            m.save(&config.out, &stem).map_err(data)?;
            for k in 0..t {
                let row: Vec<f64> = m.phi.row(k).to_vec();
                for (word, weight) in corpus.dictionary.top_terms(&row, 5) {
                    writeln!(report, "{k}\t{word}\t{weight:.6}").map_err(data)?;
                }
            }
            let ll = m.log_likelihood(&corpus).map_err(data)?;
            check_finite([ll], "lda log likelihood")?;
            headline.insert("log_likelihood".into(), json!(ll));
            headline.insert("checkpoints_passed".into(), json!(m.checkpoints_passed));
        }
    }
    report.flush().map_err(data)?;
    headline.insert("t".into(), json!(t));
    headline.insert("seed".into(), json!(config.seed));
    headline.insert("model_stem".into(), json!(stem.clone()));
    summary::merge(&config.out, &format!("train_{stem}"), headline.into())?;
    println!("train: {stem} written with top-words report");
    Ok(())
}

/// Coherence sweep over t = t_min..=t_max for one trainer; writes the
/// Table-3-shaped CSV `t,method,coherence`.
pub fn cmd_sweep(
    config: &RunConfig,
    method: Trainer,
    t_min: usize,
    t_max: usize,
) -> Result<(), CliError> {
    prepare_out(config)?;
    let corpus = load_corpus(config)?;
    let sweep_config = SweepConfig {
        n_top: config.n_top,
        nmf_max_iters: config.nmf_max_iters,
        nmf_tol: config.nmf_tol,
        lda_iters: config.lda_iters,
        lda_burn_in: config.lda_burn_in,
        lda_eta_w: config.lda_eta,
        lda_alpha: config.lda_alpha,
    };
    let rows = coherence::coherence_sweep(&corpus, t_min, t_max, method, config.seed, &sweep_config)
        .map_err(|e| match e {
            coherence::CoherenceError::BadRange { .. } => CliError::Config(e.to_string()),
            coherence::CoherenceError::Nmf(inner) => classify_nmf(inner),
            coherence::CoherenceError::Lda(inner) => classify_lda(inner),
            other => CliError::Data(other.to_string()),
        })?;
    check_finite(rows.iter().map(|&(_, s)| s), "coherence sweep")?;

    let csv_path = config.out.join(format!("coherence_{method}.csv"));
    let mut w = BufWriter::new(File::create(&csv_path).map_err(data)?);
    writeln!(w, "t,method,coherence").map_err(data)?;
    for &(t, score) in &rows {
        writeln!(w, "{t},{method},{score}").map_err(data)?;
    }
    w.flush().map_err(data)?;

    summary::merge(
        &config.out,
        &format!("sweep_{method}"),
        json!({
            "t_min": t_min,
            "t_max": t_max,
            "rows": rows.iter().map(|&(t, s)| json!({"t": t, "coherence": s})).collect::<Vec<_>>(),
        }),
    )?;
    println!("sweep: {} rows -> {}", rows.len(), csv_path.display());
    Ok(())
}

/// Where the point labels for the spatial analysis come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    CallType,
    /// Label each document by its argmax topic when that weight reaches the
    /// configured threshold; below-threshold documents are excluded and
    /// counted.
    Topic(Trainer),
}

struct LabeledData {
    points: Vec<ProjectedPoint>,
    labels: Vec<u32>,
    label_names: Vec<String>,
    excluded_below_threshold: usize,
    skipped_empty_labels: Vec<String>,
    projection: Projection,
}

fn label_points(
    config: &RunConfig,
    records: &[IncidentRecord],
    source: LabelSource,
) -> Result<LabeledData, CliError> {
    let projection = Projection::from_records(records)
        .ok_or_else(|| CliError::Data("no records to project".into()))?;
    // Raw label name per usable record.
    let mut named: Vec<(ProjectedPoint, String)> = Vec::new();
    let mut excluded = 0usize;
    match source {
        LabelSource::CallType => {
            for r in records {
                named.push((projection.project_record(r), r.call_type.clone()));
            }
        }
        LabelSource::Topic(method) => {
            let corpus = load_corpus(config)?;
            let stem = config.model_stem(&method.to_string(), config.topics);
            let doc_topics: Vec<Vec<f64>> = match method {
                Trainer::Nmf => NmfModel::load(&config.out, &stem)
                    .map_err(data)?
                    .all_doc_topics(),
                Trainer::Lda => LdaModel::load(&config.out, &stem)
                    .map_err(data)?
                    .all_doc_topics(),
            };
            if doc_topics.len() != corpus.n_docs() {
                return Err(CliError::Data(format!(
                    "model covers {} docs but corpus has {}",
                    doc_topics.len(),
                    corpus.n_docs()
                )));
            }
            let by_id: HashMap<&str, &IncidentRecord> =
                records.iter().map(|r| (r.id.as_str(), r)).collect();
            for (bag, weights) in corpus.docs.iter().zip(&doc_topics) {
                let Some(record) = by_id.get(bag.doc_id.as_str()) else {
                    continue;
                };
                let (argmax, &best) = weights
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                    .expect("t >= 1");
                if best >= config.threshold {
                    named.push((projection.project_record(record), synth::topic_label(argmax)));
                } else {
                    excluded += 1;
                }
            }
        }
    }

    // Compact to the labels that actually have members; report the rest.
    let mut tally: std::collections::BTreeMap<String, usize> = std::collections::BTreeMap::new();
    for (_, name) in &named {
        *tally.entry(name.clone()).or_insert(0) += 1;
    }
    let mut skipped_empty_labels = Vec::new();
    if let LabelSource::Topic(_) = source {
        for k in 0..config.topics {
            let name = synth::topic_label(k);
            if !tally.contains_key(&name) {
                skipped_empty_labels.push(name);
            }
        }
    }
    let label_names: Vec<String> = tally.keys().cloned().collect();
    let index_of: HashMap<&str, u32> = label_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i as u32))
        .collect();
    let mut points = Vec::with_capacity(named.len());
    let mut labels = Vec::with_capacity(named.len());
    for (p, name) in named {
        points.push(p);
        labels.push(index_of[name.as_str()]);
    }
    Ok(LabeledData {
        points,
        labels,
        label_names,
        excluded_below_threshold: excluded,
        skipped_empty_labels,
        projection,
    })
}

fn source_tag(source: LabelSource) -> String {
    match source {
        LabelSource::CallType => "call_type".into(),
        LabelSource::Topic(method) => format!("topic_{method}"),
    }
}

/// Per-label density-ratio grids (raw and smoothed), rendered heatmaps, and
/// the grid max/min summary with a sparsity-masked max alongside.
pub fn cmd_dre(config: &RunConfig, source: LabelSource) -> Result<(), CliError> {
    prepare_out(config)?;
    let records = load_input(config)?;
    let labeled = label_points(config, &records, source)?;
    let n_labels = labeled.label_names.len();
    if n_labels == 0 {
        return Err(CliError::Data("no labeled points for the DRE".into()));
    }
    let index = SpatialIndex::build(&labeled.points, &labeled.labels, n_labels).map_err(data)?;
    let weights = MixtureWeights::from_labels(&labeled.labels, n_labels).map_err(data)?;
    let grid =
        dre::evaluate_grid(&index, &weights, None, config.resolution, config.k).map_err(classify_dre)?;
    let bandwidth_m =
        config.smooth_bandwidth_cells * grid.bbox.width() / config.resolution as f64;
    let smoothed = dre::smooth_grid(&grid, bandwidth_m).map_err(classify_dre)?;
    for raster in smoothed.values.iter().chain(grid.values.iter()) {
        check_finite(raster.iter().copied(), "ratio grid")?;
    }

    let tag = source_tag(source);
    let raw_stem = format!("{}_dre_{tag}_raw", config.run_id);
    let smooth_stem = format!("{}_dre_{tag}_smooth", config.run_id);
    grid.write_csv(&labeled.label_names, &config.out.join(format!("{raw_stem}.csv")))
        .map_err(data)?;
    grid.write_binary(&labeled.label_names, &config.out, &raw_stem)
        .map_err(data)?;
    smoothed
        .write_csv(&labeled.label_names, &config.out.join(format!("{smooth_stem}.csv")))
        .map_err(data)?;
    smoothed
        .write_binary(&labeled.label_names, &config.out, &smooth_stem)
        .map_err(data)?;

    for (m, name) in labeled.label_names.iter().enumerate() {
        let img = render::render_heatmap(
            &smoothed.values[m],
            config.resolution,
            config.resolution,
            Colormap::Diverging,
            Scale::Log1p,
            None,
        )
        .map_err(data)?;
        render::write_image(&img, &config.out.join(format!("{}_{name}_ratio.ppm", config.run_id)))
            .map_err(data)?;
    }

    let diag = grid.bbox.width().hypot(grid.bbox.height());
    let cutoff = config.radius_cutoff_frac * diag;
    let stats = grid.label_stats(Some(cutoff));
    let tie_cells = grid
        .neighbor_totals
        .iter()
        .filter(|&&total| total as usize > config.k)
        .count();
    summary::merge(
        &config.out,
        &format!("dre_{tag}"),
        json!({
            "labels": labeled.label_names.iter().enumerate().map(|(m, name)| json!({
                "label": name,
                "members": weights.count(m),
                "rho": weights.rho(m),
                "g_min": stats[m].min,
                "g_max": stats[m].max,
                "g_max_within_radius_cutoff": stats[m].max_within_cutoff,
            })).collect::<Vec<_>>(),
            "k": config.k,
            "resolution": config.resolution,
            "n_points": labeled.points.len(),
            "excluded_below_threshold": labeled.excluded_below_threshold,
            "skipped_empty_labels": labeled.skipped_empty_labels,
            "tie_cells": tie_cells,
            "radius_cutoff_m": cutoff,
            "smooth_bandwidth_m": bandwidth_m,
            "bbox": grid.bbox,
            "projection": labeled.projection,
        }),
    )?;
    println!(
        "dre: {} labels over {} points -> {} grids + images",
        n_labels,
        labeled.points.len(),
        2 * n_labels
    );
    Ok(())
}

/// What the KDE maps: all incidents, one call type, or one topic's
/// predominantly-about documents sampled per the configured threshold.
#[derive(Debug, Clone, PartialEq)]
pub enum KdeSource {
    All,
    CallType(String),
    Topic(usize, Trainer),
}

fn write_density(
    grid: &DensityGrid,
    out: &std::path::Path,
    stem: &str,
) -> Result<(), CliError> {
    let raster = out.join(format!("{stem}.f64"));
    let mut w = BufWriter::new(File::create(&raster).map_err(data)?);
    for v in &grid.values {
        w.write_all(&v.to_le_bytes()).map_err(data)?;
    }
    w.flush().map_err(data)?;
    let sidecar = serde_json::to_string_pretty(&json!({
        "bbox": grid.bbox,
        "resolution": grid.resolution,
        "bandwidth_m": grid.bandwidth_m,
        "row_order": "y-ascending",
    }))
    .map_err(data)?;
    std::fs::write(out.join(format!("{stem}.json")), sidecar + "\n").map_err(data)?;
    Ok(())
}

/// Weighted Gaussian KDE map for the chosen incident subset.
pub fn cmd_kde(config: &RunConfig, source: KdeSource) -> Result<(), CliError> {
    prepare_out(config)?;
    let records = load_input(config)?;
    let projection = Projection::from_records(&records)
        .ok_or_else(|| CliError::Data("no records to project".into()))?;
    let all_points: Vec<ProjectedPoint> =
        records.iter().map(|r| projection.project_record(r)).collect();
    let bbox = {
        let mut e = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &all_points {
            e = (e.0.min(p.x), e.1.min(p.y), e.2.max(p.x), e.3.max(p.y));
        }
        dre::BBox {
            x_min: e.0,
            y_min: e.1,
            x_max: e.2,
            y_max: e.3,
        }
        .padded(0.02)
    };

    let mut shortfall = false;
    let (label, weighted_points): (String, Vec<(ProjectedPoint, f64)>) = match &source {
        KdeSource::All => (
            "all".into(),
            all_points.iter().map(|&p| (p, 1.0)).collect(),
        ),
        KdeSource::CallType(code) => {
            let pts: Vec<(ProjectedPoint, f64)> = records
                .iter()
                .zip(&all_points)
                .filter(|(r, _)| &r.call_type == code)
                .map(|(_, &p)| (p, 1.0))
                .collect();
            if pts.is_empty() {
                return Err(CliError::Data(format!("no incidents with call type {code:?}")));
            }
            (code.clone(), pts)
        }
        KdeSource::Topic(topic, method) => {
            let corpus = load_corpus(config)?;
            let stem = config.model_stem(&method.to_string(), config.topics);
            let doc_topics: Vec<Vec<f64>> = match method {
                Trainer::Nmf => NmfModel::load(&config.out, &stem)
                    .map_err(data)?
                    .all_doc_topics(),
                Trainer::Lda => LdaModel::load(&config.out, &stem)
                    .map_err(data)?
                    .all_doc_topics(),
            };
            if *topic >= config.topics {
                return Err(CliError::Config(format!(
                    "topic {topic} out of range for t = {}",
                    config.topics
                )));
            }
            let (sampled, short) = kde::sample_topic_docs(
                &doc_topics,
                *topic,
                config.threshold,
                config.n_samples,
                config.seed,
            )
            .map_err(data)?;
            shortfall = short;
            let by_id: HashMap<&str, ProjectedPoint> = records
                .iter()
                .zip(&all_points)
                .map(|(r, &p)| (r.id.as_str(), p))
                .collect();
            let pts: Vec<(ProjectedPoint, f64)> = sampled
                .iter()
                .filter_map(|&(doc, weight)| {
                    by_id
                        .get(corpus.docs[doc].doc_id.as_str())
                        .map(|&p| (p, weight))
                })
                .collect();
            if pts.is_empty() {
                return Err(CliError::Data(
                    "sampled documents have no matching incident locations".into(),
                ));
            }
            (synth::topic_label(*topic), pts)
        }
    };

    let bandwidth = match config.kde_bandwidth_m {
        Some(b) => b,
        None => kde::scott_bandwidth(&weighted_points).ok_or_else(|| {
            CliError::Data("need at least two spread-out points for the bandwidth rule".into())
        })?,
    };
    let grid = kde::weighted_kde(&weighted_points, bbox, config.resolution, bandwidth)
        .map_err(|e| match e {
            kde::KdeError::BadBandwidth(_) | kde::KdeError::BadResolution(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        })?;
    check_finite(grid.values.iter().copied(), "kde grid")?;

    let stem = format!("{}_kde_{label}", config.run_id);
    write_density(&grid, &config.out, &stem)?;
    let img = render::render_heatmap(
        &grid.values,
        config.resolution,
        config.resolution,
        Colormap::Grayscale,
        Scale::Linear,
        None,
    )
    .map_err(data)?;
    render::write_image(&img, &config.out.join(format!("{}_{label}_kde.ppm", config.run_id)))
        .map_err(data)?;

    let (row, col) = grid.argmax();
    let peak = grid.cell_center(row, col);
    summary::merge(
        &config.out,
        &format!("kde_{label}"),
        json!({
            "points": weighted_points.len(),
            "bandwidth_m": bandwidth,
            "integral": grid.integral(),
            "argmax_xy_m": [peak.x, peak.y],
            "shortfall": shortfall,
            "bbox": grid.bbox,
        }),
    )?;
    println!(
        "kde: {label} over {} points, bandwidth {bandwidth:.1} m",
        weighted_points.len()
    );
    Ok(())
}

/// Generate a synthetic incident set (planted topics + Gaussian spatial
/// components on a ring) in the ingest CSV schema, so the full pipeline
/// runs on it unchanged.
pub fn cmd_synth(config: &RunConfig) -> Result<PathBuf, CliError> {
    prepare_out(config)?;
    let t = config.topics;
    let spec = synth::PlantedCorpusSpec {
        t,
        vocab_per_topic: config.synth_vocab_per_topic,
        docs: config.synth_docs,
        doc_length: config.synth_doc_length,
        topic_mixing: config.synth_mixing,
        seed: config.seed,
    };
    let centers: Vec<(f64, f64)> = (0..t)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / t as f64;
            (
                config.synth_radius_m * angle.cos(),
                config.synth_radius_m * angle.sin(),
            )
        })
        .collect();
    let sigmas = vec![config.synth_sigma_m; t];
    let projection = Projection::new(config.synth_base_lat, config.synth_base_lon, config.synth_base_lat);
    let (records, planted) =
        synth::generate_incidents(&spec, &centers, &sigmas, &projection).map_err(data)?;
    let path = config.out.join("synthetic.csv");
    ingest::save_incidents(&records, &path, ingest::InputFormat::Csv).map_err(data)?;

    let mut per_topic = vec![0usize; t];
    for &topic in &planted.doc_topics {
        per_topic[topic] += 1;
    }
    summary::merge(
        &config.out,
        "synth",
        json!({
            "docs": records.len(),
            "dictionary_size": planted.corpus.vocab_size(),
            "per_topic_docs": per_topic,
            "centers_m": centers,
            "sigma_m": config.synth_sigma_m,
            "output": "synthetic.csv",
        }),
    )?;
    println!("synth: {} incidents -> {}", records.len(), path.display());
    Ok(path)
}

/// The call-type frequency table (most common first) plus quarantine stats.
pub fn cmd_report(config: &RunConfig) -> Result<(), CliError> {
    prepare_out(config)?;
    let records = load_input(config)?;
    let freq = ingest::label_frequency(&records);
    let path = config.out.join("call_type_frequency.csv");
    let mut w = BufWriter::new(File::create(&path).map_err(data)?);
    writeln!(w, "call_type,count").map_err(data)?;
    for (code, count) in &freq {
        writeln!(w, "{code},{count}").map_err(data)?;
    }
    w.flush().map_err(data)?;

    summary::merge(
        &config.out,
        "report",
        json!({
            "records": records.len(),
            "distinct_call_types": freq.len(),
            "top": freq.iter().take(10).map(|(c, n)| json!({"call_type": c, "count": n})).collect::<Vec<_>>(),
        }),
    )?;
    println!("report: {} call types -> {}", freq.len(), path.display());
    Ok(())
}
