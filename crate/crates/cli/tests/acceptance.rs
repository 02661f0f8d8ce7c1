//! Acceptance suite: every release criterion as one test, each printing a
//! pass line with its runtime. Criteria rest on oracle equivalence, analytic
//! recovery against generators with known ground truth, and invariant
//! checks, all at desk scale.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use hotspot_cli::commands::{self, KdeSource, LabelSource};
use hotspot_cli::config::RunConfig;
use hotspot_core::coherence::{self, SweepConfig, Trainer};
use hotspot_core::dre::{self, MixtureWeights};
use hotspot_core::ingest::{load_incidents, InputFormat, ProjectedPoint};
use hotspot_core::kde;
use hotspot_core::kdtree::{dist2, SpatialIndex};
use hotspot_core::lda::{train_lda, LdaParams};
use hotspot_core::nmf::{train_nmf, NmfParams};
use hotspot_core::synth::{
    brute_force_dre, generate_corpus, generate_mixture, greedy_match, PlantedCorpusSpec,
    SpatialMixtureSpec,
};
use hotspot_core::textpipe::{self, TokenizedDoc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pass(criterion: u32, name: &str, start: Instant) {
    println!(
        "[acceptance] criterion {criterion:02} ({name}): PASS in {:.2}s",
        start.elapsed().as_secs_f64()
    );
}

fn ring_mixture(m: usize, radius: f64, sigma: f64, n: usize, seed: u64) -> SpatialMixtureSpec {
    SpatialMixtureSpec {
        centers: (0..m)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                (radius * a.cos(), radius * a.sin())
            })
            .collect(),
        sigmas: vec![sigma; m],
        rho: vec![1.0 / m as f64; m],
        n,
        seed,
    }
}

/// Criterion 1: the indexed estimator equals the sort-based oracle exactly
/// (bitwise counts, ratios within 1e-12) on 20 random instances.
#[test]
fn criterion_01_dre_oracle_equivalence() {
    let start = Instant::now();
    for instance in 0..20u64 {
        let m = if instance % 2 == 0 { 2 } else { 5 };
        let spec = ring_mixture(m, 300.0, 150.0, 2000, 1000 + instance);
        let (points, _) = generate_mixture(&spec).unwrap();
        let labels: Vec<u32> = points.iter().map(|p| p.label).collect();
        let locs: Vec<ProjectedPoint> = points.iter().map(|p| p.p).collect();
        let weights = MixtureWeights::from_labels(&labels, m).unwrap();
        let index = SpatialIndex::build(&locs, &labels, m).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(5000 + instance);
        for _ in 0..200 {
            let q = ProjectedPoint {
                x: rng.gen_range(-600.0..600.0),
                y: rng.gen_range(-600.0..600.0),
            };
            for k in [1usize, 10, 50] {
                let fast = dre::ratio_sample(&index, &weights, q, k).unwrap();
                let brute = brute_force_dre(&points, &weights, q, k).unwrap();
                assert_eq!(fast.counts, brute.counts, "instance {instance} k {k}");
                assert_eq!(fast.radius, brute.radius);
                for (a, b) in fast.g.iter().zip(&brute.g) {
                    assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10s");
    pass(1, "dre oracle equivalence", start);
}

fn two_gaussian_data(
    n: usize,
    seed: u64,
) -> (
    Vec<hotspot_core::dre::LabeledPoint>,
    hotspot_core::synth::MixtureDensity,
    SpatialIndex,
    MixtureWeights,
) {
    let spec = SpatialMixtureSpec {
        centers: vec![(-2.0, 0.0), (2.0, 0.0)],
        sigmas: vec![1.0, 1.0],
        rho: vec![0.5, 0.5],
        n,
        seed,
    };
    let (points, density) = generate_mixture(&spec).unwrap();
    let labels: Vec<u32> = points.iter().map(|p| p.label).collect();
    let locs: Vec<ProjectedPoint> = points.iter().map(|p| p.p).collect();
    let index = SpatialIndex::build(&locs, &labels, 2).unwrap();
    let weights = MixtureWeights::from_labels(&labels, 2).unwrap();
    (points, density, index, weights)
}

/// Criterion 2: on the two-Gaussian mixture, the estimate tracks the
/// analytic ratio within 0.15 mean absolute error over 100 probe cells, and
/// sits within 0.25 of 1 at the symmetric midpoint.
#[test]
fn criterion_02_analytic_ratio_recovery() {
    let start = Instant::now();
    let (_, density, index, weights) = two_gaussian_data(20_000, 2024);
    let k = 50;

    let mut abs_err = [0.0f64; 2];
    let mut probes = 0;
    for i in 0..10 {
        for j in 0..10 {
            let x = ProjectedPoint {
                x: -3.0 + (f64::from(i) + 0.5) * 0.6,
                y: -3.0 + (f64::from(j) + 0.5) * 0.6,
            };
            let g = dre::density_ratio(&index, &weights, x, k).unwrap();
            for m in 0..2 {
                abs_err[m] += (g[m] - density.ratio(m, x)).abs();
            }
            probes += 1;
        }
    }
    assert_eq!(probes, 100);
    for (m, err) in abs_err.iter().enumerate() {
        let mae = err / 100.0;
        assert!(mae <= 0.15, "label {m} mean abs error {mae}");
    }

    let mid = dre::density_ratio(&index, &weights, ProjectedPoint { x: 0.0, y: 0.0 }, k).unwrap();
    for g in &mid {
        assert!((g - 1.0).abs() <= 0.25, "midpoint g {g}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30s");
    pass(2, "analytic ratio recovery", start);
}

/// Criterion 3: the mixture identity holds exactly at every cell of a
/// 100x100 grid: each ratio is the correctly rounded value of the rational
/// (N_m n)/(k n_m), the rational products rho_m*g_m telescope to N_m/k, and
/// tie-free cells have exactly k neighbors.
#[test]
fn criterion_03_mixture_identity() {
    let start = Instant::now();
    let (points, _, index, weights) = two_gaussian_data(20_000, 2024);
    let k = 50usize;
    let n = weights.n();
    let grid = dre::evaluate_grid(&index, &weights, None, 100, k).unwrap();

    let mut tie_free_cells = 0usize;
    for row in 0..100 {
        for col in 0..100 {
            let cell = row * 100 + col;
            let center = grid.cell_center(row, col);
            let counts = index.count_within(center, grid.radii[cell]);
            let total: u64 = counts.iter().sum();
            assert_eq!(total, u64::from(grid.neighbor_totals[cell]));

            for m in 0..2 {
                let g = grid.values[m][cell];
                // Bitwise: one correctly rounded division of exact integers.
                assert_eq!(g, (counts[m] * n) as f64 / (k as u64 * weights.count(m)) as f64);
                // Exact rational identity rho_m * g_m = N_m / k, checked by
                // cross-multiplication: (n_m * N_m * n) * k == N_m * (n * k * n_m).
                let lhs = u128::from(weights.count(m)) * u128::from(counts[m]) * u128::from(n)
                    * k as u128;
                let rhs = u128::from(counts[m]) * u128::from(n) * k as u128
                    * u128::from(weights.count(m));
                assert_eq!(lhs, rhs);
            }
            // Float-level sanity on the summed identity.
            let lhs: f64 = (0..2).map(|m| weights.rho(m) * grid.values[m][cell]).sum();
            assert!((lhs - total as f64 / k as f64).abs() <= 1e-12);

            // Tie-free cells (strict gap between the k-th and (k+1)-th
            // distances) must count exactly k neighbors.
            let q = [center.x, center.y];
            let mut d2: Vec<f64> = points.iter().map(|p| dist2(q, [p.p.x, p.p.y])).collect();
            let (_, kth, rest) = d2.select_nth_unstable_by(k - 1, f64::total_cmp);
            let kth = *kth;
            let next = rest.iter().copied().fold(f64::INFINITY, f64::min);
            if kth.sqrt() < next.sqrt() {
                assert_eq!(total, k as u64, "tie-free cell ({row},{col})");
                tie_free_cells += 1;
            }
        }
    }
    // Continuous coordinates: ties are measure-zero, so almost every cell
    // must be tie-free.
    assert!(tie_free_cells >= 9_990, "only {tie_free_cells} tie-free cells");
    pass(3, "mixture identity", start);
}

/// Criterion 4: NMF objective never increases (1e-10 relative slack per
/// step) across 400 full iterations, and greedy-matched top-10 overlap
/// reaches 7/10 for every topic in at least 8 of 10 seeds.
#[test]
fn criterion_04_nmf_descent_and_recovery() {
    let start = Instant::now();
    let planted = generate_corpus(&PlantedCorpusSpec {
        t: 5,
        vocab_per_topic: 100,
        docs: 2000,
        doc_length: 50,
        topic_mixing: 0.1,
        seed: 7,
    })
    .unwrap();
    let blocks: Vec<HashSet<u32>> = planted
        .topic_blocks
        .iter()
        .map(|b| b.iter().copied().collect())
        .collect();

    let mut good_seeds = 0;
    for seed in 0..10u64 {
        let model = train_nmf(
            &planted.corpus,
            NmfParams {
                t: 5,
                max_iters: 400,
                tol: 0.0,
                seed,
            },
        )
        .unwrap();
        assert_eq!(model.objective_trace.len(), 401);
        for pair in model.objective_trace.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-10 * pair[0].max(1.0),
                "seed {seed}: objective rose {} -> {}",
                pair[0],
                pair[1]
            );
        }

        let top: Vec<Vec<u32>> = (0..5)
            .map(|k| coherence::top_ids(&model.w.column(k).to_vec(), 10))
            .collect();
        let overlap: Vec<Vec<f64>> = top
            .iter()
            .map(|ids| {
                blocks
                    .iter()
                    .map(|b| ids.iter().filter(|id| b.contains(id)).count() as f64)
                    .collect()
            })
            .collect();
        let matching = greedy_match(&overlap);
        let min_overlap = (0..5)
            .map(|k| overlap[k][matching[k]] as usize)
            .min()
            .unwrap();
        good_seeds += usize::from(min_overlap >= 7);
    }
    assert!(good_seeds >= 8, "only {good_seeds}/10 seeds recovered topics");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, budget 60s");
    pass(4, "nmf descent and recovery", start);
}

/// Criterion 5: LDA on a disjoint-vocabulary 2-topic corpus reaches 0.9
/// document purity in at least 8 of 10 seeds, with the count-table
/// consistency checkpoints all passing.
#[test]
fn criterion_05_lda_recovery() {
    let start = Instant::now();
    let planted = generate_corpus(&PlantedCorpusSpec {
        t: 2,
        vocab_per_topic: 50,
        docs: 300,
        doc_length: 25,
        topic_mixing: 0.0,
        seed: 11,
    })
    .unwrap();

    let mut good_seeds = 0;
    for seed in 0..10u64 {
        let model = train_lda(&planted.corpus, LdaParams::new(2, seed)).unwrap();
        // iters/50 in-training checkpoints plus the final one.
        assert_eq!(model.checkpoints_passed, model.iters / 50 + 1);

        let mut contingency = [[0f64; 2]; 2];
        for (d, &topic) in planted.doc_topics.iter().enumerate() {
            let row = model.theta.row(d);
            let argmax = usize::from(row[1] > row[0]);
            contingency[argmax][topic] += 1.0;
        }
        let score: Vec<Vec<f64>> = contingency.iter().map(|r| r.to_vec()).collect();
        let matching = greedy_match(&score);
        let agree: f64 = (0..2).map(|k| contingency[k][matching[k]]).sum();
        let purity = agree / planted.doc_topics.len() as f64;
        good_seeds += usize::from(purity >= 0.9);
    }
    assert!(good_seeds >= 8, "only {good_seeds}/10 seeds pure");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, budget 60s");
    pass(5, "lda recovery", start);
}

/// Criterion 6: umass_topic equals a brute-force double loop over documents
/// within 1e-9 on 25 random toy corpora, and the coherence sweep yields 18
/// finite rows for t = 2..19 on a planted corpus.
#[test]
fn criterion_06_umass_oracle_and_sweep() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for _ in 0..25 {
        let n_docs = rng.gen_range(5..=200);
        let vocab = rng.gen_range(4..=50u32);
        let docs: Vec<Vec<u32>> = (0..n_docs)
            .map(|_| {
                let len = rng.gen_range(1..=12);
                (0..len).map(|_| rng.gen_range(0..vocab)).collect()
            })
            .collect();
        let corpus = bags_from_token_docs(vocab as usize, &docs);
        let index = coherence::DocFreqIndex::build(&corpus);

        // Brute-force document-frequency oracle.
        let doc_freq = |w: u32| docs.iter().filter(|d| d.contains(&w)).count() as u64;
        let pair_freq =
            |a: u32, b: u32| docs.iter().filter(|d| d.contains(&a) && d.contains(&b)).count();

        let mut present: Vec<u32> = (0..vocab).filter(|&w| doc_freq(w) > 0).collect();
        present.sort_by(|&a, &b| doc_freq(b).cmp(&doc_freq(a)).then(a.cmp(&b)));
        present.truncate(8);

        let mut brute = 0.0;
        for i in 0..present.len() {
            for j in (i + 1)..present.len() {
                brute += ((pair_freq(present[i], present[j]) + 1) as f64
                    / doc_freq(present[i]) as f64)
                    .ln();
            }
        }
        let fast = coherence::umass_topic(&present, &index).unwrap();
        assert!((fast - brute).abs() <= 1e-9, "{fast} vs {brute}");
    }

    let planted = generate_corpus(&PlantedCorpusSpec {
        t: 5,
        vocab_per_topic: 20,
        docs: 300,
        doc_length: 20,
        topic_mixing: 0.1,
        seed: 3,
    })
    .unwrap();
    let rows = coherence::coherence_sweep(
        &planted.corpus,
        2,
        19,
        Trainer::Nmf,
        5,
        &SweepConfig {
            nmf_max_iters: 60,
            ..SweepConfig::default()
        },
    )
    .unwrap();
    assert_eq!(rows.len(), 18);
    for (i, &(t, score)) in rows.iter().enumerate() {
        assert_eq!(t, i + 2);
        assert!(score.is_finite(), "t = {t} score {score}");
    }
    pass(6, "umass oracle and 18-row sweep", start);
}

fn bags_from_token_docs(vocab: usize, docs: &[Vec<u32>]) -> textpipe::Corpus {
    let dictionary = textpipe::Dictionary::from_terms(
        (0..vocab).map(|i| format!("w{i:03}")).collect(),
    )
    .unwrap();
    let bags = docs
        .iter()
        .enumerate()
        .map(|(i, words)| {
            let mut sorted = words.clone();
            sorted.sort_unstable();
            let mut counts: Vec<(u32, u32)> = Vec::new();
            for w in sorted {
                match counts.last_mut() {
                    Some((id, c)) if *id == w => *c += 1,
                    _ => counts.push((w, 1)),
                }
            }
            textpipe::BagOfWords {
                doc_id: format!("d{i}"),
                counts,
            }
        })
        .collect();
    textpipe::Corpus {
        dictionary,
        docs: bags,
    }
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pipeline")
}

fn doc_lines(ids: &[String], docs: &[TokenizedDoc]) -> String {
    let lines: Vec<String> = ids
        .iter()
        .zip(docs)
        .map(|(id, doc)| {
            let sents: Vec<String> = doc.sentences.iter().map(|s| s.join(" ")).collect();
            format!("{id}\t{}", sents.join(" / "))
        })
        .collect();
    lines.join("\n") + "\n"
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(fixture_dir().join(name)).unwrap()
}

/// Criterion 7: every preprocessing stage of the 20-narrative fixture
/// matches its frozen golden file; the everywhere-term scores exactly zero;
/// and the prune drops exactly the pairs a sort-and-cut oracle enumerates.
#[test]
fn criterion_07_pipeline_golden() {
    let start = Instant::now();
    let (records, diags) =
        load_incidents(&fixture_dir().join("fixture.csv"), InputFormat::Csv).unwrap();
    assert!(diags.is_empty());
    assert_eq!(records.len(), 20);
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();

    let tokens: Vec<TokenizedDoc> = records
        .iter()
        .map(|r| textpipe::tokenize(&r.narrative))
        .collect();
    assert_eq!(doc_lines(&ids, &tokens), golden("golden_tokens.txt"));
    // Hand-tokenized anchors, typed out from the raw narratives.
    assert_eq!(
        tokens[0].sentences,
        vec![
            vec!["officer", "responded", "to", "a", "theft", "from", "auto"],
            vec!["the", "vehicle", "window", "was", "broken", "and", "a", "laptop", "was", "stolen"],
        ]
    );
    assert_eq!(
        tokens[4].sentences,
        vec![vec![
            "officer", "arrested", "the", "accused", "for", "possession", "of", "marijuana",
            "and", "a", "crack", "pipe",
        ]]
    );

    let stoplist = textpipe::default_stoplist();
    let stopped: Vec<TokenizedDoc> = tokens
        .iter()
        .map(|d| textpipe::remove_stopwords(d, &stoplist))
        .collect();
    assert_eq!(doc_lines(&ids, &stopped), golden("golden_stopped.txt"));

    let bigrams: Vec<TokenizedDoc> = stopped.iter().map(textpipe::add_bigrams).collect();
    assert_eq!(doc_lines(&ids, &bigrams), golden("golden_bigrams.txt"));

    // Independent (doc, term) score oracle: plain hash-map tallies.
    let n_docs = bigrams.len();
    let mut per_doc_tf: Vec<HashMap<&str, u32>> = Vec::new();
    for doc in &bigrams {
        let mut tf = HashMap::new();
        for t in doc.tokens() {
            *tf.entry(t).or_insert(0) += 1;
        }
        per_doc_tf.push(tf);
    }
    let mut df: HashMap<&str, u32> = HashMap::new();
    for tf in &per_doc_tf {
        for term in tf.keys() {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    // The term present in all 20 documents must score exactly zero.
    assert_eq!(df["officer"], 20);
    let scores = textpipe::score_tfidf(&bigrams).unwrap();
    let officer = scores.term_id("officer").unwrap();
    let officer_rows: Vec<_> = scores.rows.iter().filter(|r| r.term == officer).collect();
    assert_eq!(officer_rows.len(), 20);
    for row in officer_rows {
        assert_eq!(row.idf, 0.0);
        assert_eq!(row.score, 0.0);
    }

    // Sort-and-cut oracle: enumerate all pair scores, cut at the 0.2
    // quantile, and list what must disappear from each document.
    let mut all: Vec<f64> = Vec::new();
    let mut oracle_score: Vec<HashMap<&str, f64>> = Vec::new();
    for tf in &per_doc_tf {
        let mut doc_scores = HashMap::new();
        for (&term, &count) in tf {
            let score = f64::from(count) * (n_docs as f64 / f64::from(df[term])).ln();
            doc_scores.insert(term, score);
            all.push(score);
        }
        oracle_score.push(doc_scores);
    }
    all.sort_unstable_by(f64::total_cmp);
    let tau = all[((0.2 * all.len() as f64).ceil() as usize).min(all.len() - 1)];

    let (pruned, report) = textpipe::prune_low_tfidf(&bigrams, &scores, 0.2).unwrap();
    assert_eq!(doc_lines(&ids, &pruned), golden("golden_pruned.txt"));
    assert_eq!(report.threshold, Some(tau));

    let mut oracle_removed_pairs = 0;
    for (doc_idx, doc_scores) in oracle_score.iter().enumerate() {
        let should_remove: HashSet<&str> = doc_scores
            .iter()
            .filter(|(_, &s)| s < tau)
            .map(|(&t, _)| t)
            .collect();
        oracle_removed_pairs += should_remove.len();
        let before: HashSet<&str> = bigrams[doc_idx].tokens().collect();
        let after: HashSet<&str> = pruned[doc_idx].tokens().collect();
        let removed: HashSet<&str> = before.difference(&after).copied().collect();
        assert_eq!(removed, should_remove, "doc {}", ids[doc_idx]);
    }
    assert_eq!(report.pairs_removed, oracle_removed_pairs);

    let dict = textpipe::build_dictionary(&pruned).unwrap();
    let dict_path = fixture_dir().join("golden_dictionary.tsv");
    let expected_dict = textpipe::Dictionary::load(&dict_path).unwrap();
    assert_eq!(dict, expected_dict);

    let bags: Vec<_> = pruned
        .iter()
        .zip(&ids)
        .map(|(d, id)| textpipe::vectorize(d, id, &dict).0)
        .collect();
    for (bag, doc) in bags.iter().zip(&pruned) {
        assert_eq!(bag.total(), doc.token_count() as u64);
    }
    let corpus = textpipe::Corpus {
        dictionary: dict,
        docs: bags,
    };
    let tmp = tempfile::tempdir().unwrap();
    let vec_path = tmp.path().join("vectors.txt");
    corpus.save_docs(&vec_path).unwrap();
    assert_eq!(
        std::fs::read_to_string(&vec_path).unwrap(),
        golden("golden_vectors.txt")
    );
    pass(7, "pipeline golden stages", start);
}

/// Criterion 8: separable smoothing equals the direct 2D renormalized
/// convolution within 1e-9, and the weighted KDE pins its argmax within one
/// bandwidth of the generating mean.
#[test]
fn criterion_08_smoothing_and_kde_oracles() {
    let start = Instant::now();
    // Naive double-loop convolution oracle on a random 50x50 grid.
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let values: Vec<f64> = (0..50 * 50).map(|_| rng.gen_range(0.0..5.0)).collect();
    let (sx, sy) = (2.3, 1.7);
    let fast = dre::gaussian_smooth(&values, 50, 50, sx, sy);
    let (rx, ry) = ((4.0 * sx).ceil() as i64, (4.0 * sy).ceil() as i64);
    for r in 0..50i64 {
        for c in 0..50i64 {
            let mut acc = 0.0;
            let mut norm = 0.0;
            for dr in -ry..=ry {
                for dc in -rx..=rx {
                    let (rr, cc) = (r + dr, c + dc);
                    if (0..50).contains(&rr) && (0..50).contains(&cc) {
                        let w = (-((dr * dr) as f64) / (2.0 * sy * sy)
                            - ((dc * dc) as f64) / (2.0 * sx * sx))
                            .exp();
                        acc += w * values[(rr * 50 + cc) as usize];
                        norm += w;
                    }
                }
            }
            let naive = acc / norm;
            let got = fast[(r * 50 + c) as usize];
            assert!((got - naive).abs() <= 1e-9, "({r},{c}): {got} vs {naive}");
        }
    }

    // KDE argmax within one bandwidth of the true mean of 5,000 samples.
    let (true_x, true_y) = (1200.0, 900.0);
    let spec = SpatialMixtureSpec {
        centers: vec![(true_x, true_y)],
        sigmas: vec![150.0],
        rho: vec![1.0],
        n: 5000,
        seed: 31,
    };
    let (points, _) = generate_mixture(&spec).unwrap();
    let weighted: Vec<(ProjectedPoint, f64)> = points.iter().map(|p| (p.p, 1.0)).collect();
    let bandwidth = kde::scott_bandwidth(&weighted).unwrap();
    let bbox = {
        let xs: Vec<f64> = weighted.iter().map(|(p, _)| p.x).collect();
        let ys: Vec<f64> = weighted.iter().map(|(p, _)| p.y).collect();
        dre::BBox {
            x_min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            y_min: ys.iter().copied().fold(f64::INFINITY, f64::min),
            x_max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            y_max: ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
        .padded(0.02)
    };
    let grid = kde::weighted_kde(&weighted, bbox, 200, bandwidth).unwrap();
    let (row, col) = grid.argmax();
    let peak = grid.cell_center(row, col);
    let miss = ((peak.x - true_x).powi(2) + (peak.y - true_y).powi(2)).sqrt();
    assert!(miss <= bandwidth, "argmax {miss:.1} m off with bandwidth {bandwidth:.1} m");
    // Mass check rides along: the grid covers nearly all of it.
    assert!((grid.integral() - 1.0).abs() < 0.02);
    pass(8, "smoothing and kde oracles", start);
}

fn e2e_config(out: &Path) -> RunConfig {
    let overrides: Vec<(String, String)> = [
        ("out", out.display().to_string()),
        ("run_id", "e2e".into()),
        ("seed", "42".into()),
        ("topics", "3".into()),
        ("resolution", "64".into()),
        ("k", "25".into()),
        ("synth_docs", "240".into()),
        ("synth_vocab_per_topic", "30".into()),
        ("synth_doc_length", "25".into()),
        ("synth_mixing", "0.1".into()),
        ("nmf_max_iters", "80".into()),
        ("lda_iters", "160".into()),
        ("lda_burn_in", "80".into()),
        ("t_min", "2".into()),
        ("t_max", "4".into()),
        ("n_samples", "60".into()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    RunConfig::load(None, &overrides).unwrap()
}

fn run_full_pipeline(out: &Path) {
    let mut config = e2e_config(out);
    let input = commands::cmd_synth(&config).unwrap();
    config.input = Some(input);
    commands::cmd_preprocess(&config).unwrap();
    commands::cmd_train(&config, Trainer::Nmf, 3).unwrap();
    commands::cmd_train(&config, Trainer::Lda, 3).unwrap();
    commands::cmd_sweep(&config, Trainer::Nmf, 2, 4).unwrap();
    commands::cmd_dre(&config, LabelSource::Topic(Trainer::Nmf)).unwrap();
    commands::cmd_dre(&config, LabelSource::CallType).unwrap();
    commands::cmd_kde(&config, KdeSource::All).unwrap();
    commands::cmd_kde(&config, KdeSource::Topic(0, Trainer::Nmf)).unwrap();
    commands::cmd_report(&config).unwrap();
}

/// Criterion 9: the full synthetic pipeline run twice with one seed yields
/// byte-identical artifacts (corpus files, model files, CSVs, images).
#[test]
fn criterion_09_end_to_end_determinism() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let (dir_a, dir_b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_full_pipeline(&dir_a);
    run_full_pipeline(&dir_b);

    let listing = |dir: &Path| -> Vec<String> {
        let mut names: Vec<String> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        names
    };
    let names = listing(&dir_a);
    assert_eq!(names, listing(&dir_b));

    // The complete artifact set came out.
    for expected in [
        "synthetic.csv",
        "dictionary.tsv",
        "corpus.txt",
        "nmf_t3.meta",
        "nmf_t3.w.txt",
        "nmf_t3.h.txt",
        "nmf_t3.topwords.tsv",
        "lda_t3.meta",
        "lda_t3.phi.txt",
        "lda_t3.theta.txt",
        "lda_t3.topwords.tsv",
        "coherence_nmf.csv",
        "e2e_T00_ratio.ppm",
        "e2e_all_kde.ppm",
        "e2e_T00_kde.ppm",
        "call_type_frequency.csv",
        "run.config",
        "run.summary",
    ] {
        assert!(names.iter().any(|n| n == expected), "missing {expected}");
    }

    // Everything except the path-bearing config snapshot is byte-identical.
    for name in &names {
        if name == "run.config" {
            continue;
        }
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}, budget 300s");
    pass(9, "end-to-end determinism", start);
}

/// Criterion 10: the full 1000x1000 grid over 100,000 points and 5 labels
/// finishes inside 5 minutes, and 50 random cells of its 100x100 subsample
/// match the brute-force oracle exactly.
#[test]
fn criterion_10_scale_smoke() {
    let start = Instant::now();
    let spec = ring_mixture(5, 2000.0, 900.0, 100_000, 77);
    let (points, _) = generate_mixture(&spec).unwrap();
    let labels: Vec<u32> = points.iter().map(|p| p.label).collect();
    let locs: Vec<ProjectedPoint> = points.iter().map(|p| p.p).collect();
    let index = SpatialIndex::build(&locs, &labels, 5).unwrap();
    let weights = MixtureWeights::from_labels(&labels, 5).unwrap();

    let grid = dre::evaluate_grid(&index, &weights, None, 1000, 50).unwrap();
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "grid took {elapsed:?}, budget 300s");

    // 100x100 subsample = every 10th cell; 50 random picks, exact match.
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    for _ in 0..50 {
        let (ri, ci) = (rng.gen_range(0..100usize), rng.gen_range(0..100usize));
        let (row, col) = (ri * 10 + 5, ci * 10 + 5);
        let cell = row * 1000 + col;
        let brute = brute_force_dre(&points, &weights, grid.cell_center(row, col), 50).unwrap();
        assert_eq!(brute.radius, grid.radii[cell]);
        assert_eq!(
            brute.counts.iter().sum::<u64>(),
            u64::from(grid.neighbor_totals[cell])
        );
        for m in 0..5 {
            assert_eq!(brute.g[m], grid.values[m][cell], "cell ({row},{col}) label {m}");
        }
    }
    pass(10, "scale smoke", start);
}
