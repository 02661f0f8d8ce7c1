//! kNN density-ratio estimation over labeled points.
//!
//! For a query location x, take the radius R to the k-th nearest data point,
//! count the neighbors of each label m within R (inclusive), and estimate
//! the relative density g_m(x) = (N_m(x)/k) / rho_m, where rho_m = n_m/n is
//! the label's overall share. A value of 1 means the label's local share
//! matches its citywide share; above 1 marks a relative hotspot.
//!
//! Ratios are computed as a single division of exact integer products,
//! (N_m * n) / (k * n_m), so a brute-force evaluation of the same formula
//! agrees bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::ProjectedPoint;
use crate::kdtree::{IndexError, SpatialIndex};

#[derive(Debug, Error)]
pub enum DreError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("label {0} has no points; its density ratio is undefined")]
    LabelAbsent(usize),
    #[error("mixture weights cover {weights} points but the index holds {index}")]
    WeightsMismatch { weights: u64, index: usize },
    #[error("bounding box must have positive area")]
    DegenerateBBox,
    #[error("grid resolution must be at least 2, got {0}")]
    BadResolution(usize),
    #[error("bandwidth must be positive, got {0}")]
    BadBandwidth(f64),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> DreError + '_ {
    move |source| DreError::Write {
        path: path.display().to_string(),
        source,
    }
}

/// A projected location with its categorical label (topic or call type).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub p: ProjectedPoint,
    pub label: u32,
}

/// Empirical mixture weights rho_m = n_m / n, kept as exact integer counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixtureWeights {
    counts: Vec<u64>,
    n: u64,
}

impl MixtureWeights {
    /// Tally labels against a declared label set of size `n_labels`. Every
    /// declared label must be present; a zero-count label makes its ratio
    /// undefined and is reported as an error, never as infinity.
    pub fn from_labels(labels: &[u32], n_labels: usize) -> Result<Self, DreError> {
        let mut counts = vec![0u64; n_labels];
        for &l in labels {
            counts[l as usize] += 1;
        }
        if let Some(m) = counts.iter().position(|&c| c == 0) {
            return Err(DreError::LabelAbsent(m));
        }
        Ok(MixtureWeights {
            counts,
            n: labels.len() as u64,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn n_labels(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, m: usize) -> u64 {
        self.counts[m]
    }

    pub fn rho(&self, m: usize) -> f64 {
        self.counts[m] as f64 / self.n as f64
    }
}

/// One density-ratio evaluation with its diagnostics: the neighborhood
/// radius and the raw per-label counts (their sum can exceed k on distance
/// ties, which the counts make visible).
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSample {
    pub g: Vec<f64>,
    pub counts: Vec<u64>,
    pub radius: f64,
}

/// Evaluate g_m at one point: radius to the k-th neighbor, inclusive
/// per-label counts within it, then (N_m * n) / (k * n_m).
pub fn ratio_sample(
    index: &SpatialIndex,
    weights: &MixtureWeights,
    x: ProjectedPoint,
    k: usize,
) -> Result<RatioSample, DreError> {
    if weights.n != index.len() as u64 || weights.n_labels() != index.n_labels() {
        return Err(DreError::WeightsMismatch {
            weights: weights.n,
            index: index.len(),
        });
    }
    let radius = index.knn_radius(x, k)?;
    let counts = index.count_within(x, radius);
    let g = counts
        .iter()
        .zip(&weights.counts)
        .map(|(&n_m_local, &n_m)| (n_m_local * weights.n) as f64 / (k as u64 * n_m) as f64)
        .collect();
    Ok(RatioSample { g, counts, radius })
}

/// The g_m vector at one point (see [`ratio_sample`] for diagnostics).
pub fn density_ratio(
    index: &SpatialIndex,
    weights: &MixtureWeights,
    x: ProjectedPoint,
    k: usize,
) -> Result<Vec<f64>, DreError> {
    Ok(ratio_sample(index, weights, x, k)?.g)
}

/// Axis-aligned bounding box in projected meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Grow by `frac` of each side's extent, split evenly on both ends.
    pub fn padded(&self, frac: f64) -> BBox {
        let dx = self.width() * frac / 2.0;
        let dy = self.height() * frac / 2.0;
        BBox {
            x_min: self.x_min - dx,
            y_min: self.y_min - dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    pub fn of_index(index: &SpatialIndex) -> BBox {
        let (x_min, y_min, x_max, y_max) = index.extent();
        BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }
}

/// A per-label raster of density ratios over a bounding box. Cell (row, col)
/// covers the center point returned by [`RatioGrid::cell_center`]; row 0 is
/// the southernmost row. `neighbor_totals` records the per-cell sum of label
/// counts (> k exactly when the k-th distance was tied) and `radii` the
/// per-cell neighborhood radius.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioGrid {
    pub bbox: BBox,
    pub resolution: usize,
    pub k: usize,
    pub values: Vec<Vec<f64>>,
    pub neighbor_totals: Vec<u32>,
    pub radii: Vec<f64>,
    pub smoothed: bool,
    pub bandwidth_m: Option<f64>,
}

impl RatioGrid {
    pub fn n_labels(&self) -> usize {
        self.values.len()
    }

    pub fn cell_center(&self, row: usize, col: usize) -> ProjectedPoint {
        let dx = self.bbox.width() / self.resolution as f64;
        let dy = self.bbox.height() / self.resolution as f64;
        ProjectedPoint {
            x: self.bbox.x_min + (col as f64 + 0.5) * dx,
            y: self.bbox.y_min + (row as f64 + 0.5) * dy,
        }
    }

    /// Per-label min/max, plus the max over cells whose neighborhood radius
    /// stays under `radius_cutoff` (a sparsity mask: huge radii mean the
    /// estimate leaned on far-away data).
    pub fn label_stats(&self, radius_cutoff: Option<f64>) -> Vec<LabelStats> {
        self.values
            .iter()
            .map(|vals| {
                let mut stats = LabelStats {
                    min: f64::INFINITY,
                    max: f64::NEG_INFINITY,
                    max_within_cutoff: radius_cutoff.map(|_| f64::NEG_INFINITY),
                };
                for (i, &v) in vals.iter().enumerate() {
                    stats.min = stats.min.min(v);
                    stats.max = stats.max.max(v);
                    if let (Some(cutoff), Some(masked)) =
                        (radius_cutoff, stats.max_within_cutoff.as_mut())
                    {
                        if self.radii[i] <= cutoff {
                            *masked = masked.max(v);
                        }
                    }
                }
                stats
            })
            .collect()
    }

    /// CSV export: `x,y,label,g` per cell center per label.
    pub fn write_csv(&self, labels: &[String], path: &Path) -> Result<(), DreError> {
        let err = write_err(path);
        let mut w = BufWriter::new(File::create(path).map_err(&err)?);
        writeln!(w, "x,y,label,g").map_err(&err)?;
        for (m, vals) in self.values.iter().enumerate() {
            for row in 0..self.resolution {
                for col in 0..self.resolution {
                    let c = self.cell_center(row, col);
                    writeln!(w, "{},{},{},{}", c.x, c.y, labels[m], vals[row * self.resolution + col])
                        .map_err(&err)?;
                }
            }
        }
        w.flush().map_err(&err)
    }

    /// Binary export: one row-major little-endian f64 raster per label
    /// (`<stem>_<label>.f64`) plus a JSON sidecar (`<stem>.json`).
    pub fn write_binary(&self, labels: &[String], dir: &Path, stem: &str) -> Result<(), DreError> {
        for (m, vals) in self.values.iter().enumerate() {
            let path = dir.join(format!("{stem}_{}.f64", labels[m]));
            let err = write_err(&path);
            let mut w = BufWriter::new(File::create(&path).map_err(&err)?);
            for v in vals {
                w.write_all(&v.to_le_bytes()).map_err(&err)?;
            }
            w.flush().map_err(&err)?;
        }
        let sidecar = dir.join(format!("{stem}.json"));
        let err = write_err(&sidecar);
        let meta = serde_json::json!({
            "bbox": self.bbox,
            "resolution": self.resolution,
            "k": self.k,
            "smoothed": self.smoothed,
            "bandwidth_m": self.bandwidth_m,
            "labels": labels,
            "row_order": "y-ascending",
        });
        let mut w = BufWriter::new(File::create(&sidecar).map_err(&err)?);
        serde_json::to_writer_pretty(&mut w, &meta).map_err(|e| err(e.into()))?;
        writeln!(w).map_err(&err)?;
        w.flush().map_err(&err)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabelStats {
    pub min: f64,
    pub max: f64,
    pub max_within_cutoff: Option<f64>,
}

/// Evaluate g_m at every cell center of a `resolution x resolution` grid.
/// `bbox` defaults to the data extent padded by 2%. Rows are evaluated in
/// parallel; assembly is by row index, so the result does not depend on
/// scheduling.
pub fn evaluate_grid(
    index: &SpatialIndex,
    weights: &MixtureWeights,
    bbox: Option<BBox>,
    resolution: usize,
    k: usize,
) -> Result<RatioGrid, DreError> {
    if resolution < 2 {
        return Err(DreError::BadResolution(resolution));
    }
    if weights.n != index.len() as u64 || weights.n_labels() != index.n_labels() {
        return Err(DreError::WeightsMismatch {
            weights: weights.n,
            index: index.len(),
        });
    }
    if k == 0 || k > index.len() {
        return Err(IndexError::KOutOfRange {
            k,
            n: index.len(),
        }
        .into());
    }
    let bbox = bbox.unwrap_or_else(|| BBox::of_index(index).padded(0.02));
    if !(bbox.width() > 0.0 && bbox.height() > 0.0) {
        return Err(DreError::DegenerateBBox);
    }

    let n_labels = index.n_labels();
    let dx = bbox.width() / resolution as f64;
    let dy = bbox.height() / resolution as f64;

    struct RowOut {
        g: Vec<Vec<f64>>,
        totals: Vec<u32>,
        radii: Vec<f64>,
    }

    let rows: Vec<RowOut> = (0..resolution)
        .into_par_iter()
        .map(|row| {
            let mut out = RowOut {
                g: vec![Vec::with_capacity(resolution); n_labels],
                totals: Vec::with_capacity(resolution),
                radii: Vec::with_capacity(resolution),
            };
            for col in 0..resolution {
                let x = ProjectedPoint {
                    x: bbox.x_min + (col as f64 + 0.5) * dx,
                    y: bbox.y_min + (row as f64 + 0.5) * dy,
                };
                let sample = ratio_sample(index, weights, x, k).expect("checked above");
                for (m, g) in sample.g.iter().enumerate() {
                    out.g[m].push(*g);
                }
                out.totals
                    .push(sample.counts.iter().sum::<u64>().try_into().unwrap_or(u32::MAX));
                out.radii.push(sample.radius);
            }
            out
        })
        .collect();

    let mut values = vec![Vec::with_capacity(resolution * resolution); n_labels];
    let mut neighbor_totals = Vec::with_capacity(resolution * resolution);
    let mut radii = Vec::with_capacity(resolution * resolution);
    for row in rows {
        for (m, g) in row.g.into_iter().enumerate() {
            values[m].extend(g);
        }
        neighbor_totals.extend(row.totals);
        radii.extend(row.radii);
    }

    Ok(RatioGrid {
        bbox,
        resolution,
        k,
        values,
        neighbor_totals,
        radii,
        smoothed: false,
        bandwidth_m: None,
    })
}

/// Separable discrete Gaussian smoothing with the kernel truncated at 4
/// standard deviations and renormalized over in-bounds cells at the edges.
/// With rectangular grids the in-bounds region is a product of intervals, so
/// the two renormalized 1D passes equal the renormalized 2D convolution.
pub fn gaussian_smooth(
    values: &[f64],
    width: usize,
    height: usize,
    sigma_x_cells: f64,
    sigma_y_cells: f64,
) -> Vec<f64> {
    let pass = |src: &[f64], len: usize, stride: usize, lines: usize, line_stride: usize, sigma: f64| -> Vec<f64> {
        let mut dst = vec![0.0; src.len()];
        let radius = (4.0 * sigma).ceil() as i64;
        let kernel: Vec<f64> = (-radius..=radius)
            .map(|j| (-((j * j) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        for line in 0..lines {
            let base = line * line_stride;
            for i in 0..len {
                let mut acc = 0.0;
                let mut norm = 0.0;
                for (ki, &kw) in kernel.iter().enumerate() {
                    let j = i as i64 + ki as i64 - radius;
                    if (0..len as i64).contains(&j) {
                        acc += kw * src[base + j as usize * stride];
                        norm += kw;
                    }
                }
                dst[base + i * stride] = acc / norm;
            }
        }
        dst
    };
    // Horizontal pass (along rows), then vertical (along columns).
    let mid = pass(values, width, 1, height, width, sigma_x_cells.max(1e-9));
    pass(&mid, height, width, width, 1, sigma_y_cells.max(1e-9))
}

/// Smooth every label raster of a grid with a Gaussian of `bandwidth_m`
/// meters. Radii and neighbor totals are carried through unchanged.
pub fn smooth_grid(grid: &RatioGrid, bandwidth_m: f64) -> Result<RatioGrid, DreError> {
    if !(bandwidth_m > 0.0) {
        return Err(DreError::BadBandwidth(bandwidth_m));
    }
    let cell_w = grid.bbox.width() / grid.resolution as f64;
    let cell_h = grid.bbox.height() / grid.resolution as f64;
    let values = grid
        .values
        .iter()
        .map(|v| {
            gaussian_smooth(
                v,
                grid.resolution,
                grid.resolution,
                bandwidth_m / cell_w,
                bandwidth_m / cell_h,
            )
        })
        .collect();
    Ok(RatioGrid {
        values,
        smoothed: true,
        bandwidth_m: Some(bandwidth_m),
        ..grid.clone()
    })
}
