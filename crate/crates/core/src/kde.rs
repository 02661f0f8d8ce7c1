//! Weighted Gaussian kernel density estimation on a grid, plus the sampler
//! that picks the incidents "predominantly about" a topic for the overall
//! density maps.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dre::BBox;
use crate::ingest::ProjectedPoint;

#[derive(Debug, Error, PartialEq)]
pub enum KdeError {
    #[error("weights must be nonnegative with a positive sum")]
    BadWeights,
    #[error("bandwidth must be positive, got {0}")]
    BadBandwidth(f64),
    #[error("bounding box must have positive area")]
    DegenerateBBox,
    #[error("grid resolution must be at least 2, got {0}")]
    BadResolution(usize),
    #[error("no documents reach the topic-weight threshold {0}")]
    NoQualifyingDocs(f64),
}

/// A density raster over a bounding box; values are per-square-meter
/// densities at cell centers, row 0 southernmost.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub bbox: BBox,
    pub resolution: usize,
    pub values: Vec<f64>,
    pub bandwidth_m: f64,
}

impl DensityGrid {
    pub fn cell_center(&self, row: usize, col: usize) -> ProjectedPoint {
        let dx = self.bbox.width() / self.resolution as f64;
        let dy = self.bbox.height() / self.resolution as f64;
        ProjectedPoint {
            x: self.bbox.x_min + (col as f64 + 0.5) * dx,
            y: self.bbox.y_min + (row as f64 + 0.5) * dy,
        }
    }

    /// Cell index of the largest value (ties: first in row-major order).
    pub fn argmax(&self) -> (usize, usize) {
        let i = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        (i / self.resolution, i % self.resolution)
    }

    /// Approximate integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        let cell_area = (self.bbox.width() / self.resolution as f64)
            * (self.bbox.height() / self.resolution as f64);
        self.values.iter().sum::<f64>() * cell_area
    }
}

/// Scott's rule per axis (sigma_hat * n^(-1/6) for bivariate data), combined
/// into one isotropic bandwidth by the geometric mean of the two axes.
pub fn scott_bandwidth(points: &[(ProjectedPoint, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let std_axis = |pick: fn(&ProjectedPoint) -> f64| {
        let mean = points.iter().map(|(p, _)| pick(p)).sum::<f64>() / n;
        let var = points
            .iter()
            .map(|(p, _)| (pick(p) - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        var.sqrt()
    };
    let sx = std_axis(|p| p.x);
    let sy = std_axis(|p| p.y);
    let factor = n.powf(-1.0 / 6.0);
    let bw = (sx * factor * sy * factor).sqrt();
    (bw > 0.0).then_some(bw)
}

/// Weighted Gaussian KDE evaluated at cell centers:
/// `density(x) = sum_i w_i K_sigma(x - p_i) / sum_i w_i` with an isotropic
/// bivariate Gaussian kernel, truncated at 4 sigma (losing < 0.04% of each
/// point's mass).
pub fn weighted_kde(
    points: &[(ProjectedPoint, f64)],
    bbox: BBox,
    resolution: usize,
    bandwidth_m: f64,
) -> Result<DensityGrid, KdeError> {
    if resolution < 2 {
        return Err(KdeError::BadResolution(resolution));
    }
    if !(bbox.width() > 0.0 && bbox.height() > 0.0) {
        return Err(KdeError::DegenerateBBox);
    }
    if !(bandwidth_m > 0.0) {
        return Err(KdeError::BadBandwidth(bandwidth_m));
    }
    if points.iter().any(|&(_, w)| !(w >= 0.0)) {
        return Err(KdeError::BadWeights);
    }
    let total_weight: f64 = points.iter().map(|&(_, w)| w).sum();
    if !(total_weight > 0.0) {
        return Err(KdeError::BadWeights);
    }

    let res = resolution as f64;
    let dx = bbox.width() / res;
    let dy = bbox.height() / res;
    let sigma2 = bandwidth_m * bandwidth_m;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma2 * total_weight);
    let reach = 4.0 * bandwidth_m;

    let mut values = vec![0.0; resolution * resolution];
    for &(p, w) in points {
        if w == 0.0 {
            continue;
        }
        // Cell window within 4 sigma of the point.
        let col_lo = (((p.x - reach - bbox.x_min) / dx - 0.5).ceil().max(0.0)) as usize;
        let col_hi = (((p.x + reach - bbox.x_min) / dx - 0.5).floor()) as i64;
        let row_lo = (((p.y - reach - bbox.y_min) / dy - 0.5).ceil().max(0.0)) as usize;
        let row_hi = (((p.y + reach - bbox.y_min) / dy - 0.5).floor()) as i64;
        if col_hi < 0 || row_hi < 0 {
            continue;
        }
        let col_hi = (col_hi as usize).min(resolution - 1);
        let row_hi = (row_hi as usize).min(resolution - 1);
        for row in row_lo..=row_hi {
            let cy = bbox.y_min + (row as f64 + 0.5) * dy;
            let dy2 = (cy - p.y) * (cy - p.y);
            for col in col_lo..=col_hi {
                let cx = bbox.x_min + (col as f64 + 0.5) * dx;
                let d2 = (cx - p.x) * (cx - p.x) + dy2;
                values[row * resolution + col] += w * (-d2 / (2.0 * sigma2)).exp();
            }
        }
    }
    for v in &mut values {
        *v *= norm;
    }
    Ok(DensityGrid {
        bbox,
        resolution,
        values,
        bandwidth_m,
    })
}

/// Sample up to `n_samples` document indices uniformly without replacement
/// among documents whose weight for `topic` is at least `threshold`. When
/// fewer qualify, all of them come back and the flag reports the shortfall.
/// The returned pairs are (doc index, topic weight), index-ascending.
pub fn sample_topic_docs(
    doc_topics: &[Vec<f64>],
    topic: usize,
    threshold: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(Vec<(usize, f64)>, bool), KdeError> {
    let qualifying: Vec<(usize, f64)> = doc_topics
        .iter()
        .enumerate()
        .filter_map(|(i, w)| {
            let weight = w[topic];
            (weight >= threshold).then_some((i, weight))
        })
        .collect();
    if qualifying.is_empty() {
        return Err(KdeError::NoQualifyingDocs(threshold));
    }
    let shortfall = qualifying.len() < n_samples;
    let mut chosen = if shortfall {
        qualifying
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pool = qualifying;
        pool.shuffle(&mut rng);
        pool.truncate(n_samples);
        pool
    };
    chosen.sort_unstable_by_key(|&(i, _)| i);
    Ok((chosen, shortfall))
}
