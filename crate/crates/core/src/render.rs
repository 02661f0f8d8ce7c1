//! Raster rendering of density and ratio grids to binary PPM (P6) files.
//!
//! Grids arrive row 0 = southernmost; images are written north-up, so rows
//! are flipped. Ratio maps default to a diverging colormap whose neutral
//! color sits at value 1 (local share equals citywide share).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("cannot render an empty grid")]
    EmptyGrid,
    #[error("clip range must have lo < hi, got ({0}, {1})")]
    BadClip(f64, f64),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Colormap {
    Grayscale,
    /// Cold below the neutral value 1, warm above it.
    Diverging,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    /// ln(1 + v), for nonnegative grids whose hotspots would otherwise
    /// saturate the map.
    Log1p,
}

/// Row-major RGB image, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

const COLD: [f64; 3] = [49.0, 54.0, 149.0];
const NEUTRAL: [f64; 3] = [255.0, 255.0, 255.0];
const WARM: [f64; 3] = [165.0, 0.0, 38.0];

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [u8; 3] {
    let mut out = [0u8; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = (a[i] + (b[i] - a[i]) * t).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Map grid values to colors after optional clipping and scaling. `values`
/// is row-major with row 0 southernmost and `height` rows of `width` cells.
pub fn render_heatmap(
    values: &[f64],
    width: usize,
    height: usize,
    colormap: Colormap,
    scale: Scale,
    clip: Option<(f64, f64)>,
) -> Result<RasterImage, RenderError> {
    if values.is_empty() || width == 0 || height == 0 || values.len() != width * height {
        return Err(RenderError::EmptyGrid);
    }
    if let Some((lo, hi)) = clip {
        if lo >= hi {
            return Err(RenderError::BadClip(lo, hi));
        }
    }
    let (lo, hi) = clip.unwrap_or_else(|| {
        values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    });
    let apply_scale = |v: f64| match scale {
        Scale::Linear => v,
        Scale::Log1p => v.max(0.0).ln_1p(),
    };
    let (lo_s, hi_s) = (apply_scale(lo), apply_scale(hi));
    let center = apply_scale(1.0);

    let mut pixels = Vec::with_capacity(width * height * 3);
    for row in (0..height).rev() {
        for col in 0..width {
            let v = values[row * width + col].clamp(lo, hi);
            let s = apply_scale(v);
            let rgb = match colormap {
                Colormap::Grayscale => {
                    let t = if hi_s > lo_s {
                        ((s - lo_s) / (hi_s - lo_s)).clamp(0.0, 1.0)
                    } else {
                        0.5
                    };
                    let g = (t * 255.0).round() as u8;
                    [g, g, g]
                }
                Colormap::Diverging => {
                    if s <= center {
                        let t = if center > lo_s {
                            ((s - lo_s) / (center - lo_s)).clamp(0.0, 1.0)
                        } else {
                            1.0
                        };
                        lerp(COLD, NEUTRAL, t)
                    } else {
                        let t = if hi_s > center {
                            ((s - center) / (hi_s - center)).clamp(0.0, 1.0)
                        } else {
                            0.0
                        };
                        lerp(NEUTRAL, WARM, t)
                    }
                }
            };
            pixels.extend_from_slice(&rgb);
        }
    }
    Ok(RasterImage {
        width,
        height,
        pixels,
    })
}

/// Binary portable pixmap: header `P6\n<w> <h>\n255\n` then raw RGB bytes.
pub fn write_image(img: &RasterImage, path: &Path) -> Result<(), RenderError> {
    let err = |source| RenderError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(err)?);
    write!(w, "P6\n{} {}\n255\n", img.width, img.height).map_err(err)?;
    w.write_all(&img.pixels).map_err(err)?;
    w.flush().map_err(err)
}

/// The exact bytes [`write_image`] produces.
pub fn image_bytes(img: &RasterImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}
