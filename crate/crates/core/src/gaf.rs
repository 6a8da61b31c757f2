//! Gramian Angular (summation) Field encoding.
//!
//! A series `X` is min-max rescaled into `[0, 1]`, mapped to polar angles
//! `θ = arccos(x̃)` and expanded to the matrix `G[i][j] = cos(θi + θj)`.
//! Since every `θ` lies in `[0, π/2]`, the diagonal `G[i][i] = 2x̃i² - 1`
//! determines the rescaled series uniquely.

use std::fs;
use std::path::Path;

use crate::data::{truncate_window, TimeSeriesEvent};
use crate::error::{Error, Result};

/// Rescaled values may overshoot `[0, 1]` by this much before being an error.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_IMAGE_SIZE: usize = 64;

/// Square GAF matrix plus the data it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct GafImage {
    size: usize,
    values: Vec<f64>,
    rescaled: Vec<f64>,
    pub source_event_id: String,
    /// `min(X)` and `max(X)` used by the rescale. A matrix built straight
    /// from angles reports the identity rescale `(0, 1)`.
    pub rescale_min: f64,
    pub rescale_max: f64,
}

impl GafImage {
    /// Rebuild an image from a stored matrix. The rescaled series is
    /// recovered from the diagonal.
    pub fn from_values(size: usize, values: Vec<f64>) -> Result<Self> {
        if size == 0 || values.len() != size * size {
            return Err(Error::shape(format!(
                "{} values cannot form a {size}x{size} image",
                values.len()
            )));
        }
        for i in 0..size {
            for j in 0..size {
                let v = values[i * size + j];
                if !(v.abs() <= 1.0) {
                    return Err(Error::InvalidArgument(format!("entry ({i}, {j}) = {v} outside [-1, 1]")));
                }
                if v != values[j * size + i] {
                    return Err(Error::InvalidArgument(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        let rescaled = (0..size)
            .map(|i| ((values[i * size + i] + 1.0) / 2.0).sqrt())
            .collect();
        Ok(Self {
            size,
            values,
            rescaled,
            source_event_id: String::new(),
            rescale_min: 0.0,
            rescale_max: 1.0,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Row-major `size x size` entries.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.size..(row + 1) * self.size]
    }

    /// The rescaled series `x̃` the matrix was built from.
    pub fn rescaled(&self) -> &[f64] {
        &self.rescaled
    }

    /// `x̃i = sqrt((G[i][i] + 1) / 2)`.
    pub fn reconstruct_rescaled(&self) -> Vec<f64> {
        (0..self.size)
            .map(|i| ((self.get(i, i) + 1.0) / 2.0).sqrt())
            .collect()
    }
}

fn check_finite(series: &[f64]) -> Result<()> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("empty series".into()));
    }
    match series.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Min-max rescale into `[0, 1]`, also returning `(min, max)`. A constant
/// series maps to 0.5 everywhere.
pub fn rescale_with_bounds(series: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    check_finite(series)?;
    let (min, max) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = max - min;
    let out = if range == 0.0 {
        vec![0.5; series.len()]
    } else {
        series.iter().map(|&v| (v - min) / range).collect()
    };
    Ok((out, min, max))
}

pub fn rescale_min_max(series: &[f64]) -> Result<Vec<f64>> {
    rescale_with_bounds(series).map(|(v, _, _)| v)
}

/// `θi = arccos(x̃i)`, clamping overshoot up to [`CLAMP_TOLERANCE`].
pub fn polar_angles(rescaled: &[f64]) -> Result<Vec<f64>> {
    rescaled
        .iter()
        .enumerate()
        .map(|(index, &v)| {
            if !v.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if v < -CLAMP_TOLERANCE || v > 1.0 + CLAMP_TOLERANCE {
                return Err(Error::OutOfUnitRange { index, value: v });
            }
            Ok(v.clamp(0.0, 1.0).acos())
        })
        .collect()
}

/// `G[i][j] = cos(θi + θj)`. Each unordered pair is evaluated once and
/// mirrored, so the result is exactly symmetric.
pub fn gaf_matrix(angles: &[f64]) -> GafImage {
    let n = angles.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let g = (angles[i] + angles[j]).cos();
            values[i * n + j] = g;
            values[j * n + i] = g;
        }
    }
    GafImage {
        size: n,
        values,
        rescaled: angles.iter().map(|a| a.cos()).collect(),
        source_event_id: String::new(),
        rescale_min: 0.0,
        rescale_max: 1.0,
    }
}

/// Piecewise aggregate approximation: bin `k` covers indices
/// `[ceil(k n / S), ceil((k + 1) n / S))`, so bin sizes differ by at most one.
pub fn paa_reduce(series: &[f64], target_len: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if target_len == 0 || target_len > n {
        return Err(Error::InvalidArgument(format!(
            "cannot reduce {n} samples to {target_len}"
        )));
    }
    let bound = |k: usize| (k * n).div_ceil(target_len);
    Ok((0..target_len)
        .map(|k| {
            let bin = &series[bound(k)..bound(k + 1)];
            bin.iter().sum::<f64>() / bin.len() as f64
        })
        .collect())
}

/// Series straight to image: PAA to `image_size`, rescale, angles, matrix.
pub fn encode_series(series: &[f64], image_size: usize) -> Result<GafImage> {
    let reduced = paa_reduce(series, image_size)?;
    let (rescaled, min, max) = rescale_with_bounds(&reduced)?;
    let angles = polar_angles(&rescaled)?;
    let mut image = gaf_matrix(&angles);
    image.rescaled = rescaled;
    image.rescale_min = min;
    image.rescale_max = max;
    Ok(image)
}

/// Truncate to the first `window_s` seconds and encode as an
/// `image_size x image_size` field.
pub fn encode_event(event: &TimeSeriesEvent, window_s: f64, image_size: usize) -> Result<GafImage> {
    let window = truncate_window(event, window_s)?;
    let mut image = encode_series(window.samples(), image_size)?;
    image.source_event_id = event.event_id().to_string();
    Ok(image)
}

/// Grey level for a GAF entry: `round_half_up((g + 1) / 2 * 255)`.
pub fn pixel_value(g: f64) -> u8 {
    ((g + 1.0) / 2.0 * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Binary PGM (`P5`, maxval 255), row-major.
pub fn pgm_bytes(image: &GafImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", image.size, image.size);
    let mut out = Vec::with_capacity(header.len() + image.values.len());
    out.extend_from_slice(header.as_bytes());
    out.extend(image.values.iter().map(|&g| pixel_value(g)));
    out
}

pub fn export_pgm(image: &GafImage, path: &Path) -> Result<()> {
    fs::write(path, pgm_bytes(image)).map_err(|e| Error::io(path, e))
}

/// Lossless matrix file: `u64` LE size `S`, then `S*S` `f64` LE row-major.
pub fn raw_bytes(image: &GafImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * image.values.len());
    out.extend_from_slice(&(image.size as u64).to_le_bytes());
    for v in &image.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_raw(image: &GafImage, path: &Path) -> Result<()> {
    fs::write(path, raw_bytes(image)).map_err(|e| Error::io(path, e))
}

pub fn read_raw(path: &Path) -> Result<GafImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_raw(&bytes)
}

pub fn parse_raw(bytes: &[u8]) -> Result<GafImage> {
    let Some((head, body)) = bytes.split_first_chunk::<8>() else {
        return Err(Error::shape("raw GAF file shorter than its header"));
    };
    let size = u64::from_le_bytes(*head) as usize;
    if body.len() != size.saturating_mul(size).saturating_mul(8) {
        return Err(Error::shape(format!(
            "raw GAF body has {} bytes, expected {} for size {size}",
            body.len(),
            size * size * 8
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    GafImage::from_values(size, values)
}
