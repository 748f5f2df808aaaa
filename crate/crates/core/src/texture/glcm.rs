//! Grey-level co-occurrence matrices and the 13 Haralick statistics.

use ndarray::{Array2, ArrayView2};

use super::RgbImage;
use crate::error::{Error, Result};

pub const N_HARALICK: usize = 13;

pub const HARALICK_NAMES: [&str; N_HARALICK] = [
    "asm",
    "contrast",
    "correlation",
    "sum_of_squares",
    "idm",
    "sum_average",
    "sum_variance",
    "sum_entropy",
    "entropy",
    "difference_variance",
    "difference_entropy",
    "imc1",
    "imc2",
];

/// Unit `(row, col)` steps for 0, 45, 90 and 135 degrees; rows grow downward.
pub const DIRECTIONS: [(isize, isize); 4] = [(0, 1), (1, 1), (1, 0), (1, -1)];
const ANGLE_NAMES: [&str; 4] = ["0", "45", "90", "135"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlcmParams {
    pub distances: Vec<usize>,
    pub levels: usize,
}

impl Default for GlcmParams {
    fn default() -> Self {
        GlcmParams {
            distances: vec![1],
            levels: 256,
        }
    }
}

impl GlcmParams {
    pub fn validate(&self) -> Result<()> {
        check_levels(self.levels)?;
        if self.distances.is_empty() || self.distances.contains(&0) {
            return Err(Error::Parameter(format!(
                "GLCM distances must be a non-empty list of positive integers, got {:?}",
                self.distances
            )));
        }
        Ok(())
    }
}

fn check_levels(levels: usize) -> Result<()> {
    if !(2..=256).contains(&levels) {
        return Err(Error::Parameter(format!(
            "quantization levels must be in 2..=256, got {levels}"
        )));
    }
    Ok(())
}

/// Luma (0.299, 0.587, 0.114) binned uniformly into `levels` grey levels.
/// Integer arithmetic, so the result does not depend on rounding mode.
pub fn quantize_gray(image: &RgbImage, levels: usize) -> Result<Array2<u16>> {
    check_levels(levels)?;
    Ok(Array2::from_shape_fn(
        (image.height(), image.width()),
        |(r, c)| {
            let [red, green, blue] = image.pixel(r, c);
            let luma = 299 * red as usize + 587 * green as usize + 114 * blue as usize;
            (luma * levels / 256_000) as u16
        },
    ))
}

/// Symmetric co-occurrence matrix of `levels` for the pixel offset
/// `(d_row, d_col)`, normalised to sum to one.
pub fn cooccurrence(
    levels: ArrayView2<'_, u16>,
    n_levels: usize,
    offset: (isize, isize),
) -> Result<Array2<f64>> {
    let (rows, cols) = levels.dim();
    let (dr, dc) = offset;
    let mut counts = Array2::<u64>::zeros((n_levels, n_levels));
    let mut pairs = 0u64;
    for r in 0..rows {
        let rr = r as isize + dr;
        if rr < 0 || rr >= rows as isize {
            continue;
        }
        for c in 0..cols {
            let cc = c as isize + dc;
            if cc < 0 || cc >= cols as isize {
                continue;
            }
            let i = levels[[r, c]] as usize;
            let j = levels[[rr as usize, cc as usize]] as usize;
            if i >= n_levels || j >= n_levels {
                return Err(Error::Parameter(format!(
                    "grey level {} outside 0..{n_levels}",
                    i.max(j)
                )));
            }
            counts[[i, j]] += 1;
            counts[[j, i]] += 1;
            pairs += 2;
        }
    }
    if pairs == 0 {
        return Err(Error::Parameter(format!(
            "offset {offset:?} leaves no pixel pairs in a {rows}x{cols} image"
        )));
    }
    Ok(counts.mapv(|k| k as f64 / pairs as f64))
}

fn entropy<'a>(p: impl IntoIterator<Item = &'a f64>) -> f64 {
    -p.into_iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// The 13 Haralick statistics of a normalised co-occurrence matrix, in
/// [`HARALICK_NAMES`] order. Logarithms are natural; levels are 0-based.
pub fn haralick_features(p: ArrayView2<'_, f64>) -> [f64; N_HARALICK] {
    let n = p.nrows();
    let px: Vec<f64> = p.rows().into_iter().map(|r| r.sum()).collect();
    let py: Vec<f64> = p.columns().into_iter().map(|c| c.sum()).collect();
    let mean = |m: &[f64]| m.iter().enumerate().map(|(i, v)| i as f64 * v).sum::<f64>();
    let (mx, my) = (mean(&px), mean(&py));
    let var = |m: &[f64], mu: f64| {
        m.iter()
            .enumerate()
            .map(|(i, v)| (i as f64 - mu).powi(2) * v)
            .sum::<f64>()
    };
    let (vx, vy) = (var(&px, mx), var(&py, my));

    let mut p_sum = vec![0.0; 2 * n - 1];
    let mut p_diff = vec![0.0; n];
    let (mut asm, mut contrast, mut cov, mut idm) = (0.0, 0.0, 0.0, 0.0);
    let mut hxy1 = 0.0;
    for ((i, j), &v) in p.indexed_iter() {
        if v == 0.0 {
            continue;
        }
        let d = i.abs_diff(j);
        asm += v * v;
        contrast += (d * d) as f64 * v;
        cov += (i as f64 - mx) * (j as f64 - my) * v;
        idm += v / (1.0 + (d * d) as f64);
        p_sum[i + j] += v;
        p_diff[d] += v;
        hxy1 -= v * (px[i] * py[j]).ln();
    }

    let correlation = if vx == 0.0 || vy == 0.0 {
        1.0
    } else {
        (cov / (vx * vy).sqrt()).clamp(-1.0, 1.0)
    };
    let sum_average = mean(&p_sum);
    let sum_variance = var(&p_sum, sum_average);
    let sum_entropy = entropy(&p_sum);
    let hxy = entropy(p.iter());
    let difference_variance = var(&p_diff, mean(&p_diff));
    let difference_entropy = entropy(&p_diff);

    let (hx, hy) = (entropy(&px), entropy(&py));
    let hxy2: f64 = px
        .iter()
        .flat_map(|a| py.iter().map(move |b| a * b))
        .filter(|&v| v > 0.0)
        .map(|v| -v * v.ln())
        .sum();
    let imc1 = if hx.max(hy) == 0.0 {
        0.0
    } else {
        (hxy - hxy1) / hx.max(hy)
    };
    let imc2 = (1.0 - (-2.0 * (hxy2 - hxy)).exp()).max(0.0).sqrt();

    [
        asm,
        contrast,
        correlation,
        vx,
        idm,
        sum_average,
        sum_variance,
        sum_entropy,
        hxy,
        difference_variance,
        difference_entropy,
        imc1,
        imc2,
    ]
}

/// Haralick statistics of an already quantized image for every distance and
/// direction, ordered distance, then direction, then statistic.
pub fn glcm_features_from_levels(
    levels: ArrayView2<'_, u16>,
    n_levels: usize,
    distances: &[usize],
) -> Result<Vec<f64>> {
    check_levels(n_levels)?;
    if distances.is_empty() {
        return Err(Error::Parameter("no GLCM distances given".into()));
    }
    let (rows, cols) = levels.dim();
    let mut out = Vec::with_capacity(distances.len() * DIRECTIONS.len() * N_HARALICK);
    for &d in distances {
        if d == 0 || d >= rows.min(cols) {
            return Err(Error::Parameter(format!(
                "GLCM distance {d} must be in 1..{} for a {rows}x{cols} image",
                rows.min(cols)
            )));
        }
        for (dr, dc) in DIRECTIONS {
            let p = cooccurrence(levels, n_levels, (dr * d as isize, dc * d as isize))?;
            out.extend(haralick_features(p.view()));
        }
    }
    Ok(out)
}

pub fn glcm_extract(
    image: &RgbImage,
    distances: &[usize],
    quantization_levels: usize,
) -> Result<Vec<f64>> {
    let levels = quantize_gray(image, quantization_levels)?;
    glcm_features_from_levels(levels.view(), quantization_levels, distances)
}

pub fn glcm_feature_names(distances: &[usize]) -> Vec<String> {
    let mut names = Vec::with_capacity(distances.len() * DIRECTIONS.len() * N_HARALICK);
    for d in distances {
        for angle in ANGLE_NAMES {
            for f in HARALICK_NAMES {
                names.push(format!("glcm_d{d}_a{angle}_{f}"));
            }
        }
    }
    names
}
