//! Parameter-free threshold adjacency statistics.

use super::RgbImage;

pub const PFTAS_LEN: usize = 162;
const BINS: usize = 9;
const MASK_NAMES: [&str; 6] = [
    "above",
    "band",
    "above_low",
    "not_above",
    "not_band",
    "not_above_low",
];

/// Otsu threshold of 8-bit values: the first level `t` maximising the
/// between-class variance of `{v <= t}` and `{v > t}`. A constant input
/// returns its value.
pub fn otsu_threshold(values: &[u8]) -> u8 {
    let Some(&lo) = values.iter().min() else {
        return 0;
    };
    let hi = *values.iter().max().unwrap();
    if lo == hi {
        return lo;
    }
    let mut hist = [0u64; 256];
    for &v in values {
        hist[v as usize] += 1;
    }
    let total: f64 = values.len() as f64;
    let total_sum: f64 = values.iter().map(|&v| v as f64).sum();
    let (mut w1, mut s1) = (0.0, 0.0);
    let mut best = (lo, f64::NEG_INFINITY);
    for t in lo..hi {
        w1 += hist[t as usize] as f64;
        s1 += hist[t as usize] as f64 * t as f64;
        let w2 = total - w1;
        let s2 = total_sum - s1;
        let between = w1 * w2 * (s1 / w1 - s2 / w2).powi(2);
        if between > best.1 {
            best = (t, between);
        }
    }
    best.0
}

/// Normalised histogram over white pixels of their white 8-neighbour count
/// (pixels outside the image count as black).
fn adjacency_histogram(mask: &[bool], width: usize, height: usize) -> [f64; BINS] {
    let mut counts = [0u64; BINS];
    for r in 0..height {
        for c in 0..width {
            if !mask[r * width + c] {
                continue;
            }
            let mut n = 0;
            for rr in r.saturating_sub(1)..=(r + 1).min(height - 1) {
                for cc in c.saturating_sub(1)..=(c + 1).min(width - 1) {
                    if (rr, cc) != (r, c) && mask[rr * width + cc] {
                        n += 1;
                    }
                }
            }
            counts[n] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    let mut out = [0.0; BINS];
    if total > 0 {
        for (o, &k) in out.iter_mut().zip(&counts) {
            *o = k as f64 / total as f64;
        }
    }
    out
}

fn channel_statistics(channel: &[u8], width: usize, height: usize) -> Vec<f64> {
    let t = otsu_threshold(channel);
    let bright: Vec<f64> = channel
        .iter()
        .filter(|&&v| v > t)
        .map(|&v| v as f64)
        .collect();
    let (mu, sd) = if bright.is_empty() {
        (0.0, 0.0)
    } else {
        let n = bright.len() as f64;
        let mu = bright.iter().sum::<f64>() / n;
        let var = bright.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
        (mu, var.sqrt())
    };

    let above: Vec<bool> = channel.iter().map(|&v| v > t).collect();
    let band: Vec<bool> = channel
        .iter()
        .map(|&v| (v as f64) > mu - sd && (v as f64) < mu + sd)
        .collect();
    let above_low: Vec<bool> = channel.iter().map(|&v| (v as f64) > mu - sd).collect();
    let masks = [above, band, above_low];

    let mut out = Vec::with_capacity(6 * BINS);
    for m in &masks {
        out.extend(adjacency_histogram(m, width, height));
    }
    for m in &masks {
        let inverted: Vec<bool> = m.iter().map(|b| !b).collect();
        out.extend(adjacency_histogram(&inverted, width, height));
    }
    out
}

/// 162 values: for R, G and B in turn, the adjacency histograms of three
/// masks followed by those of their complements. The masks are the pixels
/// above the Otsu threshold `t`, the pixels within one standard deviation of
/// the mean `mu` of those bright pixels, and the pixels above `mu - sd`.
pub fn pftas_extract(image: &RgbImage) -> Vec<f64> {
    let mut out = Vec::with_capacity(PFTAS_LEN);
    for c in 0..3 {
        out.extend(channel_statistics(
            &image.channel(c),
            image.width(),
            image.height(),
        ));
    }
    out
}

pub fn pftas_feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(PFTAS_LEN);
    for ch in ["r", "g", "b"] {
        for mask in MASK_NAMES {
            for k in 0..BINS {
                names.push(format!("pftas_{ch}_{mask}_{k}"));
            }
        }
    }
    names
}
