//! Features of coherence curves sampled on a grid.

/// Last grid time at which `values` is at or above `threshold`, i.e. the
/// time after which the curve stays below it. Zero if it never reaches the
/// threshold after `t = 0`.
pub fn decoherence_time(times: &[f64], values: &[f64], threshold: f64) -> f64 {
    times
        .iter()
        .zip(values)
        .rev()
        .find(|(_, &v)| v >= threshold)
        .map_or(0.0, |(&t, _)| t)
}

/// Index of the first sample below `level` after the curve has been at or
/// above it.
pub fn first_descent_below(values: &[f64], level: f64) -> Option<usize> {
    let start = values.iter().position(|&v| v >= level)?;
    values[start..]
        .iter()
        .position(|&v| v < level)
        .map(|i| i + start)
}

/// Interior local maxima `(time, value)` after the first descent below
/// `descent_level` whose value exceeds `min_height`.
pub fn revivals_after_descent(
    times: &[f64],
    values: &[f64],
    descent_level: f64,
    min_height: f64,
) -> Vec<(f64, f64)> {
    let Some(start) = first_descent_below(values, descent_level) else {
        return Vec::new();
    };
    (start.max(1)..values.len().saturating_sub(1))
        .filter(|&k| values[k] > values[k - 1] && values[k] >= values[k + 1])
        .filter(|&k| values[k] > min_height)
        .map(|k| (times[k], values[k]))
        .collect()
}

/// Weighted least-squares slope of `-ln(values)` against `times`, with
/// weights `(value / std_error)^2`. Nonpositive values are skipped; a zero
/// standard error gets a large finite weight.
pub fn fitted_decay_rate(times: &[f64], values: &[f64], std_error: &[f64]) -> f64 {
    let (mut sw, mut swt, mut swy, mut swtt, mut swty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&t, &v), &s) in times.iter().zip(values).zip(std_error) {
        if v <= 0.0 {
            continue;
        }
        let w = if s > 0.0 { (v / s).powi(2) } else { 1e12 };
        let y = v.ln();
        sw += w;
        swt += w * t;
        swy += w * y;
        swtt += w * t * t;
        swty += w * t * y;
    }
    -(sw * swty - swt * swy) / (sw * swtt - swt * swt)
}

/// Log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    let step = (b - a) / (count - 1) as f64;
    (0..count)
        .map(|i| match i {
            0 => lo,
            _ if i + 1 == count => hi,
            _ => snap(10f64.powf(a + step * i as f64)),
        })
        .collect()
}

/// Rounds values within a few ulps of a 12-digit decimal onto it, so that
/// grid points such as `K = 1` come out exact.
fn snap(v: f64) -> f64 {
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    if (rounded - v).abs() <= 1e-14 * v.abs() {
        rounded
    } else {
        v
    }
}

/// Linearly spaced values from `lo` to `hi` inclusive.
pub fn lin_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    (0..count)
        .map(|i| match i {
            0 => lo,
            _ if i + 1 == count => hi,
            _ => snap(lo + (hi - lo) * i as f64 / (count - 1) as f64),
        })
        .collect()
}
