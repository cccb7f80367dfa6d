//! Measurements on computed maps: fringe spacing, correlations, overlaps.

use super::CoincidenceMap;

/// Interior local maxima of `values`, refined by a parabola through each peak
/// and its neighbours. Returned as positions along `coords` (uniform spacing).
pub fn peak_positions(values: &[f64], coords: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), coords.len());
    if values.len() < 3 {
        return Vec::new();
    }
    let step = coords[1] - coords[0];
    let mut out = Vec::new();
    for i in 1..values.len() - 1 {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if b > a && b >= c {
            let denom = a - 2.0 * b + c;
            let offset = if denom != 0.0 {
                0.5 * (a - c) / denom
            } else {
                0.0
            };
            out.push(coords[i] + offset * step);
        }
    }
    out
}

/// Mean distance between consecutive peaks, if there are at least two.
pub fn mean_peak_spacing(values: &[f64], coords: &[f64]) -> Option<f64> {
    let p = peak_positions(values, coords);
    if p.len() < 2 {
        return None;
    }
    Some((p[p.len() - 1] - p[0]) / (p.len() - 1) as f64)
}

/// Pearson correlation coefficient. `None` when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Normalised overlap `Σ a b / sqrt(Σ a² Σ b²)` of two nonnegative maps.
pub fn overlap_fraction(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let aa: f64 = a.iter().map(|x| x * x).sum();
    let bb: f64 = b.iter().map(|x| x * x).sum();
    if aa == 0.0 || bb == 0.0 {
        return 0.0;
    }
    ab / (aa * bb).sqrt()
}

/// Correlation of `a` with the complement of `b` taken against a flat-field
/// response `flat` (the same system imaging a uniform pattern). All three are
/// compared in raw units, so vignetting of the field cancels.
pub fn inversion_correlation(
    a: &CoincidenceMap,
    b: &CoincidenceMap,
    flat: &CoincidenceMap,
) -> Option<f64> {
    if !a.same_grid(b) || !a.same_grid(flat) {
        return None;
    }
    let complement: Vec<f64> = flat.raw().iter().zip(b.raw()).map(|(f, v)| f - v).collect();
    pearson(&a.raw(), &complement)
}

/// Fringe visibility `(max - min) / (max + min)` over a slice.
pub fn visibility(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    if max + min == 0.0 {
        return 0.0;
    }
    (max - min) / (max + min)
}
