//! Small dense-vector kernels shared by the pipelines.
//!
//! All accumulation is done in `f64` in index order so results are
//! reproducible bit for bit.

/// Inner product accumulated left to right.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; zero when either side is the zero vector.
///
/// Computed as `dot / sqrt(|a|^2 |b|^2)` so that `cosine(a, a) == 1.0`
/// exactly for any non-zero `a`.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a);
    let nb = dot(b, b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb).sqrt()).clamp(-1.0, 1.0)
}

/// Scales `a` to unit length. The zero vector is returned unchanged.
pub fn normalize(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    if n == 0.0 {
        return a.to_vec();
    }
    a.iter().map(|x| x / n).collect()
}

/// Numerically stable softmax (max-shifted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let mut total = 0.0;
    for e in &exps {
        total += e;
    }
    exps.into_iter().map(|e| e / total).collect()
}

/// Shannon entropy in nats of a probability vector; zero-probability
/// entries contribute nothing.
pub fn entropy(probs: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in probs {
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

/// `y = M x` for a row-major `rows x cols` matrix stored as `f32`.
pub fn matvec(m: &[f32], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    (0..rows)
        .map(|r| {
            let row = &m[r * cols..(r + 1) * cols];
            let mut acc = 0.0;
            for (w, v) in row.iter().zip(x) {
                acc += f64::from(*w) * v;
            }
            acc
        })
        .collect()
}

/// Converts a slice of `f32` into `f64` (exact).
pub fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

/// Total order on `f64` under which `-0.0 == 0.0`, so equal scores tie
/// regardless of sign.
pub fn numeric_cmp(a: f64, b: f64) -> std::cmp::Ordering {
    if a == b {
        std::cmp::Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// Arithmetic mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mut sum = 0.0;
    for v in values {
        sum += v;
    }
    let mean = sum / n;
    let mut var = 0.0;
    for v in values {
        var += (v - mean) * (v - mean);
    }
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_zeros_compare_equal() {
        use std::cmp::Ordering;
        assert_eq!(numeric_cmp(-0.0, 0.0), Ordering::Equal);
        assert_eq!(numeric_cmp(-1.0, 0.0), Ordering::Less);
        assert_eq!(numeric_cmp(2.0, 1.0), Ordering::Greater);
    }

    #[test]
    fn cosine_of_self_is_exactly_one() {
        let a = [0.3, -1.7, 2.25, 1e-3];
        assert_eq!(cosine(&a, &a), 1.0);
    }

    #[test]
    fn cosine_with_zero_is_zero() {
        assert_eq!(cosine(&[1.0, 2.0], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1.0, -3.0, 700.0, 2.0]);
        let s: f64 = p.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_of_point_mass_is_zero() {
        assert_eq!(entropy(&[1.0, 0.0, 0.0]), 0.0);
    }
}
