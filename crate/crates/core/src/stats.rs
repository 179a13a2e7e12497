//! Small descriptive statistics used by the evaluation code.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Middle element, or the lower of the two middle elements for even length.
pub fn lower_median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let v = sorted(xs);
    v[(v.len() - 1) / 2]
}

/// Linearly interpolated quantile of already sorted data, `q` in `[0, 1]`.
pub fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Five-number summary with Tukey fences at 1.5·IQR.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSummary {
    /// Smallest value inside the lower fence.
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Largest value inside the upper fence.
    pub max: f64,
    pub outliers: Vec<f64>,
}

impl BoxSummary {
    pub fn new(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let v = sorted(xs);
        let q1 = quantile_sorted(&v, 0.25);
        let q3 = quantile_sorted(&v, 0.75);
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside: Vec<f64> = v
            .iter()
            .copied()
            .filter(|x| *x >= lo_fence && *x <= hi_fence)
            .collect();
        let outliers = v
            .iter()
            .copied()
            .filter(|x| *x < lo_fence || *x > hi_fence)
            .collect();
        Some(Self {
            min: inside[0],
            q1,
            median: v[(v.len() - 1) / 2],
            q3,
            max: inside[inside.len() - 1],
            outliers,
        })
    }
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Spearman rank correlation; NaN when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spearman: length mismatch");
    pearson(&ranks(a), &ranks(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn medians() {
        assert_eq!(lower_median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(lower_median(&[4.0, 1.0, 3.0, 2.0]), 2.0);
        assert!(lower_median(&[]).is_nan());
        assert_eq!(mean(&[1.0, 2.0, 6.0]), 3.0);
    }

    #[test]
    fn box_summary_known_values() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 100.0];
        let b = BoxSummary::new(&xs).unwrap();
        assert_eq!(b.q1, 3.0);
        assert_eq!(b.q3, 7.0);
        assert_eq!(b.median, 5.0);
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!((b.min, b.max), (1.0, 8.0));
        assert!(BoxSummary::new(&[]).is_none());
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 90.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!(spearman(&[1.0, 2.0], &[5.0, 5.0]).is_nan());
    }

    proptest! {
        #[test]
        fn quartiles_match_sorting_oracle(xs in proptest::collection::vec(0.0f64..180.0, 1..40)) {
            let b = BoxSummary::new(&xs).unwrap();
            let mut v = xs.clone();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = v.len();
            // type-7 quantile written out by hand
            let q = |p: f64| {
                let h = (n - 1) as f64 * p;
                let f = h.floor();
                v[f as usize] + (h - f) * (v[(f as usize + 1).min(n - 1)] - v[f as usize])
            };
            prop_assert!((b.q1 - q(0.25)).abs() < 1e-12);
            prop_assert!((b.q3 - q(0.75)).abs() < 1e-12);
            prop_assert_eq!(b.median, v[(n - 1) / 2]);
            let iqr = b.q3 - b.q1;
            for o in &b.outliers {
                prop_assert!(*o < b.q1 - 1.5 * iqr || *o > b.q3 + 1.5 * iqr);
            }
            prop_assert_eq!(b.outliers.len() + v.iter().filter(|x| **x >= b.min && **x <= b.max).count(), n);
        }

        #[test]
        fn median_is_permutation_invariant(mut xs in proptest::collection::vec(0.0f64..180.0, 1..30), seed in 0u64..100) {
            let m = lower_median(&xs);
            let n = xs.len();
            for i in 0..n {
                xs.swap(i, (i as u64 * 31 + seed) as usize % n);
            }
            prop_assert_eq!(lower_median(&xs), m);
        }
    }
}
