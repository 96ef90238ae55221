//! Small numeric utilities: a row-major matrix, deterministic summation,
//! weighted quantiles, logistic primitives and Kolmogorov-Smirnov distances.

use crate::error::{Error, Result};

/// Dense row-major matrix. Row access is the hot path (per-observation design
/// vectors), so rows are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { data, rows: r, cols: c }
    }

    pub fn from_flat(data: Vec<f64>, rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols);
        Matrix { data, rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Rows selected by a boolean mask, as a new matrix.
    pub fn filter_rows(&self, keep: &[bool]) -> Matrix {
        assert_eq!(keep.len(), self.rows);
        let mut data = Vec::new();
        for i in 0..self.rows {
            if keep[i] {
                data.extend_from_slice(self.row(i));
            }
        }
        let rows = data.len() / self.cols.max(1);
        Matrix { data, rows, cols: self.cols }
    }

    /// Indices of column pairs that are exactly (bitwise) identical.
    pub fn duplicate_columns(&self) -> Vec<(usize, usize)> {
        let mut dups = Vec::new();
        for a in 0..self.cols {
            for b in (a + 1)..self.cols {
                let same = (0..self.rows).all(|i| self.row(i)[a] == self.row(i)[b]);
                if same && self.rows > 0 {
                    dups.push((a, b));
                }
            }
        }
        dups
    }
}

/// Dot product of two equally long slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Pairwise (tree) summation: deterministic and far more accurate than a naive
/// running sum. Used wherever sums feed reported numbers, so results do not
/// depend on how work was split across threads.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Weighted mean via pairwise sums.
pub fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    assert_eq!(values.len(), weights.len());
    let prods: Vec<f64> = values.iter().zip(weights).map(|(v, w)| v * w).collect();
    pairwise_sum(&prods) / pairwise_sum(weights)
}

/// Weighted population variance (denominator = total weight).
pub fn weighted_variance(values: &[f64], weights: &[f64]) -> f64 {
    let mean = weighted_mean(values, weights);
    let sq: Vec<f64> = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v - mean) * (v - mean))
        .collect();
    pairwise_sum(&sq) / pairwise_sum(weights)
}

/// Weighted covariance (denominator = total weight).
pub fn weighted_covariance(a: &[f64], b: &[f64], weights: &[f64]) -> f64 {
    let ma = weighted_mean(a, weights);
    let mb = weighted_mean(b, weights);
    let prods: Vec<f64> = a
        .iter()
        .zip(b)
        .zip(weights)
        .map(|((x, y), w)| w * (x - ma) * (y - mb))
        .collect();
    pairwise_sum(&prods) / pairwise_sum(weights)
}

/// Left-inverse weighted quantiles: the smallest value whose cumulative weight
/// share reaches tau. `taus` need not be sorted.
pub fn weighted_quantiles(values: &[f64], weights: &[f64], taus: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    assert!(!values.is_empty(), "quantiles of an empty sample");
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total = pairwise_sum(weights);
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        let target = tau * total;
        let mut cum = 0.0;
        let mut ans = values[*idx.last().unwrap()];
        for &i in &idx {
            cum += weights[i];
            if cum >= target {
                ans = values[i];
                break;
            }
        }
        out.push(ans);
    }
    out
}

/// Logistic CDF, stable in both tails.
#[inline]
/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    use statrs::distribution::ContinuousCDF;
    statrs::distribution::Normal::standard().cdf(x)
}

/// Standard normal quantile function.
pub fn norm_inv(p: f64) -> f64 {
    use statrs::distribution::ContinuousCDF;
    statrs::distribution::Normal::standard().inverse_cdf(p)
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(x)) without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Log-odds of p in (0, 1).
#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Kolmogorov-Smirnov distance of a sample from Uniform(lo, hi).
pub fn ks_uniform(sample: &[f64], lo: f64, hi: f64) -> f64 {
    assert!(hi > lo);
    let mut xs: Vec<f64> = sample.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let u = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        let hi_side = ((i + 1) as f64 / n - u).abs();
        let lo_side = (u - i as f64 / n).abs();
        d = d.max(hi_side).max(lo_side);
    }
    d
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xa: Vec<f64> = a.to_vec();
    let mut xb: Vec<f64> = b.to_vec();
    xa.sort_unstable_by(f64::total_cmp);
    xb.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let t = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= t {
            i += 1;
        }
        while j < xb.len() && xb[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Column names of a design matrix that fail a rank-revealing QR check.
/// Returns Ok(()) for full column rank.
pub fn check_full_rank(design: &Matrix, names: &[String], context: &str) -> Result<()> {
    let n = design.rows();
    let d = design.cols();
    if n < d {
        return Err(Error::TooFewObservations {
            context: context.to_string(),
            needed: d,
            got: n,
        });
    }
    let a = nalgebra::DMatrix::from_row_slice(n, d, design.data());
    let qr = a.col_piv_qr();
    let diag_r = qr.r().diagonal().iter().map(|v| v.abs()).collect::<Vec<_>>();
    let max_diag = diag_r.iter().cloned().fold(0.0f64, f64::max);
    let tol = max_diag * 1e-10 * (n.max(d) as f64);
    let rank = diag_r.iter().filter(|&&v| v > tol).count();
    if rank < d {
        // Recover which source columns landed in the dependent pivot slots by
        // pushing an index row through the same column permutation.
        let mut order = nalgebra::DMatrix::from_fn(1, d, |_, j| j as f64);
        qr.p().permute_columns(&mut order);
        let mut cols: Vec<String> = (rank..d)
            .map(|k| {
                let col = order[(0, k)] as usize;
                names
                    .get(col)
                    .cloned()
                    .unwrap_or_else(|| format!("column {col}"))
            })
            .collect();
        cols.sort();
        return Err(Error::RankDeficient {
            context: context.to_string(),
            columns: cols,
        });
    }
    Ok(())
}

/// Deduplicates design rows by exact bit pattern: `idx[i]` is the pattern id
/// of row `i` and `reps[p]` the first row carrying pattern `p`. Pattern ids
/// follow first-occurrence order, so the result is independent of hashing.
/// Returns `None` as soon as more than `cap` distinct rows appear (continuous
/// covariates), keeping the scan cheap when deduplication cannot help.
pub(crate) fn row_patterns(m: &Matrix, cap: usize) -> Option<(Vec<usize>, Vec<usize>)> {
    let mut seen: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
    let mut idx = Vec::with_capacity(m.rows());
    let mut reps = Vec::new();
    for i in 0..m.rows() {
        let key: Vec<u64> = m.row(i).iter().map(|v| v.to_bits()).collect();
        let next = reps.len();
        let p = *seen.entry(key).or_insert_with(|| {
            reps.push(i);
            next
        });
        if reps.len() > cap {
            return None;
        }
        idx.push(p);
    }
    Some((idx, reps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pairwise_matches_exact_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
    }

    #[test]
    fn weighted_quantile_left_inverse() {
        // Weighted ECDF of {1 (w=1), 2 (w=1), 3 (w=2)}: steps 0.25, 0.5, 1.0.
        let v = [3.0, 1.0, 2.0];
        let w = [2.0, 1.0, 1.0];
        let q = weighted_quantiles(&v, &w, &[0.25, 0.26, 0.5, 0.75, 1.0]);
        assert_eq!(q, vec![1.0, 2.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn logistic_and_logit_are_inverse() {
        for &p in &[1e-9, 0.3, 0.5, 0.99, 1.0 - 1e-9] {
            assert_abs_diff_eq!(logistic(logit(p)), p, epsilon = 1e-12);
        }
        assert_eq!(logistic(-800.0), 0.0);
        assert_eq!(logistic(800.0), 1.0);
    }

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for &x in &[-30.0, -1.0, 0.0, 1.0, 30.0] {
            assert_abs_diff_eq!(softplus(x), (1.0 + x.exp()).ln(), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(softplus(1000.0), 1000.0, epsilon = 1e-12);
    }

    #[test]
    fn ks_uniform_detects_shift() {
        let near_uniform: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniform(&near_uniform, 0.0, 1.0) < 0.01);
        let shifted: Vec<f64> = near_uniform.iter().map(|u| u * u).collect();
        assert!(ks_uniform(&shifted, 0.0, 1.0) > 0.2);
    }

    #[test]
    fn rank_check_flags_exact_collinearity() {
        // col2 = col0 + col1
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let a = i as f64;
                let b = (i * i) as f64 * 0.1;
                vec![1.0, a, b, 1.0 + a + b]
            })
            .collect();
        let m = Matrix::from_rows(&rows);
        let names: Vec<String> = ["const", "a", "b", "a_plus_b"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let err = check_full_rank(&m, &names, "test").unwrap_err();
        match err {
            crate::error::Error::RankDeficient { columns, .. } => {
                assert_eq!(columns.len(), 1, "exactly one dependent column");
            }
            other => panic!("unexpected error {other}"),
        }
        // and a clean matrix passes
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![1.0, i as f64, ((i * i) % 7) as f64])
            .collect();
        let m = Matrix::from_rows(&rows);
        check_full_rank(&m, &names[..3].to_vec(), "test").unwrap();
    }

    #[test]
    fn duplicate_columns_found_bitwise() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 1.0], vec![3.0, 4.0, 3.0]]);
        assert_eq!(m.duplicate_columns(), vec![(0, 2)]);
    }
}
