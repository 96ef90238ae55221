//! Distribution regression: a family of weighted logistic regressions of the
//! outcome's threshold indicators 1{value <= h} on a design basis, one fit per
//! grid threshold. Predicted curves are monotonized by sorting at prediction
//! time, and conditional quantiles come from the exact integral of the
//! predicted step CDF (a Riemann sum over the observed outcome values).

use std::io;

use crate::error::{Error, Result};
use crate::exec;
use crate::stats::{self, Matrix};

/// Convergence tolerance on the weight-normalized score max-norm.
pub const GRAD_TOL: f64 = 1e-8;
/// Newton iteration cap per threshold.
pub const MAX_ITER: usize = 100;
/// Step-halving cap inside one damped Newton iteration.
pub const MAX_HALVINGS: usize = 30;
/// Coefficient max-norm beyond which a threshold is treated as separated:
/// the MLE diverges and the fitted probabilities are pinned at 0 or 1.
pub const SEPARATION_NORM: f64 = 30.0;
/// Default threshold-grid size when the outcome has more distinct values.
pub const DEFAULT_MAX_THRESHOLDS: usize = 400;
/// Thresholds per warm-start block. Consecutive thresholds within a block
/// chain starting values (neighbouring logistic MLEs are close, so a warm
/// Newton solve needs only a step or two); each block starts cold and is one
/// parallel work unit. The partition depends only on this constant, so
/// results are identical at any worker-thread count.
const WARM_BLOCK: usize = 32;
/// Squared Newton-decrement bound under which a full step is taken without a
/// likelihood comparison: the logistic log-likelihood is self-concordant, so
/// undamped Newton is globally safe once the decrement is below ~0.68, and
/// the decrement never grows again. 0.25 leaves margin for round-off.
const FULL_STEP_DECREMENT: f64 = 0.25;

/// Per-threshold solver outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnStatus {
    /// Interior maximum found (score below tolerance).
    Converged { iters: usize },
    /// Iteration cap hit; coefficients are the best iterate.
    MaxIter,
    /// Indicator identically zero: predicted probability clamped to 0.
    AllZero,
    /// Indicator identically one: predicted probability clamped to 1.
    AllOne,
    /// Diverging coefficients (quasi-separation); predictions saturate.
    Separated,
}

impl ColumnStatus {
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            ColumnStatus::AllZero | ColumnStatus::AllOne | ColumnStatus::Separated
        )
    }
}

/// A fitted distribution regression: thresholds, one coefficient vector per
/// threshold, per-threshold status, and the rearrangement flag.
#[derive(Debug, Clone)]
pub struct DrFit {
    pub thresholds: Vec<f64>,
    /// K x d coefficient matrix (one row per threshold).
    pub coef: Matrix,
    pub status: Vec<ColumnStatus>,
    /// When set, predicted curves are sorted across thresholds (monotone
    /// rearrangement applied at prediction, never to the coefficients).
    pub rearranged: bool,
}

/// Threshold grid for an hours-type outcome: every distinct observed value
/// when there are at most `max_points` of them, otherwise `max_points`
/// equally spaced weighted quantiles; the point 0 is always included.
pub fn hours_grid(values: &[f64], weights: &[f64], max_points: usize) -> Vec<f64> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_unstable_by(f64::total_cmp);
    distinct.dedup();
    let mut grid = if distinct.len() <= max_points {
        distinct
    } else {
        let taus: Vec<f64> = (1..=max_points)
            .map(|k| k as f64 / max_points as f64)
            .collect();
        let mut g = stats::weighted_quantiles(values, weights, &taus);
        g.sort_unstable_by(f64::total_cmp);
        g.dedup();
        g
    };
    if grid.first() != Some(&0.0) {
        grid.insert(0, 0.0);
    }
    grid
}

/// Threshold grid for the wage stage: `points` equally spaced weighted
/// quantiles of the (trimmed-sample) wages, deduplicated.
pub fn wage_grid(wages: &[f64], weights: &[f64], points: usize) -> Vec<f64> {
    let mut distinct: Vec<f64> = wages.to_vec();
    distinct.sort_unstable_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() <= points {
        return distinct;
    }
    let taus: Vec<f64> = (1..=points).map(|k| k as f64 / points as f64).collect();
    let mut g = stats::weighted_quantiles(wages, weights, &taus);
    g.sort_unstable_by(f64::total_cmp);
    g.dedup();
    g
}

struct ThresholdResult {
    coef: Vec<f64>,
    status: ColumnStatus,
}

/// Log-likelihood, score, and negative Hessian at one coefficient point,
/// filled by a single fused data pass.
struct Eval {
    ll: f64,
    grad: Vec<f64>,
    hess: nalgebra::DMatrix<f64>,
}

impl Eval {
    fn new(d: usize) -> Eval {
        Eval { ll: 0.0, grad: vec![0.0; d], hess: nalgebra::DMatrix::zeros(d, d) }
    }
}

/// One data pass computing the score and observed information at `pi` — and,
/// when `need_ll` is set, the weighted log-likelihood (compensated sum; the
/// logistic value and the softplus share a single exponential). Without
/// `need_ll` the stored likelihood is poisoned with NaN so stale reads fail
/// loudly. Dispatches to a column-count-specialized pass for the small
/// designs that dominate, so the inner products unroll.
fn evaluate(
    design: &Matrix,
    values: &[f64],
    weights: &[f64],
    h: f64,
    pi: &[f64],
    need_ll: bool,
    out: &mut Eval,
) {
    match design.cols() {
        1 => evaluate_fixed::<1>(design, values, weights, h, pi, need_ll, out),
        2 => evaluate_fixed::<2>(design, values, weights, h, pi, need_ll, out),
        3 => evaluate_fixed::<3>(design, values, weights, h, pi, need_ll, out),
        4 => evaluate_fixed::<4>(design, values, weights, h, pi, need_ll, out),
        5 => evaluate_fixed::<5>(design, values, weights, h, pi, need_ll, out),
        6 => evaluate_fixed::<6>(design, values, weights, h, pi, need_ll, out),
        _ => evaluate_dyn(design, values, weights, h, pi, need_ll, out),
    }
}

fn evaluate_fixed<const D: usize>(
    design: &Matrix,
    values: &[f64],
    weights: &[f64],
    h: f64,
    pi: &[f64],
    need_ll: bool,
    out: &mut Eval,
) {
    debug_assert_eq!(design.cols(), D);
    let mut coef = [0.0f64; D];
    coef.copy_from_slice(pi);
    let mut grad = [0.0f64; D];
    let mut hess = [[0.0f64; D]; D];
    let mut ll = 0.0f64;
    let mut comp = 0.0f64;
    for ((row, &value), &w) in design.data().chunks_exact(D).zip(values).zip(weights) {
        let mut eta = 0.0;
        for a in 0..D {
            eta += row[a] * coef[a];
        }
        let o = value <= h;
        let (lam, softplus) = if eta <= 0.0 {
            let t = eta.exp();
            (t / (1.0 + t), t.ln_1p())
        } else {
            let t = (-eta).exp();
            (1.0 / (1.0 + t), eta + t.ln_1p())
        };
        if need_ll {
            let term = w * (if o { eta - softplus } else { -softplus });
            let sum = ll + term;
            comp += if ll.abs() >= term.abs() { (ll - sum) + term } else { (term - sum) + ll };
            ll = sum;
        }
        let resid = w * ((if o { 1.0 } else { 0.0 }) - lam);
        let curv = w * lam * (1.0 - lam);
        for a in 0..D {
            grad[a] += resid * row[a];
            let ca = curv * row[a];
            for b in a..D {
                hess[a][b] += ca * row[b];
            }
        }
    }
    for a in 0..D {
        out.grad[a] = grad[a];
        for b in a..D {
            out.hess[(a, b)] = hess[a][b];
            out.hess[(b, a)] = hess[a][b];
        }
    }
    out.ll = if need_ll { ll + comp } else { f64::NAN };
}

fn evaluate_dyn(
    design: &Matrix,
    values: &[f64],
    weights: &[f64],
    h: f64,
    pi: &[f64],
    need_ll: bool,
    out: &mut Eval,
) {
    let n = design.rows();
    let d = design.cols();
    out.grad.iter_mut().for_each(|g| *g = 0.0);
    out.hess.fill(0.0);
    let mut ll = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..n {
        let row = design.row(i);
        let w = weights[i];
        let eta = stats::dot(row, pi);
        let o = values[i] <= h;
        let (lam, softplus) = if eta <= 0.0 {
            let t = eta.exp();
            (t / (1.0 + t), t.ln_1p())
        } else {
            let t = (-eta).exp();
            (1.0 / (1.0 + t), eta + t.ln_1p())
        };
        if need_ll {
            let term = w * (if o { eta - softplus } else { -softplus });
            let sum = ll + term;
            comp += if ll.abs() >= term.abs() { (ll - sum) + term } else { (term - sum) + ll };
            ll = sum;
        }
        let resid = w * ((if o { 1.0 } else { 0.0 }) - lam);
        let curv = w * lam * (1.0 - lam);
        for a in 0..d {
            out.grad[a] += resid * row[a];
            let ca = curv * row[a];
            for b in a..d {
                out.hess[(a, b)] += ca * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            out.hess[(a, b)] = out.hess[(b, a)];
        }
    }
    out.ll = if need_ll { ll + comp } else { f64::NAN };
}

/// Reused per-block buffers for the damped Newton iteration. After
/// `newton_solve` returns, `cur` holds the score and information matrix at
/// the returned coefficient vector, whatever the exit path.
struct NewtonScratch {
    cur: Eval,
    cand: Eval,
    cand_pi: Vec<f64>,
}

impl NewtonScratch {
    fn new(d: usize) -> NewtonScratch {
        NewtonScratch { cur: Eval::new(d), cand: Eval::new(d), cand_pi: vec![0.0; d] }
    }
}

/// Damped Newton solve for one weighted logistic MLE, starting from `pi`.
/// With `cur_ready` the caller has already placed the score and information
/// matrix at `pi` into `scratch.cur` (the likelihood field is ignored and
/// recomputed lazily if a line search needs it), so the initial data pass is
/// skipped.
fn newton_solve(
    design: &Matrix,
    values: &[f64],
    weights: &[f64],
    h: f64,
    mut pi: Vec<f64>,
    cur_ready: bool,
    total_w: f64,
    s: &mut NewtonScratch,
) -> ThresholdResult {
    let d = design.cols();
    let mut cur_ll_valid = if cur_ready {
        s.cur.ll = f64::NAN;
        false
    } else {
        evaluate(design, values, weights, h, &pi, true, &mut s.cur);
        true
    };

    let mut status = ColumnStatus::MaxIter;
    let mut polish = false;
    for iter in 0..=MAX_ITER {
        let gnorm = s.cur.grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) / total_w;
        if gnorm < GRAD_TOL {
            if polish || iter == MAX_ITER || gnorm < GRAD_TOL * 1e-5 {
                status = ColumnStatus::Converged { iters: iter };
                break;
            }
            // One more full step after hitting the tolerance: quadratic
            // convergence then drives the score to machine precision, so
            // saturated-design predictions reproduce cell frequencies
            // exactly. Skipped when the score is already at round-off.
            polish = true;
        }
        if iter == MAX_ITER {
            break;
        }
        let g = nalgebra::DVector::from_column_slice(&s.cur.grad);
        let step = match s.cur.hess.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => {
                // Near-singular curvature (deep saturation); add a tiny
                // ridge.
                let ridge = s.cur.hess.trace().max(1e-300) / d as f64 * 1e-10;
                let mut hr = s.cur.hess.clone();
                for a in 0..d {
                    hr[(a, a)] += ridge;
                }
                match hr.cholesky() {
                    Some(ch) => ch.solve(&g),
                    None => break,
                }
            }
        };
        let mut decrement = 0.0;
        for a in 0..d {
            decrement += s.cur.grad[a] * step[a];
        }
        let accepted = if polish || decrement < FULL_STEP_DECREMENT {
            // Inside the undamped-Newton region (or polishing): take the
            // full step without a likelihood comparison.
            for a in 0..d {
                s.cand_pi[a] = pi[a] + step[a];
            }
            evaluate(design, values, weights, h, &s.cand_pi, false, &mut s.cand);
            pi.copy_from_slice(&s.cand_pi);
            std::mem::swap(&mut s.cur, &mut s.cand);
            cur_ll_valid = false;
            true
        } else {
            if !cur_ll_valid {
                evaluate(design, values, weights, h, &pi, true, &mut s.cur);
                cur_ll_valid = true;
            }
            let mut scale = 1.0;
            let mut found = false;
            for _ in 0..=MAX_HALVINGS {
                for a in 0..d {
                    s.cand_pi[a] = pi[a] + scale * step[a];
                }
                evaluate(design, values, weights, h, &s.cand_pi, true, &mut s.cand);
                if s.cand.ll >= s.cur.ll {
                    pi.copy_from_slice(&s.cand_pi);
                    std::mem::swap(&mut s.cur, &mut s.cand);
                    found = true;
                    break;
                }
                scale *= 0.5;
            }
            found
        };
        if !accepted {
            // No ascent direction left at the smallest step: treat the
            // current iterate as converged-in-practice.
            status = ColumnStatus::Converged { iters: iter };
            break;
        }
        let pnorm = pi.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if pnorm > SEPARATION_NORM {
            status = ColumnStatus::Separated;
            break;
        }
    }
    ThresholdResult { coef: pi, status }
}

/// Carried state between consecutive thresholds of one block: the previous
/// threshold's indicator count and optimum. Invariant: `scratch.cur` still
/// holds the score and information matrix at `coef` for the previous
/// threshold's indicator vector.
struct Chain {
    k: usize,
    coef: Vec<f64>,
    status: ColumnStatus,
}

/// Per-block threshold solver; owns the scratch buffers reused across all
/// thresholds of one warm-start block. `order` / `sorted_values` / `prefix_w`
/// index the outcome values in ascending order with cumulative weights, so
/// threshold indicator counts and weighted shares come from a binary search
/// instead of a data pass.
struct ThresholdSolver<'a> {
    design: &'a Matrix,
    values: &'a [f64],
    weights: &'a [f64],
    order: &'a [usize],
    sorted_values: &'a [f64],
    prefix_w: &'a [f64],
    total_w: f64,
    scratch: NewtonScratch,
    chain: Option<Chain>,
}

impl<'a> ThresholdSolver<'a> {
    fn new(
        design: &'a Matrix,
        values: &'a [f64],
        weights: &'a [f64],
        order: &'a [usize],
        sorted_values: &'a [f64],
        prefix_w: &'a [f64],
        total_w: f64,
    ) -> ThresholdSolver<'a> {
        let d = design.cols();
        ThresholdSolver {
            design,
            values,
            weights,
            order,
            sorted_values,
            prefix_w,
            total_w,
            scratch: NewtonScratch::new(d),
            chain: None,
        }
    }

    /// Logistic MLE at threshold `h`, chained off the previous threshold of
    /// the block when that solve found an interior optimum.
    fn fit(&mut self, h: f64) -> ThresholdResult {
        let n = self.design.rows();
        let d = self.design.cols();
        let k = self.sorted_values.partition_point(|v| *v <= h);
        if k == 0 {
            self.chain = None;
            return ThresholdResult { coef: vec![0.0; d], status: ColumnStatus::AllZero };
        }
        if k == n {
            self.chain = None;
            return ThresholdResult { coef: vec![0.0; d], status: ColumnStatus::AllOne };
        }
        if let Some(chain) = &self.chain {
            if chain.k == k {
                // No observation lies between the two thresholds: the
                // indicator vector, hence the objective and its maximizer,
                // is unchanged.
                return ThresholdResult { coef: chain.coef.clone(), status: chain.status };
            }
        }
        let (pi, cur_ready) = match self.chain.take() {
            Some(chain) => {
                // Resume at the carried optimum. The information matrix does
                // not depend on the outcome vector, and the score changes
                // only through rows whose indicator flips between the two
                // thresholds, so the initial data pass collapses to a sparse
                // update over those rows.
                for &j in &self.order[chain.k..k] {
                    let row = self.design.row(j);
                    let w = self.weights[j];
                    for a in 0..d {
                        self.scratch.cur.grad[a] += w * row[a];
                    }
                }
                (chain.coef, true)
            }
            None => {
                let share = (self.prefix_w[k] / self.total_w).clamp(1e-12, 1.0 - 1e-12);
                let mut start = vec![0.0; d];
                start[0] = stats::logit(share);
                (start, false)
            }
        };
        let r = newton_solve(
            self.design,
            self.values,
            self.weights,
            h,
            pi,
            cur_ready,
            self.total_w,
            &mut self.scratch,
        );
        // Carry the solution forward only from an interior optimum: a
        // quasi-separated fit stops on a diverging likelihood ridge, and
        // resuming that climb at the next threshold would accumulate it
        // across the chain instead of restarting the solve cleanly.
        self.chain = match r.status {
            ColumnStatus::Converged { .. }
                if r.coef.iter().fold(0.0f64, |m, c| m.max(c.abs())) <= SEPARATION_NORM / 2.0 =>
            {
                Some(Chain { k, coef: r.coef.clone(), status: r.status })
            }
            _ => None,
        };
        r
    }
}

/// Fits the full distribution regression over `grid`.
///
/// `names` label design columns in rank-deficiency errors. The design must
/// have full column rank on the given rows; thresholds where the indicator is
/// constant are flagged and clamped rather than solved.
pub fn fit_dr(
    design: &Matrix,
    values: &[f64],
    weights: &[f64],
    grid: &[f64],
    names: &[String],
    context: &str,
) -> Result<DrFit> {
    let n = design.rows();
    if n != values.len() || n != weights.len() {
        return Err(Error::Invalid(format!(
            "{context}: design/values/weights length mismatch"
        )));
    }
    if grid.is_empty() {
        return Err(Error::Invalid(format!("{context}: empty threshold grid")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(format!(
            "{context}: threshold grid must be strictly increasing"
        )));
    }
    stats::check_full_rank(design, names, context)?;

    let d = design.cols();
    // Shared order statistics: every threshold's indicator count and weighted
    // share come from one binary search instead of a pass over the data.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut prefix_w = vec![0.0; n + 1];
    for (k, &i) in order.iter().enumerate() {
        prefix_w[k + 1] = prefix_w[k] + weights[i];
    }
    let total_w = stats::pairwise_sum(weights);
    let n_blocks = grid.len().div_ceil(WARM_BLOCK);
    // With few distinct design rows (saturated or discrete-covariate bases),
    // the likelihood depends on the data only through per-cell weight totals
    // above and below the threshold, so each solve runs on two pseudo-rows
    // per cell instead of the full sample.
    let cells = stats::row_patterns(design, (n / 8).clamp(1, 256));
    let blocks: Vec<Vec<ThresholdResult>> = if let Some((idx, reps)) = cells {
        fit_dr_cells(
            design,
            values,
            weights,
            grid,
            &order,
            &sorted_values,
            &prefix_w,
            total_w,
            &idx,
            &reps,
        )
    } else {
        exec::map_collect(n_blocks, |b| {
            let lo = b * WARM_BLOCK;
            let hi = (lo + WARM_BLOCK).min(grid.len());
            let mut solver = ThresholdSolver::new(
                design,
                values,
                weights,
                &order,
                &sorted_values,
                &prefix_w,
                total_w,
            );
            grid[lo..hi].iter().map(|&h| solver.fit(h)).collect()
        })
    };
    let mut coef = Matrix::zeros(grid.len(), d);
    let mut status = Vec::with_capacity(grid.len());
    for (k, r) in blocks.into_iter().flatten().enumerate() {
        coef.row_mut(k).copy_from_slice(&r.coef);
        status.push(r.status);
    }
    Ok(DrFit {
        thresholds: grid.to_vec(),
        coef,
        status,
        rearranged: false,
    })
}

/// Threshold fits for a design with few distinct rows. The weighted logistic
/// likelihood is a function of each distinct row's weight mass with indicator
/// one and zero, so every solve collapses to a two-pseudo-row-per-cell
/// problem: the even pseudo-row of a cell carries the cell's weight at or
/// below the threshold (indicator one), the odd row the remainder.
#[allow(clippy::too_many_arguments)]
fn fit_dr_cells(
    design: &Matrix,
    values: &[f64],
    weights: &[f64],
    grid: &[f64],
    order: &[usize],
    sorted_values: &[f64],
    prefix_w: &[f64],
    total_w: f64,
    idx: &[usize],
    reps: &[usize],
) -> Vec<Vec<ThresholdResult>> {
    let n = values.len();
    let d = design.cols();
    let p = reps.len();
    // Per-cell ascending values and cumulative weights, split out of the
    // global value order so the per-cell order is deterministic.
    let mut cell_vals: Vec<Vec<f64>> = vec![Vec::new(); p];
    let mut cell_prefix: Vec<Vec<f64>> = vec![vec![0.0]; p];
    for &i in order {
        let c = idx[i];
        cell_vals[c].push(values[i]);
        let last = *cell_prefix[c].last().expect("prefix starts non-empty");
        cell_prefix[c].push(last + weights[i]);
    }
    let mut pseudo_design = Matrix::zeros(2 * p, d);
    for (c, &r) in reps.iter().enumerate() {
        pseudo_design.row_mut(2 * c).copy_from_slice(design.row(r));
        pseudo_design.row_mut(2 * c + 1).copy_from_slice(design.row(r));
    }
    // Fixed pseudo outcome against a fixed threshold of 0.5: even rows get
    // indicator one, odd rows zero.
    let pseudo_values: Vec<f64> = (0..2 * p).map(|j| (j % 2) as f64).collect();
    let n_blocks = grid.len().div_ceil(WARM_BLOCK);
    exec::map_collect(n_blocks, |b| {
        let lo = b * WARM_BLOCK;
        let hi = (lo + WARM_BLOCK).min(grid.len());
        let mut scratch = NewtonScratch::new(d);
        let mut pseudo_w = vec![0.0; 2 * p];
        let mut out = Vec::with_capacity(hi - lo);
        let mut warm: Option<Chain> = None;
        for &h in &grid[lo..hi] {
            let k = sorted_values.partition_point(|v| *v <= h);
            if k == 0 {
                warm = None;
                out.push(ThresholdResult { coef: vec![0.0; d], status: ColumnStatus::AllZero });
                continue;
            }
            if k == n {
                warm = None;
                out.push(ThresholdResult { coef: vec![0.0; d], status: ColumnStatus::AllOne });
                continue;
            }
            if let Some(chain) = &warm {
                if chain.k == k {
                    // Identical indicator vector, identical objective.
                    out.push(ThresholdResult { coef: chain.coef.clone(), status: chain.status });
                    continue;
                }
            }
            for c in 0..p {
                let kc = cell_vals[c].partition_point(|v| *v <= h);
                let w1 = cell_prefix[c][kc];
                let w_total = *cell_prefix[c].last().expect("prefix non-empty");
                pseudo_w[2 * c] = w1;
                pseudo_w[2 * c + 1] = w_total - w1;
            }
            let pi = match &warm {
                Some(chain) => chain.coef.clone(),
                None => {
                    let share = (prefix_w[k] / total_w).clamp(1e-12, 1.0 - 1e-12);
                    let mut start = vec![0.0; d];
                    start[0] = stats::logit(share);
                    start
                }
            };
            let r = newton_solve(
                &pseudo_design,
                &pseudo_values,
                &pseudo_w,
                0.5,
                pi,
                false,
                total_w,
                &mut scratch,
            );
            warm = match r.status {
                ColumnStatus::Converged { .. }
                    if r.coef.iter().fold(0.0f64, |m, c| m.max(c.abs()))
                        <= SEPARATION_NORM / 2.0 =>
                {
                    Some(Chain { k, coef: r.coef.clone(), status: r.status })
                }
                _ => None,
            };
            out.push(r);
        }
        out
    })
}

impl DrFit {
    pub fn d(&self) -> usize {
        self.coef.cols()
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Marks the fit for monotone rearrangement: every predicted probability
    /// sequence is replaced by its sorted version at prediction time.
    pub fn into_rearranged(mut self) -> DrFit {
        self.rearranged = true;
        self
    }

    /// Predicted probability sequence over all thresholds for one design row,
    /// written into `out` (sorted ascending when the fit is rearranged).
    pub fn predict_curve_into(&self, row: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.reserve(self.len());
        for k in 0..self.len() {
            let p = match self.status[k] {
                ColumnStatus::AllZero => 0.0,
                ColumnStatus::AllOne => 1.0,
                _ => stats::logistic(stats::dot(row, self.coef.row(k))),
            };
            out.push(p);
        }
        if self.rearranged {
            out.sort_unstable_by(f64::total_cmp);
        }
    }

    pub fn predict_curve(&self, row: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        self.predict_curve_into(row, &mut out);
        out
    }

    /// Smallest predicted probability across thresholds for one row; equals
    /// the first point of the rearranged curve without sorting it.
    pub fn predict_min(&self, row: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for k in 0..self.len() {
            let p = match self.status[k] {
                ColumnStatus::AllZero => 0.0,
                ColumnStatus::AllOne => 1.0,
                _ => stats::logistic(stats::dot(row, self.coef.row(k))),
            };
            if p < best {
                best = p;
            }
        }
        best
    }

    /// Index of the largest threshold <= value, or None below the grid.
    pub fn cell_of(&self, value: f64) -> Option<usize> {
        let k = self.thresholds.partition_point(|t| *t <= value);
        k.checked_sub(1)
    }

    /// Predicted CDF at one value: the curve at the largest threshold not
    /// exceeding it, 0 below the grid (and the top-of-grid value above it,
    /// which is 1 whenever the top threshold is the sample maximum).
    pub fn predict_cdf(&self, row: &[f64], value: f64) -> f64 {
        match self.cell_of(value) {
            None => 0.0,
            Some(k) => {
                let curve = self.predict_curve(row);
                curve[k]
            }
        }
    }

    /// Serializes thresholds, statuses and coefficients as CSV (used for the
    /// on-disk fit cache). The rearrangement flag is not stored; it is a
    /// prediction-time property re-applied on load.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let d = self.d();
        let mut header = vec!["threshold".to_string(), "status".to_string()];
        header.extend((0..d).map(|j| format!("c{j}")));
        wtr.write_record(&header)?;
        for k in 0..self.len() {
            let status = match self.status[k] {
                ColumnStatus::Converged { iters } => format!("converged:{iters}"),
                ColumnStatus::MaxIter => "maxiter".to_string(),
                ColumnStatus::AllZero => "allzero".to_string(),
                ColumnStatus::AllOne => "allone".to_string(),
                ColumnStatus::Separated => "separated".to_string(),
            };
            let mut rec = vec![format!("{}", self.thresholds[k]), status];
            rec.extend(self.coef.row(k).iter().map(|c| format!("{c}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(reader: R) -> Result<DrFit> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let d = rdr.headers()?.len().saturating_sub(2);
        let mut thresholds = Vec::new();
        let mut status = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let t: f64 = rec
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Invalid("bad fit cache: threshold".into()))?;
            let st = match rec.get(1).unwrap_or("") {
                "maxiter" => ColumnStatus::MaxIter,
                "allzero" => ColumnStatus::AllZero,
                "allone" => ColumnStatus::AllOne,
                "separated" => ColumnStatus::Separated,
                s if s.starts_with("converged:") => ColumnStatus::Converged {
                    iters: s["converged:".len()..].parse().unwrap_or(0),
                },
                s => {
                    return Err(Error::Invalid(format!("bad fit cache: status `{s}`")));
                }
            };
            let mut coef = Vec::with_capacity(d);
            for j in 0..d {
                let c: f64 = rec
                    .get(2 + j)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Invalid("bad fit cache: coefficient".into()))?;
                coef.push(c);
            }
            thresholds.push(t);
            status.push(st);
            rows.push(coef);
        }
        Ok(DrFit {
            thresholds,
            coef: Matrix::from_rows(&rows),
            status,
            rearranged: false,
        })
    }
}

/// The sorted positive outcome values of a fitted year, with each value's
/// predecessor mapped to its grid cell. This is the integration mesh for
/// conditional quantiles.
#[derive(Debug, Clone)]
pub struct HoursSupport {
    /// Distinct positive outcome values, ascending.
    pub values: Vec<f64>,
    /// prev_cell[j] = grid cell of values[j-1] (of 0 for j = 0).
    prev_cell: Vec<usize>,
}

impl HoursSupport {
    pub fn new(fit: &DrFit, positive_values: &[f64]) -> HoursSupport {
        let mut values: Vec<f64> = positive_values
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .collect();
        values.sort_unstable_by(f64::total_cmp);
        values.dedup();
        let mut prev_cell = Vec::with_capacity(values.len());
        let mut prev = 0.0;
        for &v in &values {
            prev_cell.push(fit.cell_of(prev).expect("grid starts at 0"));
            prev = v;
        }
        HoursSupport { values, prev_cell }
    }

    pub fn max_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Generalized-inverse conditional quantile from a precomputed (rearranged)
/// curve: the exact integral over h >= 0 of 1{predicted CDF(h) <= v}, which
/// accumulates the gaps between consecutive observed values while the CDF at
/// the left end of each gap is still below v. Returns 0 when v is below the
/// predicted CDF at 0 and caps at the largest observed value.
pub fn quantile_from_curve(curve: &[f64], v: f64, support: &HoursSupport) -> f64 {
    let n = support.values.len();
    let mut lo = 0usize;
    let mut hi = n;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if curve[support.prev_cell[mid]] <= v {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    if lo == 0 {
        0.0
    } else {
        support.values[lo - 1]
    }
}

/// Conditional quantile of the outcome at probability `v` for one design row.
/// Requires a rearranged fit (the integral needs a monotone predicted CDF).
pub fn conditional_quantile(
    fit: &DrFit,
    row: &[f64],
    v: f64,
    support: &HoursSupport,
) -> Result<f64> {
    if !(0.0 < v && v < 1.0) {
        return Err(Error::Invalid(format!(
            "conditional quantile probability {v} outside (0, 1)"
        )));
    }
    if !fit.rearranged {
        return Err(Error::Invalid(
            "conditional quantile requires a rearranged fit".into(),
        ));
    }
    let curve = fit.predict_curve(row);
    Ok(quantile_from_curve(&curve, v, support))
}
