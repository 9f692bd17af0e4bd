//! Bound-constrained nonlinear least squares.
//!
//! A trust-region reflective method in the style of Coleman and Li, with the
//! usual three-way step choice (Gauss-Newton/Levenberg-Marquardt step
//! clipped at the boundary, its reflection off the boundary, and a
//! Cauchy-like step along the scaled negative gradient). Iterates stay
//! strictly inside the box; only steps that lower the cost are accepted.
//! The Jacobian is built by forward differences pointing into the box.
//!
//! The cost reported to callers is the plain sum of squared residuals.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqOptions {
    /// Maximum number of accepted or rejected outer iterations.
    pub max_iters: usize,
    /// Stop when the relative cost reduction of a good step falls below this.
    pub cost_tol: f64,
    /// Stop when the step norm falls below `step_tol · (step_tol + ‖x‖)`.
    pub step_tol: f64,
    /// Stop when the scaled gradient's max-norm falls below this.
    pub grad_tol: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            cost_tol: 1e-12,
            step_tol: 1e-10,
            grad_tol: 1e-15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqResult {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub cost: f64,
    /// Sum of squared residuals at the starting point.
    pub initial_cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Axis-aligned box `lower <= x <= upper`; infinite entries are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Contract("bound vectors differ in length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::Contract("each lower bound must be below its upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lower.len()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| v >= l && v <= u)
    }
}

/// Minimize `Σ r(x)²` over the box. `objective` returns the residual
/// vector; non-finite residuals make the trial point count as a failure.
pub fn lsq_minimize<F>(
    mut objective: F,
    x0: &[f64],
    bounds: &Bounds,
    opts: &LsqOptions,
) -> Result<LsqResult>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    if n == 0 {
        return Err(Error::Contract("empty parameter vector".into()));
    }
    if !bounds.contains(x0) {
        return Err(Error::Contract(format!("starting point {x0:?} is outside the bounds")));
    }
    let lb = DVector::from_column_slice(&bounds.lower);
    let ub = DVector::from_column_slice(&bounds.upper);

    let mut x = strictly_feasible_start(&DVector::from_column_slice(x0), &lb, &ub);
    let mut f = DVector::from_vec(objective(x.as_slice()));
    let mut evaluations = 1;
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("residuals are not finite at the starting point".into()));
    }
    let mut cost = 0.5 * f.norm_squared();
    let initial_cost = 2.0 * cost;
    let mut jac = forward_jacobian(&mut objective, &x, &f, &lb, &ub);
    evaluations += n;
    let mut g = jac.tr_mul(&f);

    let (v0, _) = scaling_vector(&x, &g, &lb, &ub);
    let mut delta = x.component_div(&v0.map(f64::sqrt)).norm();
    if delta == 0.0 || !delta.is_finite() {
        delta = 1.0;
    }

    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        let (v, dv) = scaling_vector(&x, &g, &lb, &ub);
        let g_norm = g.component_mul(&v).amax();
        if g_norm < opts.grad_tol {
            converged = true;
            break;
        }

        let d = v.map(f64::sqrt);
        let diag_h = g.component_mul(&dv);
        let g_h = d.component_mul(&g);
        let j_h = &jac * DMatrix::from_diagonal(&d);
        let mut hess = j_h.tr_mul(&j_h);
        for i in 0..n {
            hess[(i, i)] += diag_h[i];
        }
        let eig = SymmetricEigen::new(hess.clone());
        let s2 = eig.eigenvalues.map(|e| e.max(0.0));
        let vg = eig.eigenvectors.tr_mul(&g_h);
        let theta = (1.0 - g_norm).max(0.995);

        let mut actual_reduction = -1.0;
        let mut accepted = None;
        let mut stop = false;
        let mut attempts = 0;
        while actual_reduction <= 0.0 && attempts < 50 {
            attempts += 1;
            let p_h = trust_region_step(&eig.eigenvectors, &s2, &vg, delta);
            let p = d.component_mul(&p_h);
            let (step, step_h, predicted) =
                select_step(&x, &hess, &g_h, p, p_h, &d, delta, &lb, &ub, theta);
            let x_new = strictly_feasible(&(&x + &step), &lb, &ub);
            let f_new = DVector::from_vec(objective(x_new.as_slice()));
            evaluations += 1;
            let step_h_norm = step_h.norm();
            if f_new.iter().any(|v| !v.is_finite()) {
                delta = 0.25 * step_h_norm;
                if delta == 0.0 {
                    break;
                }
                continue;
            }
            let cost_new = 0.5 * f_new.norm_squared();
            actual_reduction = cost - cost_new;

            let ratio = if predicted > 0.0 {
                actual_reduction / predicted
            } else if predicted == actual_reduction {
                1.0
            } else {
                0.0
            };
            let new_delta = if ratio < 0.25 {
                0.25 * step_h_norm
            } else if ratio > 0.75 && step_h_norm > 0.95 * delta {
                2.0 * delta
            } else {
                delta
            };

            let step_norm = step.norm();
            let cost_ok = actual_reduction.abs() < opts.cost_tol * cost && ratio > 0.25;
            let step_ok = step_norm < opts.step_tol * (opts.step_tol + x.norm());
            if cost_ok || step_ok || new_delta == 0.0 {
                stop = true;
            }
            if actual_reduction > 0.0 {
                accepted = Some((x_new, f_new, cost_new));
            }
            delta = new_delta;
            if stop {
                break;
            }
        }

        if let Some((x_new, f_new, cost_new)) = accepted {
            x = x_new;
            f = f_new;
            cost = cost_new;
            if !stop {
                jac = forward_jacobian(&mut objective, &x, &f, &lb, &ub);
                evaluations += n;
                g = jac.tr_mul(&f);
            }
        }
        iterations += 1;
        if stop {
            converged = true;
            break;
        }
        if cost == 0.0 {
            converged = true;
            break;
        }
    }

    Ok(LsqResult {
        x: x.as_slice().to_vec(),
        cost: 2.0 * cost,
        initial_cost,
        iterations,
        evaluations,
        converged,
    })
}

/// Coleman-Li scaling: distance to the bound the gradient points toward.
fn scaling_vector(
    x: &DVector<f64>,
    g: &DVector<f64>,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let n = x.len();
    let mut v = DVector::from_element(n, 1.0);
    let mut dv = DVector::zeros(n);
    for i in 0..n {
        if g[i] < 0.0 && ub[i].is_finite() {
            v[i] = ub[i] - x[i];
            dv[i] = -1.0;
        } else if g[i] > 0.0 && lb[i].is_finite() {
            v[i] = x[i] - lb[i];
            dv[i] = 1.0;
        }
    }
    (v, dv)
}

fn strictly_feasible_start(x: &DVector<f64>, lb: &DVector<f64>, ub: &DVector<f64>) -> DVector<f64> {
    const RSTEP: f64 = 1e-10;
    let mut out = x.clone();
    for i in 0..x.len() {
        if out[i] <= lb[i] {
            out[i] = lb[i] + RSTEP * lb[i].abs().max(1.0);
        } else if out[i] >= ub[i] {
            out[i] = ub[i] - RSTEP * ub[i].abs().max(1.0);
        }
        if !(out[i] > lb[i] && out[i] < ub[i]) {
            out[i] = 0.5 * (lb[i] + ub[i]);
        }
    }
    out
}

fn strictly_feasible(x: &DVector<f64>, lb: &DVector<f64>, ub: &DVector<f64>) -> DVector<f64> {
    let mut out = x.clone();
    for i in 0..x.len() {
        if out[i] <= lb[i] {
            out[i] = lb[i].next_up();
        } else if out[i] >= ub[i] {
            out[i] = ub[i].next_down();
        }
    }
    out
}

fn forward_jacobian<F>(
    objective: &mut F,
    x: &DVector<f64>,
    f: &DVector<f64>,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
) -> DMatrix<f64>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let m = f.len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let mut h = f64::EPSILON.sqrt() * x[j].abs().max(1.0);
        if x[j] + h > ub[j] && x[j] - h >= lb[j] {
            h = -h;
        }
        let mut xp = x.clone();
        xp[j] += h;
        let h_exact = xp[j] - x[j];
        let fp = objective(xp.as_slice());
        for i in 0..m {
            jac[(i, j)] = (fp[i] - f[i]) / h_exact;
        }
    }
    jac
}

/// Solve `min q(p)` subject to `‖p‖ <= delta` for `q` with eigenpairs
/// `(s2, V)` of its Hessian and gradient coordinates `vg = Vᵀg`.
fn trust_region_step(
    v: &DMatrix<f64>,
    s2: &DVector<f64>,
    vg: &DVector<f64>,
    delta: f64,
) -> DVector<f64> {
    let norm_at = |alpha: f64| -> f64 {
        s2.iter()
            .zip(vg.iter())
            .map(|(s, g)| {
                if *g == 0.0 {
                    0.0
                } else {
                    let c = g / (s + alpha);
                    c * c
                }
            })
            .sum::<f64>()
            .sqrt()
    };
    let step_at = |alpha: f64| -> DVector<f64> {
        let coef = DVector::from_iterator(
            s2.len(),
            s2.iter()
                .zip(vg.iter())
                .map(|(s, g)| if *g == 0.0 { 0.0 } else { -g / (s + alpha) }),
        );
        v * coef
    };

    let smax = s2.max();
    let full_rank = s2.min() > f64::EPSILON * smax.max(f64::MIN_POSITIVE);
    if full_rank && norm_at(0.0) <= delta {
        return step_at(0.0);
    }

    // ‖p(α)‖ = Δ by safeguarded Newton on 1/‖p‖ − 1/Δ.
    let mut lo = 0.0;
    let mut hi = vg.norm() / delta;
    let mut alpha = (0.001 * hi).max((lo * hi).sqrt());
    for _ in 0..100 {
        if !(alpha > lo && alpha < hi) {
            alpha = 0.5 * (lo + hi);
        }
        let nrm = norm_at(alpha);
        if (nrm - delta).abs() <= 1e-3 * delta {
            break;
        }
        if nrm > delta {
            lo = alpha;
        } else {
            hi = alpha;
        }
        let dn: f64 = s2
            .iter()
            .zip(vg.iter())
            .map(|(s, g)| g * g / (s + alpha).powi(3))
            .sum();
        let phi = 1.0 / nrm - 1.0 / delta;
        let dphi = dn / (nrm * nrm * nrm);
        alpha -= phi / dphi;
    }
    step_at(alpha)
}

fn quadratic_value(hess: &DMatrix<f64>, g: &DVector<f64>, s: &DVector<f64>) -> f64 {
    0.5 * s.dot(&(hess * s)) + g.dot(s)
}

/// Largest `t` with `x + t s` inside the box, and which bounds are hit.
fn step_to_bound(
    x: &DVector<f64>,
    s: &DVector<f64>,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
) -> (f64, Vec<bool>) {
    let n = x.len();
    let steps: Vec<f64> = (0..n)
        .map(|i| {
            if s[i] == 0.0 {
                f64::INFINITY
            } else {
                ((lb[i] - x[i]) / s[i]).max((ub[i] - x[i]) / s[i])
            }
        })
        .collect();
    let min = steps.iter().copied().fold(f64::INFINITY, f64::min);
    let hits = steps.iter().map(|&t| t == min && min.is_finite()).collect();
    (min, hits)
}

/// Positive `t` with `‖z + t s‖ = delta`.
fn to_trust_region(z: &DVector<f64>, s: &DVector<f64>, delta: f64) -> f64 {
    let a = s.dot(s);
    if a == 0.0 {
        return f64::INFINITY;
    }
    let b = z.dot(s);
    let c = z.dot(z) - delta * delta;
    let disc = (b * b - a * c).max(0.0).sqrt();
    (-b + disc) / a
}

/// Minimize `a t² + b t + c` over `[lo, hi]`.
fn minimize_quadratic_1d(a: f64, b: f64, c: f64, lo: f64, hi: f64) -> (f64, f64) {
    let f = |t: f64| a * t * t + b * t + c;
    let mut best = (lo, f(lo));
    let fh = f(hi);
    if fh < best.1 {
        best = (hi, fh);
    }
    if a != 0.0 {
        let t = -0.5 * b / a;
        if t > lo && t < hi {
            let ft = f(t);
            if ft < best.1 {
                best = (t, ft);
            }
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn select_step(
    x: &DVector<f64>,
    hess: &DMatrix<f64>,
    g_h: &DVector<f64>,
    mut p: DVector<f64>,
    mut p_h: DVector<f64>,
    d: &DVector<f64>,
    delta: f64,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
    theta: f64,
) -> (DVector<f64>, DVector<f64>, f64) {
    let trial = x + &p;
    if (0..x.len()).all(|i| trial[i] >= lb[i] && trial[i] <= ub[i]) {
        let value = quadratic_value(hess, g_h, &p_h);
        return (p, p_h, -value);
    }

    // Reflected step: bounce off the first bound the full step hits.
    let (p_stride, hits) = step_to_bound(x, &p, lb, ub);
    let mut r_h = p_h.clone();
    for (i, hit) in hits.iter().enumerate() {
        if *hit {
            r_h[i] = -r_h[i];
        }
    }
    let r = d.component_mul(&r_h);
    p *= p_stride;
    p_h *= p_stride;
    let x_on_bound = x + &p;
    let to_tr = to_trust_region(&p_h, &r_h, delta);
    let (to_bound, _) = step_to_bound(&x_on_bound, &r, lb, ub);
    let r_stride = to_bound.min(to_tr);
    let (r_lo, r_hi) = if r_stride > 0.0 {
        let hi = if r_stride == to_bound { theta * to_bound } else { to_tr };
        ((1.0 - theta) * p_stride / r_stride, hi)
    } else {
        (0.0, -1.0)
    };
    let (r_step, r_step_h, r_value) = if r_lo <= r_hi {
        let hr = hess * &r_h;
        let a = 0.5 * r_h.dot(&hr);
        let b = g_h.dot(&r_h) + p_h.dot(&hr);
        let c = quadratic_value(hess, g_h, &p_h);
        let (t, value) = minimize_quadratic_1d(a, b, c, r_lo, r_hi);
        let step_h = &p_h + &r_h * t;
        (d.component_mul(&step_h), step_h, value)
    } else {
        (p.clone(), p_h.clone(), f64::INFINITY)
    };

    // Step to the bound, pulled back slightly.
    p *= theta;
    p_h *= theta;
    let p_value = quadratic_value(hess, g_h, &p_h);

    // Scaled steepest descent.
    let ag_h = -g_h;
    let ag = d.component_mul(&ag_h);
    let ag_norm = ag_h.norm();
    let to_tr = if ag_norm > 0.0 { delta / ag_norm } else { 0.0 };
    let (to_bound, _) = step_to_bound(x, &ag, lb, ub);
    let ag_max = if to_bound < to_tr { theta * to_bound } else { to_tr };
    let hg = hess * &ag_h;
    let (t, ag_value) = minimize_quadratic_1d(0.5 * ag_h.dot(&hg), g_h.dot(&ag_h), 0.0, 0.0, ag_max);
    let ag_step_h = ag_h * t;
    let ag_step = ag * t;

    if p_value < r_value && p_value < ag_value {
        (p, p_h, -p_value)
    } else if r_value < p_value && r_value < ag_value {
        (r_step, r_step_h, -r_value)
    } else {
        (ag_step, ag_step_h, -ag_value)
    }
}
