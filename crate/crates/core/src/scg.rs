//! Scaled conjugate gradients (Møller, 1993).
//!
//! Conjugate directions with a Levenberg-Marquardt style scale `lambda` in
//! place of a line search; curvature along the search direction comes from
//! a finite difference of gradients. The public entry point maximises; the
//! iteration itself minimises the negated objective.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// A scalar function with gradient over flat vectors.
pub trait Objective {
    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        (self.value(x), self.gradient(x))
    }
}

/// [`Objective`] from a pair of closures.
pub struct FnObjective<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScgOptions {
    pub max_iters: usize,
    /// Stop once the gradient's Euclidean norm falls below this.
    pub grad_tol: f64,
    pub sigma0: f64,
    pub lambda0: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Consecutive rejected steps with a non-finite objective before giving up.
    pub max_nonfinite: usize,
}

impl Default for ScgOptions {
    fn default() -> Self {
        ScgOptions {
            max_iters: 1000,
            grad_tol: 1e-8,
            sigma0: 1e-4,
            lambda0: 1e-6,
            lambda_min: 1e-15,
            lambda_max: 1e15,
            max_nonfinite: 60,
        }
    }
}

impl ScgOptions {
    pub fn with_iters(max_iters: usize) -> Self {
        ScgOptions {
            max_iters,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    StepUnderflow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScgOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
}

/// Mutable iteration state.
#[derive(Debug, Clone)]
pub struct ScgState {
    pub point: DVector<f64>,
    pub direction: DVector<f64>,
    pub lambda: f64,
    pub success: bool,
    pub iteration: usize,
}

struct Negated<'a, O: ?Sized>(&'a O);

impl<O: Objective + ?Sized> Negated<'_, O> {
    fn g(&self, x: &DVector<f64>) -> DVector<f64> {
        -self.0.gradient(x)
    }
    fn fg(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (f, g) = self.0.value_and_gradient(x);
        (-f, -g)
    }
}

fn finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Maximise `objective` from `start`.
///
/// Accepted iterates never decrease the objective beyond rounding error.
/// Terminates on gradient norm below `grad_tol`, after `max_iters`
/// iterations, or when no further progress is representable.
pub fn scg_maximise<O: Objective + ?Sized>(
    objective: &O,
    start: DVector<f64>,
    opts: &ScgOptions,
) -> Result<ScgOutcome> {
    let obj = Negated(objective);
    let n = start.len();
    let (mut f, mut g) = obj.fg(&start);
    if !f.is_finite() || !finite(&g) {
        return Err(Error::InvalidStart(format!("objective {} at start", -f)));
    }

    let mut st = ScgState {
        direction: -&g,
        point: start,
        lambda: opts.lambda0,
        success: true,
        iteration: 0,
    };
    let mut n_success = 0usize;
    let mut nonfinite = 0usize;
    let mut stalled = 0usize;
    let (mut mu, mut kappa, mut theta) = (0.0, 0.0, 0.0);

    let outcome = |st: &ScgState, f: f64, g: &DVector<f64>, term: Termination| ScgOutcome {
        x: st.point.clone(),
        value: -f,
        gradient_norm: g.norm(),
        iterations: st.iteration,
        converged: term == Termination::GradientTolerance,
        termination: term,
    };

    if n == 0 || g.norm() < opts.grad_tol {
        return Ok(outcome(&st, f, &g, Termination::GradientTolerance));
    }

    while st.iteration < opts.max_iters {
        if st.success {
            mu = st.direction.dot(&g);
            if mu >= 0.0 {
                st.direction = -&g;
                mu = st.direction.dot(&g);
            }
            kappa = st.direction.norm_squared();
            if kappa < f64::EPSILON * f64::EPSILON {
                return Ok(outcome(&st, f, &g, Termination::StepUnderflow));
            }
            let sigma = opts.sigma0 / kappa.sqrt();
            let x_plus = &st.point + &st.direction * sigma;
            let g_plus = obj.g(&x_plus);
            theta = if finite(&g_plus) {
                st.direction.dot(&(g_plus - &g)) / sigma
            } else {
                0.0
            };
        }

        // scaled curvature, forced positive
        let mut delta = theta + st.lambda * kappa;
        if delta <= 0.0 {
            delta = st.lambda * kappa;
            st.lambda -= theta / kappa;
        }
        let alpha = -mu / delta;
        let x_new = &st.point + &st.direction * alpha;
        let (f_new, g_new) = obj.fg(&x_new);
        let mut comparison = 2.0 * (f_new - f) / (alpha * mu);
        // below rounding the value change carries no information, so the
        // gradient decides
        let rounding = 8.0 * f64::EPSILON * f.abs().max(1.0);
        let unresolved = f_new.is_finite() && -alpha * mu <= rounding && (f_new - f).abs() <= rounding;

        let mut accepted = false;
        if f_new.is_finite() && (comparison >= 0.0 || unresolved) {
            if unresolved {
                comparison = if g_new.norm() < g.norm() { 1.0 } else { -1.0 };
            }
            if finite(&g_new) && comparison >= 0.0 {
                accepted = true;
                let step = (&x_new - &st.point).amax();
                let df = (f - f_new).abs();
                let g_old = std::mem::replace(&mut g, g_new);
                st.point = x_new;
                let tiny_step = step <= f64::EPSILON * (1.0 + st.point.amax());
                let tiny_gain = df <= f64::EPSILON * (1.0 + f.abs());
                f = f_new;
                st.iteration += 1;
                n_success += 1;
                nonfinite = 0;
                stalled = if tiny_step && tiny_gain { stalled + 1 } else { 0 };

                if g.norm() < opts.grad_tol {
                    return Ok(outcome(&st, f, &g, Termination::GradientTolerance));
                }
                if stalled >= 3 {
                    return Ok(outcome(&st, f, &g, Termination::StepUnderflow));
                }
                if n_success >= n {
                    st.direction = -&g;
                    n_success = 0;
                } else {
                    let gamma = (g.norm_squared() - g.dot(&g_old)) / (-mu);
                    st.direction = &st.direction * gamma - &g;
                }
            }
        }
        if !accepted {
            st.iteration += 1;
            if !f_new.is_finite() {
                nonfinite += 1;
                if nonfinite > opts.max_nonfinite {
                    return Err(Error::Optimizer(format!(
                        "objective non-finite after {nonfinite} consecutive step reductions"
                    )));
                }
            }
            if st.lambda >= opts.lambda_max && f_new.is_finite() {
                return Ok(outcome(&st, f, &g, Termination::StepUnderflow));
            }
        }
        st.success = accepted;

        if !accepted || comparison < 0.25 {
            // poor quadratic fit: raise the scale towards the observed curvature
            let fit = if comparison.is_finite() { comparison.clamp(-1e6, 0.25) } else { 0.0 };
            let raised = st.lambda + delta * (1.0 - fit) / kappa;
            st.lambda = raised.max(2.0 * st.lambda).min(opts.lambda_max);
        } else if comparison > 0.75 {
            st.lambda = (0.5 * st.lambda).max(opts.lambda_min);
        }
    }
    Ok(outcome(&st, f, &g, Termination::MaxIterations))
}
