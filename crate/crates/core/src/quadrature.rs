//! Adaptive Gauss–Legendre quadrature with interval bisection.

use std::f64::consts::PI;
use std::sync::OnceLock;

use thiserror::Error;

/// Points of the fixed rule applied on every subinterval.
pub const RULE_POINTS: usize = 10;
pub const DEFAULT_QTOL: f64 = 1e-10;
pub const DEFAULT_MAX_DEPTH: u32 = 40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("quadrature did not converge on [{a}, {b}] after {max_depth} bisections")]
    NonConvergence { a: f64, b: f64, max_depth: u32 },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Applies the rule on `[a, b]`, returning the integral of `f` and of `|f|`.
    fn apply<F>(&self, f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadratureError>
    where
        F: Fn(f64) -> f64,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = 0.0;
        let mut abs_sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let xi = mid + half * x;
            let v = f(xi);
            if !v.is_finite() {
                return Err(QuadratureError::NonFinite { x: xi });
            }
            sum += w * v;
            abs_sum += w * v.abs();
        }
        Ok((half * sum, half.abs() * abs_sum))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn default_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(RULE_POINTS))
}

/// Integrates `f` over `[a, b]` to relative tolerance `rtol`.
///
/// The error estimate on each panel is the difference between the rule on the
/// panel and the rule on its two halves. Tolerance is measured against the
/// integral of `|f|`, so cancelling integrands do not force endless refinement.
pub fn integrate<F>(f: F, a: f64, b: f64, rtol: f64, max_depth: u32) -> Result<f64, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let rule = default_rule();
    let (whole, whole_abs) = rule.apply(&f, a, b)?;
    // Stack of (a, b, estimate, abs_estimate, depth).
    let mut stack = vec![(a, b, whole, whole_abs, 0u32)];
    let scale = whole_abs;
    let mut total = 0.0;
    let mut compensation = 0.0;
    while let Some((lo, hi, estimate, estimate_abs, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let (left, left_abs) = rule.apply(&f, lo, mid)?;
        let (right, right_abs) = rule.apply(&f, mid, hi)?;
        let refined = left + right;
        let refined_abs = left_abs + right_abs;
        let width_fraction = ((hi - lo) / (b - a)).abs();
        // sqrt-width budget: panels shrinking onto an endpoint singularity
        // still terminate, and the error sum stays geometric.
        let allowed = rtol * scale.max(refined_abs).max(estimate_abs) * width_fraction.sqrt();
        let err = (refined - estimate).abs();
        if err <= allowed || err <= 1e-300 {
            // Kahan sum keeps accumulation error below the tolerance.
            let y = refined - compensation;
            let t = total + y;
            compensation = (t - total) - y;
            total = t;
        } else if depth >= max_depth {
            return Err(QuadratureError::NonConvergence { a: lo, b: hi, max_depth });
        } else {
            stack.push((mid, hi, right, right_abs, depth + 1));
            stack.push((lo, mid, left, left_abs, depth + 1));
        }
    }
    Ok(total)
}
