//! Gauss-Legendre rules and an adaptive panel integrator for complex-valued
//! integrands of a real parameter.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Newton iteration on P_n from the Tricomi initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussRule { nodes, weights }
    }

    /// Applies the rule on [a, b]. Nodes are visited in increasing order.
    pub fn integrate<F>(&self, a: f64, b: f64, mut f: F) -> Result<Complex64>
    where
        F: FnMut(f64) -> Result<Complex64>,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += f(mid + half * x)? * *w;
        }
        Ok(acc * half)
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub fn gauss8() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(8))
}

pub fn gauss16() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(16))
}

pub fn gauss32() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(32))
}

/// Settings for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    /// Absolute error target for the whole interval.
    pub abs_tol: f64,
    /// Relative error target, against the running magnitude of the result.
    pub rel_tol: f64,
    pub max_depth: u32,
    pub max_panels: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Adaptive {
            abs_tol: 1e-12,
            rel_tol: 1e-13,
            max_depth: 40,
            max_panels: 20_000,
        }
    }
}

/// Adaptive Gauss-Legendre on [a, b].
///
/// Each panel is integrated with the 32-point rule and checked against the
/// 16-point rule; failing panels are bisected. Panels are processed depth
/// first from left to right, so an integrand that carries a branch state
/// sees its arguments in essentially increasing order.
pub fn integrate_adaptive<F>(a: f64, b: f64, opts: Adaptive, mut f: F) -> Result<Complex64>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    if a == b {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let total = (b - a).abs();
    let mut panels = 0usize;
    let mut stack = vec![(a, b, 0u32)];
    let mut acc = Complex64::new(0.0, 0.0);
    while let Some((lo, hi, depth)) = stack.pop() {
        panels += 1;
        if panels > opts.max_panels {
            return Err(Error::NoConvergence(format!(
                "adaptive quadrature exceeded {} panels on [{a}, {b}]",
                opts.max_panels
            )));
        }
        let fine = gauss32().integrate(lo, hi, &mut f)?;
        let coarse = gauss16().integrate(lo, hi, &mut f)?;
        let err = (fine - coarse).norm();
        let share = (hi - lo).abs() / total;
        let allowed = (opts.abs_tol * share).max(opts.rel_tol * (acc + fine).norm() * share);
        if err <= allowed || depth >= opts.max_depth {
            // panels this narrow are at the rounding floor of the rules
            let floor = 1e3 * f64::EPSILON * fine.norm().max(coarse.norm());
            if depth >= opts.max_depth && err > allowed.max(floor) {
                return Err(Error::NoConvergence(format!(
                    "adaptive quadrature hit depth {} near [{lo}, {hi}]",
                    opts.max_depth
                )));
            }
            acc += fine;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Ok(acc)
}
