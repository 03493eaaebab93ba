//! The polynomial eigenproblem
//! `-4z q'' + (4z^2 + 2γ√m z - 2) q' - (4mz - γ√m/2) q = λ q`
//! on polynomials of degree `≤ m`, its eigenpolynomials and their roots.

use num_complex::Complex64;

use crate::algebra::{eig_tridiagonal, poly_roots, sort_lex, Poly, TriMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralProblem {
    pub m: usize,
    pub gamma: f64,
}

impl SpectralProblem {
    pub fn new(m: usize, gamma: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::Domain("m must be at least 1".into()));
        }
        if !gamma.is_finite() {
            return Err(Error::Domain("γ must be finite".into()));
        }
        Ok(SpectralProblem { m, gamma })
    }

    fn g(&self) -> f64 {
        self.gamma * (self.m as f64).sqrt()
    }
}

/// Matrix of the operator in the monomial basis `1, z, …, z^m`, acting on
/// coefficient vectors.
pub fn operator_matrix(p: &SpectralProblem) -> TriMatrix {
    let m = p.m;
    let mf = m as f64;
    let g = p.g();
    let diag = (0..=m)
        .map(|k| Complex64::new(g * (2.0 * k as f64 + 0.5), 0.0))
        .collect();
    // z^k feeds z^(k+1) with 4k - 4m and z^(k-1) with -2k(2k-1)
    let sub = (1..=m)
        .map(|k| Complex64::new(4.0 * (k as f64 - 1.0) - 4.0 * mf, 0.0))
        .collect();
    let sup = (0..m)
        .map(|k| {
            let k1 = (k + 1) as f64;
            Complex64::new(-2.0 * k1 * (2.0 * k1 - 1.0), 0.0)
        })
        .collect();
    TriMatrix::new(sub, diag, sup).expect("shapes are consistent by construction")
}

/// Applies the differential operator to `q` by exact polynomial
/// differentiation, returning the coefficients of degree up to `deg q + 1`.
pub fn apply_operator(p: &SpectralProblem, q: &Poly) -> Poly {
    let g = Complex64::new(p.g(), 0.0);
    let mf = Complex64::new(p.m as f64, 0.0);
    let z = Poly::z();
    let d1 = q.derivative();
    let d2 = d1.derivative();
    let c = |v: f64| Poly::constant(Complex64::new(v, 0.0));
    let t2 = &(&c(-4.0) * &z) * &d2;
    let a1 = &(&(&c(4.0) * &(&z * &z)) + &(&Poly::constant(g * 2.0) * &z)) - &c(2.0);
    let t1 = &a1 * &d1;
    let a0 = &(&Poly::constant(mf * 4.0) * &z) - &Poly::constant(g * 0.5);
    let t0 = &a0 * q;
    &(&t2 + &t1) - &t0
}

#[derive(Debug, Clone)]
pub struct SpectralSolution {
    pub problem: SpectralProblem,
    /// Sorted by (real, imag).
    pub eigenvalues: Vec<Complex64>,
    /// `eigenpolys[k]` belongs to `eigenvalues[k]`: the eigenvector read as
    /// monomial coefficients, normalized monic.
    pub eigenpolys: Vec<Poly>,
    pub roots: Vec<Vec<Complex64>>,
    /// False where the root set could not be matched to its eigenvalue
    /// through `λ = γ√m(2m + 1/2) + 4 Σ r_i`.
    pub roots_matched: Vec<bool>,
    pub defective: bool,
    /// Largest relative eigen residual.
    pub max_residual: f64,
}

impl SpectralSolution {
    /// Index of the eigenvalue with the largest real part.
    pub fn extremal_index(&self) -> usize {
        self.eigenvalues.len() - 1
    }
}

/// `γ√m(2m + 1/2) + 4 Σ r_i`: the `z^m` coefficient of the eigen-equation
/// read for a monic polynomial with the given roots.
pub fn eigenvalue_from_roots(p: &SpectralProblem, roots: &[Complex64]) -> Complex64 {
    let s: Complex64 = roots.iter().sum();
    Complex64::new(p.g() * (2.0 * p.m as f64 + 0.5), 0.0) + 4.0 * s
}

pub fn spectrum(p: &SpectralProblem) -> Result<SpectralSolution> {
    let mat = operator_matrix(p);
    let eig = eig_tridiagonal(&mat)?;
    let n = eig.values.len();
    let tol = 1e-9 * mat.norm();
    let mut eigenpolys = Vec::with_capacity(n);
    let mut roots = vec![Vec::new(); n];
    let mut matched = vec![false; n];
    for v in &eig.vectors {
        let mut poly = Poly::new(v.clone());
        if !poly.is_zero() && poly.degree() > 0 {
            poly = poly.monic()?;
        }
        eigenpolys.push(poly);
    }
    // one real root configuration per count of negative roots
    for n_neg in 0..=p.m {
        let Ok(r) = stieltjes_roots(p, n_neg) else { continue };
        let rc: Vec<Complex64> = r.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let lam = eigenvalue_from_roots(p, &rc);
        let (k, d) = eig
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| (k, (v - lam).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if d <= tol && !matched[k] {
            roots[k] = rc;
            matched[k] = true;
        }
    }
    for k in 0..n {
        if matched[k] {
            continue;
        }
        let poly = &eigenpolys[k];
        if poly.degree() == 0 {
            matched[k] = true;
            continue;
        }
        let mut r = polish_roots(p, &poly_roots(poly)?);
        sort_lex(&mut r);
        matched[k] = (eigenvalue_from_roots(p, &r) - eig.values[k]).norm() <= tol;
        roots[k] = r;
    }
    Ok(SpectralSolution {
        problem: *p,
        eigenvalues: eig.values,
        eigenpolys,
        roots,
        roots_matched: matched,
        defective: eig.defective,
        max_residual: eig.max_residual,
    })
}

/// Real roots with `n_neg` of them negative, as the minimizer of
/// `Φ(r) = -Σ_{i<j} log|r_i - r_j| + Σ (r_i^2/4 + γ√m r_i/4 - log|r_i|/4)`,
/// whose critical points are exactly the root equations
/// `Σ_{j≠i} 1/(r_i - r_j) = r_i/2 + γ√m/4 - 1/(4 r_i)`.
/// `Φ` is strictly convex on each cell of fixed ordering and signs, so damped
/// Newton started inside the cell finds its unique critical point.
pub fn stieltjes_roots(p: &SpectralProblem, n_neg: usize) -> Result<Vec<f64>> {
    let m = p.m;
    if n_neg > m {
        return Err(Error::Domain("more negative roots than the degree".into()));
    }
    let g = p.g();
    let h = 2.0 * (m as f64).sqrt() / (m as f64 + 1.0);
    let mut r: Vec<f64> = (0..m)
        .map(|i| {
            if i < n_neg {
                -h * (n_neg - i) as f64
            } else {
                h * (i - n_neg + 1) as f64
            }
        })
        .collect();
    let phi = |r: &[f64]| -> f64 {
        let mut v = 0.0;
        for i in 0..r.len() {
            for j in i + 1..r.len() {
                v -= (r[j] - r[i]).abs().ln();
            }
            v += r[i] * r[i] / 4.0 + g * r[i] / 4.0 - r[i].abs().ln() / 4.0;
        }
        v
    };
    let in_cell = |r: &[f64]| -> bool {
        r.windows(2).all(|w| w[0] < w[1]) && (n_neg == 0 || r[n_neg - 1] < 0.0) && (n_neg == m || r[n_neg] > 0.0)
    };
    let mut f = phi(&r);
    for _ in 0..200 {
        let mut grad = vec![0.0; m];
        let mut hess = vec![vec![Complex64::new(0.0, 0.0); m]; m];
        for i in 0..m {
            let mut s = 0.0;
            let mut s2 = 0.0;
            for j in 0..m {
                if j != i {
                    let d = 1.0 / (r[i] - r[j]);
                    s += d;
                    s2 += d * d;
                    hess[i][j] = Complex64::new(-d * d, 0.0);
                }
            }
            grad[i] = -s + r[i] / 2.0 + g / 4.0 - 1.0 / (4.0 * r[i]);
            hess[i][i] = Complex64::new(s2 + 0.5 + 1.0 / (4.0 * r[i] * r[i]), 0.0);
        }
        let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = r.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
        if gnorm <= 1e-13 * (m as f64) / scale {
            return Ok(r);
        }
        let step = solve_dense(hess, grad.iter().map(|v| Complex64::new(-v, 0.0)).collect())
            .ok_or_else(|| Error::NoConvergence("singular Hessian".into()))?;
        let snorm = step.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if snorm <= 1e-14 * scale {
            let last: Vec<f64> = r.iter().zip(&step).map(|(a, b)| a + b.re).collect();
            if in_cell(&last) {
                return Ok(last);
            }
            return Ok(r);
        }
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = r.iter().zip(&step).map(|(a, b)| a + t * b.re).collect();
            if in_cell(&trial) {
                let ft = phi(&trial);
                // near the minimum Φ is flat to rounding; the gradient decides
                if ft <= f + 1e-4 * t * grad.iter().zip(&step).map(|(a, b)| a * b.re).sum::<f64>()
                    || gradient_norm(&trial, g) < 0.5 * gnorm
                {
                    r = trial;
                    f = ft;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            // at the rounding floor of Φ: accept if the Newton step is small
            if snorm <= 1e-10 * scale {
                return Ok(r);
            }
            return Err(Error::NoConvergence("line search failed".into()));
        }
    }
    Err(Error::NoConvergence("Newton iteration cap".into()))
}

fn gradient_norm(r: &[f64], g: f64) -> f64 {
    (0..r.len())
        .map(|i| {
            let s: f64 = (0..r.len()).filter(|&j| j != i).map(|j| 1.0 / (r[i] - r[j])).sum();
            let v = -s + r[i] / 2.0 + g / 4.0 - 1.0 / (4.0 * r[i]);
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// Newton on the root equations
/// `-8 r_i Σ_{j≠i} 1/(r_i - r_j) + 4r_i^2 + 2γ√m r_i - 2 = 0`
/// from roots of the coefficient vector. Falls back to the input if the
/// residual does not drop.
fn polish_roots(p: &SpectralProblem, start: &[Complex64]) -> Vec<Complex64> {
    if start.len() < 2 {
        return start.to_vec();
    }
    let g = p.g();
    let f = |r: &[Complex64]| -> Vec<Complex64> {
        (0..r.len())
            .map(|i| {
                let s: Complex64 = (0..r.len()).filter(|&j| j != i).map(|j| (r[i] - r[j]).inv()).sum();
                -8.0 * r[i] * s + 4.0 * r[i] * r[i] + 2.0 * g * r[i] - 2.0
            })
            .collect()
    };
    let norm = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let mut r = start.to_vec();
    let mut fr = f(&r);
    let n = r.len();
    for _ in 0..30 {
        let mut jac = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            let mut s2 = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    let d = (r[i] - r[j]).inv();
                    s += d;
                    s2 += d * d;
                    jac[i][j] = -8.0 * r[i] * d * d;
                }
            }
            jac[i][i] = -8.0 * s + 8.0 * r[i] * s2 + 8.0 * r[i] + 2.0 * g;
        }
        let Some(step) = solve_dense(jac, fr.iter().map(|v| -v).collect()) else {
            break;
        };
        let trial: Vec<Complex64> = r.iter().zip(&step).map(|(a, b)| a + b).collect();
        let ft = f(&trial);
        if norm(&ft) >= norm(&fr) {
            break;
        }
        let small = norm(&step) <= 1e-15 * norm(&trial);
        r = trial;
        fr = ft;
        if small {
            break;
        }
    }
    r
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        if a[piv][col].norm() == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f.norm() == 0.0 {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x.iter().all(|c| c.is_finite()).then_some(x)
}

/// `4zmC^2 - (4z^2 + 2γ√m z - 2)C + (4mz - γ√m/2 + λ)/m + 4zC'` with
/// `C = q'/(mq)`, together with the sum of the magnitudes of its terms.
pub fn riccati_residual_scaled(
    q: &Poly,
    p: &SpectralProblem,
    lambda: Complex64,
    z: Complex64,
) -> Result<(Complex64, f64)> {
    let (v, d1, d2) = q.eval_with_derivs(z);
    if v.norm() == 0.0 {
        return Err(Error::Domain(format!("{z} is a root of the eigenpolynomial")));
    }
    let mf = p.m as f64;
    let g = p.g();
    let c = d1 / (mf * v);
    // C' = q''/(mq) - m C^2
    let cp = d2 / (mf * v) - mf * c * c;
    let terms = [
        4.0 * z * mf * c * c,
        -(4.0 * z * z + 2.0 * g * z - 2.0) * c,
        (4.0 * mf * z - g / 2.0 + lambda) / mf,
        4.0 * z * cp,
    ];
    let res: Complex64 = terms.iter().sum();
    let scale = terms.iter().map(|t| t.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
    Ok((res, scale))
}

pub fn riccati_residual(q: &Poly, p: &SpectralProblem, lambda: Complex64, z: Complex64) -> Result<Complex64> {
    Ok(riccati_residual_scaled(q, p, lambda, z)?.0)
}

/// The same identity with `C = (1/m) Σ 1/(z - r_i)`, which avoids the
/// cancellation of evaluating a high-degree monomial expansion.
pub fn riccati_residual_roots(
    roots: &[Complex64],
    p: &SpectralProblem,
    lambda: Complex64,
    z: Complex64,
) -> Result<(Complex64, f64)> {
    let mf = p.m as f64;
    let g = p.g();
    let mut s1 = Complex64::new(0.0, 0.0);
    let mut s2 = Complex64::new(0.0, 0.0);
    for r in roots {
        let d = z - r;
        if d.norm() == 0.0 {
            return Err(Error::Domain(format!("{z} is a root of the eigenpolynomial")));
        }
        let inv = d.inv();
        s1 += inv;
        s2 += inv * inv;
    }
    let c = s1 / mf;
    let cp = -s2 / mf;
    let terms = [
        4.0 * z * mf * c * c,
        -(4.0 * z * z + 2.0 * g * z - 2.0) * c,
        (4.0 * mf * z - g / 2.0 + lambda) / mf,
        4.0 * z * cp,
    ];
    let res: Complex64 = terms.iter().sum();
    let scale = terms.iter().map(|t| t.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
    Ok((res, scale))
}

#[derive(Debug, Clone)]
pub struct RootMeasure {
    /// Roots divided by `√m`.
    pub points: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub warning: Option<String>,
}

pub fn rescaled_root_measure(sol: &SpectralSolution, k: usize) -> Result<RootMeasure> {
    let roots = sol
        .roots
        .get(k)
        .ok_or_else(|| Error::Domain(format!("eigen index {k} out of range 0..{}", sol.roots.len())))?;
    if roots.is_empty() {
        return Ok(RootMeasure {
            points: Vec::new(),
            weights: Vec::new(),
            warning: Some("constant eigenpolynomial".into()),
        });
    }
    let s = (sol.problem.m as f64).sqrt();
    let n = roots.len() as f64;
    Ok(RootMeasure {
        points: roots.iter().map(|r| r / s).collect(),
        weights: vec![1.0 / n; roots.len()],
        warning: None,
    })
}

/// `P'(z)/(n P(z))`, the Cauchy transform of the root-counting measure.
pub fn cauchy_of_roots(p: &Poly, z: Complex64) -> Result<Complex64> {
    if p.degree() == 0 {
        return Err(Error::Domain("constant polynomial has no roots".into()));
    }
    let (v, d, _) = p.eval_with_derivs(z);
    if v.norm() == 0.0 {
        return Err(Error::Domain(format!("{z} is a root")));
    }
    Ok(d / (p.degree() as f64 * v))
}

/// `δ̂ = λ / m^{3/2}`: the limit of the rescaled equation gives the constant
/// term `z + δ/4` with this normalization.
pub fn delta_hat(lambda: Complex64, m: usize) -> Complex64 {
    lambda / (m as f64).powf(1.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    /// Largest real part.
    Extremal,
    Index(usize),
}

impl Selector {
    pub fn pick(&self, sol: &SpectralSolution) -> Result<usize> {
        match *self {
            Selector::Extremal => Ok(sol.extremal_index()),
            Selector::Index(k) if k < sol.eigenvalues.len() => Ok(k),
            Selector::Index(k) => Err(Error::Domain(format!(
                "eigen index {k} out of range 0..{}",
                sol.eigenvalues.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exponent {
    ThreeHalves,
    FourThirds,
}

impl Exponent {
    pub fn value(&self) -> f64 {
        match self {
            Exponent::ThreeHalves => 1.5,
            Exponent::FourThirds => 4.0 / 3.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Exponent::ThreeHalves => "m^(3/2)",
            Exponent::FourThirds => "m^(4/3)",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub m: usize,
    pub k: usize,
    pub lambda: Complex64,
    pub three_halves: Complex64,
    pub four_thirds: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTable {
    pub gamma: f64,
    pub rows: Vec<DeltaRow>,
    /// `|row[i+1] - row[i]|` for each scaling.
    pub diffs_three_halves: Vec<f64>,
    pub diffs_four_thirds: Vec<f64>,
    /// The scaling whose last successive difference, relative to its value,
    /// is smaller.
    pub stabilizing: Exponent,
}

pub fn delta_estimates(ms: &[usize], gamma: f64, selector: Selector) -> Result<DeltaTable> {
    if ms.is_empty() {
        return Err(Error::Domain("no m values".into()));
    }
    if ms.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("m values must be strictly increasing".into()));
    }
    let mut rows = Vec::with_capacity(ms.len());
    for &m in ms {
        let sol = spectrum(&SpectralProblem::new(m, gamma)?)?;
        let k = selector.pick(&sol)?;
        let lambda = sol.eigenvalues[k];
        let mf = m as f64;
        rows.push(DeltaRow {
            m,
            k,
            lambda,
            three_halves: lambda / mf.powf(1.5),
            four_thirds: lambda / mf.powf(4.0 / 3.0),
        });
    }
    let diffs =
        |f: fn(&DeltaRow) -> Complex64| -> Vec<f64> { rows.windows(2).map(|w| (f(&w[1]) - f(&w[0])).norm()).collect() };
    let d32 = diffs(|r| r.three_halves);
    let d43 = diffs(|r| r.four_thirds);
    let rel = |d: &[f64], f: fn(&DeltaRow) -> Complex64| -> f64 {
        match d.last() {
            Some(v) => v / f(rows.last().unwrap()).norm().max(f64::MIN_POSITIVE),
            None => f64::INFINITY,
        }
    };
    let stabilizing = if rel(&d32, |r| r.three_halves) <= rel(&d43, |r| r.four_thirds) {
        Exponent::ThreeHalves
    } else {
        Exponent::FourThirds
    };
    Ok(DeltaTable {
        gamma,
        rows,
        diffs_three_halves: d32,
        diffs_four_thirds: d43,
        stabilizing,
    })
}

/// Symmetric Hausdorff distance between a point set and a union of
/// polylines (densified to spacing `step`).
pub fn hausdorff_points_polylines(points: &[Complex64], lines: &[Vec<Complex64>], step: f64) -> f64 {
    if points.is_empty() || lines.is_empty() {
        return f64::INFINITY;
    }
    let to_lines = points
        .iter()
        .map(|&p| {
            lines
                .iter()
                .map(|l| crate::tracer::point_polyline_distance(p, l))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let mut to_points: f64 = 0.0;
    for l in lines {
        for s in densify(l, step) {
            let d = points.iter().map(|p| (p - s).norm()).fold(f64::INFINITY, f64::min);
            to_points = to_points.max(d);
        }
    }
    to_lines.max(to_points)
}

pub(crate) fn densify(line: &[Complex64], step: f64) -> Vec<Complex64> {
    let mut out = Vec::new();
    for w in line.windows(2) {
        let n = ((w[1] - w[0]).norm() / step).ceil().max(1.0) as usize;
        for k in 0..n {
            out.push(w[0] + (w[1] - w[0]) * (k as f64 / n as f64));
        }
    }
    if let Some(l) = line.last() {
        out.push(*l);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    #[test]
    fn m1_matrix() {
        let m = operator_matrix(&SpectralProblem::new(1, 0.0).unwrap());
        let d = m.to_dense();
        assert_eq!(d[0][0], c64(0.0, 0.0));
        assert_eq!(d[0][1], c64(-2.0, 0.0));
        assert_eq!(d[1][0], c64(-4.0, 0.0));
        assert_eq!(d[1][1], c64(0.0, 0.0));
    }

    #[test]
    fn cauchy_of_roots_examples() {
        let p = Poly::from_roots(&[c64(0.0, 0.0); 5]);
        assert!((cauchy_of_roots(&p, c64(2.0, 0.0)).unwrap() - c64(0.5, 0.0)).norm() < 1e-15);
        let p = Poly::from_roots(&[c64(1.0, 0.0), c64(-1.0, 0.0)]);
        assert!((cauchy_of_roots(&p, c64(3.0, 0.0)).unwrap() - c64(0.375, 0.0)).norm() < 1e-15);
        assert!(cauchy_of_roots(&p, c64(1.0, 0.0)).is_err());
    }

    #[test]
    fn selector_range() {
        let sol = spectrum(&SpectralProblem::new(3, 0.0).unwrap()).unwrap();
        assert!(Selector::Index(4).pick(&sol).is_err());
        assert_eq!(Selector::Extremal.pick(&sol).unwrap(), 3);
    }

    #[test]
    fn zero_m_is_rejected() {
        assert!(SpectralProblem::new(0, 0.0).is_err());
    }
}
