use num_complex::Complex64;

use super::roots::sort_lex;
use crate::error::{Error, Result};

/// Complex tridiagonal matrix: `sub[i] = M[i+1][i]`, `sup[i] = M[i][i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMatrix {
    pub sub: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    pub sup: Vec<Complex64>,
}

impl TriMatrix {
    pub fn new(sub: Vec<Complex64>, diag: Vec<Complex64>, sup: Vec<Complex64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::Domain("empty tridiagonal matrix".into()));
        }
        if sub.len() != n - 1 || sup.len() != n - 1 {
            return Err(Error::Domain(format!(
                "off-diagonals must have length {}, got sub={} sup={}",
                n - 1,
                sub.len(),
                sup.len()
            )));
        }
        Ok(TriMatrix { sub, diag, sup })
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i == j {
            self.diag[i]
        } else if i == j + 1 {
            self.sub[j]
        } else if j == i + 1 {
            self.sup[i]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.size();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.sub[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.sup[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.sub)
            .chain(&self.sup)
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let n = self.size();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Sorted by (real, imag).
    pub values: Vec<Complex64>,
    /// `vectors[k]` belongs to `values[k]`, normalized to unit 2-norm.
    pub vectors: Vec<Vec<Complex64>>,
    /// Set when two eigenvalues are numerically coincident or an
    /// eigenvector misses the residual bound.
    pub defective: bool,
    /// Largest `‖Mv − λv‖ / (‖M‖‖v‖)` over the returned pairs.
    pub max_residual: f64,
}

/// Eigenvalues and right eigenvectors of a complex tridiagonal matrix.
///
/// The matrix is first diagonally balanced so that `|sub[i]| = |sup[i]|`,
/// eigenvalues come from shifted QR on the balanced matrix and eigenvectors
/// from inverse iteration, mapped back through the balancing.
pub fn eig_tridiagonal(m: &TriMatrix) -> Result<EigenDecomposition> {
    let n = m.size();
    let (bal, scale) = balance(m);
    let mut values = hessenberg_eigenvalues(bal.to_dense())?;
    sort_lex(&mut values);

    let norm = m.norm().max(f64::MIN_POSITIVE);
    let mut defective = false;
    for w in values.windows(2) {
        if (w[1] - w[0]).norm() <= 1e-10 * norm {
            defective = true;
        }
    }

    let mut vectors = Vec::with_capacity(n);
    let mut max_residual: f64 = 0.0;
    for (k, &lambda) in values.iter().enumerate() {
        let y = inverse_iteration(&bal, lambda, k)?;
        let mut v: Vec<Complex64> = y.iter().zip(&scale).map(|(yi, si)| yi / si).collect();
        normalize(&mut v);
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::NoConvergence("eigenvector overflow after unbalancing".into()));
        }
        let r = residual(m, lambda, &v) / norm;
        max_residual = max_residual.max(r);
        vectors.push(v);
    }
    if max_residual > 1e-8 {
        defective = true;
    }
    Ok(EigenDecomposition {
        values,
        vectors,
        defective,
        max_residual,
    })
}

/// `‖Mv − λv‖ / ‖v‖`.
pub fn residual(m: &TriMatrix, lambda: Complex64, v: &[Complex64]) -> f64 {
    let mv = m.mul_vec(v);
    let num: f64 = mv
        .iter()
        .zip(v)
        .map(|(a, b)| (a - lambda * b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    num / den
}

fn normalize(v: &mut [Complex64]) {
    let s: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if s > 0.0 {
        for c in v.iter_mut() {
            *c /= s;
        }
    }
}

/// Returns `D M D^{-1}` and the diagonal of `D`.
fn balance(m: &TriMatrix) -> (TriMatrix, Vec<f64>) {
    let n = m.size();
    let mut d = vec![1.0; n];
    for i in 0..n.saturating_sub(1) {
        let (a, b) = (m.sub[i].norm(), m.sup[i].norm());
        let ratio = if a > 0.0 && b > 0.0 { (b / a).sqrt() } else { 1.0 };
        d[i + 1] = d[i] * ratio;
    }
    let sub = (0..n.saturating_sub(1)).map(|i| m.sub[i] * (d[i + 1] / d[i])).collect();
    let sup = (0..n.saturating_sub(1)).map(|i| m.sup[i] * (d[i] / d[i + 1])).collect();
    (
        TriMatrix {
            sub,
            diag: m.diag.clone(),
            sup,
        },
        d,
    )
}

/// Inverse iteration for a tridiagonal matrix with a slightly perturbed
/// shift. `seed` varies the start vector between eigenvalues.
fn inverse_iteration(m: &TriMatrix, lambda: Complex64, seed: usize) -> Result<Vec<Complex64>> {
    let n = m.size();
    if n == 1 {
        return Ok(vec![Complex64::new(1.0, 0.0)]);
    }
    let norm = m.norm().max(f64::MIN_POSITIVE);
    let shift = lambda + Complex64::new(1.0, 0.7) * (norm * 1e-13);
    let lu = TriLu::factor(m, shift);
    let mut x: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = (i * 7 + seed * 13 + 1) as f64;
            Complex64::new(1.0 + 0.3 * t.sin(), 0.2 * t.cos())
        })
        .collect();
    normalize(&mut x);
    let mut best = x.clone();
    let mut best_res = f64::INFINITY;
    for _ in 0..6 {
        x = lu.solve(&x);
        normalize(&mut x);
        if x.iter().any(|c| !c.is_finite()) {
            break;
        }
        let r = residual(m, lambda, &x);
        if r < best_res {
            best_res = r;
            best = x.clone();
        }
        if r <= 1e-14 * norm {
            break;
        }
    }
    if !best_res.is_finite() {
        return Err(Error::NoConvergence("inverse iteration failed".into()));
    }
    Ok(best)
}

/// LU factorization with partial pivoting of a shifted tridiagonal matrix,
/// stored in banded form (`u2` is the fill-in second superdiagonal).
struct TriLu {
    l: Vec<Complex64>,
    u0: Vec<Complex64>,
    u1: Vec<Complex64>,
    u2: Vec<Complex64>,
    swapped: Vec<bool>,
}

impl TriLu {
    fn factor(m: &TriMatrix, shift: Complex64) -> Self {
        let n = m.size();
        let zero = Complex64::new(0.0, 0.0);
        let mut d: Vec<Complex64> = m.diag.iter().map(|&x| x - shift).collect();
        let mut du = m.sup.clone();
        let mut dl = m.sub.clone();
        let mut du2 = vec![zero; n.saturating_sub(2)];
        let mut l = vec![zero; n - 1];
        let mut swapped = vec![false; n - 1];
        let tiny = m.norm().max(f64::MIN_POSITIVE) * f64::EPSILON;
        for i in 0..n - 1 {
            if d[i].norm() >= dl[i].norm() {
                if d[i].norm() == 0.0 {
                    d[i] = Complex64::new(tiny, 0.0);
                }
                let f = dl[i] / d[i];
                l[i] = f;
                d[i + 1] -= f * du[i];
            } else {
                // swap rows i and i+1
                swapped[i] = true;
                let f = d[i] / dl[i];
                d[i] = dl[i];
                l[i] = f;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - f * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du[i + 1];
                }
            }
            dl[i] = zero;
        }
        if d[n - 1].norm() == 0.0 {
            d[n - 1] = Complex64::new(tiny, 0.0);
        }
        TriLu {
            l,
            u0: d,
            u1: du,
            u2: du2,
            swapped,
        }
    }

    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.u0.len();
        let mut x = b.to_vec();
        for i in 0..n - 1 {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            let t = x[i];
            x[i + 1] -= self.l[i] * t;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.u0[i];
        }
        x
    }
}

/// Eigenvalues of an upper Hessenberg matrix by single-shift complex QR
/// with Wilkinson shifts and deflation. Order of the result is unspecified.
pub fn hessenberg_eigenvalues(mut h: Vec<Vec<Complex64>>) -> Result<Vec<Complex64>> {
    let n = h.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut out = vec![zero; n];
    if n == 0 {
        return Ok(out);
    }
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let s = h[l][l].norm() + h[l - 1][l - 1].norm();
            let s = if s == 0.0 { 1.0 } else { s };
            if h[l][l - 1].norm() <= f64::EPSILON * s {
                h[l][l - 1] = zero;
                break;
            }
            l -= 1;
        }
        if l == hi {
            out[hi] = h[hi][hi];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > 100 * n.max(10) {
            return Err(Error::NoConvergence("Hessenberg QR iteration cap".into()));
        }
        let mu = if iter.is_multiple_of(11) {
            // exceptional shift to break cycles
            h[hi][hi] + Complex64::new(0.75, 0.3) * h[hi][hi - 1].norm()
        } else {
            wilkinson_shift(h[hi - 1][hi - 1], h[hi - 1][hi], h[hi][hi - 1], h[hi][hi])
        };
        qr_step(&mut h, l, hi, mu);
    }
    out[0] = h[0][0];
    Ok(out)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_tr = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    let m1 = half_tr + disc;
    let m2 = half_tr - disc;
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

/// One implicit-free QR sweep on the active block `lo..=hi`.
fn qr_step(h: &mut [Vec<Complex64>], lo: usize, hi: usize, mu: Complex64) {
    let n = h.len();
    for k in lo..=hi {
        h[k][k] -= mu;
    }
    let mut rots = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let x = h[k][k];
        let y = h[k + 1][k];
        let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 {
            (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
        } else {
            (x / r, y / r)
        };
        for j in k..n {
            let u = h[k][j];
            let v = h[k + 1][j];
            h[k][j] = c.conj() * u + s.conj() * v;
            h[k + 1][j] = -s * u + c * v;
        }
        rots.push((c, s));
    }
    for (idx, k) in (lo..hi).enumerate() {
        let (c, s) = rots[idx];
        for row in h.iter_mut().take((k + 2).min(hi + 1)) {
            let u = row[k];
            let v = row[k + 1];
            row[k] = u * c + v * s;
            row[k + 1] = -u * s.conj() + v * c.conj();
        }
    }
    for k in lo..=hi {
        h[k][k] += mu;
    }
}
