use num_complex::Complex64;

use super::eigen::hessenberg_eigenvalues;
use super::poly::Poly;
use crate::error::{Error, Result};

const REL_TOL: f64 = 1e-12;
const MAX_ITER: usize = 200;

/// Sorts complex values by real part, then imaginary part. Values whose real
/// parts agree to within `1e-10` relative are treated as tied so that
/// conjugate pairs come out in a stable (lower, upper) order.
pub fn sort_lex(values: &mut [Complex64]) {
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() {
            let scale = 1.0_f64.max(values[start].norm());
            if (values[end].re - values[start].re).abs() > 1e-10 * scale {
                break;
            }
            end += 1;
        }
        values[start..end].sort_by(|a, b| a.im.total_cmp(&b.im));
        start = end;
    }
}

/// All roots of `p` with multiplicity, sorted lexicographically.
///
/// Aberth-Ehrlich simultaneous iteration; if it does not settle within the
/// iteration cap the companion-matrix eigenvalues are used instead. Roots at
/// the origin are split off exactly beforehand.
pub fn poly_roots(p: &Poly) -> Result<Vec<Complex64>> {
    if p.is_zero() {
        return Err(Error::Domain("roots of the zero polynomial".into()));
    }
    if p.degree() == 0 {
        return Err(Error::Domain("constant polynomial has no roots".into()));
    }
    let coeffs = p.coeffs();
    let zeros_at_origin = coeffs.iter().take_while(|c| c.norm() == 0.0).count();
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
    let reduced = Poly::new(coeffs[zeros_at_origin..].to_vec());
    if reduced.degree() > 0 {
        let found = match aberth(&reduced) {
            Some(r) => r,
            None => companion_roots(&reduced)?,
        };
        roots.extend(found);
    }
    if p.has_real_coeffs() {
        symmetrize_conjugates(&mut roots);
    }
    sort_lex(&mut roots);
    Ok(roots)
}

/// The three roots of a cubic, through the general root finder.
pub fn cubic_roots(p: &Poly) -> Result<[Complex64; 3]> {
    if p.degree() != 3 {
        return Err(Error::Degree {
            expected: 3,
            found: p.degree(),
        });
    }
    let r = poly_roots(p)?;
    Ok([r[0], r[1], r[2]])
}

fn initial_guesses(p: &Poly) -> Vec<Complex64> {
    let n = p.degree();
    let c = p.coeffs();
    let lead = c[n].norm();
    // geometric mean of the root moduli, kept away from zero
    let radius = (c[0].norm() / lead).powf(1.0 / n as f64).max(1e-3);
    (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius, theta)
        })
        .collect()
}

fn aberth(p: &Poly) -> Option<Vec<Complex64>> {
    let n = p.degree();
    if n == 1 {
        return Some(vec![-p.coeff(0) / p.coeff(1)]);
    }
    let dp = p.derivative();
    let mut z = initial_guesses(p);
    // Once the steps are small the residual is evaluated in double-double;
    // plain Horner stalls at the rounding floor inside tight clusters.
    let mut precise = false;
    let mut extra = 1;
    for _ in 0..MAX_ITER {
        let mut max_rel: f64 = 0.0;
        for i in 0..n {
            let pv = if precise { eval_dd(p, z[i]) } else { p.eval(z[i]) };
            if pv.norm() == 0.0 {
                continue;
            }
            let ratio = pv / dp.eval(z[i]);
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = z[i] - z[j];
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let denom = Complex64::new(1.0, 0.0) - ratio * repulsion;
            let step = if denom.norm() == 0.0 || !denom.is_finite() {
                ratio
            } else {
                ratio / denom
            };
            if !step.is_finite() {
                return None;
            }
            z[i] -= step;
            if step.norm() >= 1e-300 {
                max_rel = max_rel.max(step.norm() / z[i].norm().max(1e-300));
            }
        }
        if !precise {
            precise = max_rel <= 1e-8;
        } else if max_rel <= REL_TOL {
            if extra == 0 {
                return Some(z);
            }
            extra -= 1;
        }
    }
    // Accept a non-converged run only if every residual already meets the bound.
    let scale = p.max_coeff_norm();
    let ok = z.iter().all(|&r| {
        let bound = 1e-12 * scale * r.norm().max(1.0).powi(n as i32);
        p.eval(r).norm() <= bound
    });
    ok.then_some(z)
}

#[derive(Clone, Copy)]
struct Dd(f64, f64);

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd(s, (a - (s - bb)) + (b - bb))
}

impl Dd {
    fn add(self, o: Dd) -> Dd {
        let Dd(s, e) = two_sum(self.0, o.0);
        let e = e + self.1 + o.1;
        let h = s + e;
        Dd(h, e - (h - s))
    }

    fn mul_f(self, f: f64) -> Dd {
        let p = self.0 * f;
        let e = self.0.mul_add(f, -p) + self.1 * f;
        let h = p + e;
        Dd(h, e - (h - p))
    }

    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }
}

/// Horner evaluation carried in double-double, rounded at the end.
fn eval_dd(p: &Poly, z: Complex64) -> Complex64 {
    let (mut re, mut im) = (Dd(0.0, 0.0), Dd(0.0, 0.0));
    for c in p.coeffs().iter().rev() {
        let nre = re.mul_f(z.re).add(im.mul_f(z.im).neg()).add(Dd(c.re, 0.0));
        let nim = re.mul_f(z.im).add(im.mul_f(z.re)).add(Dd(c.im, 0.0));
        re = nre;
        im = nim;
    }
    Complex64::new(re.0 + re.1, im.0 + im.1)
}

fn companion_roots(p: &Poly) -> Result<Vec<Complex64>> {
    let n = p.degree();
    let lead = p.leading();
    let mut h = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for j in 0..n {
        h[0][j] = -p.coeff(n - 1 - j) / lead;
    }
    for i in 1..n {
        h[i][i - 1] = Complex64::new(1.0, 0.0);
    }
    let mut roots = hessenberg_eigenvalues(h)?;
    let dp = p.derivative();
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let d = dp.eval(*r);
            if d.norm() == 0.0 {
                break;
            }
            let step = p.eval(*r) / d;
            if !step.is_finite() {
                break;
            }
            *r -= step;
        }
    }
    Ok(roots)
}

/// For real polynomials, replaces each approximate conjugate pair by an exact
/// one and snaps nearly-real roots onto the axis. Leaves the roots alone if
/// the pairing is not clean.
fn symmetrize_conjugates(roots: &mut [Complex64]) {
    let n = roots.len();
    let mut partner = vec![usize::MAX; n];
    for i in 0..n {
        let tol = 1e-9 * roots[i].norm().max(1.0);
        if roots[i].im.abs() <= tol {
            partner[i] = i;
        }
    }
    for i in 0..n {
        if partner[i] != usize::MAX || roots[i].im <= 0.0 {
            continue;
        }
        let best = (0..n)
            .filter(|&j| partner[j] == usize::MAX && roots[j].im < 0.0)
            .min_by(|&a, &b| {
                let da = (roots[a] - roots[i].conj()).norm();
                let db = (roots[b] - roots[i].conj()).norm();
                da.total_cmp(&db)
            });
        match best {
            Some(j) if (roots[j] - roots[i].conj()).norm() <= 1e-6 * roots[i].norm().max(1.0) => {
                partner[i] = j;
                partner[j] = i;
            }
            _ => return,
        }
    }
    if partner.contains(&usize::MAX) {
        return;
    }
    for i in 0..n {
        let j = partner[i];
        if j == i {
            roots[i].im = 0.0;
        } else if roots[i].im > 0.0 {
            let avg = (roots[i] + roots[j].conj()) * 0.5;
            roots[i] = avg;
            roots[j] = avg.conj();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn cubic_roots_of_unity() {
        let r = cubic_roots(&Poly::from_real(&[-1.0, 0.0, 0.0, 1.0])).unwrap();
        let s = 3.0_f64.sqrt() / 2.0;
        assert!(close(r[0], c64(-0.5, -s), 1e-13));
        assert!(close(r[1], c64(-0.5, s), 1e-13));
        assert!(close(r[2], c64(1.0, 0.0), 1e-13));
    }

    #[test]
    fn cubic_roots_real_123() {
        let r = cubic_roots(&Poly::from_real(&[-6.0, 11.0, -6.0, 1.0])).unwrap();
        for (k, want) in [1.0, 2.0, 3.0].iter().enumerate() {
            assert!(close(r[k], c64(*want, 0.0), 1e-12));
        }
    }

    #[test]
    fn cubic_roots_apex_2i() {
        let r = cubic_roots(&Poly::from_real(&[-4.0, 4.0, -1.0, 1.0])).unwrap();
        assert!(close(r[0], c64(0.0, -2.0), 1e-12));
        assert!(close(r[1], c64(0.0, 2.0), 1e-12));
        assert!(close(r[2], c64(1.0, 0.0), 1e-12));
    }

    #[test]
    fn cubic_roots_rejects_other_degrees() {
        let err = cubic_roots(&Poly::from_real(&[1.0, 0.0, 1.0])).unwrap_err();
        assert_eq!(err, Error::Degree { expected: 3, found: 2 });
    }

    #[test]
    fn cubic_residual_bound() {
        let p = Poly::from_roots(&[c64(1.0, 0.0), c64(1.6, 2.0), c64(1.6, -2.0)]);
        for r in cubic_roots(&p).unwrap() {
            let bound = 1e-12 * r.norm().max(1.0).powi(3) * p.max_coeff_norm();
            assert!(p.eval(r).norm() <= bound);
        }
    }

    #[test]
    fn quadratic_and_multiplicity() {
        let r = poly_roots(&Poly::from_real(&[1.0, 0.0, 1.0])).unwrap();
        assert!(close(r[0], c64(0.0, -1.0), 1e-14) && close(r[1], c64(0.0, 1.0), 1e-14));
        let r = poly_roots(&Poly::from_real(&[0.0, 0.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(r, vec![c64(0.0, 0.0); 4]);
    }

    #[test]
    fn zero_polynomial_is_domain_error() {
        assert!(matches!(poly_roots(&Poly::zero()), Err(Error::Domain(_))));
    }

    #[test]
    fn companion_fallback_agrees_with_aberth() {
        let p = Poly::from_roots(&[c64(0.5, 0.0), c64(-1.0, 2.0), c64(3.0, -1.0), c64(2.0, 0.5)]);
        let mut a = aberth(&p).unwrap();
        let mut b = companion_roots(&p).unwrap();
        sort_lex(&mut a);
        sort_lex(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!(close(*x, *y, 1e-11));
        }
    }

    #[test]
    fn double_root_is_resolved() {
        let p = Poly::from_roots(&[c64(1.0, 0.0), c64(2.0, 0.0), c64(2.0, 0.0)]);
        let r = poly_roots(&p).unwrap();
        assert!(close(r[0], c64(1.0, 0.0), 1e-10));
        assert!(close(r[1], c64(2.0, 0.0), 1e-6));
        assert!(close(r[2], c64(2.0, 0.0), 1e-6));
    }
}
