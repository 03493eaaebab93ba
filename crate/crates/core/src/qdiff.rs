//! The differential `-q(z)/z dz^2` for a monic cubic `q`.
//!
//! Finite critical points are the zeros of `q` and the simple pole at the
//! origin; infinity is a pole of order 6. Along a horizontal trajectory
//! `Re ∫ sqrt(q/z) dz` is constant.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::algebra::{poly_roots, sort_lex, Poly};
use crate::error::{Error, Result};

/// Roots closer than this (relative) are merged into one multiple zero.
const MERGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadDifferential {
    q: Poly,
    params: Option<(Complex64, Complex64)>,
    cps: Vec<CriticalPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Finite(Complex64),
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Zero(u32),
    SimplePole,
    InfinitePole(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub location: Location,
    pub kind: Kind,
    /// Set for repeated zeros and for a zero sitting on the pole.
    pub degenerate: bool,
}

impl CriticalPoint {
    pub fn finite(&self) -> Option<Complex64> {
        match self.location {
            Location::Finite(z) => Some(z),
            Location::Infinity => None,
        }
    }

    /// The exponent `r` of the local model `Q ≈ c (z - z0)^r`.
    pub fn order(&self) -> i32 {
        match self.kind {
            Kind::Zero(r) => r as i32,
            Kind::SimplePole => -1,
            Kind::InfinitePole(n) => -(n as i32),
        }
    }
}

impl QuadDifferential {
    /// From a cubic; it is normalized to be monic.
    pub fn from_cubic(q: &Poly) -> Result<Self> {
        if q.degree() != 3 {
            return Err(Error::Degree {
                expected: 3,
                found: q.degree(),
            });
        }
        Ok(Self::build(q.monic()?, None))
    }

    pub fn from_roots(roots: &[Complex64]) -> Result<Self> {
        if roots.len() != 3 {
            return Err(Error::Degree {
                expected: 3,
                found: roots.len(),
            });
        }
        Self::from_cubic(&Poly::from_roots(roots))
    }

    /// `q(z) = z^3 + γ z^2 + ((γ^2 - 16)/4) z - δ`, so that `-q(z)/z`
    /// equals `-Δ(z)/z^2` for the discriminant `Δ` of
    /// `zC^2 - (z^2 + γz/2)C + (z + δ/4) = 0`.
    pub fn from_parameters(gamma: Complex64, delta: Complex64) -> Self {
        let q = Poly::new(vec![
            -delta,
            (gamma * gamma - 16.0) / 4.0,
            gamma,
            Complex64::new(1.0, 0.0),
        ]);
        Self::build(q, Some((gamma, delta)))
    }

    /// `q = (z - 1)(z - a)(z - conj a)` for `Im a > 0`.
    pub fn from_apex(a: Complex64) -> Result<Self> {
        if !(a.im > 0.0) {
            return Err(Error::Domain(format!("apex must satisfy Im a > 0, got {a}")));
        }
        // expanded by hand so the coefficients are exactly real
        let s = 1.0 + 2.0 * a.re;
        let p = a.norm_sqr() + 2.0 * a.re;
        let q = Poly::from_real(&[-a.norm_sqr(), p, -s, 1.0]);
        Ok(Self::build(q, None))
    }

    fn build(q: Poly, params: Option<(Complex64, Complex64)>) -> Self {
        let cps = locate_critical_points(&q);
        QuadDifferential { q, params, cps }
    }

    pub fn q(&self) -> &Poly {
        &self.q
    }

    pub fn params(&self) -> Option<(Complex64, Complex64)> {
        self.params
    }

    pub fn has_real_coeffs(&self) -> bool {
        self.q.has_real_coeffs()
    }

    /// `Q(z) = q(z)/z`.
    pub fn big_q(&self, z: Complex64) -> Complex64 {
        self.q.eval(z) / z
    }

    /// Finite critical points sorted by (real, imag), then infinity.
    pub fn critical_points(&self) -> &[CriticalPoint] {
        &self.cps
    }

    /// Reason the differential falls outside the generic case, if it does.
    pub fn degeneracy(&self) -> Option<String> {
        let cps = self.critical_points();
        if cps
            .iter()
            .any(|c| c.degenerate && c.finite() == Some(Complex64::new(0.0, 0.0)))
        {
            return Some("q(0) = 0: zero of q collides with the pole".into());
        }
        cps.iter()
            .find(|c| c.degenerate)
            .map(|c| format!("repeated zero at {}", c.finite().unwrap()))
    }

    pub fn check_generic(&self) -> Result<()> {
        match self.degeneracy() {
            Some(r) => Err(Error::Degenerate(r)),
            None => Ok(()),
        }
    }

    /// The constant `c` in `Q(z) ≈ c (z - z0)^r` near a finite critical point.
    pub fn local_factor(&self, cp: &CriticalPoint) -> Result<Complex64> {
        let z0 = cp
            .finite()
            .ok_or_else(|| Error::NotApplicable("local factor at infinity".into()))?;
        match cp.kind {
            Kind::SimplePole => Ok(self.q.coeff(0)),
            Kind::Zero(r) => {
                if z0.norm() == 0.0 {
                    return Err(Error::Degenerate("zero on the pole has no ray fan".into()));
                }
                let mut d = self.q.clone();
                for _ in 0..r {
                    d = d.deflate(z0).0;
                }
                Ok(d.eval(z0) / z0)
            }
            Kind::InfinitePole(_) => unreachable!(),
        }
    }

    /// Departure angles in `[0, 2π)` of the horizontal trajectories leaving
    /// a finite critical point.
    pub fn ray_fan(&self, cp: &CriticalPoint) -> Result<Vec<f64>> {
        self.fan(cp, PI)
    }

    /// Departure angles of the orthogonal trajectories.
    pub fn orthogonal_ray_fan(&self, cp: &CriticalPoint) -> Result<Vec<f64>> {
        self.fan(cp, 0.0)
    }

    fn fan(&self, cp: &CriticalPoint, target: f64) -> Result<Vec<f64>> {
        if cp.location == Location::Infinity {
            return Err(Error::NotApplicable("use d_directions at infinity".into()));
        }
        let c = self.local_factor(cp)?;
        let n = cp.order() + 2;
        Ok((0..n)
            .map(|k| {
                let t = (target - c.arg() + 2.0 * PI * k as f64) / n as f64;
                t.rem_euclid(2.0 * PI)
            })
            .collect())
    }

    /// Largest distance scale of the finite critical set, at least 1.
    pub fn scale(&self) -> f64 {
        self.critical_points()
            .iter()
            .filter_map(|c| c.finite())
            .map(|z| z.norm())
            .fold(1.0, f64::max)
    }

    /// Distance from `z` to the nearest finite critical point.
    pub fn critical_distance(&self, z: Complex64) -> f64 {
        self.critical_points()
            .iter()
            .filter_map(|c| c.finite())
            .map(|p| (p - z).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Starts a branch of `sqrt(q/z)` at `z` with the normalization
    /// `sqrt(q/z) ~ z` at infinity, continued inward along the ray through `z`.
    pub fn branch_from_infinity(&self, z: Complex64) -> Result<BranchState> {
        let far = 1e6_f64.max(1e3 * z.norm());
        let dir = if z.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            z / z.norm()
        };
        let start = dir * far;
        let mut state = BranchState {
            last_point: start,
            last_value: principal_near(self.big_q(start), start),
        };
        // geometric steps inward keep each phase change small
        let mut r = far;
        let target = z.norm();
        while r > target {
            let next = (r * 0.97 - 0.01).max(target);
            self.sqrt_q_over_z(dir * next, &mut state)?;
            r = next;
        }
        self.sqrt_q_over_z(z, &mut state)?;
        Ok(state)
    }

    /// Continues `sqrt(q/z)` from `state` to `z` and updates the state.
    pub fn sqrt_q_over_z(&self, z: Complex64, state: &mut BranchState) -> Result<Complex64> {
        let w = continue_sqrt(self.big_q(z), state.last_value).map_err(|_| Error::BranchJump {
            from: state.last_point,
            to: z,
        })?;
        state.last_point = z;
        state.last_value = w;
        Ok(w)
    }
}

fn locate_critical_points(q: &Poly) -> Vec<CriticalPoint> {
    let roots = poly_roots(q).expect("cubic has roots");
    let mut groups: Vec<(Complex64, u32)> = Vec::new();
    for r in roots {
        let tol = MERGE_TOL * r.norm().max(1.0);
        match groups.iter_mut().find(|(g, _)| (*g - r).norm() <= tol) {
            Some((g, k)) => {
                *g = (*g * (*k as f64) + r) / (*k as f64 + 1.0);
                *k += 1;
            }
            None => groups.push((r, 1)),
        }
    }
    let origin_hit = q.coeff(0).norm() <= 1e-14 * q.max_coeff_norm();
    let mut out: Vec<CriticalPoint> = groups
        .into_iter()
        .map(|(z, k)| {
            let at_origin = origin_hit && z.norm() <= MERGE_TOL;
            CriticalPoint {
                location: Location::Finite(if at_origin { Complex64::new(0.0, 0.0) } else { z }),
                kind: Kind::Zero(k),
                degenerate: k > 1 || at_origin,
            }
        })
        .collect();
    if !origin_hit {
        out.push(CriticalPoint {
            location: Location::Finite(Complex64::new(0.0, 0.0)),
            kind: Kind::SimplePole,
            degenerate: false,
        });
    }
    let mut locs: Vec<Complex64> = out.iter().filter_map(|c| c.finite()).collect();
    sort_lex(&mut locs);
    let mut sorted: Vec<CriticalPoint> = locs
        .iter()
        .map(|z| *out.iter().find(|c| c.finite() == Some(*z)).unwrap())
        .collect();
    sorted.push(CriticalPoint {
        location: Location::Infinity,
        kind: Kind::InfinitePole(6),
        degenerate: false,
    });
    sorted
}

/// Position and value of a continued branch of `sqrt(q/z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchState {
    pub last_point: Complex64,
    pub last_value: Complex64,
}

impl BranchState {
    /// Branch at `z` chosen closest to `hint`.
    pub fn near(qd: &QuadDifferential, z: Complex64, hint: Complex64) -> Self {
        BranchState {
            last_point: z,
            last_value: principal_near(qd.big_q(z), hint),
        }
    }
}

/// Square root of `v` on the side of `hint`.
pub fn principal_near(v: Complex64, hint: Complex64) -> Complex64 {
    let w = v.sqrt();
    if (w - hint).norm() <= (w + hint).norm() {
        w
    } else {
        -w
    }
}

/// Square root of `v` continuing `last`; fails when the two candidates are
/// nearly equidistant, which means the step was too long.
pub fn continue_sqrt(v: Complex64, last: Complex64) -> std::result::Result<Complex64, ()> {
    let w = principal_near(v, last);
    if last.norm() > 0.0 && w.norm() > 0.0 {
        let phase = (w / last).arg().abs();
        if phase > 0.999 * PI / 2.0 {
            return Err(());
        }
    }
    Ok(w)
}

/// Horizontal directions `(2k+1)π/4` and orthogonal directions `kπ/2` at infinity.
pub fn d_directions() -> ([f64; 4], [f64; 4]) {
    let h = [PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0];
    let o = [0.0, PI / 2.0, PI, 3.0 * PI / 2.0];
    (h, o)
}

/// Index of the horizontal direction `D_k` nearest to the angle `theta`.
pub fn nearest_direction(theta: f64) -> usize {
    let t = theta.rem_euclid(2.0 * PI);
    let k = ((t - PI / 4.0) / (PI / 2.0)).round();
    (k as i64).rem_euclid(4) as usize
}

/// Maps a real cubic with one positive real root `r` and a conjugate pair
/// `a, conj a` to `(r, a/r)`; the differential rescales by `r^4 > 0` under
/// `z = r w`, so trajectories correspond.
pub fn normalize_to_unit_root(q: &Poly) -> Result<(f64, Complex64)> {
    if q.degree() != 3 || !q.has_real_coeffs() {
        return Err(Error::NotApplicable("expects a real cubic".into()));
    }
    let roots = poly_roots(&q.monic()?)?;
    let real: Vec<f64> = roots.iter().filter(|r| r.im == 0.0).map(|r| r.re).collect();
    if real.len() != 1 {
        return Err(Error::NotApplicable("three real roots; use the real-zeros path".into()));
    }
    let r = real[0];
    if r <= 0.0 {
        return Err(Error::NotApplicable(format!("real root {r} is not positive")));
    }
    let a = roots.iter().find(|z| z.im > 0.0).copied().unwrap();
    Ok((r, a / r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn parameters_zero() {
        let qd = QuadDifferential::from_parameters(c64(0.0, 0.0), c64(0.0, 0.0));
        assert_eq!(qd.q(), &Poly::from_real(&[0.0, -4.0, 0.0, 1.0]));
    }

    #[test]
    fn parameters_minus_one_one() {
        let qd = QuadDifferential::from_parameters(c64(-1.0, 0.0), c64(1.0, 0.0));
        assert_eq!(qd.q(), &Poly::from_real(&[-1.0, -3.75, -1.0, 1.0]));
    }

    #[test]
    fn apex_expansion() {
        let qd = QuadDifferential::from_apex(c64(0.0, 2.0)).unwrap();
        assert_eq!(qd.q(), &Poly::from_real(&[-4.0, 4.0, -1.0, 1.0]));
        let qd = QuadDifferential::from_apex(c64(0.0, 1.0)).unwrap();
        assert_eq!(qd.q().coeff(0), c64(-1.0, 0.0));
        assert!(QuadDifferential::from_apex(c64(1.0, 0.0)).is_err());
    }

    #[test]
    fn apex_critical_points() {
        let qd = QuadDifferential::from_apex(c64(1.6, 2.0)).unwrap();
        let cps = qd.critical_points();
        assert_eq!(cps.len(), 5);
        let zeros: Vec<Complex64> = cps
            .iter()
            .filter(|c| c.kind == Kind::Zero(1))
            .filter_map(|c| c.finite())
            .collect();
        assert!(close(zeros[0], c64(1.0, 0.0), 1e-12));
        assert!(close(zeros[1], c64(1.6, -2.0), 1e-12));
        assert!(close(zeros[2], c64(1.6, 2.0), 1e-12));
        assert_eq!(cps[0].kind, Kind::SimplePole);
        assert_eq!(cps[4].kind, Kind::InfinitePole(6));
        assert!(qd.degeneracy().is_none());
    }

    #[test]
    fn double_zero_is_degenerate() {
        let qd = QuadDifferential::from_roots(&[c64(1.0, 0.0), c64(2.0, 0.0), c64(2.0, 0.0)]).unwrap();
        let cps = qd.critical_points();
        assert_eq!(cps[0].kind, Kind::SimplePole);
        assert_eq!(cps[1].kind, Kind::Zero(1));
        assert_eq!(cps[2].kind, Kind::Zero(2));
        assert!(cps[2].degenerate);
        assert!(matches!(qd.check_generic(), Err(Error::Degenerate(_))));
        assert_eq!(qd.ray_fan(&cps[2]).unwrap().len(), 4);
    }

    #[test]
    fn zero_on_pole_is_degenerate() {
        let qd = QuadDifferential::from_roots(&[c64(0.0, 0.0), c64(2.0, 0.0), c64(3.0, 0.0)]).unwrap();
        let cps = qd.critical_points();
        assert!(cps.iter().all(|c| c.kind != Kind::SimplePole));
        assert!(cps[0].degenerate);
        assert!(qd.degeneracy().unwrap().contains("q(0) = 0"));
    }

    #[test]
    fn fans_have_expected_sizes_and_spacing() {
        let qd = QuadDifferential::from_apex(c64(1.6, 2.0)).unwrap();
        for cp in qd.critical_points().iter().filter(|c| c.finite().is_some()) {
            let fan = qd.ray_fan(cp).unwrap();
            match cp.kind {
                Kind::Zero(1) => {
                    assert_eq!(fan.len(), 3);
                    let d = (fan[1] - fan[0]).rem_euclid(2.0 * PI);
                    assert!((d - 2.0 * PI / 3.0).abs() < 1e-12);
                }
                Kind::SimplePole => assert_eq!(fan.len(), 1),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn pole_ray_for_apex_points_along_positive_axis() {
        // q(0) = -|a|^2 < 0, so the single ray leaves 0 towards 1
        let qd = QuadDifferential::from_apex(c64(0.0, 2.0)).unwrap();
        let cps = qd.critical_points();
        let pole = cps.iter().find(|c| c.kind == Kind::SimplePole).unwrap();
        let fan = qd.ray_fan(pole).unwrap();
        assert!(fan[0].abs() < 1e-15, "{fan:?}");
    }

    #[test]
    fn directions_interleave() {
        let (h, o) = d_directions();
        for k in 0..4 {
            assert!((h[k] - o[k] - PI / 4.0).abs() < 1e-15);
        }
        assert_eq!(nearest_direction(0.8), 0);
        assert_eq!(nearest_direction(-0.8), 3);
        assert_eq!(nearest_direction(2.3), 1);
    }

    #[test]
    fn normalization_examples() {
        let q = Poly::from_roots(&[c64(2.0, 0.0), c64(2.0, 2.0), c64(2.0, -2.0)]);
        let (r, a) = normalize_to_unit_root(&q).unwrap();
        assert!((r - 2.0).abs() < 1e-12 && close(a, c64(1.0, 1.0), 1e-12));
        let q = Poly::from_real(&[-6.0, 11.0, -6.0, 1.0]);
        assert!(matches!(normalize_to_unit_root(&q), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn branch_at_infinity_is_asymptotic_to_z() {
        let qd = QuadDifferential::from_parameters(c64(0.0, 0.0), c64(0.0, 0.0));
        let z = c64(1e6, 0.0);
        let st = qd.branch_from_infinity(z).unwrap();
        assert!(close(st.last_value / z, c64(1.0, 0.0), 1e-11));
        let z = c64(-3.0, 4.0);
        let st = qd.branch_from_infinity(z).unwrap();
        assert!((st.last_value * st.last_value - qd.big_q(z)).norm() < 1e-12 * qd.big_q(z).norm());
    }

    fn loop_value(qd: &QuadDifferential, center: Complex64, radius: f64, n: usize) -> (Complex64, Complex64) {
        let start = center + radius;
        let mut st = BranchState::near(qd, start, qd.big_q(start).sqrt());
        let first = st.last_value;
        for k in 1..=n {
            let z = center + Complex64::from_polar(radius, 2.0 * PI * k as f64 / n as f64);
            qd.sqrt_q_over_z(z, &mut st).unwrap();
        }
        (first, st.last_value)
    }

    #[test]
    fn monodromy_of_small_loops() {
        let qd = QuadDifferential::from_apex(c64(1.6, 2.0)).unwrap();
        let (a, b) = loop_value(&qd, c64(3.0, -1.0), 0.2, 10_000);
        assert!(close(a, b, 1e-10 * a.norm()));
        let (a, b) = loop_value(&qd, c64(1.6, 2.0), 0.2, 10_000);
        assert!(close(a, -b, 1e-10 * a.norm()));
    }

    #[test]
    fn large_step_across_a_zero_is_refused() {
        let qd = QuadDifferential::from_apex(c64(0.0, 2.0)).unwrap();
        let (a, b) = (c64(1e-5, 2.0), c64(-1e-5, 2.0));
        let mut st = BranchState::near(&qd, a, qd.big_q(a).sqrt());
        // stepping straight through the zero at 2i turns the phase by π/2
        let r = qd.sqrt_q_over_z(b, &mut st);
        assert!(matches!(r, Err(Error::BranchJump { .. })));
    }
}
