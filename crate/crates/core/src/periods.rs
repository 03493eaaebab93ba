//! Period integrals of `sqrt(q(z)/z)`, the curve Σ and the apex classifier.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::algebra::Poly;
use crate::error::{Error, Result};
use crate::qdiff::{principal_near, BranchState, Kind, QuadDifferential};
use crate::quadrature::{integrate_adaptive, Adaptive};

/// Waypoints closer than this to a critical point are refused.
const TOO_CLOSE: f64 = 1e-8;
/// Pieces are kept shorter than this fraction of the distance to the
/// nearest critical point, which bounds the phase change of the root per
/// piece well below π/2.
const PIECE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndpointKind {
    Regular,
    Zero,
    Pole,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub waypoints: Vec<Complex64>,
    pub start: EndpointKind,
    pub end: EndpointKind,
}

impl PathSpec {
    pub fn new(waypoints: Vec<Complex64>) -> Self {
        PathSpec {
            waypoints,
            start: EndpointKind::Regular,
            end: EndpointKind::Regular,
        }
    }

    /// Flags each endpoint lying on a finite critical point of `qd`.
    pub fn between(qd: &QuadDifferential, waypoints: Vec<Complex64>) -> Self {
        let kind = |z: Complex64| {
            qd.critical_points()
                .iter()
                .filter_map(|c| c.finite().map(|p| (p, c.kind)))
                .find(|(p, _)| (p - z).norm() <= 1e-12 * p.norm().max(1.0))
                .map(|(_, k)| match k {
                    Kind::SimplePole => EndpointKind::Pole,
                    _ => EndpointKind::Zero,
                })
                .unwrap_or(EndpointKind::Regular)
        };
        let start = kind(waypoints[0]);
        let end = kind(*waypoints.last().unwrap());
        PathSpec { waypoints, start, end }
    }

    pub fn reversed(&self) -> Self {
        let mut w = self.waypoints.clone();
        w.reverse();
        PathSpec {
            waypoints: w,
            start: self.end,
            end: self.start,
        }
    }
}

/// How the branch of the root is fixed at the start of a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchSeed {
    /// `sqrt(q/z) ~ z` at infinity, continued radially inward.
    Infinity,
    /// Continue from a known value (along a straight line to the path).
    From(BranchState),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodResult {
    pub value: Complex64,
    /// Branch at the last regular point visited.
    pub end_state: BranchState,
}

/// `∫ sqrt(q(t)/t) dt` along a polyline.
///
/// Legs are cut into pieces that stay short relative to the distance to the
/// critical points; each piece is integrated by adaptive Gauss-Legendre
/// with the branch anchored at the piece's regular end. A flagged singular
/// endpoint is handled with `t = endpoint + (direction) u^2`.
pub fn period_integral(qd: &QuadDifferential, path: &PathSpec, seed: BranchSeed) -> Result<PeriodResult> {
    let r = weighted_path_integral(qd, path, seed, |_| Complex64::new(1.0, 0.0))?;
    Ok(PeriodResult {
        value: r.value,
        end_state: r.end_state,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathIntegral {
    pub value: Complex64,
    /// Running integral at each waypoint, starting with 0.
    pub partial: Vec<Complex64>,
    pub end_state: BranchState,
}

/// `∫ weight(t) sqrt(q(t)/t) dt` along a polyline, with the same piece
/// construction as [`period_integral`].
pub fn weighted_path_integral<F>(
    qd: &QuadDifferential,
    path: &PathSpec,
    seed: BranchSeed,
    weight: F,
) -> Result<PathIntegral>
where
    F: Fn(Complex64) -> Complex64,
{
    let opts = Adaptive {
        abs_tol: 1e-13,
        rel_tol: 1e-14,
        ..Adaptive::default()
    };
    weighted_path_integral_with(qd, path, seed, weight, opts)
}

/// [`weighted_path_integral`] with explicit quadrature tolerances.
pub fn weighted_path_integral_with<F>(
    qd: &QuadDifferential,
    path: &PathSpec,
    seed: BranchSeed,
    weight: F,
    opts: Adaptive,
) -> Result<PathIntegral>
where
    F: Fn(Complex64) -> Complex64,
{
    let pts = &path.waypoints;
    if pts.len() < 2 {
        return Err(Error::Domain("path needs at least two waypoints".into()));
    }
    let crit: Vec<Complex64> = qd.critical_points().iter().filter_map(|c| c.finite()).collect();
    check_endpoint(&crit, pts[0], path.start)?;
    check_endpoint(&crit, *pts.last().unwrap(), path.end)?;
    for (k, &p) in pts.iter().enumerate() {
        let is_flagged_end = (k == 0 && path.start != EndpointKind::Regular)
            || (k == pts.len() - 1 && path.end != EndpointKind::Regular);
        if is_flagged_end {
            continue;
        }
        if let Some((c, d)) = nearest(&crit, p, None) {
            if d < TOO_CLOSE {
                return Err(Error::PathTooClose { point: c, distance: d });
            }
        }
    }
    for (k, leg) in pts.windows(2).enumerate() {
        let skip_a = k == 0 && path.start != EndpointKind::Regular;
        let skip_b = k == pts.len() - 2 && path.end != EndpointKind::Regular;
        for &c in &crit {
            if (skip_a && (c - leg[0]).norm() < 1e-12) || (skip_b && (c - leg[1]).norm() < 1e-12) {
                continue;
            }
            let d = crate::tracer::point_segment_distance(c, leg[0], leg[1]);
            if d < TOO_CLOSE {
                return Err(Error::PathTooClose { point: c, distance: d });
            }
        }
    }

    let mut pieces: Vec<Piece> = Vec::new();
    let mut leg_ends = Vec::new();
    let nlegs = pts.len() - 1;
    for k in 0..nlegs {
        let sing_a = k == 0 && path.start != EndpointKind::Regular;
        let sing_b = k == nlegs - 1 && path.end != EndpointKind::Regular;
        split_leg(&crit, pts[k], pts[k + 1], sing_a, sing_b, &mut pieces);
        leg_ends.push(pieces.len());
    }

    if pieces.is_empty() {
        return Err(Error::Domain("path has zero length".into()));
    }
    // branch at the first regular point
    let first_regular = match pieces[0] {
        Piece::FromSingular { b, .. } => b,
        Piece::Line { a, .. } | Piece::ToSingular { a, .. } => a,
    };
    let mut w = match seed {
        BranchSeed::Infinity => qd.branch_from_infinity(first_regular)?.last_value,
        BranchSeed::From(st) => continue_along(qd, &crit, st, first_regular)?.last_value,
    };
    let mut last_point = first_regular;

    let mut total = Complex64::new(0.0, 0.0);
    let mut partial = vec![total];
    let mut next_leg = 0;
    while next_leg < leg_ends.len() && leg_ends[next_leg] == 0 {
        partial.push(total);
        next_leg += 1;
    }
    for (i, piece) in pieces.iter().enumerate() {
        match *piece {
            Piece::Line { a, b } => {
                let d = b - a;
                let w_ref = w;
                total += integrate_adaptive(0.0, 1.0, opts, |s| {
                    let t = a + d * s;
                    Ok(principal_near(qd.big_q(t), w_ref) * weight(t) * d)
                })?;
                w = principal_near(qd.big_q(b), w_ref);
                last_point = b;
            }
            Piece::FromSingular { p, b } => {
                // t = p + (b - p) u^2, branch fixed at the regular end b
                let d = b - p;
                let w_ref = w;
                total += integrate_adaptive(0.0, 1.0, opts, |u| {
                    let t = p + d * (u * u);
                    Ok(principal_near(qd.big_q(t), w_ref) * weight(t) * d * (2.0 * u))
                })?;
            }
            Piece::ToSingular { a, p } => {
                // t = p + (a - p) v^2 walked from v = 1 down to 0
                let d = a - p;
                let w_ref = w;
                total -= integrate_adaptive(0.0, 1.0, opts, |v| {
                    let t = p + d * (v * v);
                    Ok(principal_near(qd.big_q(t), w_ref) * weight(t) * d * (2.0 * v))
                })?;
            }
        }
        while next_leg < leg_ends.len() && leg_ends[next_leg] == i + 1 {
            partial.push(total);
            next_leg += 1;
        }
    }
    Ok(PathIntegral {
        value: total,
        partial,
        end_state: BranchState {
            last_point,
            last_value: w,
        },
    })
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    Line { a: Complex64, b: Complex64 },
    FromSingular { p: Complex64, b: Complex64 },
    ToSingular { a: Complex64, p: Complex64 },
}

fn check_endpoint(crit: &[Complex64], z: Complex64, kind: EndpointKind) -> Result<()> {
    if kind == EndpointKind::Regular {
        return Ok(());
    }
    match nearest(crit, z, None) {
        Some((_, d)) if d <= 1e-10 * z.norm().max(1.0) => Ok(()),
        _ => Err(Error::Domain(format!(
            "endpoint {z} is flagged singular but is not a critical point"
        ))),
    }
}

fn nearest(crit: &[Complex64], z: Complex64, exclude: Option<Complex64>) -> Option<(Complex64, f64)> {
    crit.iter()
        .filter(|c| exclude.is_none_or(|e| (**c - e).norm() > 1e-12))
        .map(|&c| (c, (c - z).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

fn split_leg(crit: &[Complex64], a: Complex64, b: Complex64, sing_a: bool, sing_b: bool, out: &mut Vec<Piece>) {
    let len = (b - a).norm();
    if len == 0.0 {
        return;
    }
    let dir = (b - a) / len;
    let mut s0 = 0.0;
    let mut s1 = len;
    let mut tail = None;
    if sing_a {
        let d = nearest(crit, a, Some(a)).map_or(f64::INFINITY, |x| x.1);
        let l = (PIECE_FRACTION * d).min(if sing_b { len / 3.0 } else { len / 2.0 });
        out.push(Piece::FromSingular { p: a, b: a + dir * l });
        s0 = l;
    }
    if sing_b {
        let d = nearest(crit, b, Some(b)).map_or(f64::INFINITY, |x| x.1);
        let l = (PIECE_FRACTION * d).min(if sing_a { len / 3.0 } else { len / 2.0 });
        tail = Some(Piece::ToSingular { a: b - dir * l, p: b });
        s1 = len - l;
    }
    let mut s = s0;
    while s < s1 {
        let z = a + dir * s;
        let d = nearest(crit, z, None).map_or(f64::INFINITY, |x| x.1);
        let step = (PIECE_FRACTION * d).max(1e-10);
        let next = if s + step >= s1 - 1e-12 * len { s1 } else { s + step };
        out.push(Piece::Line {
            a: a + dir * s,
            b: a + dir * next,
        });
        s = next;
    }
    if let Some(t) = tail {
        out.push(t);
    }
}

/// Continues a branch along the straight segment from `st.last_point` to `to`.
pub fn continue_along(
    qd: &QuadDifferential,
    crit: &[Complex64],
    st: BranchState,
    to: Complex64,
) -> Result<BranchState> {
    let from = st.last_point;
    let len = (to - from).norm();
    let mut w = st.last_value;
    if len == 0.0 {
        return Ok(BranchState {
            last_point: to,
            last_value: principal_near(qd.big_q(to), w),
        });
    }
    let dir = (to - from) / len;
    let mut s = 0.0;
    while s < len {
        let z = from + dir * s;
        let d = nearest(crit, z, None).map_or(f64::INFINITY, |x| x.1);
        if d < TOO_CLOSE {
            return Err(Error::PathTooClose { point: z, distance: d });
        }
        s = (s + PIECE_FRACTION * d).min(len);
        w = principal_near(qd.big_q(from + dir * s), w);
    }
    Ok(BranchState {
        last_point: to,
        last_value: w,
    })
}

/// `∮ sqrt(q/z) dz` counterclockwise over the circle `|z - center| = radius`,
/// with the branch normalized at infinity at the start point `center + radius`.
pub fn circle_integral(qd: &QuadDifferential, center: Complex64, radius: f64) -> Result<Complex64> {
    let crit: Vec<Complex64> = qd.critical_points().iter().filter_map(|c| c.finite()).collect();
    let start = center + radius;
    let mut w = qd.branch_from_infinity(start)?.last_value;
    let opts = Adaptive {
        abs_tol: 1e-13,
        rel_tol: 1e-14,
        ..Adaptive::default()
    };
    let mut total = Complex64::new(0.0, 0.0);
    let mut theta = 0.0;
    while theta < 2.0 * PI {
        let z = center + Complex64::from_polar(radius, theta);
        let d = nearest(&crit, z, None).map_or(f64::INFINITY, |x| x.1);
        if d < TOO_CLOSE {
            return Err(Error::PathTooClose { point: z, distance: d });
        }
        let next = (theta + PIECE_FRACTION * d / radius).min(2.0 * PI);
        let w_ref = w;
        total += integrate_adaptive(theta, next, opts, |t| {
            let e = Complex64::from_polar(radius, t);
            Ok(principal_near(qd.big_q(center + e), w_ref) * Complex64::new(0.0, 1.0) * e)
        })?;
        w = principal_near(qd.big_q(center + Complex64::from_polar(radius, next)), w_ref);
        theta = next;
    }
    Ok(total)
}

/// Half the contour integral around all finite critical points: the sum of
/// the `+`-side periods of two cuts joining them in pairs, `±iπ res_∞`.
pub fn closed_contour_period(qd: &QuadDifferential) -> Result<Complex64> {
    let r = 4.0 * qd.scale() + 1.0;
    Ok(circle_integral(qd, Complex64::new(0.0, 0.0), r)? * 0.5)
}

/// `(α^2 - 4β)/8` for `q = z^3 + αz^2 + βz + γ`: minus the `1/z` coefficient
/// of `sqrt(q/z) = z + α/2 - (α^2 - 4β)/(8z) + O(z^-2)`.
pub fn residue_at_infinity(q: &Poly) -> Result<Complex64> {
    let q = monic_cubic(q)?;
    let (alpha, beta) = (q.coeff(2), q.coeff(1));
    Ok((alpha * alpha - 4.0 * beta) / 8.0)
}

/// `Im(α^2 - 4β)`, zero when two shorts joining distinct pairs can exist.
pub fn necessary_condition(q: &Poly) -> Result<f64> {
    Ok(8.0 * residue_at_infinity(q)?.im)
}

fn monic_cubic(q: &Poly) -> Result<Poly> {
    if q.degree() != 3 {
        return Err(Error::Degree {
            expected: 3,
            found: q.degree(),
        });
    }
    q.monic()
}

fn apex_check(a: Complex64) -> Result<(f64, f64)> {
    if !(a.im > 0.0) || !a.re.is_finite() || !a.im.is_finite() {
        return Err(Error::Domain(format!("apex must satisfy Im a > 0, got {a}")));
    }
    Ok((a.re, a.im))
}

/// The integrands scale like `y^2`, so does the absolute target.
fn real_opts(y: f64) -> Adaptive {
    Adaptive {
        abs_tol: 1e-14 * y.max(1.0).powi(2),
        rel_tol: 1e-15,
        max_depth: 50,
        max_panels: 50_000,
    }
}

/// `F(x, y) = Re ∫_0^x sqrt(((u-x)^2 + y^2)(u-1)/u) du`, the contribution of
/// the real leg of the path `0 → x → x + iy`.
pub fn sigma_f(x: f64, y: f64) -> Result<f64> {
    if x > 1.0 {
        // u = 1 + s^2
        let top = (x - 1.0).sqrt();
        let v = integrate_adaptive(0.0, top, real_opts(y), |s| {
            let u = 1.0 + s * s;
            let r = (((u - x) * (u - x) + y * y) / u).sqrt();
            Ok(Complex64::new(2.0 * s * s * r, 0.0))
        })?;
        Ok(v.re)
    } else if x >= 0.0 {
        Ok(0.0)
    } else {
        // u = -s^2 on [x, 0]
        let top = (-x).sqrt();
        let v = integrate_adaptive(0.0, top, real_opts(y), |s| {
            let u = -s * s;
            let r = (((u - x) * (u - x) + y * y) * (s * s + 1.0)).sqrt();
            Ok(Complex64::new(2.0 * r, 0.0))
        })?;
        Ok(-v.re)
    }
}

/// `G(x, y) = -∫_0^1 y^2 sqrt(1 - t^2) Im sqrt(1 - 1/(x + ity)) dt`, the
/// contribution of the vertical leg.
pub fn sigma_g(x: f64, y: f64) -> Result<f64> {
    // t = sin θ removes the square-root endpoint at t = 1; θ = φ^2 removes
    // the t^(-1/2) blow-up at t = 0 when x = 0 (the leg starts on the pole)
    let v = integrate_adaptive(0.0, (PI / 2.0).sqrt(), real_opts(y), |phi| {
        let th = phi * phi;
        let t = th.sin();
        let c = th.cos();
        let u = Complex64::new(x, t * y);
        if u.norm() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let g = (Complex64::new(1.0, 0.0) - u.inv()).sqrt();
        Ok(Complex64::new(-2.0 * phi * y * y * c * c * g.im, 0.0))
    })?;
    Ok(v.re)
}

/// `S(a) = F + G = Re ∫_0^a sqrt((t-1)(t-a)(t-conj a)/t) dt` on the branch
/// that is positive on `(1, ∞)` and continued up the vertical leg.
pub fn sigma_value(a: Complex64) -> Result<f64> {
    let (x, y) = apex_check(a)?;
    Ok(sigma_f(x, y)? + sigma_g(x, y)?)
}

/// The same value from period integrals along `[1, x]` (or `[x, 0]`) and
/// `[x, x + iy]`, as an independent check of the F/G transcription.
pub fn sigma_value_direct(a: Complex64) -> Result<f64> {
    let (x, y) = apex_check(a)?;
    let qd = QuadDifferential::from_apex(a)?;
    let corner = Complex64::new(x, 0.0);
    // branch at the corner seen from the upper side: y sqrt(1 - 1/(x + i0))
    let w_corner = y * (Complex64::new(1.0, 0.0) - Complex64::new(x, 1e-300).inv()).sqrt();
    let w_corner = if x > 0.0 && x < 1.0 {
        Complex64::new(0.0, y * (1.0 / x - 1.0).sqrt())
    } else {
        w_corner
    };
    let state = BranchState {
        last_point: corner,
        last_value: w_corner,
    };
    let vertical = period_integral(&qd, &PathSpec::between(&qd, vec![corner, a]), BranchSeed::From(state))?;
    let real_leg = if x > 1.0 {
        // ∫_1^x, the part over (0, 1) being purely imaginary
        let p = PathSpec::between(&qd, vec![corner, Complex64::new(1.0, 0.0)]);
        -period_integral(&qd, &p, BranchSeed::From(state))?.value
    } else if x < 0.0 {
        let p = PathSpec::between(&qd, vec![corner, Complex64::new(0.0, 0.0)]);
        -period_integral(&qd, &p, BranchSeed::From(state))?.value
    } else {
        Complex64::new(0.0, 0.0)
    };
    Ok((real_leg + vertical.value).re)
}

/// `∂S/∂x` by differentiating under the integral sign; needs `x > 1`.
pub fn sigma_partial_x(a: Complex64) -> Result<f64> {
    let (x, y) = apex_check(a)?;
    if x <= 1.0 {
        return Err(Error::Domain("∂S/∂x is evaluated only for Re a > 1".into()));
    }
    let top = (x - 1.0).sqrt();
    let df = integrate_adaptive(0.0, top, real_opts(y), |s| {
        let u = 1.0 + s * s;
        let r = (((u - x) * (u - x) + y * y) * u).sqrt();
        Ok(Complex64::new(2.0 * (x - u) * s * s / r, 0.0))
    })?
    .re + (y * y * (x - 1.0) / x).sqrt();
    let dg = integrate_adaptive(0.0, PI / 2.0, real_opts(y), |th| {
        let t = th.sin();
        let c = th.cos();
        let u = Complex64::new(x, t * y);
        let g = (Complex64::new(1.0, 0.0) - u.inv()).sqrt();
        let d = (u * u * g).inv();
        Ok(Complex64::new(-0.5 * y * y * c * c * d.im, 0.0))
    })?
    .re;
    Ok(df + dg)
}

/// Central difference of [`sigma_value`] in `x`.
pub fn sigma_partial_x_fd(a: Complex64, h: f64) -> Result<f64> {
    let p = sigma_value(a + h)?;
    let m = sigma_value(a - h)?;
    Ok((p - m) / (2.0 * h))
}

/// `+1` if `S > 0` at the interior anchor `1.6 + 2i` of Ω₁, `-1` otherwise.
pub fn sigma_sign() -> f64 {
    static SIGN: OnceLock<f64> = OnceLock::new();
    *SIGN.get_or_init(|| {
        let s = sigma_value(Complex64::new(1.6, 2.0)).expect("anchor evaluation");
        if s > 0.0 {
            1.0
        } else {
            -1.0
        }
    })
}

/// Width of the band `|S| ≤ SIGMA_BAND` treated as lying on Σ.
pub const SIGMA_BAND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Omega1,
    Sigma,
    Omega2,
}

impl Region {
    pub fn label(&self) -> &'static str {
        match self {
            Region::Omega1 => "Ω1",
            Region::Sigma => "Σ",
            Region::Omega2 => "Ω2",
        }
    }

    /// Number of short trajectories expected for an apex in this region.
    pub fn expected_shorts(&self) -> usize {
        match self {
            Region::Sigma => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub region: Region,
    /// `S(a)` with the sign convention `S > 0` on Ω₁.
    pub s: f64,
    pub margin: f64,
}

pub fn classify_apex(a: Complex64) -> Result<Classification> {
    classify_apex_with_band(a, SIGMA_BAND)
}

pub fn classify_apex_with_band(a: Complex64, band: f64) -> Result<Classification> {
    let s = sigma_sign() * sigma_value(a)?;
    let region = if s.abs() <= band {
        Region::Sigma
    } else if a.re <= 1.0 || s < 0.0 {
        Region::Omega2
    } else {
        Region::Omega1
    };
    Ok(Classification {
        region,
        s,
        margin: s.abs(),
    })
}

#[derive(Debug, Clone)]
pub struct SigmaCurve {
    /// Upper branch, starting at `z = 1`.
    pub points: Vec<Complex64>,
    /// `S` at each point (zero at the start by definition).
    pub residuals: Vec<f64>,
    /// Arc length along the polyline.
    pub arc: Vec<f64>,
    /// False when the continuation stopped before reaching `max_abs`.
    pub complete: bool,
    pub message: Option<String>,
}

impl SigmaCurve {
    /// Direction of the curve at `z = 1`, in degrees, from the first
    /// samples extrapolated linearly in `|z - 1|`.
    pub fn tangent_at_one_degrees(&self) -> Option<f64> {
        if self.points.len() < 3 {
            return None;
        }
        let p1 = self.points[1] - 1.0;
        let p2 = self.points[2] - 1.0;
        let (r1, r2) = (p1.norm(), p2.norm());
        let (t1, t2) = (p1.arg(), p2.arg());
        let t0 = t1 - (t2 - t1) * r1 / (r2 - r1);
        Some(t0.to_degrees())
    }

    /// `arg z` in degrees where the curve crosses `|z| = r` (linear
    /// interpolation between samples).
    pub fn arg_at_modulus_degrees(&self, r: f64) -> Option<f64> {
        for w in self.points.windows(2) {
            let (a, b) = (w[0].norm(), w[1].norm());
            if a <= r && b >= r {
                let t = if b > a { (r - a) / (b - a) } else { 0.0 };
                let z = w[0] + (w[1] - w[0]) * t;
                return Some(z.arg().to_degrees());
            }
        }
        None
    }

    /// Upper branch followed by its mirror image, as `(s, z, S)` with
    /// negative `s` on the conjugate branch.
    pub fn with_conjugate(&self) -> Vec<(f64, Complex64, f64)> {
        let mut out: Vec<(f64, Complex64, f64)> = self
            .points
            .iter()
            .zip(&self.arc)
            .zip(&self.residuals)
            .skip(1)
            .rev()
            .map(|((z, s), r)| (-s, z.conj(), *r))
            .collect();
        out.extend(
            self.points
                .iter()
                .zip(&self.arc)
                .zip(&self.residuals)
                .map(|((z, s), r)| (*s, *z, *r)),
        );
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SigmaTraceOptions {
    pub max_abs: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Accepted points satisfy `|S| ≤ tol`.
    pub tol: f64,
}

impl Default for SigmaTraceOptions {
    fn default() -> Self {
        SigmaTraceOptions {
            max_abs: 1e3,
            min_step: 0.01,
            max_step: 0.5,
            tol: 1e-8,
        }
    }
}

/// Predictor-corrector continuation of `S = 0` from `z = 1`.
///
/// The predictor leaves `z = 1` at angle π/3 and afterwards follows the
/// secant of the last two points; the corrector solves `S(x, y) = 0` in `x`
/// at fixed `y` (safeguarded Newton inside a bracket `1 < x`).
pub fn trace_sigma(opts: &SigmaTraceOptions) -> SigmaCurve {
    let mut curve = SigmaCurve {
        points: vec![Complex64::new(1.0, 0.0)],
        residuals: vec![0.0],
        arc: vec![0.0],
        complete: false,
        message: None,
    };
    let mut dir = Complex64::from_polar(1.0, PI / 3.0);
    loop {
        let z = *curve.points.last().unwrap();
        if z.norm() >= opts.max_abs {
            curve.complete = true;
            return curve;
        }
        let mut h = (0.05 * (z - 1.0).norm()).clamp(opts.min_step, opts.max_step);
        let mut accepted = None;
        for _ in 0..8 {
            let pred = z + dir * h;
            match correct_x(pred.im, pred.re, opts.tol) {
                Ok((x, s)) => {
                    accepted = Some((Complex64::new(x, pred.im), s));
                    break;
                }
                Err(_) => h *= 0.5,
            }
        }
        match accepted {
            Some((p, s)) => {
                let step = (p - z).norm();
                dir = (p - z) / step;
                let arc = curve.arc.last().unwrap() + step;
                curve.points.push(p);
                curve.residuals.push(s);
                curve.arc.push(arc);
            }
            None => {
                curve.message = Some(format!("corrector failed near {z}"));
                return curve;
            }
        }
    }
}

/// Solves `S(x, y) = 0` for `x > 1` starting from `x0`.
fn correct_x(y: f64, x0: f64, tol: f64) -> Result<(f64, f64)> {
    if !(y > 0.0) {
        return Err(Error::Domain("corrector needs y > 0".into()));
    }
    let sign = sigma_sign();
    let s = |x: f64| -> Result<f64> { Ok(sign * sigma_value(Complex64::new(x, y))?) };
    // S < 0 at x = 1 and increases with x; expand a bracket around x0
    let mut lo = 1.0;
    let mut hi = x0.max(1.0 + 1e-9);
    let mut s_hi = s(hi)?;
    let mut width = (hi - 1.0).max(1e-3);
    let mut guard = 0;
    while s_hi <= 0.0 {
        lo = hi;
        width *= 2.0;
        hi += width;
        s_hi = s(hi)?;
        guard += 1;
        if guard > 60 {
            return Err(Error::NoConvergence("no sign change of S in x".into()));
        }
    }
    let mut x = x0.clamp(lo + 1e-12, hi);
    for _ in 0..100 {
        let v = s(x)?;
        if v.abs() <= tol {
            return Ok((x, v));
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = sign * sigma_partial_x(Complex64::new(x, y))?;
        let mut next = x - v / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo) < 1e-15 * hi {
            return Err(Error::NoConvergence(format!(
                "bracket collapsed with |S| = {:e}",
                v.abs()
            )));
        }
        x = next;
    }
    Err(Error::NoConvergence("corrector iteration cap".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    #[test]
    fn residue_values() {
        let q = Poly::from_roots(&[c64(1.0, 0.0), c64(0.0, 2.0), c64(0.0, -2.0)]);
        assert!((residue_at_infinity(&q).unwrap() - c64(-15.0 / 8.0, 0.0)).norm() < 1e-15);
        let q = Poly::from_real(&[3.0, 0.0, 0.0, 1.0]);
        assert_eq!(residue_at_infinity(&q).unwrap(), c64(0.0, 0.0));
    }

    #[test]
    fn necessary_condition_detects_complex_cubics() {
        let q = Poly::from_roots(&[c64(1.0, 0.0), c64(1.6, 2.0), c64(1.6, -2.0)]);
        assert!(necessary_condition(&q).unwrap().abs() < 1e-14);
        // (z - i)(z - 2)(z - 3): α = -(5 + i), β = 6 + 5i; Im(α^2 - 4β) = 10 - 20 = -10
        let q = Poly::from_roots(&[c64(0.0, 1.0), c64(2.0, 0.0), c64(3.0, 0.0)]);
        assert!((necessary_condition(&q).unwrap() + 10.0).abs() < 1e-12);
    }

    #[test]
    fn path_too_close_is_reported() {
        let qd = QuadDifferential::from_apex(c64(0.0, 2.0)).unwrap();
        let p = PathSpec::new(vec![c64(0.5, -1.0), c64(0.5, 1.0), c64(1.0, 1e-9)]);
        let r = period_integral(&qd, &p, BranchSeed::Infinity);
        assert!(matches!(r, Err(Error::PathTooClose { .. })));
    }

    #[test]
    fn s_negative_left_of_one() {
        for a in [c64(0.5, 2.0), c64(0.0, 2.0), c64(-1.0, 0.5), c64(1.0, 3.0)] {
            assert!(sigma_sign() * sigma_value(a).unwrap() < 0.0, "{a}");
        }
    }

    #[test]
    fn region_labels() {
        assert_eq!(Region::Sigma.expected_shorts(), 3);
        assert_eq!(Region::Omega1.label(), "Ω1");
    }
}
