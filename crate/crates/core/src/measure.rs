//! The measure whose Cauchy transform solves
//! `zC^2 - (z^2 + γz/2)C + (z + δ/4) = 0`, supported on the short
//! trajectories of `-Δ(z)/z^2 dz^2`.
//!
//! With `w = sqrt(Δ)/z = sqrt(q/z)`, `q = z^3 + γz^2 + (γ^2 - 16)z/4 - δ`,
//! the branch `w ~ z` at infinity is single valued off the support and
//! `C = (2z + γ - 2w)/4`. Across an oriented arc `C_+ - C_- = -w_+`, so
//! `dν = w_+(t) dt / (2πi)` with `+` the left side.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::algebra::Poly;
use crate::error::{Error, Result};
use crate::periods::{continue_along, weighted_path_integral, weighted_path_integral_with, BranchSeed, PathSpec};
use crate::qdiff::{principal_near, BranchState, QuadDifferential};
use crate::quadrature::Adaptive;
use crate::spectral::{
    cauchy_of_roots, delta_hat, hausdorff_points_polylines, rescaled_root_measure, spectrum, Selector, SpectralProblem,
};
use crate::tracer::{build_critical_graph, point_polyline_distance, End, Start, TraceOptions};

/// `Δ(z) = (z/4)(4z^3 + 4γz^2 + (γ^2 - 16)z - 4δ)`.
pub fn discriminant(gamma: Complex64, delta: Complex64) -> Poly {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    Poly::new(vec![zero, -delta, (gamma * gamma - 16.0) / 4.0, gamma, one])
}

/// `(z^2 + γz/2)^2 - 4z(z + δ/4)` by polynomial arithmetic.
pub fn quadratic_discriminant(gamma: Complex64, delta: Complex64) -> Poly {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let b = Poly::new(vec![zero, gamma / 2.0, one]);
    let c = Poly::new(vec![delta / 4.0, one]);
    let four_z = Poly::new(vec![zero, Complex64::new(4.0, 0.0)]);
    &(&b * &b) - &(&four_z * &c)
}

/// `zC^2 - (z^2 + γz/2)C + (z + δ/4)`.
pub fn algebraic_residual(z: Complex64, c: Complex64, gamma: Complex64, delta: Complex64) -> Complex64 {
    z * c * c - (z * z + gamma * z / 2.0) * c + (z + delta / 4.0)
}

/// Closed form `(2z^2 + γz - 2 sqrt(Δ))/(4z)` with `sqrt(Δ) ~ z^2`, the root
/// continued radially inward from infinity (cuts along outward rays from
/// the critical points). Use [`MeasureSupport::cauchy_closed_form`] for the
/// branch cut along the support.
pub fn cauchy_closed_form(z: Complex64, gamma: Complex64, delta: Complex64) -> Result<Complex64> {
    if z.norm() == 0.0 {
        return Err(Error::Domain("C is evaluated away from z = 0".into()));
    }
    let qd = QuadDifferential::from_parameters(gamma, delta);
    let w = qd.branch_from_infinity(z)?.last_value;
    Ok(transform_from_root(z, gamma, delta, w))
}

/// `(2z + γ - 2w)/4`, or the equivalent `(4 + δ/z)/(2z + γ + 2w)` (from
/// `(2z + γ)^2 - 4w^2 = 16 + 4δ/z`) when that avoids cancellation.
fn transform_from_root(z: Complex64, gamma: Complex64, delta: Complex64, w: Complex64) -> Complex64 {
    let plus = 2.0 * z + gamma + 2.0 * w;
    let minus = 2.0 * z + gamma - 2.0 * w;
    if plus.norm() >= minus.norm() {
        (4.0 + delta / z) / plus
    } else {
        minus / 4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySample {
    /// Vertex index in the arc polyline.
    pub index: usize,
    pub point: Complex64,
    /// Boundary value of `w` from the left of the arc.
    pub w_plus: Complex64,
    /// `w_+ τ / (2πi)` with `τ` the unit tangent in the arc direction.
    pub density: Complex64,
}

#[derive(Debug, Clone)]
pub struct SupportArc {
    /// Critical-point ids of the start and end of the arc.
    pub from: usize,
    pub to: usize,
    /// Polyline from the start critical point to the end one.
    pub points: Vec<Complex64>,
    /// Vertex at which the boundary branch was fixed from infinity.
    pub anchor: usize,
    /// Interior vertices only.
    pub samples: Vec<DensitySample>,
    /// `ν` of the part of the arc up to each vertex.
    pub cumulative: Vec<Complex64>,
    pub mass: Complex64,
    /// Set when some sample has `|Im density| > 1e-8 |density|`.
    pub flagged: bool,
}

impl SupportArc {
    pub fn max_imag_ratio(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.density.im.abs() / s.density.norm().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct MeasureSupport {
    pub gamma: Complex64,
    pub delta: Complex64,
    pub qd: QuadDifferential,
    pub arcs: Vec<SupportArc>,
}

/// Why no measure was produced.
#[derive(Debug, Clone, PartialEq)]
pub enum NoMeasure {
    Degenerate(String),
    /// Three shorts: the configuration on Σ, not covered by the two-short
    /// pattern.
    ThreeShorts,
    ShortCount(usize),
    Incomplete,
}

impl std::fmt::Display for NoMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoMeasure::Degenerate(r) => write!(f, "degenerate differential: {r}"),
            NoMeasure::ThreeShorts => write!(f, "three short trajectories"),
            NoMeasure::ShortCount(n) => write!(f, "{n} short trajectories, two are needed"),
            NoMeasure::Incomplete => write!(f, "critical graph incomplete"),
        }
    }
}

pub fn support(gamma: Complex64, delta: Complex64) -> Result<std::result::Result<MeasureSupport, NoMeasure>> {
    support_with(gamma, delta, &TraceOptions::default())
}

pub fn support_with(
    gamma: Complex64,
    delta: Complex64,
    opts: &TraceOptions,
) -> Result<std::result::Result<MeasureSupport, NoMeasure>> {
    let qd = QuadDifferential::from_parameters(gamma, delta);
    if let Some(reason) = qd.degeneracy() {
        return Ok(Err(NoMeasure::Degenerate(reason)));
    }
    let graph = build_critical_graph(&qd, opts)?;
    match graph.shorts.len() {
        2 => {}
        3 => return Ok(Err(NoMeasure::ThreeShorts)),
        n if graph.incomplete => {
            let _ = n;
            return Ok(Err(NoMeasure::Incomplete));
        }
        n => return Ok(Err(NoMeasure::ShortCount(n))),
    }
    let cps = qd.critical_points();
    let mut raw = Vec::new();
    for s in &graph.shorts {
        let seg = &graph.segments[s.segment];
        let (Start::Critical { id: from, .. }, End::HitCritical { id: to, .. }) = (seg.start, &seg.end) else {
            return Err(Error::Domain("short without critical endpoints".into()));
        };
        let a = cps[from].finite().unwrap();
        let b = cps[*to].finite().unwrap();
        let mut points = vec![a];
        points.extend(
            seg.points
                .iter()
                .copied()
                .filter(|p| (p - a).norm() > 1e-12 && (p - b).norm() > 1e-12),
        );
        points.push(b);
        raw.push((from, *to, points));
    }
    let lines: Vec<Vec<Complex64>> = raw.iter().map(|r| r.2.clone()).collect();
    let mut arcs = Vec::new();
    for (from, to, points) in raw {
        arcs.push(build_arc(&qd, &lines, from, to, points)?);
    }
    Ok(Ok(MeasureSupport { gamma, delta, qd, arcs }))
}

fn build_arc(
    qd: &QuadDifferential,
    lines: &[Vec<Complex64>],
    from: usize,
    to: usize,
    points: Vec<Complex64>,
) -> Result<SupportArc> {
    let n = points.len();
    if n < 3 {
        return Err(Error::Domain("support arc has no interior vertex".into()));
    }
    // anchor at the vertex closest to half the polyline length
    let mut acc = vec![0.0];
    for w in points.windows(2) {
        acc.push(acc.last().unwrap() + (w[1] - w[0]).norm());
    }
    let half = acc[n - 1] / 2.0;
    let anchor = (1..n - 1)
        .min_by(|&i, &j| (acc[i] - half).abs().total_cmp(&(acc[j] - half).abs()))
        .unwrap();
    let p = points[anchor];
    let chord = points[anchor + 1] - points[anchor - 1];
    let w_any = qd.big_q(p).sqrt();
    let tau = oriented_tangent(w_any, chord);
    let normal = Complex64::new(0.0, 1.0) * tau;
    let h = 1e-6 * qd.scale().max(1.0);
    let w_left = branch_off_support(qd, lines, p + normal * h, Some(normal))?;
    let w_anchor = principal_near(qd.big_q(p), w_left.last_value);

    let mut w = vec![Complex64::new(0.0, 0.0); n];
    w[anchor] = w_anchor;
    for i in anchor + 1..n - 1 {
        w[i] = principal_near(qd.big_q(points[i]), w[i - 1]);
    }
    for i in (1..anchor).rev() {
        w[i] = principal_near(qd.big_q(points[i]), w[i + 1]);
    }
    let samples: Vec<DensitySample> = (1..n - 1)
        .map(|i| {
            let chord = points[i + 1] - points[i - 1];
            let tau = oriented_tangent(w[i], chord);
            DensitySample {
                index: i,
                point: points[i],
                w_plus: w[i],
                density: w[i] * tau / (Complex64::new(0.0, 2.0 * PI)),
            }
        })
        .collect();

    let seed = BranchSeed::From(BranchState {
        last_point: p,
        last_value: w_anchor,
    });
    let forward = PathSpec::between(qd, points[anchor..].to_vec());
    let backward = PathSpec::between(qd, points[..=anchor].iter().rev().copied().collect());
    let one = |_: Complex64| Complex64::new(1.0, 0.0);
    let fwd = weighted_path_integral(qd, &forward, seed, one)?;
    let bwd = weighted_path_integral(qd, &backward, seed, one)?;
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let to_anchor = -bwd.value;
    let cumulative: Vec<Complex64> = (0..n)
        .map(|i| {
            let v = if i >= anchor {
                to_anchor + fwd.partial[i - anchor]
            } else {
                to_anchor + bwd.partial[anchor - i]
            };
            v / two_pi_i
        })
        .collect();
    let mass = (fwd.value - bwd.value) / two_pi_i;
    let mut arc = SupportArc {
        from,
        to,
        points,
        anchor,
        samples,
        cumulative,
        mass,
        flagged: false,
    };
    arc.flagged = arc.max_imag_ratio() > 1e-8;
    Ok(arc)
}

/// Unit tangent of the horizontal trajectory through a point where the
/// root is `w`, oriented along `chord`.
fn oriented_tangent(w: Complex64, chord: Complex64) -> Complex64 {
    let t = Complex64::new(0.0, 1.0) * w.conj() / w.norm();
    if (t * chord.conj()).re >= 0.0 {
        t
    } else {
        -t
    }
}

/// The branch `w ~ z` continued from infinity to `z` along a straight ray
/// that crosses none of the polylines in `lines`. Rays are tried around
/// `preferred` first.
pub fn branch_off_support(
    qd: &QuadDifferential,
    lines: &[Vec<Complex64>],
    z: Complex64,
    preferred: Option<Complex64>,
) -> Result<BranchState> {
    let base = preferred.map(|d| d / d.norm()).unwrap_or_else(|| {
        if z.norm() > 0.0 {
            z / z.norm()
        } else {
            Complex64::new(1.0, 0.0)
        }
    });
    let crit: Vec<Complex64> = qd.critical_points().iter().filter_map(|c| c.finite()).collect();
    let far = 10.0 * (qd.scale() + z.norm()) + 10.0;
    let alpha = qd.q().coeff(2);
    for k in 0..64 {
        // 0, +1, -1, +2, -2, ... steps of π/32 around the preferred ray
        let j = ((k + 1) / 2) as f64 * if k % 2 == 1 { 1.0 } else { -1.0 };
        let dir = base * Complex64::from_polar(1.0, j * PI / 32.0);
        let f = z + dir * far;
        if lines.iter().any(|l| crosses(z, f, l)) {
            continue;
        }
        if crit
            .iter()
            .any(|&c| crate::tracer::point_segment_distance(c, z, f) < 1e-6)
        {
            continue;
        }
        let start = BranchState {
            last_point: f,
            last_value: principal_near(qd.big_q(f), f + alpha / 2.0),
        };
        return continue_along(qd, &crit, start, z);
    }
    Err(Error::Domain(format!("no ray from {z} to infinity avoids the support")))
}

fn crosses(a: Complex64, b: Complex64, line: &[Complex64]) -> bool {
    line.windows(2).any(|s| segments_intersect(a, b, s[0], s[1]))
}

fn cross(o: Complex64, a: Complex64, b: Complex64) -> f64 {
    (a - o).re * (b - o).im - (a - o).im * (b - o).re
}

fn segments_intersect(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Complex64, b: Complex64, p: Complex64, d: f64| {
        d == 0.0 && p.re >= a.re.min(b.re) && p.re <= a.re.max(b.re) && p.im >= a.im.min(b.im) && p.im <= a.im.max(b.im)
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyValue {
    pub value: Complex64,
    /// `z` lies within `1e-3` of the support, where the quadrature loses
    /// accuracy.
    pub near_support: bool,
}

impl MeasureSupport {
    pub fn polylines(&self) -> Vec<Vec<Complex64>> {
        self.arcs.iter().map(|a| a.points.clone()).collect()
    }

    pub fn distance(&self, z: Complex64) -> f64 {
        self.arcs
            .iter()
            .map(|a| point_polyline_distance(z, &a.points))
            .fold(f64::INFINITY, f64::min)
    }

    /// Sum of the arc masses.
    pub fn total_mass_complex(&self) -> Complex64 {
        self.arcs.iter().map(|a| a.mass).sum()
    }

    /// Density at a point of an arc (within `1e-6` of its polyline).
    pub fn density(&self, t: Complex64) -> Result<f64> {
        let (arc, seg) = self
            .arcs
            .iter()
            .flat_map(|a| (0..a.points.len() - 1).map(move |i| (a, i)))
            .min_by(|x, y| {
                let dx = crate::tracer::point_segment_distance(t, x.0.points[x.1], x.0.points[x.1 + 1]);
                let dy = crate::tracer::point_segment_distance(t, y.0.points[y.1], y.0.points[y.1 + 1]);
                dx.total_cmp(&dy)
            })
            .ok_or_else(|| Error::Domain("empty support".into()))?;
        let d = crate::tracer::point_segment_distance(t, arc.points[seg], arc.points[seg + 1]);
        if d > 1e-6 * self.qd.scale().max(1.0) {
            return Err(Error::Domain(format!("{t} is not on the support (distance {d:e})")));
        }
        if self.qd.critical_distance(t) < 1e-12 {
            return Err(Error::Domain("density is evaluated away from the arc endpoints".into()));
        }
        // nearest sampled vertex provides the branch
        let near = arc
            .samples
            .iter()
            .min_by(|a, b| (a.point - t).norm().total_cmp(&(b.point - t).norm()))
            .ok_or_else(|| Error::Domain("arc has no samples".into()))?;
        let w = principal_near(self.qd.big_q(t), near.w_plus);
        let chord = arc.points[seg + 1] - arc.points[seg];
        let tau = oriented_tangent(w, chord);
        let rho = w * tau / Complex64::new(0.0, 2.0 * PI);
        Ok(rho.re)
    }

    /// `∫ dν(t)/(z - t)` by quadrature over the arcs.
    pub fn cauchy_numeric(&self, z: Complex64) -> Result<CauchyValue> {
        let dist = self.distance(z);
        if dist < 1e-12 {
            return Err(Error::Domain(format!("{z} lies on the support")));
        }
        let near_support = dist < 1e-3;
        let opts = if near_support {
            Adaptive {
                abs_tol: 1e-9,
                rel_tol: 1e-10,
                max_depth: 60,
                max_panels: 200_000,
            }
        } else {
            Adaptive {
                abs_tol: 1e-13,
                rel_tol: 1e-14,
                ..Adaptive::default()
            }
        };
        let mut total = Complex64::new(0.0, 0.0);
        for arc in &self.arcs {
            let p = arc.points[arc.anchor];
            let seed = BranchSeed::From(BranchState {
                last_point: p,
                last_value: arc.samples[arc.anchor - 1].w_plus,
            });
            let weight = |t: Complex64| (z - t).inv();
            let fwd = weighted_path_integral_with(
                &self.qd,
                &PathSpec::between(&self.qd, arc.points[arc.anchor..].to_vec()),
                seed,
                weight,
                opts,
            )?;
            let back: Vec<Complex64> = arc.points[..=arc.anchor].iter().rev().copied().collect();
            let bwd = weighted_path_integral_with(&self.qd, &PathSpec::between(&self.qd, back), seed, weight, opts)?;
            total += fwd.value - bwd.value;
        }
        Ok(CauchyValue {
            value: total / Complex64::new(0.0, 2.0 * PI),
            near_support,
        })
    }

    /// `(2z + γ - 2w)/4` with `w` continued from infinity without crossing
    /// the support.
    pub fn cauchy_closed_form(&self, z: Complex64) -> Result<Complex64> {
        if self.distance(z) < 1e-12 {
            return Err(Error::Domain(format!("{z} lies on the support")));
        }
        if z.norm() == 0.0 {
            return Err(Error::Domain("C is evaluated away from z = 0".into()));
        }
        let w = branch_off_support(&self.qd, &self.polylines(), z, None)?.last_value;
        Ok(transform_from_root(z, self.gamma, self.delta, w))
    }
}

/// Real part of the total mass; 0 for an empty support.
pub fn total_mass(sup: &MeasureSupport) -> f64 {
    sup.total_mass_complex().re
}

/// One row of the root-versus-support comparison.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub m: usize,
    pub k: usize,
    pub delta_hat: Complex64,
    /// Hausdorff distance to the arcs nearest to at least one root.
    pub hausdorff: f64,
    /// Hausdorff distance to the whole support.
    pub hausdorff_all: f64,
    /// `|C_roots(probe) - C(probe)|` with the closed-form transform.
    pub cauchy_gap: f64,
    pub populated_arcs: usize,
    pub total_arcs: usize,
}

/// Rescaled roots of the selected eigenpolynomial against the support of
/// the measure with parameters `(γ, λ/m^{3/2})`, for each `m`.
pub fn convergence_monitor(
    ms: &[usize],
    gamma: f64,
    selector: Selector,
    probe: Complex64,
) -> Result<Vec<ConvergenceRow>> {
    let mut rows = Vec::with_capacity(ms.len());
    for &m in ms {
        let sol = spectrum(&SpectralProblem::new(m, gamma)?)?;
        let k = selector.pick(&sol)?;
        let rm = rescaled_root_measure(&sol, k)?;
        let dh = delta_hat(sol.eigenvalues[k], m);
        let sup = support(Complex64::new(gamma, 0.0), dh)?.map_err(|e| Error::NoMeasure(format!("m = {m}: {e}")))?;
        let lines = sup.polylines();
        let populated = populated_polylines(&rm.points, &lines);
        let hausdorff = hausdorff_points_polylines(&rm.points, &populated, 1e-3);
        let hausdorff_all = hausdorff_points_polylines(&rm.points, &lines, 1e-3);
        let empirical = cauchy_of_roots(&Poly::from_roots(&rm.points), probe)?;
        let cauchy_gap = (empirical - sup.cauchy_closed_form(probe)?).norm();
        rows.push(ConvergenceRow {
            m,
            k,
            delta_hat: dh,
            hausdorff,
            hausdorff_all,
            cauchy_gap,
            populated_arcs: populated.len(),
            total_arcs: lines.len(),
        });
    }
    Ok(rows)
}

/// The polylines that are the nearest one for at least one point.
pub fn populated_polylines(points: &[Complex64], lines: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let mut used = vec![false; lines.len()];
    for &p in points {
        let best = lines
            .iter()
            .enumerate()
            .map(|(i, l)| (i, point_polyline_distance(p, l)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((i, _)) = best {
            used[i] = true;
        }
    }
    lines
        .iter()
        .zip(used)
        .filter(|(_, u)| *u)
        .map(|(l, _)| l.clone())
        .collect()
}
