//! Trajectory integration and critical-graph assembly.
//!
//! A horizontal trajectory solves `dz/ds = i conj(w)/|w|` with
//! `w = sqrt(q(z)/z)`, so that `dζ = w dz = i|w| ds`: the real part of
//! `ζ = ∫ w dz` stays fixed and the imaginary part grows with arc length.
//! Orthogonal trajectories use `dz/ds = conj(w)/|w|` instead.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qdiff::{continue_sqrt, nearest_direction, principal_near, CriticalPoint, Kind, QuadDifferential};
use crate::quadrature::gauss8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    /// A trace ends at a finite critical point once closer than this.
    pub eps_hit: f64,
    pub escape_radius: f64,
    /// Arc-length budget.
    pub max_arc: f64,
    /// Distance from a critical point at which rays are launched.
    pub seed_radius: f64,
    /// Local error tolerance of the Runge-Kutta pair.
    pub rtol: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            eps_hit: 1e-4,
            escape_radius: 50.0,
            max_arc: 200.0,
            seed_radius: 1e-6,
            rtol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Horizontal,
    Orthogonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Start {
    /// Launched from critical point `id` (index into `critical_points()`)
    /// along ray `ray` of its fan.
    Critical {
        id: usize,
        ray: usize,
    },
    Regular(Complex64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum End {
    HitCritical {
        id: usize,
        distance: f64,
    },
    /// Left the escape disk near the direction `D_k`; `low_confidence` when
    /// the angle alone would have picked another direction.
    Escaped {
        direction: usize,
        low_confidence: bool,
    },
    Aborted(String),
}

#[derive(Debug, Clone)]
pub struct TrajectorySegment {
    pub family: Family,
    pub start: Start,
    pub end: End,
    pub points: Vec<Complex64>,
    /// `∫ w dz` from the launch point to each sample, on the branch used
    /// for the trace. For critical launches the part inside the seed
    /// radius is included.
    pub zeta: Vec<Complex64>,
    pub arc_length: f64,
}

impl TrajectorySegment {
    /// `∫ w dz` over the whole segment including the piece between the last
    /// sample and the critical point it hit.
    pub fn total_period(&self, qd: &QuadDifferential) -> Complex64 {
        let last = *self.zeta.last().unwrap();
        match self.end {
            End::HitCritical { id, distance } => {
                let cp = qd.critical_points()[id];
                let tail = tail_integral(qd, &cp, distance);
                match self.family {
                    Family::Horizontal => last + Complex64::new(0.0, tail),
                    Family::Orthogonal => last + tail,
                }
            }
            _ => last,
        }
    }

    pub fn end_point(&self) -> Complex64 {
        *self.points.last().unwrap()
    }
}

/// `|∫ w dz|` along a ray from a critical point out to distance `d`, from
/// the local model `w ≈ sqrt(c) (z - z0)^(r/2)`.
fn tail_integral(qd: &QuadDifferential, cp: &CriticalPoint, d: f64) -> f64 {
    let c = qd.local_factor(cp).map(|c| c.norm()).unwrap_or(0.0);
    let e = (cp.order() + 2) as f64 / 2.0;
    c.sqrt() * d.powf(e) / e
}

/// Unit vector of the trajectory direction at `z` for branch value `w`.
fn direction(family: Family, w: Complex64) -> Complex64 {
    let u = w.conj() / w.norm();
    match family {
        Family::Horizontal => Complex64::new(0.0, 1.0) * u,
        Family::Orthogonal => u,
    }
}

/// Traces one trajectory.
///
/// For a critical start the departure angle comes from the ray fan (or the
/// orthogonal fan) of that point; for a regular start `heading` chooses
/// between the two opposite directions available there.
pub fn trace(
    qd: &QuadDifferential,
    start: Start,
    heading: Complex64,
    family: Family,
    opts: &TraceOptions,
) -> Result<TrajectorySegment> {
    let cps = qd.critical_points();
    let finite: Vec<(usize, Complex64)> = cps
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.finite().map(|z| (i, z)))
        .collect();

    let (z0, want_dir, origin, zeta0) = match start {
        Start::Critical { id, ray } => {
            let cp = cps
                .get(id)
                .ok_or_else(|| Error::Domain(format!("no critical point {id}")))?;
            let center = cp
                .finite()
                .ok_or_else(|| Error::NotApplicable("cannot launch from infinity".into()))?;
            let fan = match family {
                Family::Horizontal => qd.ray_fan(cp)?,
                Family::Orthogonal => qd.orthogonal_ray_fan(cp)?,
            };
            let theta = *fan
                .get(ray)
                .ok_or_else(|| Error::Domain(format!("ray {ray} out of range")))?;
            let dir = Complex64::from_polar(1.0, theta);
            let t = tail_integral(qd, cp, opts.seed_radius);
            let zeta0 = match family {
                Family::Horizontal => Complex64::new(0.0, t),
                Family::Orthogonal => Complex64::new(t, 0.0),
            };
            (center + dir * opts.seed_radius, dir, Some(id), zeta0)
        }
        Start::Regular(z) => {
            if heading.norm() == 0.0 {
                return Err(Error::Domain("heading must be nonzero".into()));
            }
            (z, heading / heading.norm(), None, Complex64::new(0.0, 0.0))
        }
    };

    // the branch sign is chosen so that the flow leaves along `want_dir`
    let q0 = qd.big_q(z0);
    let mut w = q0.sqrt();
    if (direction(family, w) * want_dir.conj()).re < 0.0 {
        w = -w;
    }

    let mut seg = TrajectorySegment {
        family,
        start,
        end: End::Aborted("not started".into()),
        points: vec![z0],
        zeta: vec![zeta0],
        arc_length: 0.0,
    };
    let mut z = z0;
    let mut zeta = zeta0;
    let target = match family {
        Family::Horizontal => zeta0.re,
        Family::Orthogonal => zeta0.im,
    };
    let mut left_origin = origin.is_none();
    let mut h = opts.seed_radius.max(1e-8);

    let nearest = |p: Complex64| -> (usize, f64) {
        finite
            .iter()
            .map(|&(i, c)| (i, (c - p).norm()))
            .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    };

    loop {
        if seg.arc_length > opts.max_arc {
            seg.end = End::Aborted("arc-length budget exhausted".into());
            return Ok(seg);
        }
        let (_, d) = nearest(z);
        let d_step = if left_origin { d } else { d.max(opts.seed_radius) };
        let h_max = (0.05 * (d_step + 0.01)).min(0.5 * d_step).max(1e-15);
        h = h.min(h_max);

        let step = match rk45_step(qd, family, z, w, h) {
            Ok(s) => s,
            Err(_) => {
                h *= 0.25;
                if h < 1e-14 {
                    seg.end = End::Aborted("stiff: step size underflow".into());
                    return Ok(seg);
                }
                continue;
            }
        };
        let tol = opts.rtol * z.norm().max(1.0);
        if step.err > tol {
            h *= (0.9 * (tol / step.err).powf(0.2)).clamp(0.1, 0.9);
            if h < 1e-14 {
                seg.end = End::Aborted("stiff: step size underflow".into());
                return Ok(seg);
            }
            continue;
        }
        let mut z_new = step.z;
        // period increment along the chord, then projection back onto the level set
        let (dzeta, w_new) = match chord_integral(qd, z, z_new, w) {
            Ok(v) => v,
            Err(_) => {
                h *= 0.25;
                continue;
            }
        };
        let mut zeta_new = zeta + dzeta;
        let mut w_end = w_new;
        let e = match family {
            Family::Horizontal => zeta_new.re - target,
            Family::Orthogonal => zeta_new.im - target,
        };
        let (_, d_new) = nearest(z_new);
        let shift = match family {
            Family::Horizontal => -e * w_end.conj() / w_end.norm_sqr(),
            Family::Orthogonal => Complex64::new(0.0, -e) * w_end.conj() / w_end.norm_sqr(),
        };
        if shift.norm() < 0.1 * d_new && shift.norm() > 0.0 {
            z_new += shift;
            zeta_new += w_end * shift;
            w_end = continue_sqrt(qd.big_q(z_new), w_end).map_err(|_| Error::BranchJump { from: z, to: z_new })?;
        }

        let moved = (z_new - z).norm();
        seg.arc_length += moved;
        // closest approach to each critical point along the chord
        let mut hit: Option<(usize, f64)> = None;
        for &(i, c) in &finite {
            if !left_origin && Some(i) == origin {
                continue;
            }
            let dist = point_segment_distance(c, z, z_new);
            if dist < opts.eps_hit && hit.is_none_or(|(_, hd)| dist < hd) {
                hit = Some((i, dist));
            }
        }
        z = z_new;
        w = w_end;
        zeta = zeta_new;
        seg.points.push(z);
        seg.zeta.push(zeta);
        if !left_origin {
            let oc = cps[origin.unwrap()].finite().unwrap();
            if (z - oc).norm() > 10.0 * opts.eps_hit {
                left_origin = true;
            }
        }
        if let Some((id, _)) = hit {
            let c = cps[id].finite().unwrap();
            // finish on the sample nearest the critical point
            let dist = (z - c).norm();
            seg.end = End::HitCritical { id, distance: dist };
            return Ok(seg);
        }
        if z.norm() > opts.escape_radius {
            seg.end = escape_end(z, w);
            return Ok(seg);
        }
        h = (h * (0.9 * (tol / step.err.max(1e-300)).powf(0.2)).clamp(1.0, 5.0)).min(h_max * 4.0);
    }
}

/// Direction classification at the escape radius. With `w ~ ±z` at
/// infinity, `Im ζ` grows along `D_0, D_2` on the `+z` branch and along
/// `D_1, D_3` on the `-z` branch; that parity settles ties near the sector
/// boundaries.
fn escape_end(z: Complex64, w: Complex64) -> End {
    let by_angle = nearest_direction(z.arg());
    let parity = if (w / z).re >= 0.0 { 0 } else { 1 };
    if by_angle % 2 == parity {
        return End::Escaped {
            direction: by_angle,
            low_confidence: false,
        };
    }
    // pick the neighbour with the right parity on the side of arg z
    let base = PI / 4.0 + by_angle as f64 * PI / 2.0;
    let off = (z.arg() - base + PI).rem_euclid(2.0 * PI) - PI;
    let k = if off >= 0.0 {
        (by_angle + 1) % 4
    } else {
        (by_angle + 3) % 4
    };
    End::Escaped {
        direction: k,
        low_confidence: true,
    }
}

pub(crate) fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Distance from `p` to a polyline.
pub fn point_polyline_distance(p: Complex64, line: &[Complex64]) -> f64 {
    if line.len() == 1 {
        return (p - line[0]).norm();
    }
    line.windows(2)
        .map(|s| point_segment_distance(p, s[0], s[1]))
        .fold(f64::INFINITY, f64::min)
}

struct Step {
    z: Complex64,
    err: f64,
}

fn field(qd: &QuadDifferential, family: Family, z: Complex64, w_ref: Complex64) -> Result<(Complex64, Complex64)> {
    let w = continue_sqrt(qd.big_q(z), w_ref).map_err(|_| Error::BranchJump { from: z, to: z })?;
    if w.norm() == 0.0 || !w.is_finite() {
        return Err(Error::Domain("field vanishes".into()));
    }
    Ok((direction(family, w), w))
}

/// One Dormand-Prince 5(4) step of size `h`.
fn rk45_step(qd: &QuadDifferential, family: Family, z: Complex64, w: Complex64, h: f64) -> Result<Step> {
    const C: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut k = [Complex64::new(0.0, 0.0); 7];
    let (k0, _) = field(qd, family, z, w)?;
    k[0] = k0;
    for s in 0..6 {
        let mut zs = z;
        for j in 0..=s {
            zs += k[j] * (h * C[s][j]);
        }
        k[s + 1] = field(qd, family, zs, w)?.0;
    }
    let mut z5 = z;
    let mut z4 = z;
    for j in 0..7 {
        z5 += k[j] * (h * B5[j]);
        z4 += k[j] * (h * B4[j]);
    }
    Ok(Step {
        z: z5,
        err: (z5 - z4).norm(),
    })
}

/// `∫ w dz` along the chord `[a, b]` (8-point Gauss rule) and the branch
/// value at `b`.
fn chord_integral(qd: &QuadDifferential, a: Complex64, b: Complex64, wa: Complex64) -> Result<(Complex64, Complex64)> {
    let rule = gauss8();
    let half = (b - a) * 0.5;
    let mid = (a + b) * 0.5;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut last = wa;
    for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
        let t = mid + half * *x;
        last = continue_sqrt(qd.big_q(t), last).map_err(|_| Error::BranchJump { from: a, to: t })?;
        acc += last * *wt;
    }
    let wb = continue_sqrt(qd.big_q(b), last).map_err(|_| Error::BranchJump { from: a, to: b })?;
    Ok((acc * half, wb))
}

/// A trajectory joining two finite critical points.
#[derive(Debug, Clone)]
pub struct Short {
    /// Endpoint critical-point ids, `from <= to`.
    pub from: usize,
    pub to: usize,
    /// Index of the traced segment that represents this short.
    pub segment: usize,
    /// The segment traced from the other end, when it was found.
    pub twin: Option<usize>,
    /// `|∫ sqrt(Q) dz|` along the short.
    pub period: f64,
    /// No other finite critical point within `eps_hit` of the interior.
    pub unbroken: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeEntry {
    pub segment: usize,
    pub critical: usize,
    pub ray: usize,
    pub direction: usize,
    pub low_confidence: bool,
}

#[derive(Debug, Clone)]
pub struct CriticalGraph {
    pub qd: QuadDifferential,
    pub options: TraceOptions,
    pub segments: Vec<TrajectorySegment>,
    pub shorts: Vec<Short>,
    pub escapes: Vec<EscapeEntry>,
    /// Set when some trace aborted.
    pub incomplete: bool,
}

/// Traces every ray of every finite critical point, in (point, ray) order.
///
/// Repeated zeros are accepted (their fans have `r + 2` rays); a zero on
/// the pole is refused because it has no ray structure of its own.
pub fn build_critical_graph(qd: &QuadDifferential, opts: &TraceOptions) -> Result<CriticalGraph> {
    let cps = qd.critical_points();
    if let Some(reason) = qd.degeneracy() {
        if cps
            .iter()
            .any(|c| c.degenerate && c.finite() == Some(Complex64::new(0.0, 0.0)))
        {
            return Err(Error::Degenerate(reason));
        }
    }
    let mut segments = Vec::new();
    let mut escapes = Vec::new();
    let mut incomplete = false;
    for (id, cp) in cps.iter().enumerate() {
        if cp.finite().is_none() {
            continue;
        }
        let fan = qd.ray_fan(cp)?;
        for ray in 0..fan.len() {
            let seg = trace(
                qd,
                Start::Critical { id, ray },
                Complex64::new(1.0, 0.0),
                Family::Horizontal,
                opts,
            )?;
            match seg.end {
                End::Aborted(_) => incomplete = true,
                End::Escaped {
                    direction,
                    low_confidence,
                } => escapes.push(EscapeEntry {
                    segment: segments.len(),
                    critical: id,
                    ray,
                    direction,
                    low_confidence,
                }),
                End::HitCritical { .. } => {}
            }
            segments.push(seg);
        }
    }
    let shorts = collect_shorts(qd, &segments, opts);
    Ok(CriticalGraph {
        qd: qd.clone(),
        options: *opts,
        segments,
        shorts,
        escapes,
        incomplete,
    })
}

fn collect_shorts(qd: &QuadDifferential, segments: &[TrajectorySegment], opts: &TraceOptions) -> Vec<Short> {
    let cps = qd.critical_points();
    let mut shorts: Vec<Short> = Vec::new();
    for (idx, seg) in segments.iter().enumerate() {
        let (a, b) = match (seg.start, &seg.end) {
            (Start::Critical { id, .. }, End::HitCritical { id: to, .. }) => (id, *to),
            _ => continue,
        };
        let period = seg.total_period(qd).norm();
        let (from, to) = (a.min(b), a.max(b));
        let mid = seg.points[seg.points.len() / 2];
        let twin = shorts.iter_mut().find(|s| {
            s.from == from
                && s.to == to
                && s.twin.is_none()
                && point_polyline_distance(mid, &segments[s.segment].points) <= 1e-3
                && (s.period - period).abs() <= 1e-4 * period.max(1.0)
        });
        if let Some(s) = twin {
            s.twin = Some(idx);
            continue;
        }
        let interior = &seg.points[1..seg.points.len() - 1];
        let unbroken = cps.iter().enumerate().all(|(i, c)| match c.finite() {
            Some(p) if i != a && i != b => interior.iter().all(|z| (z - p).norm() > opts.eps_hit),
            _ => true,
        });
        shorts.push(Short {
            from,
            to,
            segment: idx,
            twin: None,
            period,
            unbroken,
        });
    }
    shorts
}

impl CriticalGraph {
    pub fn finite_ids(&self) -> Vec<usize> {
        self.qd
            .critical_points()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.finite().is_some())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn location(&self, id: usize) -> Option<Complex64> {
        self.qd.critical_points().get(id).and_then(|c| c.finite())
    }

    /// Number of traced segments launched from each critical point.
    pub fn segments_per_point(&self) -> Vec<(usize, usize)> {
        self.finite_ids()
            .into_iter()
            .map(|id| {
                let n = self
                    .segments
                    .iter()
                    .filter(|s| matches!(s.start, Start::Critical { id: i, .. } if i == id))
                    .count();
                (id, n)
            })
            .collect()
    }

    /// Finds the short joining two locations (each within `tol`).
    pub fn short_between(&self, a: Complex64, b: Complex64, tol: f64) -> Option<&Short> {
        self.shorts.iter().find(|s| {
            let (p, q) = (self.location(s.from).unwrap(), self.location(s.to).unwrap());
            ((p - a).norm() <= tol && (q - b).norm() <= tol) || ((p - b).norm() <= tol && (q - a).norm() <= tol)
        })
    }

    pub fn short_polyline(&self, s: &Short) -> &[Complex64] {
        &self.segments[s.segment].points
    }

    /// Pairs of escaping segments from the same critical point that share a
    /// direction at infinity.
    pub fn same_direction_violations(&self) -> Vec<(usize, usize)> {
        same_direction_violations(&self.escapes)
    }

    /// Largest distance between a segment reflected in the real axis and the
    /// closest traced segment. Small for real `q`.
    pub fn conjugation_asymmetry(&self) -> f64 {
        let sampled: Vec<Vec<Complex64>> = self.segments.iter().map(|s| subsample(&s.points, 200)).collect();
        let mut worst: f64 = 0.0;
        for s in &sampled {
            let mirrored: Vec<Complex64> = s.iter().map(|z| z.conj()).collect();
            let best = sampled
                .iter()
                .map(|t| directed_hausdorff(&mirrored, t))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
        worst
    }
}

pub fn same_direction_violations(escapes: &[EscapeEntry]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, a) in escapes.iter().enumerate() {
        for b in &escapes[i + 1..] {
            if a.critical == b.critical && a.direction == b.direction {
                out.push((a.segment, b.segment));
            }
        }
    }
    out
}

pub(crate) fn subsample(points: &[Complex64], n: usize) -> Vec<Complex64> {
    if points.len() <= n {
        return points.to_vec();
    }
    let step = (points.len() - 1) as f64 / (n - 1) as f64;
    (0..n)
        .map(|k| points[((k as f64 * step).round() as usize).min(points.len() - 1)])
        .collect()
}

/// `max_{p in a} dist(p, polyline b)`.
pub fn directed_hausdorff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().map(|&p| point_polyline_distance(p, b)).fold(0.0, f64::max)
}

/// Re and Im of `∫ w dz` along a segment, with the level-set drift and
/// monotonicity diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct SegmentDiagnostics {
    /// `max |Re ζ - Re ζ(start)|` (horizontal) or the Im analogue.
    pub level_drift: f64,
    /// `Im ζ` (horizontal) strictly increasing along the samples.
    pub monotone: bool,
}

pub fn diagnostics(seg: &TrajectorySegment) -> SegmentDiagnostics {
    let (fixed, moving): (Vec<f64>, Vec<f64>) = match seg.family {
        Family::Horizontal => seg.zeta.iter().map(|z| (z.re, z.im)).unzip(),
        Family::Orthogonal => seg.zeta.iter().map(|z| (z.im, z.re)).unzip(),
    };
    let drift = fixed.iter().map(|v| (v - fixed[0]).abs()).fold(0.0, f64::max);
    let monotone = moving.windows(2).all(|w| w[1] > w[0]);
    SegmentDiagnostics {
        level_drift: drift,
        monotone,
    }
}

/// Independent check of a polyline: `∫ w dz` by composite Gauss quadrature
/// on each chord, with the branch continued sample to sample.
pub fn polyline_period(qd: &QuadDifferential, points: &[Complex64], w_start: Complex64) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = Complex64::new(0.0, 0.0);
    let mut w = principal_near(qd.big_q(points[0]), w_start);
    out.push(acc);
    for pair in points.windows(2) {
        let (d, wb) = chord_integral(qd, pair[0], pair[1], w)?;
        acc += d;
        w = wb;
        out.push(acc);
    }
    Ok(out)
}

/// A side of a ϖ-polygon.
#[derive(Debug, Clone)]
pub enum Side {
    /// A traced segment, optionally walked backwards.
    Segment { id: usize, reversed: bool },
    /// An explicit polyline (for instance an orthogonal trajectory).
    Path(Vec<Complex64>),
}

/// Outcome of the angle-count identity for a polygon.
#[derive(Debug, Clone)]
pub struct TeichmullerReport {
    /// `Σ (1 - (n_j + 2) θ_j / 2π)`, with angles quantized.
    pub lhs: f64,
    /// `2 + Σ m_i` over interior critical points.
    pub rhs: f64,
    pub residual: f64,
    /// `(vertex, n_j, θ_j)` for each corner.
    pub vertices: Vec<(Complex64, i32, f64)>,
    pub interior_count: i32,
}

/// Evaluates `Σ_j (1 - (n_j+2)θ_j/2π) - 2 - Σ_i m_i` for a closed polygon
/// whose sides are trajectory arcs. Corners get `n_j` from the critical
/// point they sit on (`-1` at the pole, `0` at regular points); interior
/// critical points are counted by a winding test unless `interior_override`
/// is given.
pub fn verify_teichmuller(
    graph: &CriticalGraph,
    sides: &[Side],
    interior_override: Option<i32>,
) -> Result<TeichmullerReport> {
    if sides.is_empty() {
        return Err(Error::Domain("polygon has no sides".into()));
    }
    let paths: Vec<Vec<Complex64>> = sides
        .iter()
        .map(|s| match s {
            Side::Segment { id, reversed } => {
                let mut p = graph.segments[*id].points.clone();
                // a segment launched from a critical point starts at seed_radius
                if let Start::Critical { id: c, .. } = graph.segments[*id].start {
                    p.insert(0, graph.location(c).unwrap());
                }
                if let End::HitCritical { id: c, .. } = graph.segments[*id].end {
                    p.push(graph.location(c).unwrap());
                }
                if *reversed {
                    p.reverse();
                }
                p
            }
            Side::Path(p) => p.clone(),
        })
        .collect();
    let close_tol = 1e-3;
    for k in 0..paths.len() {
        let end = *paths[k].last().unwrap();
        let next = paths[(k + 1) % paths.len()][0];
        if (end - next).norm() > close_tol {
            return Err(Error::Domain(format!(
                "sides {k} and {} do not meet ({end} vs {next})",
                (k + 1) % paths.len()
            )));
        }
    }
    let ring: Vec<Complex64> = paths.iter().flat_map(|p| p.iter().copied()).collect();
    let orientation = signed_area(&ring).signum();

    let cps = graph.qd.critical_points();
    let mut vertices = Vec::new();
    let mut lhs = 0.0;
    for k in 0..paths.len() {
        let incoming = &paths[k];
        let outgoing = &paths[(k + 1) % paths.len()];
        let v = outgoing[0];
        let n = cps
            .iter()
            .filter_map(|c| c.finite().map(|z| (z, c.order())))
            .find(|(z, _)| (z - v).norm() <= close_tol)
            .map(|(_, o)| o)
            .unwrap_or(0);
        let t_in = tangent_towards(incoming, true);
        let t_out = tangent_towards(outgoing, false);
        // interior angle: turn from the outgoing direction back to the
        // reversed incoming one, measured on the interior side
        let back = -t_in;
        let mut theta = (back / t_out).arg();
        if orientation > 0.0 {
            theta = theta.rem_euclid(2.0 * PI);
        } else {
            theta = (-theta).rem_euclid(2.0 * PI);
        }
        let quantum = 2.0 * PI / (2.0 * (n + 2) as f64);
        let theta_q = (theta / quantum).round() * quantum;
        lhs += 1.0 - (n + 2) as f64 * theta_q / (2.0 * PI);
        vertices.push((v, n, theta_q));
    }
    let interior_count = match interior_override {
        Some(m) => m,
        None => cps
            .iter()
            .filter_map(|c| c.finite().map(|z| (z, c.order())))
            .filter(|(z, _)| ring.iter().all(|p| (p - z).norm() > close_tol) && winding_number(&ring, *z) != 0)
            .map(|(_, o)| o)
            .sum(),
    };
    let rhs = 2.0 + interior_count as f64;
    Ok(TeichmullerReport {
        lhs,
        rhs,
        residual: lhs - rhs,
        vertices,
        interior_count,
    })
}

/// Unit tangent of a side near one of its ends, pointing along the side's
/// orientation. Uses the chord to a sample about `1e-3` away from the end.
fn tangent_towards(path: &[Complex64], at_end: bool) -> Complex64 {
    let pts: Vec<Complex64> = if at_end {
        path.iter().rev().copied().collect()
    } else {
        path.to_vec()
    };
    let p0 = pts[0];
    let far = pts
        .iter()
        .find(|p| (*p - p0).norm() >= 1e-3)
        .copied()
        .unwrap_or(*pts.last().unwrap());
    let d = far - p0;
    let u = d / d.norm();
    if at_end {
        -u
    } else {
        u
    }
}

fn signed_area(ring: &[Complex64]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a.re * b.im - b.re * a.im
        })
        .sum::<f64>()
        * 0.5
}

pub(crate) fn winding_number(ring: &[Complex64], p: Complex64) -> i32 {
    let n = ring.len();
    let mut total = 0.0;
    for i in 0..n {
        let a = ring[i] - p;
        let b = ring[(i + 1) % n] - p;
        total += (b / a).arg();
    }
    (total / (2.0 * PI)).round() as i32
}

/// Kinds of critical point counted in a report line.
pub fn describe(cp: &CriticalPoint) -> String {
    match (cp.kind, cp.location) {
        (Kind::Zero(r), crate::qdiff::Location::Finite(z)) => format!("zero(mult {r}) at {z}"),
        (Kind::SimplePole, _) => "simple pole at 0".into(),
        (Kind::InfinitePole(n), _) => format!("pole of order {n} at infinity"),
        _ => "critical point".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    #[test]
    fn segment_distance() {
        let d = point_segment_distance(c64(0.5, 1.0), c64(0.0, 0.0), c64(1.0, 0.0));
        assert!((d - 1.0).abs() < 1e-15);
        let d = point_segment_distance(c64(2.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0));
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn escape_parity_tie_break() {
        // on the +z branch near the D_0/D_1 boundary at angle 0.49π, the
        // parity forces D_0
        let z = Complex64::from_polar(50.0, 0.51 * PI);
        match escape_end(z, z) {
            End::Escaped {
                direction,
                low_confidence,
            } => {
                assert_eq!(direction, 0);
                assert!(low_confidence);
            }
            e => panic!("{e:?}"),
        }
        match escape_end(c64(30.0, 30.0), c64(30.0, 30.0)) {
            End::Escaped {
                direction,
                low_confidence,
            } => assert!(direction == 0 && !low_confidence),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn duplicated_escape_is_a_violation() {
        let e = EscapeEntry {
            segment: 0,
            critical: 1,
            ray: 0,
            direction: 2,
            low_confidence: false,
        };
        let f = EscapeEntry {
            segment: 1,
            ray: 1,
            ..e
        };
        assert_eq!(same_direction_violations(&[e, f]), vec![(0, 1)]);
        let g = EscapeEntry { direction: 3, ..f };
        assert!(same_direction_violations(&[e, g]).is_empty());
    }

    #[test]
    fn winding() {
        let sq = [c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 1.0), c64(0.0, 1.0)];
        assert_eq!(winding_number(&sq, c64(0.5, 0.5)), 1);
        assert_eq!(winding_number(&sq, c64(1.5, 0.5)), 0);
        assert!(signed_area(&sq) > 0.0);
    }
}
