use std::f64::consts::PI;

use proptest::prelude::*;
use qdiff_core::qdiff::QuadDifferential;
use qdiff_core::tracer::{
    build_critical_graph, diagnostics, polyline_period, same_direction_violations, trace, verify_teichmuller,
    CriticalGraph, End, EscapeEntry, Family, Side, Start, TraceOptions,
};
use qdiff_core::{c64, Complex64};

fn graph_of_apex(a: Complex64) -> CriticalGraph {
    build_critical_graph(&QuadDifferential::from_apex(a).unwrap(), &TraceOptions::default()).unwrap()
}

fn real_cubic() -> QuadDifferential {
    QuadDifferential::from_roots(&[c64(1.0, 0.0), c64(2.0, 0.0), c64(3.0, 0.0)]).unwrap()
}

fn id_at(g: &CriticalGraph, z: Complex64) -> usize {
    g.finite_ids()
        .into_iter()
        .find(|&i| (g.location(i).unwrap() - z).norm() < 1e-9)
        .unwrap()
}

/// Intersection of segment `p0p1` with `q0q1` as parameters along each.
fn intersect(p0: Complex64, p1: Complex64, q0: Complex64, q1: Complex64) -> Option<(f64, f64)> {
    let (r, s) = (p1 - p0, q1 - q0);
    let den = r.re * s.im - r.im * s.re;
    if den == 0.0 {
        return None;
    }
    let d = q0 - p0;
    let t = (d.re * s.im - d.im * s.re) / den;
    let u = (d.re * r.im - d.im * r.re) / den;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some((t, u))
}

/// First crossing of polyline `a` with polyline `b`: indices of the
/// crossing segments and the point.
fn first_crossing(a: &[Complex64], b: &[Complex64]) -> Option<(usize, usize, Complex64)> {
    for i in 0..a.len() - 1 {
        for j in 0..b.len() - 1 {
            if let Some((t, _)) = intersect(a[i], a[i + 1], b[j], b[j + 1]) {
                return Some((i, j, a[i] + (a[i + 1] - a[i]) * t));
            }
        }
    }
    None
}

fn line(a: Complex64, b: Complex64, n: usize) -> Vec<Complex64> {
    (0..=n).map(|k| a + (b - a) * (k as f64 / n as f64)).collect()
}

#[test]
fn real_axis_is_invariant_where_horizontal() {
    let qd = real_cubic();
    for (seed, heading) in [(0.5, 1.0), (0.5, -1.0), (2.5, 1.0)] {
        let seg = trace(
            &qd,
            Start::Regular(c64(seed, 0.0)),
            c64(heading, 0.0),
            Family::Horizontal,
            &TraceOptions::default(),
        )
        .unwrap();
        assert!(matches!(seg.end, End::HitCritical { .. }), "{:?}", seg.end);
        let worst = seg.points.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-9, "left the axis by {worst:e}");
    }
}

#[test]
fn omega1_rays_from_one() {
    let g = graph_of_apex(c64(1.6, 2.0));
    let one = id_at(&g, c64(1.0, 0.0));
    let zero = id_at(&g, c64(0.0, 0.0));
    let ends: Vec<&End> = g
        .segments
        .iter()
        .filter(|s| matches!(s.start, Start::Critical { id, .. } if id == one))
        .map(|s| &s.end)
        .collect();
    assert_eq!(ends.len(), 3);
    assert_eq!(
        ends.iter()
            .filter(|e| matches!(e, End::HitCritical { id, .. } if *id == zero))
            .count(),
        1
    );
    let mut dirs: Vec<usize> = ends
        .iter()
        .filter_map(|e| match e {
            End::Escaped { direction, .. } => Some(*direction),
            _ => None,
        })
        .collect();
    dirs.sort();
    // the two escaping rays leave to the left, mirror images of each other
    assert_eq!(dirs, vec![1, 2]);
    let a = c64(1.6, 2.0);
    assert!(g.short_between(a, a.conj(), 1e-9).is_some());
    assert!(g.short_between(c64(0.0, 0.0), c64(1.0, 0.0), 1e-9).is_some());
    assert_eq!(g.shorts.len(), 2);
}

#[test]
fn segments_stay_on_their_level_set() {
    for a in [c64(1.6, 2.0), c64(0.0, 2.0)] {
        let g = graph_of_apex(a);
        for seg in &g.segments {
            let d = diagnostics(seg);
            assert!(d.level_drift <= 1e-6 && d.monotone, "{:?}: {d:?}", seg.start);
            // independent quadrature along the returned polyline
            let dir = seg.points[1] - seg.points[0];
            let zeta = polyline_period(&g.qd, &seg.points, Complex64::new(0.0, 1.0) / dir).unwrap();
            let drift = zeta.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
            assert!(drift <= 1e-6, "{:?}: oracle drift {drift:e}", seg.start);
            assert!(
                zeta.windows(2).all(|w| w[1].im > w[0].im),
                "{:?}: Im not monotone",
                seg.start
            );
        }
    }
}

#[test]
fn real_cubic_shorts_sit_where_q_over_x_is_negative() {
    let g = build_critical_graph(&real_cubic(), &TraceOptions::default()).unwrap();
    assert_eq!(g.shorts.len(), 2);
    for (a, b) in [(0.0, 1.0), (2.0, 3.0)] {
        let s = g.short_between(c64(a, 0.0), c64(b, 0.0), 1e-9).expect("short missing");
        assert!(g.short_polyline(s).iter().all(|z| z.im.abs() < 1e-9));
    }
    // sign analysis: Q(x) < 0 exactly on (0,1) and (2,3)
    for k in 1..400 {
        let x = -1.0 + 5.0 * k as f64 / 400.0;
        let neg = g.qd.big_q(c64(x, 0.0)).re < 0.0;
        let on = (0.0 < x && x < 1.0) || (2.0 < x && x < 3.0);
        assert_eq!(neg, on, "x = {x}");
    }
    assert!(g.conjugation_asymmetry() < 1e-6);
}

#[test]
fn imaginary_apex_short_crosses_negative_axis() {
    let a = c64(0.0, 2.0);
    let g = graph_of_apex(a);
    assert_eq!(g.shorts.len(), 2);
    assert!(g.shorts.iter().all(|s| s.unbroken));
    let arc = g.short_polyline(g.short_between(a, a.conj(), 1e-9).unwrap());
    let cross = arc.windows(2).find(|w| w[0].im.signum() != w[1].im.signum()).unwrap();
    let b = cross[0].re - cross[0].im * (cross[1].re - cross[0].re) / (cross[1].im - cross[0].im);
    assert!(b < 0.0, "crossing at {b}");
}

#[test]
fn omega2_apex_has_two_shorts() {
    let g = graph_of_apex(c64(0.5, 2.0));
    assert_eq!(g.shorts.len(), 2);
    assert!(g.short_between(c64(0.0, 0.0), c64(1.0, 0.0), 1e-9).is_some());
}

#[test]
fn no_two_escapes_from_one_zero_share_a_direction() {
    for a in [c64(1.6, 2.0), c64(0.0, 2.0)] {
        assert!(graph_of_apex(a).same_direction_violations().is_empty());
    }
    let e = EscapeEntry {
        segment: 3,
        critical: 2,
        ray: 0,
        direction: 1,
        low_confidence: false,
    };
    let dup = EscapeEntry {
        segment: 4,
        ray: 1,
        ..e
    };
    assert_eq!(same_direction_violations(&[e, dup]).len(), 1);
}

#[test]
fn teichmuller_rectangle_between_real_zeros() {
    // sides: [1,2] (orthogonal), the upward trajectory from 2, an orthogonal
    // arc across, and the upward trajectory from 1 back down
    let qd = real_cubic();
    let g = build_critical_graph(&qd, &TraceOptions::default()).unwrap();
    let upward = |z: Complex64| {
        let id = id_at(&g, z);
        g.segments
            .iter()
            .find(|s| matches!(s.start, Start::Critical { id: i, .. } if i == id) && s.end_point().im > 1.0)
            .unwrap()
            .points
            .clone()
    };
    let (up1, up2) = (upward(c64(1.0, 0.0)), upward(c64(2.0, 0.0)));
    let j = up1.iter().position(|z| (z - 1.0).norm() > 0.5).unwrap();
    let p1 = up1[j];
    let opts = TraceOptions {
        max_arc: 5.0,
        ..TraceOptions::default()
    };
    let across = trace(&qd, Start::Regular(p1), up2[j] - p1, Family::Orthogonal, &opts).unwrap();
    let (ia, ib, x) = first_crossing(&across.points, &up2).expect("orthogonal arc misses the other side");

    let mut right: Vec<Complex64> = vec![c64(2.0, 0.0)];
    right.extend_from_slice(&up2[..=ib]);
    right.push(x);
    let mut top: Vec<Complex64> = vec![x];
    top.extend(across.points[..=ia].iter().rev());
    let mut left: Vec<Complex64> = up1[..=j].iter().rev().copied().collect();
    left.push(c64(1.0, 0.0));
    let sides = vec![
        Side::Path(line(c64(1.0, 0.0), c64(2.0, 0.0), 10)),
        Side::Path(right),
        Side::Path(top),
        Side::Path(left),
    ];

    let r = verify_teichmuller(&g, &sides, None).unwrap();
    assert_eq!(r.interior_count, 0);
    assert!(r.residual.abs() < 1e-12, "{r:?}");
    let angles: Vec<f64> = r.vertices.iter().map(|v| v.2).collect();
    assert!((angles[0] - PI / 3.0).abs() < 1e-12, "{angles:?}");

    let wrong = verify_teichmuller(&g, &sides, Some(1)).unwrap();
    assert!((wrong.residual + 1.0).abs() < 1e-12);
}

#[test]
fn teichmuller_rectangle_on_the_unit_short() {
    // [0,1] short, the orthogonal ray leaving 1 upwards, a horizontal arc
    // back to the negative axis, and the negative axis itself (orthogonal)
    let a = c64(1.6, 2.0);
    let qd = QuadDifferential::from_apex(a).unwrap();
    let g = build_critical_graph(&qd, &TraceOptions::default()).unwrap();
    let one = id_at(&g, c64(1.0, 0.0));
    let fan = qd.orthogonal_ray_fan(&qd.critical_points()[one]).unwrap();
    let ray = (0..fan.len())
        .min_by(|&i, &j| {
            let d = |t: f64| (t - 2.0 * PI / 3.0).abs();
            d(fan[i]).total_cmp(&d(fan[j]))
        })
        .unwrap();
    let up = trace(
        &qd,
        Start::Critical { id: one, ray },
        c64(1.0, 0.0),
        Family::Orthogonal,
        &TraceOptions::default(),
    )
    .unwrap();
    let k = up.points.iter().position(|z| (z - 1.0).norm() > 0.3).unwrap();
    let x = up.points[k];
    let axis = line(c64(0.0, 0.0), c64(-5.0, 0.0), 50);
    let opts = TraceOptions {
        max_arc: 5.0,
        ..TraceOptions::default()
    };
    let back = trace(&qd, Start::Regular(x), c64(-0.3, 0.0) - x, Family::Horizontal, &opts).unwrap();
    let (ia, _, y) = first_crossing(&back.points, &axis).expect("horizontal arc misses the axis");

    let mut rise: Vec<Complex64> = vec![c64(1.0, 0.0)];
    rise.extend_from_slice(&up.points[..=k]);
    let mut over: Vec<Complex64> = back.points[..=ia].to_vec();
    over.push(y);
    let sides = vec![
        Side::Path(line(c64(0.0, 0.0), c64(1.0, 0.0), 10)),
        Side::Path(rise),
        Side::Path(over),
        Side::Path(line(y, c64(0.0, 0.0), 10)),
    ];
    let r = verify_teichmuller(&g, &sides, None).unwrap();
    assert_eq!(r.interior_count, 0);
    assert!(r.residual.abs() < 1e-12, "{r:?}");
    let n: Vec<i32> = r.vertices.iter().map(|v| v.1).collect();
    assert_eq!(n, vec![1, 0, 0, -1]);

    let wrong = verify_teichmuller(&g, &sides, Some(2)).unwrap();
    assert!((wrong.residual + 2.0).abs() < 1e-12);
}

#[test]
fn open_polygon_is_rejected() {
    let g = build_critical_graph(&real_cubic(), &TraceOptions::default()).unwrap();
    let sides = vec![
        Side::Path(line(c64(0.0, 0.0), c64(1.0, 0.0), 4)),
        Side::Path(line(c64(1.0, 1.0), c64(0.0, 0.0), 4)),
    ];
    assert!(verify_teichmuller(&g, &sides, None).is_err());
}

fn apex() -> impl Strategy<Value = Complex64> {
    (-3.0f64..4.0, 0.3f64..4.0).prop_map(|(x, y)| c64(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn unit_segment_is_always_short(a in apex()) {
        let g = graph_of_apex(a);
        prop_assert!(!g.incomplete);
        prop_assert!(g.short_between(c64(0.0, 0.0), c64(1.0, 0.0), 1e-9).is_some());
        let s = g.short_between(c64(0.0, 0.0), c64(1.0, 0.0), 1e-9).unwrap();
        prop_assert!(g.short_polyline(s).iter().all(|z| z.im.abs() < 1e-8));
    }

    #[test]
    fn graph_structure(a in apex()) {
        let g = graph_of_apex(a);
        for (id, n) in g.segments_per_point() {
            let cp = g.qd.critical_points()[id];
            prop_assert_eq!(n as i32, cp.order() + 2);
        }
        for seg in &g.segments {
            prop_assert!(!matches!(seg.end, End::Aborted(_)));
            let d = diagnostics(seg);
            prop_assert!(d.level_drift <= 1e-6 && d.monotone);
            if let End::Escaped { .. } = seg.end {
                prop_assert!(seg.end_point().norm() >= g.options.escape_radius);
            }
        }
        prop_assert!(g.same_direction_violations().is_empty());
        prop_assert!(g.conjugation_asymmetry() < 1e-6);
    }

    #[test]
    fn traced_samples_satisfy_the_direction_field(a in apex()) {
        // each chord of a horizontal trajectory makes Q dz^2 negative real
        let g = graph_of_apex(a);
        for seg in g.segments.iter().take(4) {
            for w in seg.points.windows(2).step_by(7) {
                let mid = (w[0] + w[1]) * 0.5;
                let dz = w[1] - w[0];
                let v = g.qd.big_q(mid) * dz * dz;
                prop_assert!(v.re < 0.0 && v.im.abs() <= 1e-3 * v.norm(), "{v}");
            }
        }
    }
}
