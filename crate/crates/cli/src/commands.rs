use std::f64::consts::PI;
use std::fmt::Write as _;

use anyhow::{anyhow, bail, Result};
use num_complex::Complex64;
use qdiff_core::measure::{
    algebraic_residual, cauchy_closed_form, convergence_monitor, support, total_mass, ConvergenceRow, NoMeasure,
};
use qdiff_core::periods::{
    classify_apex, closed_contour_period, necessary_condition, period_integral, residue_at_infinity, sigma_value,
    trace_sigma, BranchSeed, PathSpec, Region, SigmaTraceOptions,
};
use qdiff_core::qdiff::{normalize_to_unit_root, Kind, QuadDifferential};
use qdiff_core::spectral::{
    delta_estimates, rescaled_root_measure, riccati_residual_roots, spectrum, Selector, SpectralProblem,
};
use qdiff_core::tracer::{build_critical_graph, polyline_period, CriticalGraph, End, TraceOptions};
use qdiff_core::Error;

use crate::config::Settings;
use crate::render::{emit, num, Plot, Table};

/// Outcome of a command that ran to the end; errors are reported separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    InvariantFailure,
    Incomplete,
}

enum Geometry {
    Apex(Complex64),
    Params(Complex64, Complex64),
    Roots(Vec<Complex64>),
}

fn geometry(s: &Settings) -> Result<Geometry> {
    let a = s.complex("a")?;
    let (g, d) = (s.complex("gamma")?, s.complex("delta")?);
    let roots = s.roots()?;
    let given = a.is_some() as usize + (g.is_some() || d.is_some()) as usize + roots.is_some() as usize;
    if given != 1 {
        bail!("give exactly one of --a, --gamma/--delta, --roots");
    }
    Ok(match (a, g, d, roots) {
        (Some(a), ..) => Geometry::Apex(a),
        (_, Some(g), Some(d), _) => Geometry::Params(g, d),
        (_, _, _, Some(r)) => Geometry::Roots(r),
        _ => bail!("--gamma and --delta go together"),
    })
}

fn differential(geo: &Geometry) -> Result<QuadDifferential> {
    Ok(match geo {
        Geometry::Apex(a) => QuadDifferential::from_apex(*a)?,
        Geometry::Params(g, d) => QuadDifferential::from_parameters(*g, *d),
        Geometry::Roots(r) => QuadDifferential::from_roots(r)?,
    })
}

fn trace_options(s: &Settings) -> Result<TraceOptions> {
    let mut o = TraceOptions::default();
    if let Some(e) = s.positive("eps-hit")? {
        o.eps_hit = e;
    }
    if let Some(r) = s.positive("escape-radius")? {
        o.escape_radius = r;
    }
    Ok(o)
}

/// Status line goes to stdout when the data has a file of its own.
fn report(s: &Settings, text: &str) {
    if s.raw("out").is_some() {
        print!("{text}");
    } else {
        eprint!("{text}");
    }
}

pub fn classify(s: &Settings) -> Result<Status> {
    let geo = geometry(s)?;
    let a = match &geo {
        Geometry::Apex(a) => *a,
        other => {
            let qd = differential(other)?;
            if let Some(r) = qd.degeneracy() {
                return Err(Error::Degenerate(r).into());
            }
            normalize_to_unit_root(qd.q())?.1
        }
    };
    let cl = classify_apex(a)?;
    let g = build_critical_graph(&QuadDifferential::from_apex(a)?, &trace_options(s)?)?;
    let head = match cl.region {
        Region::Sigma => "Σ (within band)".to_string(),
        r => r.label().to_string(),
    };
    println!("{head}, shorts={}", g.shorts.len());
    println!("apex = {a}");
    println!("S = {}", num(cl.s));
    println!("margin = {}", num(cl.margin));
    println!("predicted_shorts = {}", cl.region.expected_shorts());
    println!("traced_shorts = {}", g.shorts.len());
    Ok(if g.incomplete || g.shorts.len() != cl.region.expected_shorts() {
        Status::Incomplete
    } else {
        Status::Ok
    })
}

fn segment_kind(g: &CriticalGraph, i: usize) -> &'static str {
    if g.shorts.iter().any(|sh| sh.segment == i) {
        return "short";
    }
    if g.shorts.iter().any(|sh| sh.twin == Some(i)) {
        return "short-twin";
    }
    match g.segments[i].end {
        End::HitCritical { .. } => "connecting",
        End::Escaped { .. } => "infinite-critical",
        End::Aborted(_) => "aborted",
    }
}

fn marker_class(kind: Kind) -> &'static str {
    match kind {
        Kind::SimplePole => "pole",
        _ => "zero",
    }
}

pub fn graph(s: &Settings) -> Result<Status> {
    let qd = differential(&geometry(s)?)?;
    let g = build_critical_graph(&qd, &trace_options(s)?)?;
    let mut table = Table::new(&["segment_id", "kind", "re", "im"])?;
    let finite: Vec<Complex64> = g.finite_ids().iter().filter_map(|&i| g.location(i)).collect();
    let mut plot = Plot::around(&finite);
    for (i, seg) in g.segments.iter().enumerate() {
        let kind = segment_kind(&g, i);
        let id = format!("s{i}");
        for z in &seg.points {
            table.row(&[id.clone(), kind.into(), num(z.re), num(z.im)])?;
        }
        let class = match kind {
            "short" | "short-twin" | "connecting" => "short",
            "aborted" => "aborted",
            _ => "infinite-critical",
        };
        plot.polyline(id, class, seg.points.clone());
    }
    for id in g.finite_ids() {
        let cp = g.qd.critical_points()[id];
        let z = cp.finite().unwrap();
        let class = marker_class(cp.kind);
        table.row(&[format!("c{id}"), class.into(), num(z.re), num(z.im)])?;
        plot.marker(format!("c{id}"), class, z);
    }
    emit(s.path("out").as_deref(), &table.into_bytes()?)?;
    if let Some(p) = s.path("svg") {
        emit(Some(&p), plot.to_svg().as_bytes())?;
    }
    let mut text = format!("segments={} shorts={}", g.segments.len(), g.shorts.len());
    for sh in &g.shorts {
        let (a, b) = (g.location(sh.from).unwrap(), g.location(sh.to).unwrap());
        let _ = write!(text, " [{a} -- {b}]");
    }
    let _ = writeln!(text, "{}", if g.incomplete { " incomplete" } else { "" });
    report(s, &text);
    Ok(if g.incomplete { Status::Incomplete } else { Status::Ok })
}

pub fn sigma(s: &Settings) -> Result<Status> {
    let mut opts = SigmaTraceOptions::default();
    if let Some(r) = s.positive("escape-radius")? {
        opts.max_abs = r;
    }
    if let Some(t) = s.positive("tol")? {
        opts.tol = t;
    }
    let curve = trace_sigma(&opts);
    let rows = curve.with_conjugate();
    let mut table = Table::new(&["s", "re", "im", "S_residual"])?;
    for (arc, z, r) in &rows {
        table.row(&[num(*arc), num(z.re), num(z.im), num(*r)])?;
    }
    emit(s.path("out").as_deref(), &table.into_bytes()?)?;
    if let Some(p) = s.path("svg") {
        let near: Vec<Complex64> = rows
            .iter()
            .map(|r| r.1)
            .filter(|z| z.norm() <= 4.0)
            .chain([Complex64::new(0.0, 0.0)])
            .collect();
        let mut plot = Plot::around(&near);
        plot.polyline("sigma", "sigma", rows.iter().map(|r| r.1).collect());
        emit(Some(&p), plot.to_svg().as_bytes())?;
    }
    let far = curve.points.last().map(|z| z.norm()).unwrap_or(0.0);
    let tangent = curve.tangent_at_one_degrees().unwrap_or(f64::NAN);
    let arg = curve.arg_at_modulus_degrees(far).unwrap_or(f64::NAN);
    let mut text = format!(
        "angle at z=1: {tangent:.2} deg; arg z at |z|={far:.0}: {arg:.2} deg; points={}\n",
        rows.len()
    );
    if let Some(m) = &curve.message {
        let _ = writeln!(text, "stopped: {m}");
    }
    report(s, &text);
    let ok = curve.residuals.iter().all(|r| r.abs() <= opts.tol) && curve.points[1..].iter().all(|z| z.re > 1.0);
    Ok(if !curve.complete {
        Status::Incomplete
    } else if !ok {
        Status::InvariantFailure
    } else {
        Status::Ok
    })
}

pub fn periods(s: &Settings) -> Result<Status> {
    let geo = geometry(s)?;
    let qd = differential(&geo)?;
    if let Some(r) = qd.degeneracy() {
        return Err(Error::Degenerate(r).into());
    }
    let g = build_critical_graph(&qd, &trace_options(s)?)?;
    let mut table = Table::new(&["name", "re", "im"])?;
    let mut put = |name: String, v: Complex64| table.row(&[name, num(v.re), num(v.im)]);
    put("closed_contour".into(), closed_contour_period(&qd)?)?;
    put("residue_infinity".into(), residue_at_infinity(qd.q())?)?;
    put(
        "necessary_condition".into(),
        Complex64::new(necessary_condition(qd.q())?, 0.0),
    )?;
    if let Geometry::Apex(a) = geo {
        put("sigma".into(), Complex64::new(sigma_value(a)?, 0.0))?;
    }
    for sh in &g.shorts {
        let v = g.segments[sh.segment].total_period(&g.qd);
        put(format!("short:{}-{}", sh.from, sh.to), v)?;
    }
    emit(s.path("out").as_deref(), &table.into_bytes()?)?;
    Ok(if g.incomplete { Status::Incomplete } else { Status::Ok })
}

pub fn spectrum_cmd(s: &Settings) -> Result<Status> {
    let ms = s.m_values()?;
    let gamma = match s.complex("gamma")? {
        None => 0.0,
        Some(g) if g.im == 0.0 => g.re,
        Some(g) => bail!("--gamma must be real for spectral runs, got {g}"),
    };
    if s.raw("svg").is_some() && s.raw("scatter").is_none() {
        bail!("--svg needs --scatter for the plotted points");
    }
    let mut eig = Table::new(&["m", "k", "re", "im", "scaled_3_2", "scaled_4_3"])?;
    let mut scatter = Table::new(&["kind", "m", "k", "re", "im"])?;
    let mut worst: f64 = 0.0;
    let mut last = None;
    for &m in &ms {
        let p = SpectralProblem::new(m, gamma)?;
        let sol = spectrum(&p)?;
        worst = worst.max(sol.max_residual);
        let mf = m as f64;
        for (k, l) in sol.eigenvalues.iter().enumerate() {
            let f = |e: f64| num((l / mf.powf(e)).re);
            eig.row(&[m.to_string(), k.to_string(), num(l.re), num(l.im), f(1.5), f(4.0 / 3.0)])?;
            for z in rescaled_root_measure(&sol, k)?.points {
                scatter.row(&["root".into(), m.to_string(), k.to_string(), num(z.re), num(z.im)])?;
            }
        }
        last = Some(sol);
    }
    let table = delta_estimates(&ms, gamma, Selector::Extremal)?;
    let conv: Option<Vec<ConvergenceRow>> =
        convergence_monitor(&ms, gamma, Selector::Extremal, Complex64::new(1.0, 1.5)).ok();
    let mut text = String::from("m, k, λ/m^(3/2), λ/m^(4/3), hausdorff\n");
    for (i, r) in table.rows.iter().enumerate() {
        let h = conv
            .as_ref()
            .map(|c| format!("{:.6}", c[i].hausdorff))
            .unwrap_or_else(|| "n/a".into());
        let _ = writeln!(
            text,
            "{}, {}, {:.10}, {:.10}, {h}",
            r.m, r.k, r.three_halves.re, r.four_thirds.re
        );
    }
    if ms.len() > 1 {
        let _ = writeln!(text, "stabilizing: {}", table.stabilizing.label());
    }
    if let (Some(p), Some(sol)) = (s.path("svg"), &last) {
        let m = sol.problem.m;
        let k = sol.extremal_index();
        let pts = rescaled_root_measure(sol, k)?.points;
        let dh = sol.eigenvalues[k] / (m as f64).powf(1.5);
        let lines = match support(Complex64::new(gamma, 0.0), dh) {
            Ok(Ok(sup)) => sup.polylines(),
            _ => Vec::new(),
        };
        let anchors: Vec<Complex64> = pts.iter().chain(lines.iter().flatten()).copied().collect();
        let mut plot = Plot::around(&anchors);
        for (j, line) in lines.into_iter().enumerate() {
            for z in &line {
                scatter.row(&["support".into(), m.to_string(), j.to_string(), num(z.re), num(z.im)])?;
            }
            plot.polyline(format!("support{j}"), "support", line);
        }
        for (i, z) in pts.iter().enumerate() {
            plot.marker(format!("r{i}"), "root", *z);
        }
        emit(Some(&p), plot.to_svg().as_bytes())?;
    }
    emit(s.path("out").as_deref(), &eig.into_bytes()?)?;
    if let Some(p) = s.path("scatter") {
        emit(Some(&p), &scatter.into_bytes()?)?;
    }
    report(s, &text);
    Ok(if worst <= 1e-8 {
        Status::Ok
    } else {
        Status::InvariantFailure
    })
}

pub fn measure(s: &Settings) -> Result<Status> {
    let (g, d) = match (s.complex("gamma")?, s.complex("delta")?) {
        (Some(g), Some(d)) => (g, d),
        _ => bail!("measure needs --gamma and --delta"),
    };
    let tol = s.positive("tol")?.unwrap_or(1e-6);
    let sup = match support(g, d)? {
        Ok(sup) => sup,
        Err(NoMeasure::Degenerate(r)) => return Err(Error::Degenerate(r).into()),
        Err(other) => {
            eprintln!("no measure: {other}");
            return Ok(Status::Incomplete);
        }
    };
    let mut table = Table::new(&["arc", "index", "re", "im", "density", "cumulative_mass"])?;
    let mut anchors = Vec::new();
    let mut polylines = Vec::new();
    for (i, arc) in sup.arcs.iter().enumerate() {
        for (j, z) in arc.points.iter().enumerate() {
            let dens = arc
                .samples
                .iter()
                .find(|x| x.index == j)
                .map(|x| num(x.density.re))
                .unwrap_or_default();
            table.row(&[
                i.to_string(),
                j.to_string(),
                num(z.re),
                num(z.im),
                dens,
                num(arc.cumulative[j].re),
            ])?;
        }
        anchors.push(arc.points[0]);
        anchors.push(*arc.points.last().unwrap());
        polylines.push(arc.points.clone());
    }
    emit(s.path("out").as_deref(), &table.into_bytes()?)?;
    if let Some(p) = s.path("svg") {
        let mut plot = Plot::around(&anchors);
        for (i, line) in polylines.into_iter().enumerate() {
            plot.polyline(format!("arc{i}"), "support", line);
        }
        emit(Some(&p), plot.to_svg().as_bytes())?;
    }
    let mass = total_mass(&sup);
    let mut text = format!("mass = {}\n", num(mass));
    for (i, arc) in sup.arcs.iter().enumerate() {
        let _ = writeln!(
            text,
            "arc {i}: mass = {}{}",
            num(arc.mass.re),
            if arc.flagged { " (flagged)" } else { "" }
        );
    }
    report(s, &text);
    let ok = (mass - 1.0).abs() <= tol && sup.arcs.iter().all(|a| !a.flagged);
    Ok(if ok { Status::Ok } else { Status::InvariantFailure })
}

struct Check {
    name: &'static str,
    measured: f64,
    tol: f64,
}

/// The invariant suite. `--tol` replaces every tolerance.
pub fn verify(s: &Settings) -> Result<Status> {
    let over = s.positive("tol")?;
    let tol = |t: f64| over.unwrap_or(t);
    let mut checks: Vec<Check> = Vec::new();
    let mut facts: Vec<(String, bool)> = Vec::new();

    let opts = TraceOptions::default();
    let anchors = [
        Complex64::new(1.6, 2.0),
        Complex64::new(1.55, 2.0),
        Complex64::new(0.0, 2.0),
    ];
    let mut margins = Vec::new();
    let mut drift: f64 = 0.0;
    for (a, want) in anchors.iter().zip([Some(Region::Omega1), None, Some(Region::Omega2)]) {
        let cl = classify_apex(*a)?;
        let g = build_critical_graph(&QuadDifferential::from_apex(*a)?, &opts)?;
        margins.push(cl.margin);
        let ok = want.is_none_or(|w| w == cl.region) && g.shorts.len() == cl.region.expected_shorts();
        facts.push((
            format!(
                "classify {a}: {} margin {:.3e} shorts {}",
                cl.region.label(),
                cl.margin,
                g.shorts.len()
            ),
            ok,
        ));
        for seg in &g.segments {
            let w0 = Complex64::new(0.0, 1.0) / (seg.points[1] - seg.points[0]);
            let zeta = polyline_period(&g.qd, &seg.points, w0)?;
            drift = drift.max(zeta.iter().map(|z| z.re.abs()).fold(0.0, f64::max));
        }
    }
    facts.push((
        "1.55+2i is the anchor nearest to Σ".into(),
        margins[1] < margins[0] && margins[1] < margins[2],
    ));
    checks.push(Check {
        name: "level drift of traced segments",
        measured: drift,
        tol: tol(1e-6),
    });

    let mut arc_re: f64 = 0.0;
    for a in [
        Complex64::new(1.6, 2.0),
        Complex64::new(1.8, 2.0),
        Complex64::new(0.5, 2.0),
        Complex64::new(0.0, 2.0),
    ] {
        let qd = QuadDifferential::from_apex(a)?;
        let path = PathSpec::between(&qd, vec![a, Complex64::new(-0.5 - a.re, 0.0), a.conj()]);
        arc_re = arc_re.max(period_integral(&qd, &path, BranchSeed::Infinity)?.value.re.abs());
    }
    checks.push(Check {
        name: "Re of conjugate-arc periods",
        measured: arc_re,
        tol: tol(1e-8),
    });

    let roots = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 2.0),
        Complex64::new(0.0, -2.0),
    ];
    let v = closed_contour_period(&QuadDifferential::from_roots(&roots)?)?;
    let want = Complex64::new(0.0, 15.0 * PI / 8.0);
    checks.push(Check {
        name: "closed contour of {1,2i,-2i} vs 15iπ/8",
        measured: (v - want).norm().min((v + want).norm()),
        tol: tol(1e-8),
    });

    let (g, d) = (Complex64::new(-6.0, 0.0), Complex64::new(1.0, 0.0));
    let probes: Vec<Complex64> = (0..12)
        .map(|k| Complex64::new(2.5, 0.0) + Complex64::from_polar(4.0, 0.3 + 0.5 * k as f64))
        .collect();
    let mut alg: f64 = 0.0;
    for z in &probes {
        alg = alg.max(algebraic_residual(*z, cauchy_closed_form(*z, g, d)?, g, d).norm());
    }
    checks.push(Check {
        name: "algebraic equation residual",
        measured: alg,
        tol: tol(1e-10),
    });
    let sup = support(g, d)?.map_err(|e| anyhow!("real regime: {e}"))?;
    checks.push(Check {
        name: "total mass - 1",
        measured: (total_mass(&sup) - 1.0).abs(),
        tol: tol(1e-6),
    });
    let mut gap: f64 = 0.0;
    for z in &probes {
        gap = gap.max((sup.cauchy_numeric(*z)?.value - sup.cauchy_closed_form(*z)?).norm());
    }
    checks.push(Check {
        name: "numeric vs closed-form Cauchy transform",
        measured: gap,
        tol: tol(1e-6),
    });

    let one = spectrum(&SpectralProblem::new(1, 0.0)?)?;
    let r = 8f64.sqrt();
    checks.push(Check {
        name: "m=1 eigenvalues ±2√2",
        measured: (one.eigenvalues[0] + r).norm().max((one.eigenvalues[1] - r).norm()),
        tol: tol(1e-12),
    });
    let (mut eig, mut ric): (f64, f64) = (0.0, 0.0);
    for m in [5, 10, 20] {
        let p = SpectralProblem::new(m, 1.0)?;
        let sol = spectrum(&p)?;
        eig = eig.max(sol.max_residual);
        for (roots, &lam) in sol.roots.iter().zip(&sol.eigenvalues) {
            for t in 0..5 {
                let z = Complex64::new(-2.0 + t as f64, 1.0) * (m as f64).sqrt();
                let (res, scale) = riccati_residual_roots(roots, &p, lam, z)?;
                ric = ric.max(res.norm() / scale);
            }
        }
    }
    checks.push(Check {
        name: "eigen residual",
        measured: eig,
        tol: tol(1e-8),
    });
    checks.push(Check {
        name: "Riccati residual (relative)",
        measured: ric,
        tol: tol(1e-8),
    });

    let curve = trace_sigma(&SigmaTraceOptions {
        max_abs: 20.0,
        ..SigmaTraceOptions::default()
    });
    let worst_s = curve.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    checks.push(Check {
        name: "|S| on traced Σ",
        measured: worst_s,
        tol: tol(1e-8),
    });
    facts.push((
        "traced Σ stays in Re z > 1".into(),
        curve.points[1..].iter().all(|z| z.re > 1.0),
    ));

    let mut all = true;
    for c in &checks {
        let ok = c.measured <= c.tol;
        all &= ok;
        println!(
            "{} {}: {:.3e} (tol {:.1e})",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.tol
        );
    }
    for (what, ok) in &facts {
        all &= ok;
        println!("{} {what}", if *ok { "PASS" } else { "FAIL" });
    }
    Ok(if all { Status::Ok } else { Status::InvariantFailure })
}
