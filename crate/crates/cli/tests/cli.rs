use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn qdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdiff")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn sha(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn classify_anchors() {
    for (a, head) in [
        ("1.6+2i", "Ω1, shorts=2"),
        ("1.8+2i", "Ω1, shorts=2"),
        ("2i", "Ω2, shorts=2"),
        ("0.5 + 2i", "Ω2, shorts=2"),
    ] {
        let o = qdiff(&["classify", "--a", a]);
        assert_eq!(o.status.code(), Some(0), "{a}");
        assert_eq!(stdout(&o).lines().next().unwrap(), head);
    }
    // off the Σ band: reported by region with its margin
    let o = qdiff(&["classify", "--a", "1.55+2i"]);
    let text = stdout(&o);
    assert!(text.starts_with("Ω1, shorts=2"));
    let margin: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("margin = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(margin > 1e-6 && margin < 1e-2);
}

#[test]
fn classify_from_roots_rescales_to_the_apex() {
    let o = qdiff(&["classify", "--roots", "4, -4+4i, -4-4i"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("apex = -1+1i"));
}

#[test]
fn invalid_and_degenerate_inputs_exit_3() {
    for args in [
        &["classify", "--a", "1-2i"][..],
        &["classify", "--a", "one"],
        &["classify", "--roots", "1,1,2"],
        &["classify", "--a", "2i", "--roots", "1,2,3"],
        &["graph"],
        &["measure", "--gamma", "0", "--delta", "3.0792014356780038"],
        &["measure", "--gamma", "1", "--delta", "0"],
        &["spectrum", "--m", "0"],
        &["spectrum", "--m", "4", "--gamma", "1+i"],
        &["graph", "--a", "2i", "--escape-radius", "-5"],
    ] {
        assert_eq!(qdiff(args).status.code(), Some(3), "{args:?}");
    }
}

#[test]
fn graph_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let (csv, svg) = (
            dir.path().join(format!("{tag}.csv")),
            dir.path().join(format!("{tag}.svg")),
        );
        let o = qdiff(&[
            "graph",
            "--a",
            "1.8+2i",
            "--out",
            csv.to_str().unwrap(),
            "--svg",
            svg.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        (sha(&csv), sha(&svg))
    };
    assert_eq!(run("first"), run("second"));
}

#[test]
fn graph_of_apex_has_two_shorts_and_every_svg_element_in_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, svg) = (dir.path().join("g.csv"), dir.path().join("g.svg"));
    let o = qdiff(&[
        "graph",
        "--a",
        "1.8+2i",
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows = rows(&csv);
    let mut shorts: Vec<&str> = rows.iter().filter(|r| r[1] == "short").map(|r| r[0].as_str()).collect();
    shorts.dedup();
    assert_eq!(shorts.len(), 2);
    let svg = std::fs::read_to_string(&svg).unwrap();
    for id in svg.split("id=\"").skip(1).map(|s| &s[..s.find('"').unwrap()]) {
        assert!(rows.iter().any(|r| r[0] == id), "{id} not in csv");
    }
    assert_eq!(
        svg.matches("class=\"short\"").count(),
        rows.iter()
            .filter(|r| r[1].starts_with("short"))
            .map(|r| &r[0])
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    );
}

#[test]
fn real_cubic_graph_has_real_axis_shorts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let o = qdiff(&["graph", "--roots", "1,2,3", "--out", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("[0+0i -- 1+0i] [2+0i -- 3+0i]"));
    for r in rows(&csv).iter().filter(|r| r[1] == "short") {
        let im: f64 = r[3].parse().unwrap();
        assert!(im.abs() < 1e-9);
    }
}

#[test]
fn sigma_rows_are_zeros_right_of_one() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let o = qdiff(&["sigma", "--out", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let summary = stdout(&o);
    assert!(summary.contains("arg z at |z|=1000: 89.7"), "{summary}");
    let rows = rows(&csv);
    let mut both_halves = (false, false);
    for r in &rows {
        let v: Vec<f64> = r.iter().map(|x| x.parse().unwrap()).collect();
        assert!(v[3].abs() <= 1e-8);
        if v[0] != 0.0 {
            assert!(v[1] > 1.0);
        }
        both_halves.0 |= v[2] > 0.0;
        both_halves.1 |= v[2] < 0.0;
    }
    assert!(both_halves.0 && both_halves.1);
}

#[test]
fn spectrum_rows() {
    let o = qdiff(&["spectrum", "--m", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lam: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    let r = 8f64.sqrt();
    assert!((lam[0] + r).abs() <= 1e-12 && (lam[1] - r).abs() <= 1e-12, "{lam:?}");

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("e.csv");
    let o = qdiff(&["spectrum", "--m-range", "10,20,40", "--out", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let rows = rows(&csv);
    for m in [10, 20, 40] {
        assert_eq!(rows.iter().filter(|r| r[0] == m.to_string()).count(), m + 1);
    }
    let table = stdout(&o);
    let h: Vec<f64> = table
        .lines()
        .skip(1)
        .take(3)
        .map(|l| l.rsplit(", ").next().unwrap().parse().unwrap())
        .collect();
    assert!(h.windows(2).all(|w| w[1] < w[0]), "{h:?}");
    assert!(table.contains("stabilizing: m^(3/2)"));
}

#[test]
fn measure_of_the_real_regime() {
    let o = qdiff(&["measure", "--gamma", "-6", "--delta", "1", "--out", "/dev/null"]);
    assert_eq!(o.status.code(), Some(0));
    let mass: f64 = stdout(&o)
        .lines()
        .next()
        .unwrap()
        .strip_prefix("mass = ")
        .unwrap()
        .parse()
        .unwrap();
    assert!((mass - 1.0).abs() <= 1e-6);
    // an impossible tolerance turns the mass check into a failure
    assert_eq!(
        qdiff(&[
            "measure",
            "--gamma",
            "-6",
            "--delta",
            "1",
            "--tol",
            "1e-300",
            "--out",
            "/dev/null"
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn verify_default_and_negative_control() {
    let o = qdiff(&["verify"]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(!text.contains("FAIL"));
    for label in ["Ω1", "Ω2", "nearest to Σ"] {
        assert!(text.contains(label), "{label}");
    }
    let o = qdiff(&["verify", "--tol", "1e-20"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# apex in Ω2\na = 0.5 + 2i\nescape-radius = 40\n").unwrap();
    let o = qdiff(&["classify", "--config", cfg.to_str().unwrap()]);
    assert!(stdout(&o).starts_with("Ω2"));
    let o = qdiff(&["classify", "--config", cfg.to_str().unwrap(), "--a", "1.6+2i"]);
    assert!(stdout(&o).starts_with("Ω1"));
    std::fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(
        qdiff(&["classify", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(3)
    );
}
