use qdiff_core::algebra::{
    cubic_roots, eig_tridiagonal, hessenberg_eigenvalues, poly_roots, sort_lex, Poly, TriMatrix,
};
use qdiff_core::spectral::{operator_matrix, spectrum, SpectralProblem};
use qdiff_core::{c64, Complex64};

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol
}

#[test]
fn z_squared_plus_one() {
    let r = poly_roots(&Poly::from_real(&[1.0, 0.0, 1.0])).unwrap();
    assert_eq!(r.len(), 2);
    assert!(close(r[0], c64(0.0, -1.0), 1e-13));
    assert!(close(r[1], c64(0.0, 1.0), 1e-13));
}

#[test]
fn z_fourth_has_quadruple_zero() {
    let r = poly_roots(&Poly::from_real(&[0.0, 0.0, 0.0, 0.0, 1.0])).unwrap();
    assert_eq!(r.len(), 4);
    assert!(r.iter().all(|z| z.norm() == 0.0), "{r:?}");
}

#[test]
fn cubic_roots_of_the_apex_family() {
    let q = Poly::from_real(&[-4.0, 4.0, -1.0, 1.0]);
    let r = cubic_roots(&q).unwrap();
    for (got, want) in r.iter().zip([c64(0.0, -2.0), c64(0.0, 2.0), c64(1.0, 0.0)]) {
        assert!(close(*got, want, 1e-13), "{r:?}");
    }
    let p = Poly::from_roots(&[c64(1.0, 0.0), c64(1.6, 2.0), c64(1.6, -2.0)]);
    let back = cubic_roots(&p).unwrap();
    assert!(close(back[2], c64(1.6, 2.0), 1e-12));
}

fn companion(p: &Poly) -> Vec<Vec<Complex64>> {
    let n = p.degree();
    let lead = p.leading();
    let mut h = vec![vec![c64(0.0, 0.0); n]; n];
    for j in 0..n {
        h[0][j] = -p.coeff(n - 1 - j) / lead;
    }
    for i in 1..n {
        h[i][i - 1] = c64(1.0, 0.0);
    }
    h
}

#[test]
fn eigenpolynomial_roots_agree_with_companion_eigenvalues() {
    let sol = spectrum(&SpectralProblem::new(10, 0.0).unwrap()).unwrap();
    for q in &sol.eigenpolys {
        assert_eq!(q.degree(), 10);
        let found = poly_roots(q).unwrap();
        assert_eq!(found.len(), 10);
        let mut oracle = hessenberg_eigenvalues(companion(q)).unwrap();
        sort_lex(&mut oracle);
        for r in &found {
            let best = oracle.iter().map(|o| (o - r).norm()).fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-7 * r.norm().max(1.0), "root {r} vs companion ({best:e})");
            // residual relative to the size of the terms
            let terms: f64 = q
                .coeffs()
                .iter()
                .enumerate()
                .map(|(k, c)| c.norm() * r.norm().powi(k as i32))
                .sum();
            assert!(q.eval(*r).norm() <= 1e-9 * terms);
        }
    }
}

/// Characteristic polynomial `det(M - λ)` of a tridiagonal matrix from the
/// three-term recurrence of its leading minors.
fn char_poly(m: &TriMatrix) -> Poly {
    let n = m.size();
    let lam = Poly::z();
    let mut prev = Poly::one();
    let mut cur = &Poly::constant(m.get(0, 0)) - &lam;
    for k in 1..n {
        let next = &(&(&Poly::constant(m.get(k, k)) - &lam) * &cur)
            - &(&Poly::constant(m.get(k, k - 1) * m.get(k - 1, k)) * &prev);
        prev = cur;
        cur = next;
    }
    cur
}

#[test]
fn operator_matrix_m4_eigenvalues_match_recurrence() {
    let mat = operator_matrix(&SpectralProblem::new(4, 0.0).unwrap());
    let e = eig_tridiagonal(&mat).unwrap();
    assert_eq!(e.values.len(), 5);
    let oracle = poly_roots(&char_poly(&mat)).unwrap();
    for (a, b) in e.values.iter().zip(&oracle) {
        assert!(close(*a, *b, 1e-9 * a.norm().max(1.0)), "{a} vs {b}");
    }
}

#[test]
fn small_matrices() {
    let d = TriMatrix::new(
        vec![c64(0.0, 0.0); 2],
        vec![c64(3.0, 0.0), c64(1.0, 0.0), c64(2.0, 0.0)],
        vec![c64(0.0, 0.0); 2],
    )
    .unwrap();
    let e = eig_tridiagonal(&d).unwrap();
    for (k, v) in e.values.iter().enumerate() {
        assert!(close(*v, c64(k as f64 + 1.0, 0.0), 1e-14));
    }
    let s = TriMatrix::new(vec![c64(1.0, 0.0)], vec![c64(0.0, 0.0); 2], vec![c64(1.0, 0.0)]).unwrap();
    let e = eig_tridiagonal(&s).unwrap();
    assert!(close(e.values[0], c64(-1.0, 0.0), 1e-14) && close(e.values[1], c64(1.0, 0.0), 1e-14));
}
