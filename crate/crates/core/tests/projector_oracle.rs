//! Variable-coefficient projector against a dense direct solve on an 8³ grid.

use mxm_core::grid::{Coefficients, Grid3, ScalarField, VectorField3};
use mxm_core::helmholtz::{project_complement, ProjectorConfig, ProjectorMode};
use mxm_core::spectral::FourierWorkspace;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Trigonometric-interpolation derivative on `n` periodic points, the
/// Nyquist mode dropped, summed term by term.
fn derivative_matrix(n: usize, len: f64) -> DMatrix<f64> {
    let h = len / n as f64;
    DMatrix::from_fn(n, n, |j, m| {
        let dx = (j as f64 - m as f64) * h;
        let mut s = 0.0;
        for k in 1..n / 2 {
            let xi = 2.0 * PI * k as f64 / len;
            s += xi * (xi * dx).sin();
        }
        -2.0 * s / n as f64
    })
}

/// Dense `(Id−P)u` for weight `kappa`: least squares in the `κ` product over
/// the span of gradients and the sign-pattern fields killed by the derivative.
fn dense_complement(g: Grid3, kappa: &[f64], u: &[f64]) -> Vec<f64> {
    let n = g.n();
    let len = g.len();
    let d = derivative_matrix(n, g.box_len());
    let idx = |a: usize, b: usize, c: usize| a + n * (b + n * c);

    let patterns: Vec<Vec<f64>> = (0..8)
        .map(|s| {
            (0..len)
                .map(|i| {
                    let [a, b, c] = g.coords(i);
                    let e = (s & 1) * a + ((s >> 1) & 1) * b + ((s >> 2) & 1) * c;
                    if e % 2 == 0 { 1.0 } else { -1.0 }
                })
                .collect()
        })
        .collect();

    let cols = len + 24;
    let mut gm = DMatrix::<f64>::zeros(3 * len, cols);
    for c in 0..n {
        for b in 0..n {
            for a in 0..n {
                let row = idx(a, b, c);
                for m in 0..n {
                    gm[(row, idx(m, b, c))] += d[(a, m)];
                    gm[(len + row, idx(a, m, c))] += d[(b, m)];
                    gm[(2 * len + row, idx(a, b, m))] += d[(c, m)];
                }
            }
        }
    }
    for (s, p) in patterns.iter().enumerate() {
        for comp in 0..3 {
            for i in 0..len {
                gm[(comp * len + i, len + 3 * s + comp)] = p[i];
            }
        }
    }
    let kdiag = DVector::from_fn(3 * len, |r, _| kappa[r % len]);
    let kg = DMatrix::from_fn(3 * len, cols, |r, c| kdiag[r] * gm[(r, c)]);
    let mut a = gm.transpose() * &kg;
    // lift the null space of the gradient block
    for p in &patterns {
        for i in 0..len {
            for j in 0..len {
                a[(i, j)] += p[i] * p[j] / len as f64;
            }
        }
    }
    let uv = DVector::from_column_slice(u);
    let rhs = kg.transpose() * uv;
    let x = a.lu().solve(&rhs).expect("nonsingular");
    (gm * x).as_slice().to_vec()
}

#[test]
fn cg_projector_matches_dense_solve() {
    let g = Grid3::new(8, 2.0 * PI).unwrap();
    let ws = FourierWorkspace::new(g);
    let kappa = Coefficients::smooth_bump(g, [1.0, 1.0], [0.8, 0.0], g.center(), 1.5, 1.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..3 {
        let comps = std::array::from_fn(|_| (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect());
        let u = VectorField3::from_comps(g, comps).unwrap();
        let flat: Vec<f64> = u.comps.concat();
        let dense = dense_complement(g, &kappa.kappa1.data, &flat);
        let cfg = ProjectorConfig::new(ProjectorMode::IterativeVariable).with_tolerance(1e-12);
        let got = project_complement(&ws, &u, &kappa.kappa1, &cfg).unwrap();
        let got: Vec<f64> = got.comps.concat();
        let err = got.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = dense.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(err <= 1e-8 * scale.max(1.0), "max deviation {err:e}");
    }
}

#[test]
fn dense_oracle_reduces_to_leray_for_constant_kappa() {
    let g = Grid3::new(8, 3.0).unwrap();
    let ws = FourierWorkspace::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let comps = std::array::from_fn(|_| (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect());
    let u = VectorField3::from_comps(g, comps).unwrap();
    let k = ScalarField::constant(g, 2.0);
    let dense = dense_complement(g, &k.data, &u.comps.concat());
    let got = project_complement(&ws, &u, &k, &ProjectorConfig::new(ProjectorMode::FftConstant))
        .unwrap()
        .comps
        .concat();
    let err = got.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-10, "{err:e}");
}
