//! Pointwise model identities and closed-form trajectories.

use mxm_core::evolution::{run, IntegratorConfig, Problem, Scheme, SimState};
use mxm_core::grid::{Coefficients, DomainMask, EmState, Grid3, MatterState, VectorField3};
use mxm_core::models::{check_structure, pack_rho, unpack_rho, Bloch, LandauLifschitz, LinearGrowth, MatterModel};
use nalgebra::{Complex, DMatrix};
use num_complex::Complex64;
use proptest::prelude::*;

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn unit(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn small_problem<M: MatterModel>(model: M) -> Problem<M> {
    let g = Grid3::new(8, 1.0).unwrap();
    Problem::new(
        model,
        Coefficients::constant(g, 1.0, 1.0).unwrap(),
        DomainMask::centered_box(g, 2).unwrap(),
    )
    .unwrap()
    .without_feedback()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ll_rhs_is_orthogonal_and_dissipative(
        theta in 0.0f64..3.14, phi in 0.0f64..6.28,
        h in prop::array::uniform3(-5.0f64..5.0),
        alpha in 0.0f64..2.0, gamma in 0.1f64..3.0, ka in 0.0f64..2.0,
        ext in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let ll = LandauLifschitz::new(gamma, alpha, ka, [0.0, 0.0, 1.0], ext).unwrap();
        let m = unit(theta, phi);
        let mut f = [0.0; 3];
        ll.eval_f(&m, &[h[0], h[1], h[2], 0.0, 0.0, 0.0], &mut f);
        prop_assert!(dot(f, m).abs() <= 1e-14 * (1.0 + dot(f, f).sqrt()));
        let ht = [
            h[0] + ext[0],
            h[1] + ext[1],
            h[2] + ext[2] + ka * m[2],
        ];
        let c2 = dot(cross(m, ht), cross(m, ht));
        let scale = 1.0 + (alpha * alpha + gamma * gamma) * c2;
        prop_assert!((dot(f, ht) - alpha * c2).abs() <= 1e-12 * scale);
        prop_assert!((dot(f, f) - (alpha * alpha + gamma * gamma) * c2).abs() <= 1e-12 * scale);
    }

    #[test]
    fn rhs_is_affine_in_the_field(
        v in prop::array::uniform4(-1.0f64..1.0),
        a in prop::array::uniform6(-3.0f64..3.0),
        b in prop::array::uniform6(-3.0f64..3.0),
        s in -2.0f64..2.0,
    ) {
        let models: Vec<Box<dyn MatterModel>> = vec![
            Box::new(LandauLifschitz::new(1.3, 0.4, 0.7, [0.0, 0.6, 0.8], [0.1, 0.2, 0.3]).unwrap()),
            Box::new(Bloch::two_level(1.1, [0.5, -0.3, 0.2], 0.2).unwrap()),
            Box::new(LinearGrowth { rate: 0.4, gamma: 0.9 }),
        ];
        for m in &models {
            let d = m.dim();
            let v = &v[..d];
            let f = |u: &[f64; 6]| {
                let mut out = vec![0.0; d];
                m.eval_f(v, u, &mut out);
                out
            };
            let f0 = f(&[0.0; 6]);
            let comb: [f64; 6] = std::array::from_fn(|k| a[k] + s * b[k]);
            let (fa, fb, fc) = (f(&a), f(&b), f(&comb));
            for k in 0..d {
                let lin = fa[k] - f0[k] + s * (fb[k] - f0[k]);
                prop_assert!((fc[k] - f0[k] - lin).abs() <= 1e-12 * (1.0 + fa[k].abs() + fb[k].abs()) * (1.0 + s.abs()));
            }
        }
    }

    #[test]
    fn bloch_rhs_is_traceless_and_hermitian(
        re in -1.0f64..1.0, im in -1.0f64..1.0, p in 0.0f64..1.0,
        e in prop::array::uniform3(-3.0f64..3.0),
    ) {
        let b = Bloch::two_level(0.8, [0.4, 0.1, -0.6], 0.3).unwrap();
        let rho = [
            Complex64::new(p, 0.0),
            Complex64::new(re, im),
            Complex64::new(re, -im),
            Complex64::new(1.0 - p, 0.0),
        ];
        let v = pack_rho(&rho, 2).unwrap();
        let mut f = vec![0.0; 4];
        b.eval_f(&v, &[0.0, 0.0, 0.0, e[0], e[1], e[2]], &mut f);
        prop_assert!((f[0] + f[1]).abs() <= 1e-14 * (1.0 + f.iter().map(|x| x.abs()).sum::<f64>()));
        let m = unpack_rho(&f, 2);
        prop_assert_eq!(m[1], m[2].conj());
        prop_assert!(pack_rho(&m, 2).unwrap() == f);
    }
}

#[test]
fn structural_assumptions_hold_for_shipped_models() {
    let ll = LandauLifschitz::new(1.0, 0.5, 0.5, [0.0, 0.0, 1.0], [0.5, 0.0, 2.0]).unwrap();
    let r = check_structure(&ll, 500, 3.0, 1).unwrap();
    assert!(r.k_empirical <= 1e-12, "{r:?}");
    let b = Bloch::two_level(1.0, [0.3, 0.0, 0.4], 0.1).unwrap();
    assert!(check_structure(&b, 500, 3.0, 2).unwrap().k_empirical <= 1e-12);
    let g = LinearGrowth { rate: 0.7, gamma: 1.0 };
    let r = check_structure(&g, 500, 3.0, 3).unwrap();
    assert!((r.k_empirical - 0.7).abs() < 1e-12, "{r:?}");
}

/// Uniform `M` in a zero field precesses about `H_ext` at `γ|H_ext|`.
#[test]
fn precession_frequency() {
    let gamma = 1.7;
    let h = 2.5;
    let p = small_problem(LandauLifschitz::precession(gamma, [0.0, 0.0, h]).unwrap());
    let g = p.ws.grid();
    let m0 = unit(0.9, 0.3);
    let s0 = SimState {
        t: 0.0,
        u: EmState::zeros(g),
        v: MatterState::uniform(p.mask.voxel_count(), &m0),
        dissipated: 0.0,
    };
    let mut phase = 0.0f64;
    let mut last = m0[1].atan2(m0[0]);
    let mut times = Vec::new();
    let cfg = IntegratorConfig::new(Scheme::Rk4, 0.004, 6.0);
    let end = run(&p, s0, &cfg, 1, |s| {
        let m = s.v.voxel(0);
        let a = m[1].atan2(m[0]);
        let mut d = a - last;
        d -= (d / (2.0 * std::f64::consts::PI)).round() * 2.0 * std::f64::consts::PI;
        phase += d;
        last = a;
        times.push(s.t);
        Ok(())
    })
    .unwrap();
    let omega = phase.abs() / end.t;
    let expected = gamma * h;
    assert!(((omega - expected) / expected).abs() < 1e-4, "{omega} vs {expected}");
    assert!((end.v.voxel(0)[2] - m0[2]).abs() < 1e-10);
}

/// `exp(−iHt)` for Hermitian `H` through its eigendecomposition.
fn propagator(h: &DMatrix<Complex<f64>>, t: f64) -> DMatrix<Complex<f64>> {
    let eig = h.clone().symmetric_eigen();
    let n = h.nrows();
    let phases = DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            Complex::new(0.0, -eig.eigenvalues[a] * t).exp()
        } else {
            Complex::new(0.0, 0.0)
        }
    });
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

fn rabi_case(levels: usize, energies: &[f64], dipole: [f64; 3], e: [f64; 3], dt: f64) -> f64 {
    let c = |x: f64| Complex64::new(x, 0.0);
    let n = levels;
    let mut lam = vec![c(0.0); n * n];
    for a in 0..n {
        lam[a * n + a] = c(energies[a]);
    }
    let gam = dipole.map(|d| {
        let mut m = vec![c(0.0); n * n];
        for a in 0..n - 1 {
            m[a * n + a + 1] = c(d);
            m[(a + 1) * n + a] = c(d);
        }
        m
    });
    let model = Bloch::new(n, lam.clone(), gam.clone(), 0.0).unwrap();
    let p = small_problem(model);
    let g = p.ws.grid();
    let mut rho0 = vec![c(0.0); n * n];
    rho0[0] = c(1.0);
    let s0 = SimState {
        t: 0.0,
        u: EmState::new(VectorField3::zeros(g), VectorField3::uniform(g, e)).unwrap(),
        v: MatterState::uniform(p.mask.voxel_count(), &pack_rho(&rho0, n).unwrap()),
        dissipated: 0.0,
    };

    // H = Λ − E·Γ, built independently of the model.
    let h = DMatrix::from_fn(n, n, |a, b| {
        let mut x = lam[a * n + b];
        for k in 0..3 {
            x -= gam[k][a * n + b] * e[k];
        }
        Complex::new(x.re, x.im)
    });
    let eig = h.clone().symmetric_eigen();
    let spread = eig.eigenvalues.max() - eig.eigenvalues.min();
    let t_end = 5.0 * 2.0 * std::f64::consts::PI / spread;

    let cfg = IntegratorConfig::new(Scheme::Rk4, dt, t_end);
    let end = run(&p, s0, &cfg, usize::MAX, |_| Ok(())).unwrap();
    let u = propagator(&h, end.t);
    let r0 = DMatrix::from_fn(n, n, |a, b| Complex::new(rho0[a * n + b].re, rho0[a * n + b].im));
    let expected = &u * r0 * u.adjoint();
    let mut worst = 0.0f64;
    for k in 0..p.mask.voxel_count() {
        let got = unpack_rho(end.v.voxel(k), n);
        let mut f = 0.0;
        for a in 0..n {
            for b in 0..n {
                let z = got[a * n + b];
                f += (Complex::new(z.re, z.im) - expected[(a, b)]).norm_sqr();
            }
        }
        worst = worst.max(f.sqrt());
    }
    worst
}

#[test]
fn two_level_rabi_matches_matrix_exponential() {
    let err = rabi_case(2, &[0.0, 1.0], [0.6, 0.0, 0.0], [0.8, 0.0, 0.3], 0.01);
    assert!(err < 1e-6, "{err:e}");
}

#[test]
fn three_level_ladder_matches_matrix_exponential() {
    let err = rabi_case(3, &[0.0, 1.0, 2.3], [0.4, 0.2, 0.0], [0.5, -0.7, 0.0], 0.01);
    assert!(err < 1e-6, "{err:e}");
}

/// `|v(t)| = |v(0)|e^{Kt}` for the linear-growth model.
#[test]
fn growth_envelope_is_exact() {
    let k = 0.3;
    let p = small_problem(LinearGrowth { rate: k, gamma: 1.0 });
    let g = p.ws.grid();
    let s0 = SimState {
        t: 0.0,
        u: EmState::new(VectorField3::uniform(g, [0.0, 1.0, 2.0]), VectorField3::zeros(g)).unwrap(),
        v: MatterState::uniform(p.mask.voxel_count(), &[0.5, 0.2, -0.1]),
        dissipated: 0.0,
    };
    let r0 = s0.v.sup_norm();
    let cfg = IntegratorConfig::new(Scheme::Rk4, 0.01, 2.0);
    run(&p, s0, &cfg, 10, |s| {
        let want = r0 * (k * s.t).exp();
        assert!((s.v.sup_norm() - want).abs() <= 1e-8 * want, "t = {}", s.t);
        Ok(())
    })
    .unwrap();
}
