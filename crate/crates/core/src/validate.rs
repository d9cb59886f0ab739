//! Invariant suite on built-in 8³ micro-scenarios, run by `mxm validate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{bound_monitor, energy_ll, CsvWriter, Monitor};
use crate::error::Result;
use crate::evolution::{run, IntegratorConfig, Problem, Scheme, SimState};
use crate::grid::{
    extend_by_zero, restrict_to_domain, weighted_inner, weighted_norm, Coefficients, DomainMask, EmState,
    Grid3, MatterState,
};
use crate::helmholtz::{project_complement_em, project_p, ProjectorConfig, ProjectorMode};
use crate::models::{check_structure, Bloch, LandauLifschitz, LinearGrowth, MatterModel};
use crate::quasistatic::{rhs_eta, run_reduced, slaved};
use crate::spectral::MollifierSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    /// Worst measured residual.
    pub value: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

const N: usize = 8;
const PAIRS: usize = 20;

fn grid() -> Grid3 {
    Grid3::new(N, 2.0 * std::f64::consts::PI).expect("fixed grid")
}

fn bump(g: Grid3) -> Result<Coefficients> {
    Coefficients::smooth_bump(g, [1.0, 1.0], [0.5, 0.3], g.center(), 1.5, 1.0)
}

fn random_em(p_ws: &crate::spectral::FourierWorkspace, rng: &mut ChaCha8Rng) -> EmState {
    EmState::new(p_ws.band_limited_vector(rng, 3), p_ws.band_limited_vector(rng, 3)).expect("same grid")
}

fn ll_model() -> Result<LandauLifschitz> {
    LandauLifschitz::new(1.0, 0.5, 0.5, [0.0, 0.0, 1.0], [0.5, 0.0, 2.0])
}

fn ll_problem(kappa: Coefficients) -> Result<Problem<LandauLifschitz>> {
    let g = kappa.grid();
    let mut p = Problem::new(ll_model()?, kappa, DomainMask::centered_box(g, 2)?)?;
    p.projector = p.projector.with_tolerance(1e-12);
    Ok(p)
}

fn random_unit_matter(voxels: usize, rng: &mut ChaCha8Rng) -> MatterState {
    let mut v = MatterState::zeros(3, voxels);
    for k in 0..voxels {
        let m: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let r = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt().max(1e-3);
        v.voxel_mut(k).copy_from_slice(&m.map(|x| x / r));
    }
    v
}

/// Runs every check; `Err` only for failures that prevent measuring.
pub fn run_suite() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let g = grid();
    let constant = Coefficients::constant(g, 1.3, 0.7)?;
    let variable = bump(g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pc = ll_problem(constant.clone())?;
    let pv = ll_problem(variable.clone())?;
    let ws = &pc.ws;

    // grid-core
    let mut sym = 0.0f64;
    let mut coerc = 0.0f64;
    for _ in 0..PAIRS {
        let a = random_em(ws, &mut rng);
        let b = random_em(ws, &mut rng);
        let ab = weighted_inner(&a, &b, &variable)?;
        let ba = weighted_inner(&b, &a, &variable)?;
        sym = sym.max((ab - ba).abs() / (weighted_norm(&a, &variable)? * weighted_norm(&b, &variable)?));
        let plain = a.norm().powi(2) * g.cell_volume();
        coerc = coerc.max(variable.lower_bound() * plain - weighted_inner(&a, &a, &variable)?);
    }
    out.push(check("weighted inner product symmetric", sym, 1e-14));
    out.push(check("weighted inner product coercive", coerc.max(0.0), 0.0));
    let v = random_unit_matter(pc.mask.voxel_count(), &mut rng);
    let ext = extend_by_zero(&v, &pc.mask);
    let back = restrict_to_domain(&ext, &pc.mask);
    let off: f64 = (0..g.len())
        .filter(|&i| !pc.mask.contains(i))
        .map(|i| ext.comps.iter().map(|c| c[i].abs()).sum::<f64>())
        .sum();
    out.push(check(
        "extension round trip",
        if back == v { off } else { f64::INFINITY },
        0.0,
    ));

    // spectral-ops
    for (name, kappa, tol) in [
        ("B skew-adjoint, constant κ", &constant, 1e-12),
        ("B skew-adjoint, variable κ", &variable, 1e-12),
    ] {
        let mut worst = 0.0f64;
        for _ in 0..PAIRS {
            let a = random_em(ws, &mut rng);
            let b = random_em(ws, &mut rng);
            let s = weighted_inner(&ws.apply_b(&a, kappa)?, &b, kappa)? + weighted_inner(&a, &ws.apply_b(&b, kappa)?, kappa)?;
            worst = worst.max(s.abs() / (weighted_norm(&a, kappa)? * weighted_norm(&b, kappa)?));
        }
        out.push(check(name, worst, tol));
    }
    let a = random_em(ws, &mut rng);
    let n0 = weighted_norm(&a, &constant)?;
    let e1 = ws.exp_b(0.37, &a, &constant)?;
    let e12 = ws.exp_b(0.21, &e1, &constant)?;
    let e2 = ws.exp_b(0.58, &a, &constant)?;
    out.push(check(
        "exp(−tB) preserves the κ-norm",
        (weighted_norm(&e1, &constant)? - n0).abs() / n0,
        1e-12,
    ));
    out.push(check(
        "exp(−tB) group law",
        weighted_norm(&e12.sub(&e2), &constant)? / n0,
        1e-12,
    ));
    let f = ws.band_limited_noise(&mut rng, 4);
    let h = ws.band_limited_noise(&mut rng, 4);
    let spec = MollifierSpec::new(2);
    let rf = ws.mollify(&spec, &f)?;
    let rh = ws.mollify(&spec, &h)?;
    out.push(check(
        "mollifier self-adjoint",
        (rf.inner(&h) - f.inner(&rh)).abs() / (f.norm() * h.norm()),
        1e-12,
    ));
    let phi = ws.band_limited_noise(&mut rng, 4);
    let gp = ws.grad(&phi)?;
    out.push(check(
        "curl ∘ grad = 0",
        ws.curl(&gp)?.max_abs() / gp.max_abs(),
        1e-12,
    ));

    // helmholtz
    for (name, p, tol) in [("(Id−P)B = 0, constant κ", &pc, 1e-12), ("(Id−P)B = 0, variable κ", &pv, 1e-9)] {
        let mut worst = 0.0f64;
        for _ in 0..4 {
            let bu = p.ws.apply_b(&random_em(ws, &mut rng), &p.kappa)?;
            let c = project_complement_em(&p.ws, &bu, &p.kappa, &p.projector)?;
            worst = worst.max(weighted_norm(&c, &p.kappa)? / weighted_norm(&bu, &p.kappa)?);
        }
        out.push(check(name, worst, tol));
    }
    for (names, p, tol) in [
        (
            ["P idempotent and κ-orthogonal, constant κ", "curl-free complement and κ-div-free P, constant κ"],
            &pc,
            1e-12,
        ),
        (
            ["P idempotent and κ-orthogonal, variable κ", "curl-free complement and κ-div-free P, variable κ"],
            &pv,
            1e-9,
        ),
    ] {
        let u = random_em(ws, &mut rng);
        let pu = project_p(&p.ws, &u, &p.kappa, &p.projector)?;
        let ppu = project_p(&p.ws, &pu, &p.kappa, &p.projector)?;
        let qu = u.sub(&pu);
        let nu = weighted_norm(&u, &p.kappa)?;
        let idem = weighted_norm(&ppu.sub(&pu), &p.kappa)? / nu;
        let orth = weighted_inner(&pu, &qu, &p.kappa)?.abs() / (nu * nu);
        out.push(check(names[0], idem.max(orth), tol));
        let curl_q = p.ws.curl(&qu.u1)?.max_abs().max(p.ws.curl(&qu.u2)?.max_abs());
        let div_p = p
            .ws
            .div(&pu.u1.mul_scalar(&p.kappa.kappa1))?
            .data
            .iter()
            .chain(&p.ws.div(&pu.u2.mul_scalar(&p.kappa.kappa2))?.data)
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let scale = u.u1.max_abs().max(u.u2.max_abs()) * p.ws.max_wavenumber();
        out.push(check(
            names[1],
            curl_q.max(div_p) / scale,
            tol,
        ));
    }
    {
        let u = random_em(ws, &mut rng);
        let fft = project_p(ws, &u, &constant, &ProjectorConfig::new(ProjectorMode::FftConstant))?;
        let cg = project_p(
            ws,
            &u,
            &constant,
            &ProjectorConfig::new(ProjectorMode::IterativeVariable).with_tolerance(1e-12),
        )?;
        out.push(check(
            "iterative projector matches FFT path",
            weighted_norm(&fft.sub(&cg), &constant)? / weighted_norm(&u, &constant)?,
            1e-8,
        ));
    }

    // matter-models
    let ll = ll_model()?;
    let mut orth = 0.0f64;
    let mut diss = 0.0f64;
    let mut fv = [0.0; 3];
    for _ in 0..PAIRS {
        let m = random_unit_matter(1, &mut rng);
        let m = m.voxel(0);
        let u: [f64; 6] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        ll.eval_f(m, &u, &mut fv);
        orth = orth.max((fv[0] * m[0] + fv[1] * m[1] + fv[2] * m[2]).abs());
        let mm = [m[0], m[1], m[2]];
        let ht = ll.total_field(mm, [u[0], u[1], u[2]]);
        let c = crate::models::cross(mm, ht);
        let c2 = crate::models::dot(c, c);
        let (a, gm) = (ll.alpha(), ll.gamma());
        let d1 = (crate::models::dot(fv, ht) - a * c2).abs();
        let d2 = (crate::models::dot(fv, fv) - (a * a + gm * gm) * c2).abs();
        diss = diss.max((d1 + d2) / (1.0 + c2));
    }
    out.push(check("LL right-hand side orthogonal to M", orth, 1e-14));
    out.push(check("LL pointwise dissipation identities", diss, 1e-12));
    let bloch = Bloch::two_level(1.0, [0.7, 0.0, 0.2], 0.1)?;
    let mut tr = 0.0f64;
    let mut fb = vec![0.0; bloch.dim()];
    for _ in 0..PAIRS {
        let rho: Vec<f64> = (0..bloch.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: [f64; 6] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        bloch.eval_f(&rho, &u, &mut fb);
        tr = tr.max(fb[..bloch.levels()].iter().sum::<f64>().abs());
    }
    out.push(check("Bloch right-hand side traceless", tr, 1e-14));
    let growth = LinearGrowth { rate: 0.3, gamma: 1.0 };
    for (name, r) in [
        ("structure: Landau-Lifschitz", check_structure(&ll, 200, 3.0, 11)),
        ("structure: Bloch", check_structure(&bloch, 200, 3.0, 12)),
        ("structure: linear growth", check_structure(&growth, 200, 3.0, 13)),
    ] {
        out.push(check(name, if r.is_ok() { 0.0 } else { 1.0 }, 0.0));
    }

    // evolution + diagnostics
    let s0 = pv.make_initial(&random_em(ws, &mut rng), &random_unit_matter(pv.mask.voxel_count(), &mut rng))?;
    let cfg = IntegratorConfig::new(Scheme::Rk4, 0.02, 0.4);
    let r0 = pv.constraint_residual(&s0)?;
    let mut drift = 0.0f64;
    let mut sups = Vec::new();
    let sup0 = s0.v.sup_norm();
    let end = run(&pv, s0.clone(), &cfg, 5, |s| {
        drift = drift.max(pv.constraint_residual(s)? - r0);
        sups.push((s.t, s.v.sup_norm()));
        Ok(())
    })?;
    out.push(check("initial constraint residual", r0, 1e-10));
    out.push(check("constraint propagation", drift.max(0.0), 1e-8));
    out.push(check("pointwise bound, LL", bound_monitor(&sups, sup0, 0.0) - 1.0, 1e-6));
    let mut renorm = cfg;
    renorm.renormalize_m = true;
    let end_r = run(&pv, s0.clone(), &renorm, 20, |_| Ok(()))?;
    let modulus = end_r
        .v
        .moduli()
        .iter()
        .zip(s0.v.moduli())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    out.push(check("LL modulus with renormalization", modulus, 1e-14));
    let energy_growth = {
        let (e0, _) = energy_ll(&pv, &s0)?;
        let (e1, _) = energy_ll(&pv, &end)?;
        ((e1 + end.dissipated - e0) / e0.abs()).abs()
    };
    out.push(check("LL energy balance, short run", energy_growth, 1e-3));

    let pb = Problem::new(bloch.clone(), constant.clone(), DomainMask::centered_box(g, 2)?)?;
    let rho0 = crate::models::pack_rho(
        &[
            num_complex::Complex64::new(0.8, 0.0),
            num_complex::Complex64::new(0.3, 0.1),
            num_complex::Complex64::new(0.3, -0.1),
            num_complex::Complex64::new(0.2, 0.0),
        ],
        2,
    )?;
    let sb = pb.make_initial(&random_em(ws, &mut rng), &MatterState::uniform(pb.mask.voxel_count(), &rho0))?;
    let mon = Monitor::new(&pb, &sb)?;
    let mut herm = 0.0f64;
    let mut trace = 0.0f64;
    let mut sups = Vec::new();
    run(&pb, sb.clone(), &cfg, 5, |s| {
        let r = mon.record(s)?;
        herm = herm.max(r.extra[1]);
        trace = trace.max(r.extra[2]);
        sups.push((s.t, s.v.sup_norm()));
        Ok(())
    })?;
    out.push(check("Bloch Hermiticity", herm, 1e-12));
    out.push(check("Bloch trace conservation", trace, 1e-10));
    out.push(check("pointwise bound, transverse Bloch", bound_monitor(&sups, sb.v.sup_norm(), 0.0) - 1.0, 1e-6));

    // quasistatic
    let (a1, b1) = rhs_eta(&pv, &s0, 1.0)?;
    let (a2, b2) = pv.rhs_full(&s0)?;
    out.push(check(
        "η = 1 matches the plain system",
        if a1 == a2 && b1 == b2 { 0.0 } else { 1.0 },
        0.0,
    ));
    let mut slave = 0.0f64;
    run_reduced(&pv, &s0.v, 0.02, 0.2, 5, |t, v| {
        let s = SimState {
            t,
            u: slaved(&pv, v)?,
            v: v.clone(),
            dissipated: 0.0,
        };
        slave = slave.max(pv.constraint_residual(&s)?);
        Ok(())
    })?;
    out.push(check("slaved field satisfies the constraint", slave, 1e-9));

    // determinism of the monitor stream
    let csv = |threads: usize| -> Result<Vec<u8>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(|| {
            let mon = Monitor::new(&pv, &s0)?;
            let mut w = CsvWriter::new(Vec::new(), pv.model.name(), &mon.columns())?;
            run(&pv, s0.clone(), &IntegratorConfig::new(Scheme::Rk4, 0.02, 0.1), 1, |s| {
                w.write(&mon.record(s)?)
            })?;
            w.finish()
        })
    };
    let one = csv(1)?;
    let four = csv(4)?;
    out.push(check("CSV bit-identical across thread counts", if one == four { 0.0 } else { 1.0 }, 0.0));

    Ok(out)
}

fn check(name: &'static str, value: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name,
        value: if value.is_nan() { f64::INFINITY } else { value },
        tolerance,
    }
}
