//! The η-scaled system, the reduced limit `∂ₜv = F(v, (Id−P)(κ⁻¹·l)v̄)`,
//! and the η-sweep measuring how fast `Pu^η` dies out.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{IntegratorConfig, Problem, Scheme, SimState, Stepper};
use crate::grid::{EmState, MatterState};
use crate::helmholtz::{project_p, slaved_field};
use crate::models::MatterModel;
use crate::reduce;

/// `du = −η⁻¹Bu + (κ⁻¹·l)F`, `dv = F`.
pub fn rhs_eta<M: MatterModel>(
    problem: &Problem<M>,
    s: &SimState,
    eta: f64,
) -> Result<(EmState, MatterState)> {
    if !(eta > 0.0) {
        return Err(Error::config("eta", "must be positive"));
    }
    let (du, dv, _) = problem.derivative_eta(&s.u, &s.v, eta)?;
    Ok((du, dv))
}

/// `F(v, ū)` on Ω with `ū = (Id−P)(κ⁻¹·l)v̄`.
pub fn reduced_rhs<M: MatterModel>(problem: &Problem<M>, v: &MatterState) -> Result<MatterState> {
    let u = slaved(problem, v)?;
    let (_, dv, _) = problem.nonlinear(&u, v);
    Ok(dv)
}

/// The field slaved to `v` by the reduced model.
pub fn slaved<M: MatterModel>(problem: &Problem<M>, v: &MatterState) -> Result<EmState> {
    slaved_field(&problem.ws, v, &problem.model, &problem.mask, &problem.kappa, &problem.projector)
}

/// RK4 on the reduced equation; `monitor` sees `(t, v)` at `t = 0`, every
/// `stride` steps and at the end.
pub fn run_reduced<M: MatterModel>(
    problem: &Problem<M>,
    v_init: &MatterState,
    dt: f64,
    t_end: f64,
    stride: usize,
    mut monitor: impl FnMut(f64, &MatterState) -> Result<()>,
) -> Result<MatterState> {
    problem.check_matter(v_init)?;
    let cfg = IntegratorConfig::new(Scheme::Rk4, dt, t_end);
    cfg.validate()?;
    let (steps, h) = cfg.steps();
    let stride = stride.max(1);
    let mut v = v_init.clone();
    monitor(0.0, &v)?;
    for k in 1..=steps {
        v = reduced_step(problem, &v, h)?;
        let t = k as f64 * h;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "reduced state",
                t,
            });
        }
        if k % stride == 0 || k == steps {
            monitor(t, &v)?;
        }
    }
    Ok(v)
}

fn reduced_step<M: MatterModel>(problem: &Problem<M>, v: &MatterState, h: f64) -> Result<MatterState> {
    let k1 = reduced_rhs(problem, v)?;
    let mut y = v.clone();
    y.axpy(0.5 * h, &k1);
    let k2 = reduced_rhs(problem, &y)?;
    let mut y = v.clone();
    y.axpy(0.5 * h, &k2);
    let k3 = reduced_rhs(problem, &y)?;
    let mut y = v.clone();
    y.axpy(h, &k3);
    let k4 = reduced_rhs(problem, &y)?;
    let mut out = v.clone();
    out.axpy(h / 6.0, &k1);
    out.axpy(h / 3.0, &k2);
    out.axpy(h / 3.0, &k3);
    out.axpy(h / 6.0, &k4);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EtaStudyConfig {
    pub eta_list: Vec<f64>,
    /// Observation radius in grid cells, centred on the centroid of Ω.
    pub radius: f64,
    pub t_obs: f64,
    /// Number of equal observation intervals on `[0, T_obs]`.
    pub samples: usize,
    pub scheme: Scheme,
    pub base_dt: f64,
    /// Lawson steps are capped at `eta_dt_factor·η` to resolve the source.
    pub eta_dt_factor: f64,
    pub cfl_factor: f64,
}

impl EtaStudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eta_list.is_empty() {
            return Err(Error::config("study.eta_list", "must not be empty"));
        }
        if self.eta_list.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::config("study.eta_list", "entries must lie in (0, 1]"));
        }
        if self.eta_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("study.eta_list", "must be strictly decreasing"));
        }
        if !(self.radius > 0.0) {
            return Err(Error::config("study.radius", "must be positive"));
        }
        if !(self.t_obs > 0.0) {
            return Err(Error::config("study.t_obs", "must be positive"));
        }
        if self.samples == 0 {
            return Err(Error::config("study.samples", "must be positive"));
        }
        if !(self.base_dt > 0.0) || !(self.eta_dt_factor > 0.0) || !(self.cfl_factor > 0.0) {
            return Err(Error::config("study.base_dt", "step parameters must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EtaRow {
    pub eta: f64,
    pub dt: f64,
    /// `‖Pu^η‖_{L²((0,T_obs), L²(B_R))}`.
    pub pu_norm: Option<f64>,
    /// `‖v^η − v⁰‖_{L^∞_t L²(Ω)}`.
    pub v_deviation: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EtaStudy {
    pub rows: Vec<EtaRow>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub v_deviation_monotone: bool,
}

/// Runs the η-system for each `η` from the shared initial state `s0` and
/// compares with the reduced solution from `s0.v`.
pub fn eta_convergence_study<M: MatterModel + Clone>(
    problem: &Problem<M>,
    s0: &SimState,
    cfg: &EtaStudyConfig,
) -> Result<EtaStudy> {
    cfg.validate()?;
    let grid = problem.ws.grid();
    let h3 = grid.cell_volume();
    let interval = cfg.t_obs / cfg.samples as f64;

    let center = problem.mask.centroid();
    let r = cfg.radius * grid.spacing();
    let ball: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let d = grid.displacement(center, i);
            d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= r * r
        })
        .collect();

    let sub = (interval / cfg.base_dt).ceil().max(1.0) as usize;
    let mut reference = Vec::with_capacity(cfg.samples + 1);
    reference.push(s0.v.clone());
    let mut v = s0.v.clone();
    for _ in 0..cfg.samples {
        for _ in 0..sub {
            v = reduced_step(problem, &v, interval / sub as f64)?;
        }
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "reduced state",
                t: reference.len() as f64 * interval,
            });
        }
        reference.push(v.clone());
    }

    let mut rows = Vec::with_capacity(cfg.eta_list.len());
    for &eta in &cfg.eta_list {
        let p = problem.clone().with_eta(eta)?;
        let mut dt = cfg.base_dt;
        match cfg.scheme {
            Scheme::LawsonExp => dt = dt.min(cfg.eta_dt_factor * eta),
            Scheme::Rk4 => dt = dt.min(p.cfl_limit(cfg.cfl_factor)),
        }
        let sub = (interval / dt).ceil().max(1.0) as usize;
        let dt = interval / sub as f64;
        match eta_run(&p, s0, cfg, dt, sub, &ball, &reference, h3) {
            Ok((pu, dev)) => rows.push(EtaRow {
                eta,
                dt,
                pu_norm: Some(pu),
                v_deviation: Some(dev),
                error: None,
            }),
            Err(e) if e.is_numerical() => rows.push(EtaRow {
                eta,
                dt,
                pu_norm: None,
                v_deviation: None,
                error: Some(e.to_string()),
            }),
            Err(e) => return Err(e),
        }
    }

    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.pu_norm.filter(|&x| x > 0.0).map(|x| (r.eta.ln(), x.ln())))
        .collect();
    let (slope, intercept) = match least_squares(&pts) {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };
    let devs: Vec<f64> = rows.iter().filter_map(|r| r.v_deviation).collect();
    let v_deviation_monotone = devs.len() == rows.len() && devs.windows(2).all(|w| w[1] <= w[0]);
    Ok(EtaStudy {
        rows,
        slope,
        intercept,
        v_deviation_monotone,
    })
}

#[allow(clippy::too_many_arguments)]
fn eta_run<M: MatterModel>(
    p: &Problem<M>,
    s0: &SimState,
    cfg: &EtaStudyConfig,
    dt: f64,
    sub: usize,
    ball: &[usize],
    reference: &[MatterState],
    h3: f64,
) -> Result<(f64, f64)> {
    let icfg = IntegratorConfig {
        cfl_factor: cfg.cfl_factor,
        ..IntegratorConfig::new(cfg.scheme, dt, cfg.t_obs)
    };
    let stepper = Stepper::new(p, &icfg, s0)?;
    let local = |s: &SimState| -> Result<f64> {
        let pu = project_p(&p.ws, &s.u, &p.kappa, &p.projector)?;
        let sq = reduce::sum(ball.len(), |k| {
            let i = ball[k];
            let a = pu.at(i);
            a.iter().map(|x| x * x).sum::<f64>()
        });
        Ok(sq * h3)
    };
    let interval = cfg.t_obs / cfg.samples as f64;
    let mut s = s0.clone();
    let mut prev = local(&s)?;
    let mut integral = 0.0;
    let mut dev = 0.0f64;
    for j in 1..=cfg.samples {
        for _ in 0..sub {
            s = stepper.step(&s)?;
        }
        let cur = local(&s)?;
        integral += 0.5 * interval * (prev + cur);
        prev = cur;
        dev = dev.max(s.v.sub(&reference[j]).l2_norm(h3));
    }
    Ok((integral.sqrt(), dev))
}

/// Least-squares line `y = a x + b`; needs two distinct abscissae.
pub fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    Some((a, my - a * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Coefficients, DomainMask, Grid3};
    use crate::models::LandauLifschitz;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn problem() -> Problem<LandauLifschitz> {
        let g = Grid3::new(8, 2.0 * std::f64::consts::PI).unwrap();
        let model = LandauLifschitz::new(1.0, 0.3, 0.0, [0.0, 0.0, 1.0], [0.2, 0.0, 1.0]).unwrap();
        Problem::new(
            model,
            Coefficients::constant(g, 1.0, 1.0).unwrap(),
            DomainMask::centered_box(g, 2).unwrap(),
        )
        .unwrap()
    }

    fn random_state(p: &Problem<LandauLifschitz>) -> SimState {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = EmState::new(p.ws.band_limited_vector(&mut rng, 3), p.ws.band_limited_vector(&mut rng, 3))
            .unwrap();
        let v = MatterState::uniform(p.mask.voxel_count(), &[0.6, 0.0, 0.8]);
        SimState {
            t: 0.0,
            u,
            v,
            dissipated: 0.0,
        }
    }

    #[test]
    fn unit_eta_matches_plain_rhs() {
        let p = problem();
        let s = random_state(&p);
        assert_eq!(rhs_eta(&p, &s, 1.0).unwrap(), p.rhs_full(&s).unwrap());
    }

    #[test]
    fn defining_identity() {
        let p = problem();
        let s = random_state(&p);
        let eta = 0.5;
        let (du, dv) = rhs_eta(&p, &s, eta).unwrap();
        let bu = p.ws.apply_b(&s.u, &p.kappa).unwrap();
        let (src, f, _) = p.nonlinear(&s.u, &s.v);
        let mut res = du.clone();
        res.scale(eta);
        res.axpy(1.0, &bu);
        res.axpy(-eta, &src);
        assert!(res.norm() <= 1e-12 * (bu.norm() + src.norm()));
        assert_eq!(dv, f);
    }

    #[test]
    fn reduced_rhs_preserves_modulus() {
        let p = problem();
        let v = MatterState::uniform(p.mask.voxel_count(), &[0.0, 0.0, 1.0]);
        let dv = reduced_rhs(&p, &v).unwrap();
        for k in 0..v.voxel_count() {
            let d: f64 = v.voxel(k).iter().zip(dv.voxel(k)).map(|(a, b)| a * b).sum();
            assert!(d.abs() <= 1e-14);
        }
        let zero = reduced_rhs(&p, &p.zero_matter()).unwrap();
        assert!(zero.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn fit_recovers_a_line() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 3.0].iter().map(|&x| (x, 0.5 * x - 1.0)).collect();
        let (a, b) = least_squares(&pts).unwrap();
        assert!((a - 0.5).abs() < 1e-14 && (b + 1.0).abs() < 1e-14);
        assert!(least_squares(&pts[..1]).is_none());
    }
}
