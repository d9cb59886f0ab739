//! Time integration of `(∂ₜ + η⁻¹B)u = (κ⁻¹·l)F(v̄, u)`, `∂ₜv = F(v, u)` on Ω.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{weighted_norm, Coefficients, DomainMask, EmState, MatterState};
use crate::helmholtz::{project_complement_em, project_p, ProjectorConfig};
use crate::models::{scaled_coupling, scaled_coupling_field, MatterModel};
use crate::reduce;
use crate::spectral::{FourierWorkspace, MollifierSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: EmState,
    pub v: MatterState,
    /// `∫₀ᵗ w‖√κ₁ ∂ₜv‖²_{L²(Ω)}` for models with a dissipation weight `w`,
    /// integrated alongside the state.
    pub dissipated: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Rk4,
    LawsonExp,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub renormalize_m: bool,
    pub cfl_factor: f64,
}

impl IntegratorConfig {
    pub fn new(scheme: Scheme, dt: f64, t_end: f64) -> Self {
        Self {
            scheme,
            dt,
            t_end,
            renormalize_m: false,
            cfl_factor: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config("integrator.dt", "must be positive"));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::config("integrator.t_end", "must be non-negative"));
        }
        if !(self.cfl_factor > 0.0) {
            return Err(Error::config("integrator.cfl_factor", "must be positive"));
        }
        Ok(())
    }

    /// Number of steps to `t_end`; the step is shrunk so they land on it.
    pub fn steps(&self) -> (usize, f64) {
        if self.t_end == 0.0 {
            return (0, self.dt);
        }
        let r = self.t_end / self.dt;
        let n = if (r - r.round()).abs() < 1e-9 * r { r.round() } else { r.ceil() } as usize;
        (n, self.t_end / n as f64)
    }
}

/// Everything that stays fixed during a run.
#[derive(Clone, Debug)]
pub struct Problem<M> {
    pub ws: FourierWorkspace,
    pub model: M,
    pub kappa: Coefficients,
    pub mask: DomainMask,
    pub projector: ProjectorConfig,
    /// Time-scale parameter; 1 is the unscaled system.
    pub eta: f64,
    /// When false the matter does not act back on the field: `∂ₜu = −η⁻¹Bu`.
    pub feedback: bool,
}

impl<M: MatterModel> Problem<M> {
    pub fn new(model: M, kappa: Coefficients, mask: DomainMask) -> Result<Self> {
        if kappa.grid() != mask.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            ws: FourierWorkspace::new(mask.grid()),
            model,
            projector: ProjectorConfig::for_coefficients(&kappa),
            kappa,
            mask,
            eta: 1.0,
            feedback: true,
        })
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::config("eta", "must be positive"));
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn without_feedback(mut self) -> Self {
        self.feedback = false;
        self
    }

    pub fn with_projector(mut self, cfg: ProjectorConfig) -> Self {
        self.projector = cfg;
        self
    }

    pub fn zero_matter(&self) -> MatterState {
        MatterState::zeros(self.model.dim(), self.mask.voxel_count())
    }

    /// `(κ⁻¹·l)F(v̄, u)` on the grid, `F(v, u)` on Ω, and the dissipation rate.
    pub fn nonlinear(&self, u: &EmState, v: &MatterState) -> (EmState, MatterState, f64) {
        let d = self.model.dim();
        let voxels = self.mask.voxels();
        let per_voxel: Vec<(Vec<f64>, [f64; 6])> = voxels
            .par_iter()
            .enumerate()
            .map(|(k, &i)| {
                let mut f = vec![0.0; d];
                self.model.eval_f(v.voxel(k), &u.at(i), &mut f);
                let s = if self.feedback {
                    scaled_coupling(&self.model, self.kappa.at(i), &f)
                } else {
                    [0.0; 6]
                };
                (f, s)
            })
            .collect();
        let mut src = EmState::zeros(self.ws.grid());
        let mut dv = MatterState::zeros(d, voxels.len());
        for (k, (f, s)) in per_voxel.into_iter().enumerate() {
            let i = voxels[k];
            src.u1.set(i, [s[0], s[1], s[2]]);
            src.u2.set(i, [s[3], s[4], s[5]]);
            dv.voxel_mut(k).copy_from_slice(&f);
        }
        let rate = self.dissipation_rate(&dv);
        (src, dv, rate)
    }

    /// `w ∫_Ω κ₁|∂ₜv|²`, zero for models without a dissipation weight.
    pub fn dissipation_rate(&self, dv: &MatterState) -> f64 {
        let Some(w) = self.model.dissipation_weight() else {
            return 0.0;
        };
        let voxels = self.mask.voxels();
        let k1 = &self.kappa.kappa1.data;
        let s = reduce::sum(voxels.len(), |k| {
            k1[voxels[k]] * dv.voxel(k).iter().map(|x| x * x).sum::<f64>()
        });
        w * s * self.ws.grid().cell_volume()
    }

    fn derivative(&self, u: &EmState, v: &MatterState) -> Result<(EmState, MatterState, f64)> {
        self.derivative_eta(u, v, self.eta)
    }

    pub(crate) fn derivative_eta(
        &self,
        u: &EmState,
        v: &MatterState,
        eta: f64,
    ) -> Result<(EmState, MatterState, f64)> {
        let (mut du, dv, rate) = self.nonlinear(u, v);
        let bu = self.ws.apply_b(u, &self.kappa)?;
        du.axpy(-1.0 / eta, &bu);
        Ok((du, dv, rate))
    }

    /// `(du, dv)` of the η-scaled system; `η = 1` is the plain system.
    pub fn rhs_full(&self, s: &SimState) -> Result<(EmState, MatterState)> {
        let (du, dv, _) = self.derivative(&s.u, &s.v)?;
        Ok((du, dv))
    }

    /// `u = P u_free + (Id−P)(κ⁻¹·l)v̄_init`.
    pub fn make_initial(&self, u_free: &EmState, v_init: &MatterState) -> Result<SimState> {
        self.check_matter(v_init)?;
        let src = scaled_coupling_field(&self.model, v_init, &self.mask, &self.kappa);
        let mut u = project_p(&self.ws, u_free, &self.kappa, &self.projector)?;
        let c = project_complement_em(&self.ws, &src, &self.kappa, &self.projector)?;
        u.axpy(1.0, &c);
        Ok(SimState {
            t: 0.0,
            u,
            v: v_init.clone(),
            dissipated: 0.0,
        })
    }

    pub fn constraint_residual(&self, s: &SimState) -> Result<f64> {
        crate::helmholtz::constraint_residual(
            &self.ws,
            &s.u,
            &s.v,
            &self.model,
            &self.mask,
            &self.kappa,
            &self.projector,
        )
    }

    pub fn check_matter(&self, v: &MatterState) -> Result<()> {
        if v.dim() != self.model.dim() || v.voxel_count() != self.mask.voxel_count() {
            return Err(Error::InvalidDomain(format!(
                "matter state has {} voxels × {} components, expected {} × {}",
                v.voxel_count(),
                v.dim(),
                self.mask.voxel_count(),
                self.model.dim()
            )));
        }
        Ok(())
    }

    /// Largest stable RK4 step: `cfl·h·√(min κ₁κ₂)·η`.
    pub fn cfl_limit(&self, cfl_factor: f64) -> f64 {
        let k1 = &self.kappa.kappa1.data;
        let k2 = &self.kappa.kappa2.data;
        let m = k1.iter().zip(k2).map(|(a, b)| a * b).fold(f64::INFINITY, f64::min);
        cfl_factor * self.ws.grid().spacing() * m.sqrt() * self.eta
    }
}

/// One-step integrator bound to a problem and a step size.
pub struct Stepper<'a, M> {
    problem: &'a Problem<M>,
    scheme: Scheme,
    dt: f64,
    reference_moduli: Option<Vec<f64>>,
}

impl<'a, M: MatterModel> Stepper<'a, M> {
    pub fn new(problem: &'a Problem<M>, cfg: &IntegratorConfig, initial: &SimState) -> Result<Self> {
        cfg.validate()?;
        problem.check_matter(&initial.v)?;
        let (_, dt) = cfg.steps();
        match cfg.scheme {
            Scheme::Rk4 => {
                let limit = problem.cfl_limit(cfg.cfl_factor);
                if dt > limit {
                    return Err(Error::Cfl { dt, limit });
                }
            }
            Scheme::LawsonExp => {
                if problem.kappa.constant_values().is_none() {
                    return Err(Error::NonConstantCoefficients);
                }
            }
        }
        let reference_moduli = if cfg.renormalize_m {
            if problem.model.name() != "landau_lifschitz" {
                return Err(Error::config(
                    "integrator.renormalize_m",
                    "only meaningful for the landau_lifschitz model",
                ));
            }
            Some(initial.v.moduli())
        } else {
            None
        };
        Ok(Self {
            problem,
            scheme: cfg.scheme,
            dt,
            reference_moduli,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, s: &SimState) -> Result<SimState> {
        let mut next = match self.scheme {
            Scheme::Rk4 => self.rk4(s)?,
            Scheme::LawsonExp => self.lawson(s)?,
        };
        if let Some(r) = &self.reference_moduli {
            for (k, &m0) in r.iter().enumerate() {
                let m = next.v.voxel_mut(k);
                let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    m.iter_mut().for_each(|x| *x *= m0 / norm);
                }
            }
        }
        if !next.u.is_finite() || !next.v.is_finite() || !next.dissipated.is_finite() {
            return Err(Error::NonFinite {
                what: "state",
                t: next.t,
            });
        }
        Ok(next)
    }

    fn rk4(&self, s: &SimState) -> Result<SimState> {
        let p = self.problem;
        let h = self.dt;
        let (k1u, k1v, r1) = p.derivative(&s.u, &s.v)?;
        let (u2, v2) = shifted(s, 0.5 * h, &k1u, &k1v);
        let (k2u, k2v, r2) = p.derivative(&u2, &v2)?;
        let (u3, v3) = shifted(s, 0.5 * h, &k2u, &k2v);
        let (k3u, k3v, r3) = p.derivative(&u3, &v3)?;
        let (u4, v4) = shifted(s, h, &k3u, &k3v);
        let (k4u, k4v, r4) = p.derivative(&u4, &v4)?;

        let mut u = s.u.clone();
        let mut v = s.v.clone();
        for (w, ku, kv) in [
            (h / 6.0, &k1u, &k1v),
            (h / 3.0, &k2u, &k2v),
            (h / 3.0, &k3u, &k3v),
            (h / 6.0, &k4u, &k4v),
        ] {
            u.axpy(w, ku);
            v.axpy(w, kv);
        }
        Ok(SimState {
            t: s.t + h,
            u,
            v,
            dissipated: s.dissipated + h / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4),
        })
    }

    /// Lawson RK4: classical RK4 on `w = e^{tB/η}u`, written back in `u`.
    fn lawson(&self, s: &SimState) -> Result<SimState> {
        let p = self.problem;
        let h = self.dt;
        let half = |x: &EmState| p.ws.exp_b(0.5 * h / p.eta, x, &p.kappa);

        let (k1u, k1v, r1) = p.nonlinear(&s.u, &s.v);
        let a = half(&s.u)?;
        let e1 = half(&k1u)?;

        let mut u2 = a.clone();
        u2.axpy(0.5 * h, &e1);
        let mut v2 = s.v.clone();
        v2.axpy(0.5 * h, &k1v);
        let (k2u, k2v, r2) = p.nonlinear(&u2, &v2);

        let mut u3 = a.clone();
        u3.axpy(0.5 * h, &k2u);
        let mut v3 = s.v.clone();
        v3.axpy(0.5 * h, &k2v);
        let (k3u, k3v, r3) = p.nonlinear(&u3, &v3);

        let mut t4 = a.clone();
        t4.axpy(h, &k3u);
        let u4 = half(&t4)?;
        let mut v4 = s.v.clone();
        v4.axpy(h, &k3v);
        let (k4u, k4v, r4) = p.nonlinear(&u4, &v4);

        let mut acc = a;
        acc.axpy(h / 6.0, &e1);
        acc.axpy(h / 3.0, &k2u);
        acc.axpy(h / 3.0, &k3u);
        let mut u = half(&acc)?;
        u.axpy(h / 6.0, &k4u);

        let mut v = s.v.clone();
        v.axpy(h / 6.0, &k1v);
        v.axpy(h / 3.0, &k2v);
        v.axpy(h / 3.0, &k3v);
        v.axpy(h / 6.0, &k4v);
        Ok(SimState {
            t: s.t + h,
            u,
            v,
            dissipated: s.dissipated + h / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4),
        })
    }
}

fn shifted(s: &SimState, h: f64, du: &EmState, dv: &MatterState) -> (EmState, MatterState) {
    let mut u = s.u.clone();
    u.axpy(h, du);
    let mut v = s.v.clone();
    v.axpy(h, dv);
    (u, v)
}

/// Integrates to `cfg.t_end`, calling `monitor` on the initial state, every
/// `stride` steps, and on the final state.
pub fn run<M: MatterModel>(
    problem: &Problem<M>,
    s0: SimState,
    cfg: &IntegratorConfig,
    stride: usize,
    mut monitor: impl FnMut(&SimState) -> Result<()>,
) -> Result<SimState> {
    let stepper = Stepper::new(problem, cfg, &s0)?;
    let (steps, _) = cfg.steps();
    let stride = stride.max(1);
    monitor(&s0)?;
    let mut s = s0;
    for k in 1..=steps {
        s = stepper.step(&s)?;
        if k % stride == 0 || k == steps {
            monitor(&s)?;
        }
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointConfig {
    /// `None` runs the unmollified map.
    pub mollifier: Option<MollifierSpec>,
    pub window: f64,
    pub dt: f64,
    pub tolerance: f64,
    pub max_iters: usize,
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0) {
            return Err(Error::config("fixed_point.window", "must be positive"));
        }
        if !(self.dt > 0.0) || self.dt > self.window {
            return Err(Error::config("fixed_point.dt", "must be positive and at most the window"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("fixed_point.tolerance", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("fixed_point.max_iters", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FixedPointReport {
    pub state: SimState,
    /// Map applications needed to reach the fixed point.
    pub iterations: usize,
    /// `sup_t` distances between consecutive iterates.
    pub distances: Vec<f64>,
    /// Worst ratio of consecutive distances; below 1 witnesses the contraction.
    pub max_ratio: f64,
}

/// Picard iteration of the mollified Duhamel map on `[0, T_w]`:
/// `u(t) = e^{−tB}u₀ + ∫₀ᵗ e^{−(t−s)B}(κ⁻¹·l)F(v̄, Rⁿu)(s) ds`,
/// `v(t) = v₀ + ∫₀ᵗ F(v, Rⁿu)(s) ds`, trapezoidal rule on the `dt` grid.
pub fn mollified_fixed_point<M: MatterModel>(
    problem: &Problem<M>,
    s0: &SimState,
    cfg: &FixedPointConfig,
) -> Result<FixedPointReport> {
    cfg.validate()?;
    problem.check_matter(&s0.v)?;
    if problem.kappa.constant_values().is_none() {
        return Err(Error::NonConstantCoefficients);
    }
    let steps = (cfg.window / cfg.dt).round().max(1.0) as usize;
    let dt = cfg.window / steps as f64;
    let h3 = problem.ws.grid().cell_volume();

    let mut traj: Vec<(EmState, MatterState)> = vec![(s0.u.clone(), s0.v.clone()); steps + 1];
    let mut distances = Vec::new();
    let mut max_ratio = 0.0f64;
    for iter in 1..=cfg.max_iters {
        let forcing: Vec<(EmState, MatterState)> = traj
            .iter()
            .map(|(u, v)| {
                let ru = match &cfg.mollifier {
                    Some(spec) => problem.ws.mollify_em(spec, u)?,
                    None => u.clone(),
                };
                let (src, dv, _) = problem.nonlinear(&ru, v);
                Ok((src, dv))
            })
            .collect::<Result<_>>()?;

        let mut next = Vec::with_capacity(steps + 1);
        next.push((s0.u.clone(), s0.v.clone()));
        for m in 1..=steps {
            let (pu, pv) = &next[m - 1];
            let mut w = pu.clone();
            w.axpy(0.5 * dt, &forcing[m - 1].0);
            let mut u = problem.ws.exp_b(dt / problem.eta, &w, &problem.kappa)?;
            u.axpy(0.5 * dt, &forcing[m].0);
            let mut v = pv.clone();
            v.axpy(0.5 * dt, &forcing[m - 1].1);
            v.axpy(0.5 * dt, &forcing[m].1);
            next.push((u, v));
        }

        let mut dist = 0.0f64;
        for ((u, v), (nu, nv)) in traj.iter().zip(&next) {
            let du = weighted_norm(&nu.sub(u), &problem.kappa)?;
            let dv = nv.sub(v).l2_norm(h3);
            dist = dist.max(du + dv);
        }
        if !dist.is_finite() {
            return Err(Error::NonFinite {
                what: "fixed-point iterate",
                t: cfg.window,
            });
        }
        traj = next;
        let scale = traj
            .iter()
            .map(|(u, v)| weighted_norm(u, &problem.kappa).unwrap_or(0.0) + v.l2_norm(h3))
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        if let Some(&prev) = distances.last() {
            if dist > cfg.tolerance * scale {
                let ratio = dist / prev;
                max_ratio = max_ratio.max(ratio);
                if ratio >= 1.0 {
                    return Err(Error::NonContraction {
                        ratio,
                        iteration: iter,
                    });
                }
            }
        }
        distances.push(dist);
        if dist <= cfg.tolerance * scale {
            let (u, v) = traj.pop().unwrap();
            return Ok(FixedPointReport {
                state: SimState {
                    t: s0.t + cfg.window,
                    u,
                    v,
                    dissipated: 0.0,
                },
                iterations: iter - 1,
                distances,
                max_ratio,
            });
        }
    }
    Err(Error::FixedPointNotConverged {
        iterations: cfg.max_iters,
        distance: *distances.last().unwrap(),
    })
}

/// `‖Δu‖_κ + ‖Δv‖_{L²(Ω)}`.
pub fn state_distance<M: MatterModel>(problem: &Problem<M>, a: &SimState, b: &SimState) -> Result<f64> {
    let h3 = problem.ws.grid().cell_volume();
    Ok(weighted_norm(&a.u.sub(&b.u), &problem.kappa)? + a.v.sub(&b.v).l2_norm(h3))
}

#[derive(Clone, Debug, Serialize)]
pub struct MollifiedRow {
    pub index: usize,
    pub distance: f64,
    pub iterations: usize,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MollifiedStudy {
    pub rows: Vec<MollifiedRow>,
    /// Distance of the unmollified trapezoidal fixed point to the reference.
    pub time_error: f64,
    pub monotone: bool,
}

impl MollifiedStudy {
    /// Largest-index distance over the pure time-integration error.
    pub fn final_ratio(&self) -> f64 {
        match self.rows.last() {
            Some(r) if self.time_error > 0.0 => r.distance / self.time_error,
            Some(r) if r.distance == 0.0 => 0.0,
            _ => f64::INFINITY,
        }
    }
}

/// Fixed points of `𝒜ⁿ` for each `n`, compared at `T_w` with a Lawson run
/// of step `reference_dt` (no mollifier).
pub fn compare_mollified<M: MatterModel>(
    problem: &Problem<M>,
    s0: &SimState,
    cfg: &FixedPointConfig,
    n_list: &[usize],
    reference_dt: f64,
) -> Result<MollifiedStudy> {
    if n_list.is_empty() || n_list.iter().any(|&n| n == 0) {
        return Err(Error::config("n_list", "must list positive mollifier indices"));
    }
    let icfg = IntegratorConfig::new(Scheme::LawsonExp, reference_dt, cfg.window);
    let reference = run(problem, s0.clone(), &icfg, usize::MAX, |_| Ok(()))?;

    let exact = FixedPointConfig {
        mollifier: None,
        ..*cfg
    };
    let fp = mollified_fixed_point(problem, s0, &exact)?;
    let time_error = state_distance(problem, &fp.state, &reference)?;

    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let c = FixedPointConfig {
            mollifier: Some(MollifierSpec::new(n)),
            ..*cfg
        };
        let r = mollified_fixed_point(problem, s0, &c)?;
        rows.push(MollifiedRow {
            index: n,
            distance: state_distance(problem, &r.state, &reference)?,
            iterations: r.iterations,
            max_ratio: r.max_ratio,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].distance <= w[0].distance);
    Ok(MollifiedStudy {
        rows,
        time_error,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid3;
    use crate::models::LandauLifschitz;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ll_problem(n: usize, side: usize) -> Problem<LandauLifschitz> {
        let g = Grid3::new(n, 2.0 * std::f64::consts::PI).unwrap();
        let model = LandauLifschitz::new(1.0, 0.2, 0.0, [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]).unwrap();
        Problem::new(
            model,
            Coefficients::constant(g, 1.0, 1.0).unwrap(),
            DomainMask::centered_box(g, side).unwrap(),
        )
        .unwrap()
    }

    fn random_em(p: &Problem<LandauLifschitz>, seed: u64) -> EmState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EmState::new(p.ws.band_limited_vector(&mut rng, 3), p.ws.band_limited_vector(&mut rng, 3)).unwrap()
    }

    #[test]
    fn zero_matter_gives_free_maxwell() {
        let p = ll_problem(8, 2);
        let s = SimState {
            t: 0.0,
            u: random_em(&p, 1),
            v: p.zero_matter(),
            dissipated: 0.0,
        };
        let (du, dv) = p.rhs_full(&s).unwrap();
        let mut bu = p.ws.apply_b(&s.u, &p.kappa).unwrap();
        bu.scale(-1.0);
        assert_eq!(du, bu);
        assert!(dv.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn lawson_without_matter_is_the_exact_propagator() {
        let p = ll_problem(8, 2);
        let s = SimState {
            t: 0.0,
            u: random_em(&p, 2),
            v: p.zero_matter(),
            dissipated: 0.0,
        };
        let cfg = IntegratorConfig::new(Scheme::LawsonExp, 0.1, 0.1);
        let next = Stepper::new(&p, &cfg, &s).unwrap().step(&s).unwrap();
        let exact = p.ws.exp_b(0.1, &s.u, &p.kappa).unwrap();
        assert!(next.u.sub(&exact).norm() <= 1e-13 * exact.norm());
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let p = ll_problem(8, 2);
        let s = p.make_initial(&EmState::zeros(p.ws.grid()), &p.zero_matter()).unwrap();
        let cfg = IntegratorConfig::new(Scheme::Rk4, 1.0, 1.0);
        assert!(matches!(Stepper::new(&p, &cfg, &s), Err(Error::Cfl { .. })));
    }

    #[test]
    fn make_initial_satisfies_constraint() {
        let p = ll_problem(16, 4);
        let v = MatterState::uniform(p.mask.voxel_count(), &[0.0, 0.0, 1.0]);
        let s = p.make_initial(&random_em(&p, 3), &v).unwrap();
        assert!(p.constraint_residual(&s).unwrap() <= 1e-10);
        let zero = p.make_initial(&EmState::zeros(p.ws.grid()), &p.zero_matter()).unwrap();
        assert_eq!(zero.u.norm(), 0.0);
    }

    #[test]
    fn fixed_point_without_matter_is_one_iteration() {
        let p = ll_problem(8, 2);
        let s0 = SimState {
            t: 0.0,
            u: random_em(&p, 4),
            v: p.zero_matter(),
            dissipated: 0.0,
        };
        let cfg = FixedPointConfig {
            mollifier: Some(MollifierSpec::new(2)),
            window: 0.3,
            dt: 0.05,
            tolerance: 1e-12,
            max_iters: 10,
        };
        let r = mollified_fixed_point(&p, &s0, &cfg).unwrap();
        assert_eq!(r.iterations, 1);
        let exact = p.ws.exp_b(0.3, &s0.u, &p.kappa).unwrap();
        assert!(r.state.u.sub(&exact).norm() <= 1e-12 * exact.norm());
    }

    #[test]
    fn long_window_is_reported_as_non_contracting() {
        let g = Grid3::new(8, 2.0 * std::f64::consts::PI).unwrap();
        let model = LandauLifschitz::new(5.0, 2.0, 0.0, [0.0, 0.0, 1.0], [0.0, 0.0, 3.0]).unwrap();
        let p = Problem::new(
            model,
            Coefficients::constant(g, 1.0, 1.0).unwrap(),
            DomainMask::centered_box(g, 2).unwrap(),
        )
        .unwrap();
        let v = MatterState::uniform(p.mask.voxel_count(), &[1.0, 0.0, 0.0]);
        let s0 = p.make_initial(&EmState::zeros(g), &v).unwrap();
        let cfg = FixedPointConfig {
            mollifier: None,
            window: 20.0,
            dt: 0.05,
            tolerance: 1e-12,
            max_iters: 50,
        };
        let err = mollified_fixed_point(&p, &s0, &cfg).unwrap_err();
        assert!(matches!(err, Error::NonContraction { .. } | Error::FixedPointNotConverged { .. }), "{err}");
    }
}
