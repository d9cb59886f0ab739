//! Energy and bound monitors and the monitor CSV stream.

use std::io::Write;

use crate::error::{Error, Result};
use crate::evolution::{Problem, SimState};
use crate::grid::weighted_norm;
use crate::models::{unpack_rho, MatterModel};
use crate::reduce;

pub const MONITOR_SCHEMA: &str = "mxm-monitor/1";

/// Discrete LL energy and its instantaneous dissipation rate:
/// `𝓔 = ½∫(κ₂|E|² + κ₁|H|²) + ∫_Ω κ₁(½|H_ext − M|² − Φ(M))`,
/// rate `α/(α²+γ²)·∫_Ω κ₁|∂ₜM|²`.
pub fn energy_ll<M: MatterModel>(problem: &Problem<M>, s: &SimState) -> Result<(f64, f64)> {
    let ll = problem.model.landau_lifschitz().ok_or(Error::WrongModel {
        expected: "landau_lifschitz",
    })?;
    let field = 0.5 * weighted_norm(&s.u, &problem.kappa)?.powi(2);
    let voxels = problem.mask.voxels();
    let k1 = &problem.kappa.kappa1.data;
    let h = ll.h_ext();
    let matter = reduce::sum(voxels.len(), |k| {
        let m = s.v.voxel(k);
        let m = [m[0], m[1], m[2]];
        let d2: f64 = (0..3).map(|a| (h[a] - m[a]).powi(2)).sum();
        k1[voxels[k]] * (0.5 * d2 - ll.anisotropy_potential(m))
    }) * problem.ws.grid().cell_volume();
    let (_, _, rate) = problem.nonlinear(&s.u, &s.v);
    Ok((field + matter, rate))
}

/// Worst `sup|v(t)| / (sup|v_init|·e^{Kt})` over `(t, sup|v(t)|)` samples;
/// 0 when everything vanishes.
pub fn bound_monitor(samples: &[(f64, f64)], sup_init: f64, k: f64) -> f64 {
    samples
        .iter()
        .map(|&(t, sup)| bound_ratio(sup, sup_init, k, t))
        .fold(0.0, f64::max)
}

pub fn bound_ratio(sup: f64, sup_init: f64, k: f64, t: f64) -> f64 {
    if sup == 0.0 {
        0.0
    } else if sup_init == 0.0 {
        f64::INFINITY
    } else {
        sup / (sup_init * (k * t).exp())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorRecord {
    pub t: f64,
    pub em_norm: f64,
    pub matter_l2: f64,
    pub matter_sup: f64,
    pub constraint_residual: f64,
    pub bound_ratio: f64,
    /// Model-specific values, in the order of [`Monitor::columns`].
    pub extra: Vec<f64>,
}

impl MonitorRecord {
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![
            self.t,
            self.em_norm,
            self.matter_l2,
            self.matter_sup,
            self.constraint_residual,
            self.bound_ratio,
        ];
        v.extend_from_slice(&self.extra);
        v
    }
}

/// Builds records relative to the initial state of a run.
pub struct Monitor<'a, M> {
    problem: &'a Problem<M>,
    sup_init: f64,
    growth: f64,
    moduli_init: Vec<f64>,
    energy_init: Option<f64>,
    traces_init: Vec<f64>,
    track_constraint: bool,
}

impl<'a, M: MatterModel> Monitor<'a, M> {
    pub fn new(problem: &'a Problem<M>, s0: &SimState) -> Result<Self> {
        let energy_init = match problem.model.landau_lifschitz() {
            Some(_) => Some(energy_ll(problem, s0)?.0),
            None => None,
        };
        let traces_init = match problem.model.bloch() {
            Some(b) => traces(&s0.v, b.levels()),
            None => Vec::new(),
        };
        Ok(Self {
            problem,
            sup_init: s0.v.sup_norm(),
            growth: problem.model.growth_constant(),
            moduli_init: s0.v.moduli(),
            energy_init,
            traces_init,
            track_constraint: true,
        })
    }

    /// Skips the projector solve per record; the column then reads 0.
    pub fn without_constraint(mut self) -> Self {
        self.track_constraint = false;
        self
    }

    pub fn columns(&self) -> Vec<String> {
        let mut c: Vec<String> = [
            "t",
            "em_norm",
            "matter_l2",
            "matter_sup",
            "constraint_residual",
            "bound_ratio",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        if self.problem.model.landau_lifschitz().is_some() {
            c.extend(["energy", "dissipated", "energy_balance", "modulus_dev"].map(String::from));
        }
        if let Some(b) = self.problem.model.bloch() {
            c.extend(["rho_frobenius", "hermiticity_dev", "trace_dev"].map(String::from));
            c.extend((0..b.levels()).map(|k| format!("pop_{k}")));
        }
        c
    }

    pub fn record(&self, s: &SimState) -> Result<MonitorRecord> {
        let p = self.problem;
        let h3 = p.ws.grid().cell_volume();
        let matter_sup = s.v.sup_norm();
        let mut extra = Vec::new();
        if let Some(e0) = self.energy_init {
            let (e, _) = energy_ll(p, s)?;
            let scale = if e0 != 0.0 { e0.abs() } else { 1.0 };
            let dev = s
                .v
                .moduli()
                .iter()
                .zip(&self.moduli_init)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            extra.extend([e, s.dissipated, (e + s.dissipated - e0) / scale, dev]);
        }
        if let Some(b) = p.model.bloch() {
            let n = b.levels();
            let voxels = s.v.voxel_count().max(1) as f64;
            let mut herm = 0.0f64;
            let mut pops = vec![0.0; n];
            for k in 0..s.v.voxel_count() {
                let rho = unpack_rho(s.v.voxel(k), n);
                for a in 0..n {
                    pops[a] += rho[a * n + a].re / voxels;
                    for c in 0..n {
                        herm = herm.max((rho[a * n + c] - rho[c * n + a].conj()).norm());
                    }
                }
            }
            let trace_dev = traces(&s.v, n)
                .iter()
                .zip(&self.traces_init)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            extra.extend([matter_sup, herm, trace_dev]);
            extra.extend(pops);
        }
        let rec = MonitorRecord {
            t: s.t,
            em_norm: weighted_norm(&s.u, &p.kappa)?,
            matter_l2: s.v.l2_norm(h3),
            matter_sup,
            constraint_residual: if self.track_constraint {
                p.constraint_residual(s)?
            } else {
                0.0
            },
            bound_ratio: bound_ratio(matter_sup, self.sup_init, self.growth, s.t),
            extra,
        };
        if rec.values().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "monitor record",
                t: s.t,
            });
        }
        Ok(rec)
    }
}

fn traces(v: &crate::grid::MatterState, n: usize) -> Vec<f64> {
    (0..v.voxel_count())
        .map(|k| v.voxel(k)[..n].iter().sum())
        .collect()
}

/// Writes the versioned header and one row per record.
pub struct CsvWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, model: &str, columns: &[String]) -> Result<Self> {
        writeln!(out, "# schema={MONITOR_SCHEMA} model={model}")?;
        writeln!(out, "{}", columns.join(","))?;
        Ok(Self { out })
    }

    pub fn write(&mut self, rec: &MonitorRecord) -> Result<()> {
        let row: Vec<String> = rec.values().iter().map(|x| format!("{x:e}")).collect();
        writeln!(self.out, "{}", row.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}
