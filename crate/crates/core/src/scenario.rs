//! TOML scenario files. One file fixes grid, coefficients, domain, model,
//! initial data, integrator and outputs; every error names the offending key.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::evolution::{FixedPointConfig, IntegratorConfig, Problem, Scheme};
use crate::grid::{Coefficients, DomainMask, EmState, Grid3, MatterState};
use crate::helmholtz::ProjectorConfig;
use crate::models::{pack_rho, Bloch, LandauLifschitz, LinearGrowth, Model};
use crate::quasistatic::EtaStudyConfig;
use num_complex::Complex64;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    #[serde(default)]
    pub coefficients: CoefficientSpec,
    pub domain: DomainSpec,
    pub model: ModelSpec,
    pub initial: InitialSpec,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub projector: ProjectorSpec,
    #[serde(default)]
    pub monitor: MonitorSpec,
    #[serde(default)]
    pub study: Option<StudySpec>,
    #[serde(default)]
    pub fixed_point: Option<FixedPointSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    #[serde(default = "two_pi")]
    pub box_len: f64,
}

fn two_pi() -> f64 {
    2.0 * std::f64::consts::PI
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientSpec {
    Constant(ConstantCoefficients),
    Bump(BumpCoefficients),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantCoefficients {
    pub kappa1: f64,
    pub kappa2: f64,
}

/// `κᵢ = baseᵢ + amplitudeᵢ·χ(|x − center|)` with a smooth cutoff of
/// `radius` and transition `width` (physical units; width 0 is a jump).
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpCoefficients {
    pub base: [f64; 2],
    pub amplitude: [f64; 2],
    #[serde(default)]
    pub center: Option<[f64; 3]>,
    pub radius: f64,
    pub width: f64,
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec::Constant(ConstantCoefficients {
            kappa1: 1.0,
            kappa2: 1.0,
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Box(BoxDomain),
    Ball(BallDomain),
}

/// Centered cube of `side` cells.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDomain {
    pub side: usize,
}

/// Ball of `radius` cells about the box centre.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallDomain {
    pub radius: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    LandauLifschitz(LandauLifschitzSpec),
    Bloch(BlochSpec),
    LinearGrowth(LinearGrowthSpec),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandauLifschitzSpec {
    pub gamma: f64,
    pub alpha: f64,
    #[serde(default)]
    pub anisotropy: f64,
    #[serde(default = "e_z")]
    pub easy_axis: [f64; 3],
    #[serde(default)]
    pub h_ext: [f64; 3],
}

/// Ladder system: `Λ = diag(energies)`, real dipole `d` between
/// neighbouring levels.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlochSpec {
    pub energies: Vec<f64>,
    pub dipole: [f64; 3],
    #[serde(default)]
    pub transverse_rate: f64,
    /// Row-major `N×N`; entry `a·N + b` is the rate `b → a`.
    #[serde(default)]
    pub longitudinal_rates: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearGrowthSpec {
    pub rate: f64,
    #[serde(default)]
    pub gamma: f64,
}

fn e_z() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// Uniform vector value for three-component models.
    #[serde(default)]
    pub v: Option<[f64; 3]>,
    /// `uniform` or `random` (random directions with modulus `|v|`).
    #[serde(default = "uniform")]
    pub profile: String,
    /// Diagonal of ρ for Bloch.
    #[serde(default)]
    pub populations: Option<Vec<f64>>,
    /// `ρ₀₁ = re + i·im` for Bloch.
    #[serde(default)]
    pub coherence: Option<[f64; 2]>,
    #[serde(default)]
    pub u_seed: USeed,
}

fn uniform() -> String {
    "uniform".into()
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum USeed {
    #[default]
    Zero,
    Random(RandomSeed),
    Uniform(UniformSeed),
}

/// Band-limited noise, then projected onto divergence-free fields.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSeed {
    pub band: usize,
    #[serde(default = "one")]
    pub amplitude: f64,
}

/// Spatially constant field `(u₁, u₂)`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformSeed {
    pub u1: [f64; 3],
    pub u2: [f64; 3],
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default = "rk4")]
    pub scheme: String,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub renormalize_m: bool,
    #[serde(default = "half")]
    pub cfl_factor: f64,
    /// Disables the matter source in the Maxwell equations.
    #[serde(default = "yes")]
    pub feedback: bool,
}

fn rk4() -> String {
    "rk4".into()
}

fn half() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectorSpec {
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub cg_tolerance: Option<f64>,
    #[serde(default)]
    pub cg_max_iters: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorSpec {
    #[serde(default = "ten")]
    pub stride: usize,
    #[serde(default = "yes")]
    pub constraint: bool,
    #[serde(default = "monitor_csv")]
    pub csv: String,
}

impl Default for MonitorSpec {
    fn default() -> Self {
        Self {
            stride: ten(),
            constraint: true,
            csv: monitor_csv(),
        }
    }
}

fn ten() -> usize {
    10
}

fn monitor_csv() -> String {
    "monitor.csv".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    #[serde(default = "default_etas")]
    pub eta_list: Vec<f64>,
    pub radius: f64,
    pub t_obs: f64,
    #[serde(default = "twenty")]
    pub samples: usize,
    #[serde(default = "lawson")]
    pub scheme: String,
    pub base_dt: f64,
    #[serde(default = "fifth")]
    pub eta_dt_factor: f64,
}

fn default_etas() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}

fn twenty() -> usize {
    20
}

fn lawson() -> String {
    "lawson_exp".into()
}

fn fifth() -> f64 {
    0.2
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointSpec {
    pub window: f64,
    pub dt: f64,
    #[serde(default = "fp_tol")]
    pub tolerance: f64,
    #[serde(default = "sixty")]
    pub max_iters: usize,
    /// Step of the Lawson reference run; defaults to `dt/10`.
    #[serde(default)]
    pub reference_dt: Option<f64>,
    #[serde(default)]
    pub n_list: Option<Vec<usize>>,
}

fn fp_tol() -> f64 {
    1e-12
}

fn sixty() -> usize {
    60
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| Error::config("<syntax>", e.to_string().trim_end().to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let msg = e.into_inner().message().to_string();
            refine_tagged(text, &key).unwrap_or_else(|| Error::config(key, msg))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn grid(&self) -> Result<Grid3> {
        Grid3::new(self.grid.n, self.grid.box_len).map_err(|e| Error::config("grid", e.to_string()))
    }

    pub fn coefficients(&self, grid: Grid3) -> Result<Coefficients> {
        let c = match &self.coefficients {
            CoefficientSpec::Constant(ConstantCoefficients { kappa1, kappa2 }) => {
                Coefficients::constant(grid, *kappa1, *kappa2)
            }
            CoefficientSpec::Bump(BumpCoefficients {
                base,
                amplitude,
                center,
                radius,
                width,
            }) => {
                if !(*radius > 0.0) || !(*width >= 0.0) {
                    return Err(Error::config(
                        "coefficients.radius",
                        "radius must be positive and width non-negative",
                    ));
                }
                Coefficients::smooth_bump(
                    grid,
                    *base,
                    *amplitude,
                    center.unwrap_or(grid.center()),
                    *radius,
                    *width,
                )
            }
        };
        c.map_err(|e| Error::config("coefficients", e.to_string()))
    }

    pub fn domain(&self, grid: Grid3) -> Result<DomainMask> {
        match &self.domain {
            DomainSpec::Box(BoxDomain { side }) => DomainMask::centered_box(grid, *side)
                .map_err(|e| Error::config("domain.side", e.to_string())),
            DomainSpec::Ball(BallDomain { radius }) => {
                DomainMask::ball(grid, grid.center(), radius * grid.spacing())
                    .map_err(|e| Error::config("domain.radius", e.to_string()))
            }
        }
    }

    pub fn model(&self) -> Result<Model> {
        Ok(match &self.model {
            ModelSpec::LandauLifschitz(LandauLifschitzSpec {
                gamma,
                alpha,
                anisotropy,
                easy_axis,
                h_ext,
            }) => Model::LandauLifschitz(LandauLifschitz::new(*gamma, *alpha, *anisotropy, *easy_axis, *h_ext)?),
            ModelSpec::Bloch(BlochSpec {
                energies,
                dipole,
                transverse_rate,
                longitudinal_rates,
            }) => {
                let n = energies.len();
                if n < 2 {
                    return Err(Error::config("model.energies", "need at least two levels"));
                }
                let z = Complex64::new(0.0, 0.0);
                let mut h = vec![z; n * n];
                for (a, e) in energies.iter().enumerate() {
                    h[a * n + a] = Complex64::new(*e, 0.0);
                }
                let g = dipole.map(|d| {
                    let mut m = vec![z; n * n];
                    for a in 0..n - 1 {
                        m[a * n + a + 1] = Complex64::new(d, 0.0);
                        m[(a + 1) * n + a] = Complex64::new(d, 0.0);
                    }
                    m
                });
                let mut b = Bloch::new(n, h, g, *transverse_rate)?;
                if let Some(r) = longitudinal_rates {
                    b = b.with_longitudinal_rates(r.clone())?;
                }
                Model::Bloch(b)
            }
            ModelSpec::LinearGrowth(LinearGrowthSpec { rate, gamma }) => {
                if !rate.is_finite() || !gamma.is_finite() {
                    return Err(Error::config("model.rate", "must be finite"));
                }
                Model::LinearGrowth(LinearGrowth {
                    rate: *rate,
                    gamma: *gamma,
                })
            }
        })
    }

    pub fn integrator(&self) -> Result<IntegratorConfig> {
        let s = &self.integrator;
        let cfg = IntegratorConfig {
            scheme: parse_scheme(&s.scheme, "integrator.scheme")?,
            dt: s.dt,
            t_end: s.t_end,
            renormalize_m: s.renormalize_m,
            cfl_factor: s.cfl_factor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn projector(&self, kappa: &Coefficients) -> Result<ProjectorConfig> {
        let mut cfg = match self.projector.mode.as_deref() {
            None => ProjectorConfig::for_coefficients(kappa),
            Some("fft_constant") => {
                if kappa.constant_values().is_none() {
                    return Err(Error::config(
                        "projector.mode",
                        "fft_constant needs constant coefficients",
                    ));
                }
                ProjectorConfig::new(crate::helmholtz::ProjectorMode::FftConstant)
            }
            Some("iterative_variable") => {
                ProjectorConfig::new(crate::helmholtz::ProjectorMode::IterativeVariable)
            }
            Some(other) => {
                return Err(Error::config(
                    "projector.mode",
                    format!("unknown mode `{other}` (fft_constant | iterative_variable)"),
                ))
            }
        };
        if let Some(t) = self.projector.cg_tolerance {
            cfg.cg_tolerance = t;
        }
        cfg.cg_max_iters = self.projector.cg_max_iters.or(cfg.cg_max_iters);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn problem(&self) -> Result<Problem<Model>> {
        let grid = self.grid()?;
        let kappa = self.coefficients(grid)?;
        let mask = self.domain(grid)?;
        let projector = self.projector(&kappa)?;
        let mut p = Problem::new(self.model()?, kappa, mask)?.with_projector(projector);
        p.feedback = self.integrator.feedback;
        Ok(p)
    }

    pub fn initial_matter(&self, problem: &Problem<Model>, seed: u64) -> Result<MatterState> {
        let voxels = problem.mask.voxel_count();
        let init = &self.initial;
        match &problem.model {
            Model::Bloch(b) => {
                let n = b.levels();
                let pops = init
                    .populations
                    .clone()
                    .ok_or_else(|| Error::config("initial.populations", "required for the bloch model"))?;
                if pops.len() != n || pops.iter().any(|p| !(*p >= 0.0)) {
                    return Err(Error::config(
                        "initial.populations",
                        format!("need {n} non-negative entries"),
                    ));
                }
                if init.profile != "uniform" {
                    return Err(Error::config("initial.profile", "bloch supports only `uniform`"));
                }
                let mut rho = vec![Complex64::new(0.0, 0.0); n * n];
                for a in 0..n {
                    rho[a * n + a] = Complex64::new(pops[a], 0.0);
                }
                if let Some([re, im]) = init.coherence {
                    rho[1] = Complex64::new(re, im);
                    rho[n] = Complex64::new(re, -im);
                }
                let v = pack_rho(&rho, n).map_err(|e| Error::config("initial.coherence", e.to_string()))?;
                Ok(MatterState::uniform(voxels, &v))
            }
            _ => {
                let v = init
                    .v
                    .ok_or_else(|| Error::config("initial.v", "required for three-component models"))?;
                match init.profile.as_str() {
                    "uniform" => Ok(MatterState::uniform(voxels, &v)),
                    "random" => {
                        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0001);
                        let mut out = MatterState::zeros(3, voxels);
                        for k in 0..voxels {
                            let d = unit_vector(&mut rng);
                            out.voxel_mut(k).copy_from_slice(&d.map(|x| x * r));
                        }
                        Ok(out)
                    }
                    other => Err(Error::config(
                        "initial.profile",
                        format!("unknown profile `{other}` (uniform | random)"),
                    )),
                }
            }
        }
    }

    /// Divergence-free seed before projection.
    pub fn initial_field(&self, problem: &Problem<Model>, seed: u64) -> Result<EmState> {
        let g = problem.ws.grid();
        match &self.initial.u_seed {
            USeed::Zero => Ok(EmState::zeros(g)),
            USeed::Uniform(UniformSeed { u1, u2 }) => Ok(EmState::new(
                crate::grid::VectorField3::uniform(g, *u1),
                crate::grid::VectorField3::uniform(g, *u2),
            )?),
            USeed::Random(RandomSeed { band, amplitude }) => {
                if *band == 0 {
                    return Err(Error::config("initial.u_seed.band", "must be positive"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut u = EmState::new(
                    problem.ws.band_limited_vector(&mut rng, *band),
                    problem.ws.band_limited_vector(&mut rng, *band),
                )?;
                u.scale(*amplitude);
                Ok(u)
            }
        }
    }

    pub fn study(&self, cfl_factor: f64) -> Result<EtaStudyConfig> {
        let s = self
            .study
            .as_ref()
            .ok_or_else(|| Error::config("study", "section required for quasistatic-study"))?;
        let cfg = EtaStudyConfig {
            eta_list: s.eta_list.clone(),
            radius: s.radius,
            t_obs: s.t_obs,
            samples: s.samples,
            scheme: parse_scheme(&s.scheme, "study.scheme")?,
            base_dt: s.base_dt,
            eta_dt_factor: s.eta_dt_factor,
            cfl_factor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fixed-point settings, the reference step and the section's `n_list`.
    pub fn fixed_point(&self) -> Result<(FixedPointConfig, f64, Option<Vec<usize>>)> {
        let s = self
            .fixed_point
            .as_ref()
            .ok_or_else(|| Error::config("fixed_point", "section required for compare-mollified"))?;
        let cfg = FixedPointConfig {
            mollifier: None,
            window: s.window,
            dt: s.dt,
            tolerance: s.tolerance,
            max_iters: s.max_iters,
        };
        cfg.validate()?;
        let reference = s.reference_dt.unwrap_or(s.dt / 10.0);
        if !(reference > 0.0) {
            return Err(Error::config("fixed_point.reference_dt", "must be positive"));
        }
        Ok((cfg, reference, s.n_list.clone()))
    }
}

/// Tagged sections are buffered by serde, so the error path stops at the
/// section. Re-parses the variant on its own to name the inner key.
fn refine_tagged(text: &str, key: &str) -> Option<Error> {
    let root: toml::Table = text.parse().ok()?;
    let mut table = root.get(key.split('.').next()?)?.as_table()?.clone();
    if key == "initial" || key.starts_with("initial.") {
        table = table.get("u_seed")?.as_table()?.clone();
    }
    let section = if key.starts_with("initial") { "initial.u_seed" } else { key };
    let kind = table.remove("kind")?;
    let kind = kind.as_str()?;
    fn inner<T: serde::de::DeserializeOwned>(section: &str, table: toml::Table) -> Option<Error> {
        let r: std::result::Result<T, _> = serde_path_to_error::deserialize(table);
        let e = r.err()?;
        let path = e.path().to_string();
        let key = if path == "." { section.to_string() } else { format!("{section}.{path}") };
        Some(Error::config(key, e.into_inner().message().to_string()))
    }
    match (section, kind) {
        ("coefficients", "constant") => inner::<ConstantCoefficients>(section, table),
        ("coefficients", "bump") => inner::<BumpCoefficients>(section, table),
        ("domain", "box") => inner::<BoxDomain>(section, table),
        ("domain", "ball") => inner::<BallDomain>(section, table),
        ("model", "landau_lifschitz") => inner::<LandauLifschitzSpec>(section, table),
        ("model", "bloch") => inner::<BlochSpec>(section, table),
        ("model", "linear_growth") => inner::<LinearGrowthSpec>(section, table),
        ("initial.u_seed", "random") => inner::<RandomSeed>(section, table),
        ("initial.u_seed", "uniform") => inner::<UniformSeed>(section, table),
        _ => None,
    }
}

fn parse_scheme(s: &str, key: &str) -> Result<Scheme> {
    match s {
        "rk4" => Ok(Scheme::Rk4),
        "lawson_exp" => Ok(Scheme::LawsonExp),
        other => Err(Error::config(key, format!("unknown scheme `{other}` (rk4 | lawson_exp)"))),
    }
}

fn unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if r > 1e-3 && r <= 1.0 {
            return v.map(|x| x / r);
        }
    }
}
