//! Weighted Helmholtz projector.
//!
//! `(Id−Pᵢ)` is the `κᵢ`-orthogonal projection onto curl-free fields, the
//! kernel of the discrete curl. On the periodic grid that kernel is spanned
//! by gradients together with the modes where the discrete wavevector
//! vanishes (the constant mode and the Nyquist combinations), so
//! `(Id−Pᵢ)uᵢ = ∇φ + h` with `h` supported on those modes, and `P` is the
//! orthogonal projector onto `(ker B)^⊥`.
//!
//! Constant `κ` is handled mode by mode. Variable `κ` solves the normal
//! equations `Gᵀκ(u − Gx) = 0`, `Gx = ∇φ + h`, by preconditioned conjugate
//! gradients with the constant-coefficient inverse as preconditioner.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{
    weighted_norm, Coefficients, DomainMask, EmState, MatterState, ScalarField,
    VectorField3,
};
use crate::models::{scaled_coupling_field, MatterModel};
use crate::reduce;
use crate::spectral::{FourierWorkspace, Spectrum};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectorMode {
    FftConstant,
    IterativeVariable,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectorConfig {
    pub mode: ProjectorMode,
    pub cg_tolerance: f64,
    /// Defaults to `10·n` when unset.
    pub cg_max_iters: Option<usize>,
}

impl ProjectorConfig {
    pub fn new(mode: ProjectorMode) -> Self {
        Self {
            mode,
            cg_tolerance: 1e-10,
            cg_max_iters: None,
        }
    }

    /// FFT path when both coefficients are constant, CG otherwise.
    pub fn for_coefficients(kappa: &Coefficients) -> Self {
        if kappa.constant_values().is_some() {
            Self::new(ProjectorMode::FftConstant)
        } else {
            Self::new(ProjectorMode::IterativeVariable)
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.cg_tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cg_tolerance > 0.0) {
            return Err(Error::config("projector.cg_tolerance", "must be positive"));
        }
        if self.cg_max_iters == Some(0) {
            return Err(Error::config("projector.cg_max_iters", "must be positive"));
        }
        Ok(())
    }
}

/// `(Id−Pᵢ)uᵢ` for one slot with weight `κᵢ`.
pub fn project_complement(
    ws: &FourierWorkspace,
    u: &VectorField3,
    kappa: &ScalarField,
    cfg: &ProjectorConfig,
) -> Result<VectorField3> {
    cfg.validate()?;
    if u.grid() != ws.grid() || kappa.grid() != ws.grid() {
        return Err(Error::GridMismatch);
    }
    match cfg.mode {
        ProjectorMode::FftConstant => {
            let (lo, hi) = (kappa.min(), kappa.max());
            if hi - lo > 1e-14 * hi.abs() {
                return Err(Error::NonConstantCoefficients);
            }
            Ok(leray_complement(ws, u))
        }
        ProjectorMode::IterativeVariable => cg_complement(ws, u, kappa, cfg),
    }
}

pub fn project_complement_em(
    ws: &FourierWorkspace,
    u: &EmState,
    kappa: &Coefficients,
    cfg: &ProjectorConfig,
) -> Result<EmState> {
    Ok(EmState {
        u1: project_complement(ws, &u.u1, &kappa.kappa1, cfg)?,
        u2: project_complement(ws, &u.u2, &kappa.kappa2, cfg)?,
    })
}

/// `P u = u − (Id−P)u`.
pub fn project_p(
    ws: &FourierWorkspace,
    u: &EmState,
    kappa: &Coefficients,
    cfg: &ProjectorConfig,
) -> Result<EmState> {
    let c = project_complement_em(ws, u, kappa, cfg)?;
    Ok(u.sub(&c))
}

/// `‖(Id−P)(u − (κ⁻¹·l)v̄)‖_κ / (‖u‖_κ + ‖(κ⁻¹·l)v̄‖_κ)`, or 0 when both vanish.
pub fn constraint_residual<M: MatterModel + ?Sized>(
    ws: &FourierWorkspace,
    u: &EmState,
    v: &MatterState,
    model: &M,
    mask: &DomainMask,
    kappa: &Coefficients,
    cfg: &ProjectorConfig,
) -> Result<f64> {
    let src = scaled_coupling_field(model, v, mask, kappa);
    let norm = weighted_norm(u, kappa)? + weighted_norm(&src, kappa)?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    let c = project_complement_em(ws, &u.sub(&src), kappa, cfg)?;
    Ok(weighted_norm(&c, kappa)? / norm)
}

/// `(Id−P)(κ⁻¹·l)v̄`: the field slaved to `v` in the reduced model.
pub fn slaved_field<M: MatterModel + ?Sized>(
    ws: &FourierWorkspace,
    v: &MatterState,
    model: &M,
    mask: &DomainMask,
    kappa: &Coefficients,
    cfg: &ProjectorConfig,
) -> Result<EmState> {
    let src = scaled_coupling_field(model, v, mask, kappa);
    project_complement_em(ws, &src, kappa, cfg)
}

fn kernel_modes(ws: &FourierWorkspace) -> Vec<usize> {
    let n = ws.grid().n();
    let mut out = Vec::with_capacity(8);
    for c in [0, n / 2] {
        for b in [0, n / 2] {
            for a in [0, n / 2] {
                out.push(ws.grid().index(a, b, c));
            }
        }
    }
    out
}

fn leray_complement(ws: &FourierWorkspace, u: &VectorField3) -> VectorField3 {
    let mut s = ws.spectra(&[&u.comps[0], &u.comps[1], &u.comps[2]]);
    let len = s[0].len();
    let longitudinal: Vec<[Complex64; 3]> = (0..len)
        .into_par_iter()
        .map(|k| {
            let x = ws.xi(k);
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            let v = [s[0][k], s[1][k], s[2][k]];
            if r2 == 0.0 {
                return v;
            }
            let p = (x[0] * v[0] + x[1] * v[1] + x[2] * v[2]) / r2;
            [x[0] * p, x[1] * p, x[2] * p]
        })
        .collect();
    for (k, l) in longitudinal.into_iter().enumerate() {
        for a in 0..3 {
            s[a][k] = l[a];
        }
    }
    vector_from(ws, s)
}

fn vector_from(ws: &FourierWorkspace, s: Vec<Spectrum>) -> VectorField3 {
    let mut it = ws.synthesize(s).into_iter();
    let comps = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
    VectorField3::from_comps(ws.grid(), comps).expect("workspace grid")
}

/// Unknown of the normal equations in Fourier space: potential `φ̂` and the
/// kernel-mode amplitudes `ĥ`.
#[derive(Clone)]
struct Potential {
    phi: Spectrum,
    h: Vec<[Complex64; 3]>,
}

impl Potential {
    fn dot(&self, o: &Potential) -> f64 {
        let a = reduce::sum(self.phi.len(), |k| (self.phi[k] * o.phi[k].conj()).re);
        let b: f64 = self
            .h
            .iter()
            .zip(&o.h)
            .map(|(x, y)| (0..3).map(|c| (x[c] * y[c].conj()).re).sum::<f64>())
            .sum();
        a + b
    }

    fn axpy(&mut self, a: f64, o: &Potential) {
        self.phi.par_iter_mut().zip(&o.phi).for_each(|(x, y)| *x += a * y);
        for (x, y) in self.h.iter_mut().zip(&o.h) {
            for c in 0..3 {
                x[c] += a * y[c];
            }
        }
    }

    /// `self = o + b·self`.
    fn xpay(&mut self, o: &Potential, b: f64) {
        self.phi.par_iter_mut().zip(&o.phi).for_each(|(x, y)| *x = y + b * *x);
        for (x, y) in self.h.iter_mut().zip(&o.h) {
            for c in 0..3 {
                x[c] = y[c] + b * x[c];
            }
        }
    }
}

struct NormalEquations<'a> {
    ws: &'a FourierWorkspace,
    kappa: &'a ScalarField,
    kernel: Vec<usize>,
    kappa_ref: f64,
}

impl NormalEquations<'_> {
    /// `Gᵀ` applied to the spectra of a field.
    fn adjoint(&self, s: &[Spectrum]) -> Potential {
        let phi = (0..s[0].len())
            .into_par_iter()
            .map(|k| {
                let x = self.ws.xi(k);
                -I * (x[0] * s[0][k] + x[1] * s[1][k] + x[2] * s[2][k])
            })
            .collect();
        let h = self.kernel.iter().map(|&k| [s[0][k], s[1][k], s[2][k]]).collect();
        Potential { phi, h }
    }

    fn forward(&self, x: &Potential) -> Vec<Spectrum> {
        let mut s: Vec<Spectrum> = (0..3)
            .map(|a| {
                x.phi
                    .par_iter()
                    .enumerate()
                    .map(|(k, &c)| I * self.ws.xi(k)[a] * c)
                    .collect()
            })
            .collect();
        for (j, &k) in self.kernel.iter().enumerate() {
            for a in 0..3 {
                s[a][k] = x.h[j][a];
            }
        }
        s
    }

    fn weighted_spectra(&self, f: Vec<Vec<f64>>) -> Vec<Spectrum> {
        let kf: Vec<Vec<f64>> = f
            .into_iter()
            .map(|mut c| {
                c.par_iter_mut().zip(&self.kappa.data).for_each(|(x, k)| *x *= k);
                c
            })
            .collect();
        self.ws.spectra(&[&kf[0], &kf[1], &kf[2]])
    }

    fn apply(&self, x: &Potential) -> Potential {
        let w = self.ws.synthesize(self.forward(x));
        self.adjoint(&self.weighted_spectra(w))
    }

    fn precondition(&self, r: &Potential) -> Potential {
        let phi = r
            .phi
            .par_iter()
            .enumerate()
            .map(|(k, &c)| {
                let x = self.ws.xi(k);
                let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                if r2 == 0.0 {
                    ZERO
                } else {
                    c / (self.kappa_ref * r2)
                }
            })
            .collect();
        let h = r.h.iter().map(|v| v.map(|c| c / self.kappa_ref)).collect();
        Potential { phi, h }
    }
}

fn cg_complement(
    ws: &FourierWorkspace,
    u: &VectorField3,
    kappa: &ScalarField,
    cfg: &ProjectorConfig,
) -> Result<VectorField3> {
    let eq = NormalEquations {
        ws,
        kappa,
        kernel: kernel_modes(ws),
        kappa_ref: kappa.mean(),
    };
    let max_iters = cfg.cg_max_iters.unwrap_or(10 * ws.grid().n());
    let b = eq.adjoint(&eq.weighted_spectra(u.comps.to_vec()));
    let b_norm = b.dot(&b).sqrt();
    // Floor for right-hand sides that vanish up to round-off, e.g. (Id−P)Bu.
    let scale = ws.max_wavenumber() * kappa.max() * u.max_abs() * (ws.grid().len() as f64);
    let target = (cfg.cg_tolerance * b_norm).max(1e-14 * scale);
    if b_norm <= target {
        return Ok(VectorField3::zeros(ws.grid()));
    }

    let mut x = eq.precondition(&b);
    let mut r = b.clone();
    r.axpy(-1.0, &eq.apply(&x));
    let mut z = eq.precondition(&r);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut res = r.dot(&r).sqrt();
    let mut iters = 0;
    while res > target {
        if iters == max_iters {
            return Err(Error::CgNotConverged {
                iterations: iters,
                residual: res / b_norm,
            });
        }
        let ap = eq.apply(&p);
        let alpha = rz / p.dot(&ap);
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        res = r.dot(&r).sqrt();
        z = eq.precondition(&r);
        let rz_new = r.dot(&z);
        p.xpay(&z, rz_new / rz);
        rz = rz_new;
        iters += 1;
    }
    Ok(vector_from(ws, eq.forward(&x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{weighted_inner, Grid3};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize) -> (FourierWorkspace, ChaCha8Rng) {
        let g = Grid3::new(n, 2.0 * std::f64::consts::PI).unwrap();
        (FourierWorkspace::new(g), ChaCha8Rng::seed_from_u64(7))
    }

    fn bump(ws: &FourierWorkspace) -> Coefficients {
        let g = ws.grid();
        Coefficients::smooth_bump(g, [1.0, 1.0], [0.6, 0.3], g.center(), 1.2, 0.8).unwrap()
    }

    #[test]
    fn gradient_is_its_own_complement() {
        let (ws, mut rng) = setup(16);
        let phi = ws.band_limited_noise(&mut rng, 5);
        let g = ws.grad(&phi).unwrap();
        let k = ScalarField::constant(ws.grid(), 2.5);
        let c = project_complement(&ws, &g, &k, &ProjectorConfig::new(ProjectorMode::FftConstant))
            .unwrap();
        assert!(c.sub(&g).max_abs() <= 1e-12 * g.max_abs());
    }

    #[test]
    fn curl_field_has_no_complement() {
        let (ws, mut rng) = setup(16);
        let a = ws.band_limited_vector(&mut rng, 5);
        let f = ws.curl(&a).unwrap();
        let k = ScalarField::constant(ws.grid(), 1.0);
        let c = project_complement(&ws, &f, &k, &ProjectorConfig::new(ProjectorMode::FftConstant))
            .unwrap();
        assert!(c.max_abs() <= 1e-12 * f.max_abs());
    }

    #[test]
    fn fft_path_refuses_variable_kappa() {
        let (ws, mut rng) = setup(8);
        let u = ws.band_limited_vector(&mut rng, 2);
        let k = bump(&ws);
        let err = project_complement(&ws, &u, &k.kappa1, &ProjectorConfig::new(ProjectorMode::FftConstant));
        assert!(matches!(err, Err(Error::NonConstantCoefficients)));
    }

    #[test]
    fn cg_matches_fft_for_constant_kappa() {
        let (ws, mut rng) = setup(16);
        let u = ws.band_limited_vector(&mut rng, 7);
        let k = ScalarField::constant(ws.grid(), 1.7);
        let a = project_complement(&ws, &u, &k, &ProjectorConfig::new(ProjectorMode::FftConstant)).unwrap();
        let b = project_complement(&ws, &u, &k, &ProjectorConfig::new(ProjectorMode::IterativeVariable))
            .unwrap();
        assert!(a.sub(&b).max_abs() <= 1e-8 * a.max_abs());
    }

    #[test]
    fn variable_projector_properties() {
        let (ws, mut rng) = setup(16);
        let kappa = bump(&ws);
        let cfg = ProjectorConfig::new(ProjectorMode::IterativeVariable);
        let u = EmState::new(ws.band_limited_vector(&mut rng, 6), ws.band_limited_vector(&mut rng, 6))
            .unwrap();
        let w = EmState::new(ws.band_limited_vector(&mut rng, 6), ws.band_limited_vector(&mut rng, 6))
            .unwrap();
        let pu = project_p(&ws, &u, &kappa, &cfg).unwrap();
        let ppu = project_p(&ws, &pu, &kappa, &cfg).unwrap();
        assert!(ppu.sub(&pu).norm() <= 1e-9 * pu.norm());

        let cw = project_complement_em(&ws, &w, &kappa, &cfg).unwrap();
        let ip = weighted_inner(&pu, &cw, &kappa).unwrap();
        let scale = weighted_norm(&pu, &kappa).unwrap() * weighted_norm(&cw, &kappa).unwrap();
        assert!(ip.abs() <= 1e-9 * scale, "{ip:e}");

        // curl of the complement vanishes, κ-divergence of P u vanishes
        let cu = project_complement_em(&ws, &u, &kappa, &cfg).unwrap();
        let curl = ws.curl(&cu.u1).unwrap();
        assert!(curl.max_abs() <= 1e-10 * u.u1.max_abs());
        let d = ws.div(&pu.u1.mul_scalar(&kappa.kappa1)).unwrap();
        assert!(d.data.iter().all(|x| x.abs() <= 1e-8 * u.u1.max_abs()));

        let bu = ws.apply_b(&u, &kappa).unwrap();
        let cb = project_complement_em(&ws, &bu, &kappa, &cfg).unwrap();
        assert!(cb.norm() <= 1e-9 * bu.norm());
    }

    #[test]
    fn kernel_modes_belong_to_the_complement() {
        let (ws, _) = setup(8);
        let g = ws.grid();
        let u = VectorField3::from_fn(g, |_| [0.3, -1.0, 2.0]);
        let mut cb = u.clone();
        for i in 0..g.len() {
            let [a, _, _] = g.coords(i);
            let s = if a % 2 == 0 { 1.0 } else { -1.0 };
            cb.set(i, [s, 0.0, -s]);
        }
        let kappa = bump(&ws);
        for f in [u, cb] {
            let c = project_complement(
                &ws,
                &f,
                &kappa.kappa1,
                &ProjectorConfig::new(ProjectorMode::IterativeVariable).with_tolerance(1e-12),
            )
            .unwrap();
            // the complement is curl-free and the remainder is κ-orthogonal to constants
            assert!(ws.curl(&c).unwrap().max_abs() < 1e-12);
            let rem = f.sub(&c).mul_scalar(&kappa.kappa1);
            for a in 0..3 {
                let m: f64 = rem.comps[a].iter().sum();
                assert!(m.abs() < 1e-9, "{m}");
            }
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let (ws, mut rng) = setup(16);
        let u = ws.band_limited_vector(&mut rng, 7);
        let kappa = Coefficients::smooth_bump(ws.grid(), [1.0, 1.0], [20.0, 0.0], ws.grid().center(), 1.5, 0.0)
            .unwrap();
        let cfg = ProjectorConfig {
            mode: ProjectorMode::IterativeVariable,
            cg_tolerance: 1e-14,
            cg_max_iters: Some(2),
        };
        let err = project_complement(&ws, &u, &kappa.kappa1, &cfg).unwrap_err();
        assert!(matches!(err, Error::CgNotConverged { iterations: 2, .. }));
    }

    #[test]
    fn zero_state_has_zero_residual() {
        let (ws, _) = setup(8);
        let g = ws.grid();
        let mask = DomainMask::centered_box(g, 2).unwrap();
        let model = crate::models::LandauLifschitz::precession(1.0, [0.0, 0.0, 1.0]).unwrap();
        let kappa = Coefficients::constant(g, 1.0, 1.0).unwrap();
        let r = constraint_residual(
            &ws,
            &EmState::zeros(g),
            &MatterState::zeros(3, mask.voxel_count()),
            &model,
            &mask,
            &kappa,
            &ProjectorConfig::for_coefficients(&kappa),
        )
        .unwrap();
        assert_eq!(r, 0.0);
    }
}
