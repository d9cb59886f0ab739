//! Fourier-space differential operators on the periodic box.
//!
//! Derivatives multiply mode `k` by `iξ(k)` with `ξ = 2πk/L` for
//! `|k| < n/2` and `ξ = 0` at the Nyquist index, so every operator maps real
//! fields to real fields and the discrete curl is exactly symmetric in the
//! unweighted L² product. Real fields are transformed two at a time, packed
//! as the real and imaginary parts of one complex array.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Coefficients, EmState, Grid3, ScalarField, VectorField3};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub type Spectrum = Vec<Complex64>;

/// FFT plans and wavenumber tables for one grid. Cheap to clone; plans are
/// shared and stateless, scratch space is allocated per call.
#[derive(Clone)]
pub struct FourierWorkspace {
    grid: Grid3,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

impl std::fmt::Debug for FourierWorkspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierWorkspace").field("grid", &self.grid).finish()
    }
}

impl FourierWorkspace {
    pub fn new(grid: Grid3) -> Self {
        let n = grid.n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let k0 = 2.0 * std::f64::consts::PI / grid.box_len();
        let wavenumbers = (0..n)
            .map(|j| {
                let k = if j < n / 2 {
                    j as f64
                } else if j == n / 2 {
                    0.0
                } else {
                    j as f64 - n as f64
                };
                k0 * k
            })
            .collect();
        Self {
            grid,
            forward,
            inverse,
            wavenumbers,
        }
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    /// Wavevector of mode `i` (x-fastest layout).
    #[inline]
    pub fn xi(&self, i: usize) -> [f64; 3] {
        let [a, b, c] = self.grid.coords(i);
        [self.wavenumbers[a], self.wavenumbers[b], self.wavenumbers[c]]
    }

    #[inline]
    pub fn xi_norm(&self, i: usize) -> f64 {
        let x = self.xi(i);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    /// Largest `|ξ|` on the grid.
    pub fn max_wavenumber(&self) -> f64 {
        let m = self.wavenumbers.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        m * 3f64.sqrt()
    }

    fn mirror(&self, i: usize) -> usize {
        let n = self.grid.n();
        let [a, b, c] = self.grid.coords(i);
        self.grid.index((n - a) % n, (n - b) % n, (n - c) % n)
    }

    /// In-place 3-D transform. The inverse is normalized by `1/n³`.
    pub fn fft3(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.grid.n();
        let plan = if inverse { &self.inverse } else { &self.forward };
        let scratch_len = plan.get_inplace_scratch_len();

        buf.par_chunks_mut(n).for_each_init(
            || vec![ZERO; scratch_len],
            |s, line| plan.process_with_scratch(line, s),
        );

        buf.par_chunks_mut(n * n).for_each_init(
            || (vec![ZERO; n], vec![ZERO; scratch_len]),
            |(line, s), slab| {
                for x in 0..n {
                    for y in 0..n {
                        line[y] = slab[x + n * y];
                    }
                    plan.process_with_scratch(line, s);
                    for y in 0..n {
                        slab[x + n * y] = line[y];
                    }
                }
            },
        );

        let nn = n * n;
        let mut tmp = vec![ZERO; buf.len()];
        {
            let src: &[Complex64] = buf;
            tmp.par_chunks_mut(n).enumerate().for_each_init(
                || vec![ZERO; scratch_len],
                |s, (xy, line)| {
                    for z in 0..n {
                        line[z] = src[xy + nn * z];
                    }
                    plan.process_with_scratch(line, s);
                },
            );
        }
        let scale = if inverse { 1.0 / buf.len() as f64 } else { 1.0 };
        buf.par_chunks_mut(nn).enumerate().for_each(|(z, slab)| {
            for (xy, out) in slab.iter_mut().enumerate() {
                *out = tmp[xy * n + z] * scale;
            }
        });
    }

    /// Spectra of real arrays, transformed pairwise.
    pub fn spectra(&self, fields: &[&[f64]]) -> Vec<Spectrum> {
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            let a = pair[0];
            let mut z: Spectrum = match pair.get(1) {
                Some(b) => a.iter().zip(b.iter()).map(|(&x, &y)| Complex64::new(x, y)).collect(),
                None => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            };
            self.fft3(&mut z, false);
            if pair.len() == 1 {
                out.push(z);
                continue;
            }
            let mut sa = vec![ZERO; z.len()];
            let mut sb = vec![ZERO; z.len()];
            sa.par_iter_mut()
                .zip(sb.par_iter_mut())
                .enumerate()
                .for_each(|(k, (pa, pb))| {
                    let zk = z[k];
                    let zm = z[self.mirror(k)].conj();
                    *pa = 0.5 * (zk + zm);
                    *pb = -0.5 * I * (zk - zm);
                });
            out.push(sa);
            out.push(sb);
        }
        out
    }

    /// Inverse of [`Self::spectra`] for Hermitian-symmetric spectra; the
    /// imaginary round-off of each output is discarded.
    pub fn synthesize(&self, spectra: Vec<Spectrum>) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(spectra.len());
        let mut it = spectra.into_iter();
        while let Some(mut a) = it.next() {
            match it.next() {
                Some(b) => {
                    a.par_iter_mut().zip(b.par_iter()).for_each(|(x, y)| *x += I * y);
                    self.fft3(&mut a, true);
                    out.push(a.iter().map(|c| c.re).collect());
                    out.push(a.iter().map(|c| c.im).collect());
                }
                None => {
                    self.fft3(&mut a, true);
                    out.push(a.iter().map(|c| c.re).collect());
                }
            }
        }
        out
    }

    fn check(&self, grid: Grid3) -> Result<()> {
        if grid != self.grid {
            Err(Error::GridMismatch)
        } else {
            Ok(())
        }
    }

    /// `iξ × f̂` on three component spectra.
    fn curl_spectra(&self, f: &[Spectrum]) -> Vec<Spectrum> {
        let len = f[0].len();
        let mut out = vec![vec![ZERO; len]; 3];
        let (o0, rest) = out.split_at_mut(1);
        let (o1, o2) = rest.split_at_mut(1);
        o0[0]
            .par_iter_mut()
            .zip(o1[0].par_iter_mut())
            .zip(o2[0].par_iter_mut())
            .enumerate()
            .for_each(|(k, ((a, b), c))| {
                let x = self.xi(k);
                let v = [f[0][k], f[1][k], f[2][k]];
                *a = I * (x[1] * v[2] - x[2] * v[1]);
                *b = I * (x[2] * v[0] - x[0] * v[2]);
                *c = I * (x[0] * v[1] - x[1] * v[0]);
            });
        out
    }

    fn vector_spectra(&self, f: &VectorField3) -> Vec<Spectrum> {
        self.spectra(&[&f.comps[0], &f.comps[1], &f.comps[2]])
    }

    fn vector_from(&self, spectra: Vec<Spectrum>) -> VectorField3 {
        let mut it = self.synthesize(spectra).into_iter();
        let comps = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
        VectorField3::from_comps(self.grid, comps).expect("workspace grid")
    }

    pub fn curl(&self, f: &VectorField3) -> Result<VectorField3> {
        self.check(f.grid())?;
        let s = self.vector_spectra(f);
        Ok(self.vector_from(self.curl_spectra(&s)))
    }

    pub fn grad(&self, phi: &ScalarField) -> Result<VectorField3> {
        self.check(phi.grid())?;
        let s = self.spectra(&[&phi.data]).pop().unwrap();
        Ok(self.vector_from(self.grad_spectra(&s)))
    }

    pub(crate) fn grad_spectra(&self, s: &[Complex64]) -> Vec<Spectrum> {
        (0..3)
            .map(|a| {
                s.par_iter()
                    .enumerate()
                    .map(|(k, &c)| I * self.xi(k)[a] * c)
                    .collect()
            })
            .collect()
    }

    pub(crate) fn div_spectrum(&self, f: &[Spectrum]) -> Spectrum {
        (0..f[0].len())
            .into_par_iter()
            .map(|k| {
                let x = self.xi(k);
                I * (x[0] * f[0][k] + x[1] * f[1][k] + x[2] * f[2][k])
            })
            .collect()
    }

    pub fn div(&self, f: &VectorField3) -> Result<ScalarField> {
        self.check(f.grid())?;
        let s = self.vector_spectra(f);
        let d = self.div_spectrum(&s);
        let data = self.synthesize(vec![d]).pop().unwrap();
        ScalarField::from_vec(self.grid, data)
    }

    /// `B(u₁, u₂) = (κ₁⁻¹ curl u₂, −κ₂⁻¹ curl u₁)`.
    pub fn apply_b(&self, u: &EmState, kappa: &Coefficients) -> Result<EmState> {
        self.check(u.grid())?;
        self.check(kappa.grid())?;
        let s = self.spectra(&[
            &u.u1.comps[0],
            &u.u1.comps[1],
            &u.u1.comps[2],
            &u.u2.comps[0],
            &u.u2.comps[1],
            &u.u2.comps[2],
        ]);
        let mut c2 = self.curl_spectra(&s[3..6]);
        let mut c1 = self.curl_spectra(&s[0..3]);
        for c in &mut c1 {
            c.par_iter_mut().for_each(|x| *x = -*x);
        }
        c2.append(&mut c1);
        let mut it = self.synthesize(c2).into_iter();
        let mut next3 = || [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
        let b1 = VectorField3::from_comps(self.grid, next3())?;
        let b2 = VectorField3::from_comps(self.grid, next3())?;
        Ok(EmState {
            u1: b1.div_scalar(&kappa.kappa1),
            u2: b2.div_scalar(&kappa.kappa2),
        })
    }

    /// Exact `e^{−tB} u` for spatially constant coefficients.
    ///
    /// Per mode the symbol of `B` has eigenvalues `0` (longitudinal parts,
    /// left unchanged) and `±i|ξ|/√(κ₁κ₂)` (transverse parts), so
    /// `e^{−tB}` acts as `cos θ` on the transverse part plus
    /// `(sin θ / θ)·(−tB)` with `θ = t|ξ|/√(κ₁κ₂)`.
    pub fn exp_b(&self, t: f64, u: &EmState, kappa: &Coefficients) -> Result<EmState> {
        self.check(u.grid())?;
        let (k1, k2) = kappa.constant_values().ok_or(Error::NonConstantCoefficients)?;
        if t == 0.0 {
            return Ok(u.clone());
        }
        let mut s = self.spectra(&[
            &u.u1.comps[0],
            &u.u1.comps[1],
            &u.u1.comps[2],
            &u.u2.comps[0],
            &u.u2.comps[1],
            &u.u2.comps[2],
        ]);
        let inv_c = 1.0 / (k1 * k2).sqrt();
        let len = s[0].len();
        let updates: Vec<[Complex64; 6]> = (0..len)
            .into_par_iter()
            .map(|k| {
                let x = self.xi(k);
                let a = [s[0][k], s[1][k], s[2][k]];
                let b = [s[3][k], s[4][k], s[5][k]];
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                if r == 0.0 {
                    return [a[0], a[1], a[2], b[0], b[1], b[2]];
                }
                let nh = [x[0] / r, x[1] / r, x[2] / r];
                let omega = r * inv_c;
                let theta = omega * t;
                let (sn, cs) = theta.sin_cos();
                let la = nh[0] * a[0] + nh[1] * a[1] + nh[2] * a[2];
                let lb = nh[0] * b[0] + nh[1] * b[1] + nh[2] * b[2];
                let xa = cross_c(x, a);
                let xb = cross_c(x, b);
                let f1 = -I * (sn / (omega * k1));
                let f2 = I * (sn / (omega * k2));
                let mut out = [ZERO; 6];
                for c in 0..3 {
                    let al = nh[c] * la;
                    let bl = nh[c] * lb;
                    out[c] = al + cs * (a[c] - al) + f1 * xb[c];
                    out[3 + c] = bl + cs * (b[c] - bl) + f2 * xa[c];
                }
                out
            })
            .collect();
        for (k, up) in updates.into_iter().enumerate() {
            for c in 0..6 {
                s[c][k] = up[c];
            }
        }
        let mut it = self.synthesize(s).into_iter();
        let mut next3 = || [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
        Ok(EmState {
            u1: VectorField3::from_comps(self.grid, next3())?,
            u2: VectorField3::from_comps(self.grid, next3())?,
        })
    }

    pub fn mollify(&self, spec: &MollifierSpec, f: &ScalarField) -> Result<ScalarField> {
        self.check(f.grid())?;
        let out = self.mollify_arrays(spec, &[&f.data]).pop().unwrap();
        ScalarField::from_vec(self.grid, out)
    }

    pub fn mollify_vector(&self, spec: &MollifierSpec, f: &VectorField3) -> Result<VectorField3> {
        self.check(f.grid())?;
        let mut it = self
            .mollify_arrays(spec, &[&f.comps[0], &f.comps[1], &f.comps[2]])
            .into_iter();
        VectorField3::from_comps(
            self.grid,
            [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()],
        )
    }

    pub fn mollify_em(&self, spec: &MollifierSpec, u: &EmState) -> Result<EmState> {
        Ok(EmState {
            u1: self.mollify_vector(spec, &u.u1)?,
            u2: self.mollify_vector(spec, &u.u2)?,
        })
    }

    fn mollify_arrays(&self, spec: &MollifierSpec, fields: &[&[f64]]) -> Vec<Vec<f64>> {
        let k0 = spec.base_wavenumber.unwrap_or(std::f64::consts::PI / self.grid.box_len());
        let mut s = self.spectra(fields);
        for sp in &mut s {
            sp.par_iter_mut()
                .enumerate()
                .for_each(|(k, c)| *c *= spec.symbol(self.xi_norm(k), k0));
        }
        self.synthesize(s)
    }

    /// Real field with Fourier support in `|kₐ| ≤ band` (integer wavenumbers),
    /// obtained by low-pass filtering uniform noise in `[-1, 1]`.
    pub fn band_limited_noise(&self, rng: &mut impl Rng, band: usize) -> ScalarField {
        let n = self.grid.n();
        let noise: Vec<f64> = (0..self.grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut s = self.spectra(&[&noise]).pop().unwrap();
        let signed = |j: usize| if j <= n / 2 { j } else { n - j };
        for (k, c) in s.iter_mut().enumerate() {
            let [a, b, d] = self.grid.coords(k);
            let keep = [a, b, d].iter().all(|&j| {
                let m = signed(j);
                m <= band && m < n / 2
            });
            if !keep {
                *c = ZERO;
            }
        }
        let data = self.synthesize(vec![s]).pop().unwrap();
        ScalarField::from_vec(self.grid, data).expect("workspace grid")
    }

    pub fn band_limited_vector(&self, rng: &mut impl Rng, band: usize) -> VectorField3 {
        let comps = std::array::from_fn(|_| self.band_limited_noise(rng, band).data);
        VectorField3::from_comps(self.grid, comps).expect("workspace grid")
    }
}

#[inline]
fn cross_c(x: [f64; 3], v: [Complex64; 3]) -> [Complex64; 3] {
    [
        x[1] * v[2] - x[2] * v[1],
        x[2] * v[0] - x[0] * v[2],
        x[0] * v[1] - x[1] * v[0],
    ]
}

/// Radial low-pass family `R^n`: the symbol is 1 for `|ξ| ≤ n·k₀`, decays
/// smoothly and monotonically, and vanishes for `|ξ| ≥ 2n·k₀`.
/// `k₀` defaults to `π / box_len`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierSpec {
    pub index: usize,
    pub base_wavenumber: Option<f64>,
}

impl MollifierSpec {
    pub fn new(index: usize) -> Self {
        Self {
            index,
            base_wavenumber: None,
        }
    }

    pub fn symbol(&self, xi_norm: f64, k0: f64) -> f64 {
        let radius = self.index.max(1) as f64 * k0;
        crate::grid::smooth_transition(xi_norm / radius - 1.0)
    }
}
