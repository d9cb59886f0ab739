//! Matter models `(F₀, F₁, l)` coupled to the electromagnetic field.
//!
//! A model supplies the affine right-hand side `F(x, v, u) = F₀(v) + F₁(v)u`
//! of `∂ₜv = F` on Ω and the coupling maps `l = (l₁, l₂)` entering the
//! Maxwell source `(κ⁻¹·l)F`. The shipped models are homogeneous inside Ω,
//! so `F` does not take the position as an argument; `l` may depend on the
//! local coefficients.

mod bloch;
mod landau_lifschitz;

pub use bloch::{pack_rho, unpack_rho, Bloch, CMatrix};
pub use landau_lifschitz::LandauLifschitz;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Coefficients, DomainMask, EmState, MatterState};

pub trait MatterModel: Send + Sync {
    fn name(&self) -> &'static str;

    /// Number of real components of `v`.
    fn dim(&self) -> usize;

    /// Declared `K ≥ 0` with `F(v, u)·v ≤ K|v|²`.
    fn growth_constant(&self) -> f64;

    /// Slot `j` such that `F` only reads `u_j` and `l_{3−j} = 0`.
    fn decoupling_slot(&self) -> usize;

    fn eval_f0(&self, v: &[f64], out: &mut [f64]);

    /// `F₁(v) u`.
    fn eval_f1(&self, v: &[f64], u: &[f64; 6], out: &mut [f64]);

    fn eval_f(&self, v: &[f64], u: &[f64; 6], out: &mut [f64]) {
        self.eval_f0(v, out);
        let mut tmp = vec![0.0; self.dim()];
        self.eval_f1(v, u, &mut tmp);
        out.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
    }

    /// `(l₁ v, l₂ v)` at a point with local coefficients `kappa`.
    fn coupling(&self, kappa: [f64; 2], v: &[f64]) -> [[f64; 3]; 2];

    /// Weight `w` such that `w·∫μ|∂ₜv|²` is the energy dissipation rate,
    /// for models that have one.
    fn dissipation_weight(&self) -> Option<f64> {
        None
    }

    fn landau_lifschitz(&self) -> Option<&LandauLifschitz> {
        None
    }

    fn bloch(&self) -> Option<&Bloch> {
        None
    }

    /// `F₁(v)` as a row-major `d × 6` matrix.
    fn f1_matrix(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d * 6];
        let mut col = vec![0.0; d];
        for j in 0..6 {
            let mut e = [0.0; 6];
            e[j] = 1.0;
            self.eval_f1(v, &e, &mut col);
            for r in 0..d {
                m[r * 6 + j] = col[r];
            }
        }
        m
    }
}

/// `(κ⁻¹·l) v` at a point.
#[inline]
pub fn scaled_coupling<M: MatterModel + ?Sized>(model: &M, kappa: [f64; 2], v: &[f64]) -> [f64; 6] {
    let l = model.coupling(kappa, v);
    [
        l[0][0] / kappa[0],
        l[0][1] / kappa[0],
        l[0][2] / kappa[0],
        l[1][0] / kappa[1],
        l[1][1] / kappa[1],
        l[1][2] / kappa[1],
    ]
}

/// The grid field `(κ⁻¹·l) v̄`, zero outside Ω.
pub fn scaled_coupling_field<M: MatterModel + ?Sized>(
    model: &M,
    v: &MatterState,
    mask: &DomainMask,
    kappa: &Coefficients,
) -> EmState {
    let mut out = EmState::zeros(mask.grid());
    for (k, &i) in mask.voxels().iter().enumerate() {
        let s = scaled_coupling(model, kappa.at(i), v.voxel(k));
        out.u1.set(i, [s[0], s[1], s[2]]);
        out.u2.set(i, [s[3], s[4], s[5]]);
    }
    out
}

/// `F = K v + γ v∧u₁`: exponential growth at rate `K` with precession, so
/// that `|v(t)| = |v(0)|e^{Kt}` pointwise. Coupled like Landau-Lifschitz.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGrowth {
    pub rate: f64,
    pub gamma: f64,
}

impl MatterModel for LinearGrowth {
    fn name(&self) -> &'static str {
        "linear_growth"
    }

    fn dim(&self) -> usize {
        3
    }

    fn growth_constant(&self) -> f64 {
        self.rate.max(0.0)
    }

    fn decoupling_slot(&self) -> usize {
        1
    }

    fn eval_f0(&self, v: &[f64], out: &mut [f64]) {
        for a in 0..3 {
            out[a] = self.rate * v[a];
        }
    }

    fn eval_f1(&self, v: &[f64], u: &[f64; 6], out: &mut [f64]) {
        let c = cross([v[0], v[1], v[2]], [u[0], u[1], u[2]]);
        for a in 0..3 {
            out[a] = self.gamma * c[a];
        }
    }

    fn eval_f(&self, v: &[f64], u: &[f64; 6], out: &mut [f64]) {
        let c = cross([v[0], v[1], v[2]], [u[0], u[1], u[2]]);
        for a in 0..3 {
            out[a] = self.rate * v[a] + self.gamma * c[a];
        }
    }

    fn coupling(&self, kappa: [f64; 2], v: &[f64]) -> [[f64; 3]; 2] {
        [[-kappa[0] * v[0], -kappa[0] * v[1], -kappa[0] * v[2]], [0.0; 3]]
    }
}

/// Closed set of models selectable from a scenario file.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    LandauLifschitz(LandauLifschitz),
    Bloch(Bloch),
    LinearGrowth(LinearGrowth),
}

impl Model {
    fn inner(&self) -> &dyn MatterModel {
        match self {
            Model::LandauLifschitz(m) => m,
            Model::Bloch(m) => m,
            Model::LinearGrowth(m) => m,
        }
    }
}

impl MatterModel for Model {
    fn name(&self) -> &'static str {
        self.inner().name()
    }
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn growth_constant(&self) -> f64 {
        self.inner().growth_constant()
    }
    fn decoupling_slot(&self) -> usize {
        self.inner().decoupling_slot()
    }
    fn eval_f0(&self, v: &[f64], out: &mut [f64]) {
        self.inner().eval_f0(v, out)
    }
    fn eval_f1(&self, v: &[f64], u: &[f64; 6], out: &mut [f64]) {
        self.inner().eval_f1(v, u, out)
    }
    fn eval_f(&self, v: &[f64], u: &[f64; 6], out: &mut [f64]) {
        self.inner().eval_f(v, u, out)
    }
    fn coupling(&self, kappa: [f64; 2], v: &[f64]) -> [[f64; 3]; 2] {
        self.inner().coupling(kappa, v)
    }
    fn dissipation_weight(&self) -> Option<f64> {
        self.inner().dissipation_weight()
    }
    fn landau_lifschitz(&self) -> Option<&LandauLifschitz> {
        self.inner().landau_lifschitz()
    }
    fn bloch(&self) -> Option<&Bloch> {
        self.inner().bloch()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureReport {
    pub samples: usize,
    /// `max F(v,u)·v / |v|²` over the samples.
    pub k_empirical: f64,
    /// `max |F₀(v)| + |F₁(v)| + |∂ᵥF₀| + |∂ᵥF₁|` (Frobenius norms, central differences).
    pub c_f_empirical: f64,
}

/// Monte-Carlo check of the structural assumptions on `F` and `l` over
/// `|v| ≤ radius`, `|u| ≤ radius`, with unit coefficients:
///
/// * `F(0, u) = 0` exactly;
/// * `F(v, u)·v ≤ K|v|²` with the declared `K`;
/// * `F` ignores the slot `u_{3−j}` and `l_{3−j} = 0`;
/// * `F(v, ·) − F(v, 0)` is linear.
pub fn check_structure<M: MatterModel + ?Sized>(
    model: &M,
    sample_count: usize,
    radius: f64,
    seed: u64,
) -> Result<StructureReport> {
    let d = model.dim();
    let j = model.decoupling_slot();
    let other = if j == 1 { 3..6 } else { 0..3 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k_decl = model.growth_constant();
    let mut k_emp = f64::NEG_INFINITY;
    let mut c_f = 0.0f64;
    let mut f = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d];
    let mut f0 = vec![0.0; d];
    let kappa = [1.0, 1.0];

    for s in 0..sample_count {
        let v = sample_ball(&mut rng, d, radius);
        let u: [f64; 6] = sample_ball(&mut rng, 6, radius).try_into().unwrap();
        let w: [f64; 6] = sample_ball(&mut rng, 6, radius).try_into().unwrap();

        model.eval_f(&vec![0.0; d], &u, &mut f);
        if f.iter().any(|&x| x != 0.0) {
            return Err(structure("F(x,0,u) = 0", s, format!("u = {u:?}, F = {f:?}")));
        }
        model.eval_f0(&vec![0.0; d], &mut f);
        if f.iter().any(|&x| x != 0.0) {
            return Err(structure("F0(x,0) = 0", s, format!("F0 = {f:?}")));
        }

        model.eval_f(&v, &u, &mut f);
        let v2: f64 = v.iter().map(|x| x * x).sum();
        let fv: f64 = f.iter().zip(&v).map(|(a, b)| a * b).sum();
        let fnorm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
        let tol = 1e-12 * (1.0 + fnorm * v2.sqrt());
        if fv > k_decl * v2 + tol {
            return Err(structure(
                "F(x,v,u)·v <= K|v|^2",
                s,
                format!("F·v = {fv:e}, K|v|² = {:e}, v = {v:?}, u = {u:?}", k_decl * v2),
            ));
        }
        if v2 > 0.0 {
            k_emp = k_emp.max(fv / v2);
        }

        let mut u_other = u;
        for c in other.clone() {
            u_other[c] = w[c];
        }
        model.eval_f(&v, &u_other, &mut g);
        if g != f {
            return Err(structure(
                "decoupling: F depends only on u_j",
                s,
                format!("changing slot {} altered F", 3 - j),
            ));
        }
        let l = model.coupling(kappa, &v);
        if l[2 - j] != [0.0; 3] {
            return Err(structure(
                "decoupling: l_{3-j} = 0",
                s,
                format!("l_{} v = {:?}", 3 - j, l[2 - j]),
            ));
        }

        // superposition: F(v, a u + b w) − F(v, 0) = a(F(v,u) − F(v,0)) + b(F(v,w) − F(v,0))
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let mix: [f64; 6] = std::array::from_fn(|c| a * u[c] + b * w[c]);
        model.eval_f(&v, &[0.0; 6], &mut f0);
        model.eval_f(&v, &w, &mut h);
        model.eval_f(&v, &mix, &mut g);
        let mut dev = 0.0f64;
        let mut scale = 1.0f64;
        for c in 0..d {
            let lin = a * (f[c] - f0[c]) + b * (h[c] - f0[c]);
            dev = dev.max((g[c] - f0[c] - lin).abs());
            scale = scale.max(lin.abs()).max(g[c].abs());
        }
        if dev > 1e-12 * scale {
            return Err(structure("F affine in u", s, format!("superposition defect {dev:e}")));
        }

        c_f = c_f.max(growth_bound_sample(model, &v));
    }
    Ok(StructureReport {
        samples: sample_count,
        k_empirical: if k_emp.is_finite() { k_emp } else { 0.0 },
        c_f_empirical: c_f,
    })
}

fn growth_bound_sample<M: MatterModel + ?Sized>(model: &M, v: &[f64]) -> f64 {
    let d = model.dim();
    let mut f0 = vec![0.0; d];
    model.eval_f0(v, &mut f0);
    let f1 = model.f1_matrix(v);
    let eps = 1e-6;
    let mut jac0 = 0.0;
    let mut jac1 = 0.0;
    let (mut p, mut m) = (vec![0.0; d], vec![0.0; d]);
    for c in 0..d {
        let mut vp = v.to_vec();
        let mut vm = v.to_vec();
        vp[c] += eps;
        vm[c] -= eps;
        model.eval_f0(&vp, &mut p);
        model.eval_f0(&vm, &mut m);
        jac0 += p.iter().zip(&m).map(|(a, b)| ((a - b) / (2.0 * eps)).powi(2)).sum::<f64>();
        let f1p = model.f1_matrix(&vp);
        let f1m = model.f1_matrix(&vm);
        jac1 += f1p.iter().zip(&f1m).map(|(a, b)| ((a - b) / (2.0 * eps)).powi(2)).sum::<f64>();
    }
    norm(&f0) + norm(&f1) + jac0.sqrt() + jac1.sqrt()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn structure(check: &'static str, sample: usize, detail: String) -> Error {
    Error::Structure {
        check,
        sample,
        detail,
    }
}

fn sample_ball(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = norm(&x);
        if r > 0.0 && r <= 1.0 {
            let target = radius * rng.random::<f64>().powf(1.0 / d as f64);
            return x.into_iter().map(|c| c * target / r).collect();
        }
    }
}

#[inline]
pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
