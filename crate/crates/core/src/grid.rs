//! Periodic grid geometry, field containers, the matter-domain mask and the
//! κ-weighted inner product.
//!
//! All fields are stored x-fastest: the point `(ix, iy, iz)` lives at
//! `ix + n * (iy + n * iz)`. Quadrature is the midpoint rule, i.e. the cell
//! volume times the plain sum over grid points.

use crate::error::{Error, Result};
use crate::reduce;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid3 {
    n: usize,
    box_len: f64,
}

impl Grid3 {
    pub fn new(n: usize, box_len: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n = {n} must be a power of two and at least 8"
            )));
        }
        if !(box_len > 0.0 && box_len.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "box_len = {box_len} must be positive and finite"
            )));
        }
        Ok(Self { n, box_len })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_len(&self) -> f64 {
        self.box_len
    }

    pub fn spacing(&self) -> f64 {
        self.box_len / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    /// Number of grid points, `n³`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.n * (iy + self.n * iz)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        let n = self.n;
        [i % n, (i / n) % n, i / (n * n)]
    }

    /// Physical position of grid node `i`, in `[0, box_len)³`.
    pub fn position(&self, i: usize) -> [f64; 3] {
        let h = self.spacing();
        let [x, y, z] = self.coords(i);
        [x as f64 * h, y as f64 * h, z as f64 * h]
    }

    /// Minimum-image displacement from `origin` to node `i`.
    pub fn displacement(&self, origin: [f64; 3], i: usize) -> [f64; 3] {
        let p = self.position(i);
        let l = self.box_len;
        let mut d = [0.0; 3];
        for a in 0..3 {
            let mut s = p[a] - origin[a];
            s -= l * (s / l).round();
            d[a] = s;
        }
        d
    }

    pub fn center(&self) -> [f64; 3] {
        [0.5 * self.box_len; 3]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid3,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid3) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid3, value: f64) -> Self {
        Self {
            grid,
            data: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid3, f: impl Fn([f64; 3]) -> f64) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self { grid, data }
    }

    pub fn from_vec(grid: Grid3, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        reduce::sum(self.data.len(), |i| self.data[i]) / self.data.len() as f64
    }

    /// Unweighted L² inner product (midpoint quadrature).
    pub fn inner(&self, other: &ScalarField) -> f64 {
        let h3 = self.grid.cell_volume();
        h3 * reduce::sum(self.data.len(), |i| self.data[i] * other.data[i])
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField3 {
    grid: Grid3,
    pub comps: [Vec<f64>; 3],
}

impl VectorField3 {
    pub fn zeros(grid: Grid3) -> Self {
        Self::uniform(grid, [0.0; 3])
    }

    pub fn uniform(grid: Grid3, value: [f64; 3]) -> Self {
        let len = grid.len();
        Self {
            grid,
            comps: value.map(|c| vec![c; len]),
        }
    }

    pub fn from_fn(grid: Grid3, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for i in 0..grid.len() {
            let v = f(grid.position(i));
            for a in 0..3 {
                out.comps[a][i] = v[a];
            }
        }
        out
    }

    pub fn from_comps(grid: Grid3, comps: [Vec<f64>; 3]) -> Result<Self> {
        if comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, comps })
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    #[inline]
    pub fn at(&self, i: usize) -> [f64; 3] {
        [self.comps[0][i], self.comps[1][i], self.comps[2][i]]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: [f64; 3]) {
        for a in 0..3 {
            self.comps[a][i] = v[a];
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &VectorField3) {
        for (s, o) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in s.iter_mut().zip(o) {
                *x += a * y;
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.comps {
            c.iter_mut().for_each(|x| *x *= a);
        }
    }

    pub fn sub(&self, other: &VectorField3) -> VectorField3 {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Pointwise multiplication by a scalar field.
    pub fn mul_scalar(&self, s: &ScalarField) -> VectorField3 {
        let mut out = self.clone();
        for c in &mut out.comps {
            c.iter_mut().zip(&s.data).for_each(|(x, k)| *x *= k);
        }
        out
    }

    /// Pointwise division by a scalar field.
    pub fn div_scalar(&self, s: &ScalarField) -> VectorField3 {
        let mut out = self.clone();
        for c in &mut out.comps {
            c.iter_mut().zip(&s.data).for_each(|(x, k)| *x /= k);
        }
        out
    }

    /// Unweighted L² inner product.
    pub fn inner(&self, other: &VectorField3) -> f64 {
        let h3 = self.grid.cell_volume();
        h3 * reduce::sum(self.grid.len(), |i| {
            (0..3).map(|a| self.comps[a][i] * other.comps[a][i]).sum::<f64>()
        })
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        reduce::max(self.grid.len(), |i| {
            let v = self.at(i);
            (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
        })
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|x| x.is_finite())
    }
}

/// Electromagnetic state `u = (u₁, u₂)`; `H` and `E` in the concrete models.
#[derive(Clone, Debug, PartialEq)]
pub struct EmState {
    pub u1: VectorField3,
    pub u2: VectorField3,
}

impl EmState {
    pub fn new(u1: VectorField3, u2: VectorField3) -> Result<Self> {
        if u1.grid() != u2.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { u1, u2 })
    }

    pub fn zeros(grid: Grid3) -> Self {
        Self {
            u1: VectorField3::zeros(grid),
            u2: VectorField3::zeros(grid),
        }
    }

    pub fn grid(&self) -> Grid3 {
        self.u1.grid()
    }

    pub fn slot(&self, j: usize) -> &VectorField3 {
        match j {
            1 => &self.u1,
            2 => &self.u2,
            _ => panic!("EM slot must be 1 or 2, got {j}"),
        }
    }

    /// The six components at point `i`: `(u₁(i), u₂(i))`.
    #[inline]
    pub fn at(&self, i: usize) -> [f64; 6] {
        let a = self.u1.at(i);
        let b = self.u2.at(i);
        [a[0], a[1], a[2], b[0], b[1], b[2]]
    }

    pub fn axpy(&mut self, a: f64, other: &EmState) {
        self.u1.axpy(a, &other.u1);
        self.u2.axpy(a, &other.u2);
    }

    pub fn scale(&mut self, a: f64) {
        self.u1.scale(a);
        self.u2.scale(a);
    }

    pub fn sub(&self, other: &EmState) -> EmState {
        EmState {
            u1: self.u1.sub(&other.u1),
            u2: self.u2.sub(&other.u2),
        }
    }

    /// Unweighted L² norm over the whole box.
    pub fn norm(&self) -> f64 {
        (self.u1.inner(&self.u1) + self.u2.inner(&self.u2)).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.u1.is_finite() && self.u2.is_finite()
    }
}

/// Positive weights `κ = (κ₁, κ₂)`, i.e. `(μ, ε)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    pub kappa1: ScalarField,
    pub kappa2: ScalarField,
    lower_bound: f64,
}

impl Coefficients {
    pub fn new(kappa1: ScalarField, kappa2: ScalarField) -> Result<Self> {
        if kappa1.grid() != kappa2.grid() {
            return Err(Error::GridMismatch);
        }
        let lower_bound = kappa1.min().min(kappa2.min());
        let upper = kappa1.max().max(kappa2.max());
        if !(lower_bound > 0.0) || !upper.is_finite() {
            return Err(Error::InvalidCoefficients(format!(
                "coefficients must be finite and bounded below by a positive constant (min = {lower_bound})"
            )));
        }
        Ok(Self {
            kappa1,
            kappa2,
            lower_bound,
        })
    }

    pub fn constant(grid: Grid3, kappa1: f64, kappa2: f64) -> Result<Self> {
        Self::new(
            ScalarField::constant(grid, kappa1),
            ScalarField::constant(grid, kappa2),
        )
    }

    /// `κᵢ = baseᵢ + amplitudeᵢ · χ(|x − center|)` where χ is a C^∞ radial
    /// cutoff equal to 1 inside `radius − width` and 0 outside `radius + width`.
    /// `width = 0` gives the discontinuous indicator profile.
    pub fn smooth_bump(
        grid: Grid3,
        base: [f64; 2],
        amplitude: [f64; 2],
        center: [f64; 3],
        radius: f64,
        width: f64,
    ) -> Result<Self> {
        let profile: Vec<f64> = (0..grid.len())
            .map(|i| {
                let d = grid.displacement(center, i);
                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                radial_cutoff(r, radius, width)
            })
            .collect();
        let make = |b: f64, a: f64| {
            ScalarField::from_vec(grid, profile.iter().map(|p| b + a * p).collect())
        };
        Self::new(make(base[0], amplitude[0])?, make(base[1], amplitude[1])?)
    }

    pub fn grid(&self) -> Grid3 {
        self.kappa1.grid()
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn slot(&self, j: usize) -> &ScalarField {
        match j {
            1 => &self.kappa1,
            2 => &self.kappa2,
            _ => panic!("coefficient slot must be 1 or 2, got {j}"),
        }
    }

    #[inline]
    pub fn at(&self, i: usize) -> [f64; 2] {
        [self.kappa1.data[i], self.kappa2.data[i]]
    }

    /// `Some((κ₁, κ₂))` when both weights are spatially constant.
    pub fn constant_values(&self) -> Option<(f64, f64)> {
        let k1 = self.kappa1.data[0];
        let k2 = self.kappa2.data[0];
        let flat = self.kappa1.data.iter().all(|&x| x == k1)
            && self.kappa2.data.iter().all(|&x| x == k2);
        flat.then_some((k1, k2))
    }
}

/// C^∞ transition from 1 (at t ≤ 0) to 0 (at t ≥ 1).
pub fn smooth_transition(t: f64) -> f64 {
    fn psi(s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            (-1.0 / s).exp()
        }
    }
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let a = psi(1.0 - t);
        a / (a + psi(t))
    }
}

fn radial_cutoff(r: f64, radius: f64, width: f64) -> f64 {
    if width <= 0.0 {
        return if r <= radius { 1.0 } else { 0.0 };
    }
    smooth_transition((r - (radius - width)) / (2.0 * width))
}

/// Voxel mask of the matter domain Ω.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainMask {
    grid: Grid3,
    mask: Vec<bool>,
    voxels: Vec<usize>,
}

impl DomainMask {
    /// Validates that Ω is nonempty and keeps a margin of at least `n/8`
    /// cells from the periodic boundary on every side.
    pub fn new(grid: Grid3, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        let voxels: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        if voxels.is_empty() {
            return Err(Error::InvalidDomain("domain mask is empty".into()));
        }
        let n = grid.n();
        let margin = n / 8;
        for &i in &voxels {
            let c = grid.coords(i);
            if c.iter().any(|&x| x < margin || x + margin >= n) {
                return Err(Error::InvalidDomain(format!(
                    "voxel {c:?} lies within {margin} cells of the periodic boundary"
                )));
            }
        }
        Ok(Self { grid, mask, voxels })
    }

    /// Centered cube of `side` cells per axis.
    pub fn centered_box(grid: Grid3, side: usize) -> Result<Self> {
        let n = grid.n();
        let lo = n.saturating_sub(side) / 2;
        let hi = lo + side;
        let mask = (0..grid.len())
            .map(|i| {
                let c = grid.coords(i);
                c.iter().all(|&x| x >= lo && x < hi)
            })
            .collect();
        Self::new(grid, mask)
    }

    /// Nodes within `radius` (physical units) of `center`.
    pub fn ball(grid: Grid3, center: [f64; 3], radius: f64) -> Result<Self> {
        let mask = (0..grid.len())
            .map(|i| {
                let d = grid.displacement(center, i);
                d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= radius * radius
            })
            .collect();
        Self::new(grid, mask)
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    /// Grid indices of the voxels of Ω, increasing.
    pub fn voxels(&self) -> &[usize] {
        &self.voxels
    }

    pub fn voxel_count(&self) -> usize {
        self.voxels.len()
    }

    /// Centroid of Ω in physical units.
    pub fn centroid(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for &i in &self.voxels {
            let p = self.grid.position(i);
            for a in 0..3 {
                c[a] += p[a];
            }
        }
        c.map(|x| x / self.voxels.len() as f64)
    }
}

/// `d` real components per voxel of Ω, stored voxel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MatterState {
    dim: usize,
    pub values: Vec<f64>,
}

impl MatterState {
    pub fn zeros(dim: usize, voxels: usize) -> Self {
        Self {
            dim,
            values: vec![0.0; dim * voxels],
        }
    }

    pub fn from_values(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 {
            return Err(Error::InvalidDomain(format!(
                "{} values do not split into components of size {dim}",
                values.len()
            )));
        }
        Ok(Self { dim, values })
    }

    /// Same vector at every voxel.
    pub fn uniform(voxels: usize, value: &[f64]) -> Self {
        let mut values = Vec::with_capacity(voxels * value.len());
        for _ in 0..voxels {
            values.extend_from_slice(value);
        }
        Self {
            dim: value.len(),
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn voxel_count(&self) -> usize {
        self.values.len() / self.dim
    }

    #[inline]
    pub fn voxel(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn voxel_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn axpy(&mut self, a: f64, other: &MatterState) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    pub fn sub(&self, other: &MatterState) -> MatterState {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Pointwise modulus `|v(x)|` per voxel.
    pub fn moduli(&self) -> Vec<f64> {
        (0..self.voxel_count())
            .map(|k| self.voxel(k).iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.moduli().into_iter().fold(0.0, f64::max)
    }

    /// L²(Ω) norm with cell volume `h3`.
    pub fn l2_norm(&self, h3: f64) -> f64 {
        (h3 * reduce::sum(self.values.len(), |i| self.values[i] * self.values[i])).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }
}

/// A `d`-component field over the full grid (component-major).
#[derive(Clone, Debug, PartialEq)]
pub struct MultiField {
    grid: Grid3,
    pub comps: Vec<Vec<f64>>,
}

impl MultiField {
    pub fn zeros(grid: Grid3, dim: usize) -> Self {
        Self {
            grid,
            comps: vec![vec![0.0; grid.len()]; dim],
        }
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }
}

/// `⟨a, b⟩_κ = ∫ κ₁ a₁·b₁ + κ₂ a₂·b₂`.
pub fn weighted_inner(a: &EmState, b: &EmState, kappa: &Coefficients) -> Result<f64> {
    let grid = a.grid();
    if b.grid() != grid || kappa.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let (k1, k2) = (&kappa.kappa1.data, &kappa.kappa2.data);
    let s = reduce::sum(grid.len(), |i| {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for c in 0..3 {
            d1 += a.u1.comps[c][i] * b.u1.comps[c][i];
            d2 += a.u2.comps[c][i] * b.u2.comps[c][i];
        }
        k1[i] * d1 + k2[i] * d2
    });
    Ok(grid.cell_volume() * s)
}

pub fn weighted_norm(a: &EmState, kappa: &Coefficients) -> Result<f64> {
    Ok(weighted_inner(a, a, kappa)?.max(0.0).sqrt())
}

/// `v̄`: copies `v` into Ω, zero elsewhere.
pub fn extend_by_zero(v: &MatterState, mask: &DomainMask) -> MultiField {
    let mut out = MultiField::zeros(mask.grid(), v.dim());
    for (k, &i) in mask.voxels().iter().enumerate() {
        for (c, x) in v.voxel(k).iter().enumerate() {
            out.comps[c][i] = *x;
        }
    }
    out
}

pub fn restrict_to_domain(f: &MultiField, mask: &DomainMask) -> MatterState {
    let dim = f.dim();
    let mut values = Vec::with_capacity(dim * mask.voxel_count());
    for &i in mask.voxels() {
        values.extend(f.comps.iter().map(|c| c[i]));
    }
    MatterState { dim, values }
}
