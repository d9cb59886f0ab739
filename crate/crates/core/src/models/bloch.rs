//! N-level Bloch (Liouville-von Neumann) dynamics,
//! `∂ₜρ = −i[Λ − E·Γ, ρ] + Q(ρ)`, with Hermitian ρ packed into `N²` reals.

use num_complex::Complex64;

use super::MatterModel;
use crate::error::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Dense row-major N×N complex matrix.
pub type CMatrix = Vec<Complex64>;

/// Packs a Hermitian matrix as `[ρ₀₀ … ρ_{N−1,N−1}, √2 Re ρ_ab, √2 Im ρ_ab (a<b)]`,
/// so that `|v|² = Σ|ρ_ab|²`.
pub fn pack_rho(rho: &[Complex64], n: usize) -> Result<Vec<f64>> {
    if rho.len() != n * n {
        return Err(Error::NotHermitian(f64::INFINITY));
    }
    let scale = rho.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut dev = 0.0f64;
    for a in 0..n {
        for b in a..n {
            dev = dev.max((rho[a * n + b] - rho[b * n + a].conj()).norm());
        }
    }
    if dev > 1e-12 * scale {
        return Err(Error::NotHermitian(dev));
    }
    Ok(pack_upper(rho, n))
}

/// Packs using the diagonal real parts and the upper triangle only.
pub(crate) fn pack_upper(rho: &[Complex64], n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(n * n);
    v.extend((0..n).map(|a| rho[a * n + a].re));
    for a in 0..n {
        for b in a + 1..n {
            let z = rho[a * n + b];
            v.push(SQRT2 * z.re);
            v.push(SQRT2 * z.im);
        }
    }
    v
}

pub fn unpack_rho(v: &[f64], n: usize) -> CMatrix {
    let mut rho = vec![Complex64::new(0.0, 0.0); n * n];
    for a in 0..n {
        rho[a * n + a] = Complex64::new(v[a], 0.0);
    }
    let mut k = n;
    for a in 0..n {
        for b in a + 1..n {
            let z = Complex64::new(v[k], v[k + 1]) / SQRT2;
            rho[a * n + b] = z;
            rho[b * n + a] = z.conj();
            k += 2;
        }
    }
    rho
}

fn matmul(a: &[Complex64], b: &[Complex64], n: usize) -> CMatrix {
    let mut c = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

fn is_hermitian(m: &[Complex64], n: usize) -> bool {
    (0..n).all(|a| (0..n).all(|b| (m[a * n + b] - m[b * n + a].conj()).norm() <= 1e-12))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bloch {
    levels: usize,
    hamiltonian: CMatrix,
    dipole: [CMatrix; 3],
    transverse_rate: f64,
    /// `rates[a][b]`: population transfer rate from level `b` to level `a`.
    longitudinal: Option<Vec<f64>>,
}

impl Bloch {
    pub fn new(
        levels: usize,
        hamiltonian: CMatrix,
        dipole: [CMatrix; 3],
        transverse_rate: f64,
    ) -> Result<Self> {
        if levels < 2 {
            return Err(Error::config("model.levels", "need at least two levels"));
        }
        let nn = levels * levels;
        if hamiltonian.len() != nn || !is_hermitian(&hamiltonian, levels) {
            return Err(Error::config("model.hamiltonian", "must be a Hermitian N×N matrix"));
        }
        if dipole.iter().any(|g| g.len() != nn || !is_hermitian(g, levels)) {
            return Err(Error::config("model.dipole", "each component must be a Hermitian N×N matrix"));
        }
        if !(transverse_rate >= 0.0) || !transverse_rate.is_finite() {
            return Err(Error::config("model.transverse_rate", "must be finite and non-negative"));
        }
        Ok(Self {
            levels,
            hamiltonian,
            dipole,
            transverse_rate,
            longitudinal: None,
        })
    }

    /// Two-level system `Λ = diag(0, ω₀)`, real dipole `d` on the off-diagonal.
    pub fn two_level(omega0: f64, dipole: [f64; 3], transverse_rate: f64) -> Result<Self> {
        let c = |x: f64| Complex64::new(x, 0.0);
        let h = vec![c(0.0), c(0.0), c(0.0), c(omega0)];
        let g = dipole.map(|d| vec![c(0.0), c(d), c(d), c(0.0)]);
        Self::new(2, h, g, transverse_rate)
    }

    /// Adds Pauli population transfer; `rates[a * N + b]` is the rate `b → a`.
    pub fn with_longitudinal_rates(mut self, rates: Vec<f64>) -> Result<Self> {
        let n = self.levels;
        if rates.len() != n * n || rates.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::config("model.longitudinal_rates", "must be N×N non-negative rates"));
        }
        self.longitudinal = Some(rates);
        Ok(self)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn has_longitudinal(&self) -> bool {
        self.longitudinal.is_some()
    }

    /// `Tr(Γ_c ρ)` for each Cartesian component `c`.
    pub fn polarization(&self, rho: &[Complex64]) -> [f64; 3] {
        let n = self.levels;
        std::array::from_fn(|c| {
            let g = &self.dipole[c];
            let mut s = Complex64::new(0.0, 0.0);
            for a in 0..n {
                for b in 0..n {
                    s += g[a * n + b] * rho[b * n + a];
                }
            }
            s.re
        })
    }

    /// Effective Hamiltonian `Λ − E·Γ`.
    pub fn effective_hamiltonian(&self, e: [f64; 3]) -> CMatrix {
        let mut h = self.hamiltonian.clone();
        for (c, g) in self.dipole.iter().enumerate() {
            for (x, y) in h.iter_mut().zip(g) {
                *x -= e[c] * y;
            }
        }
        h
    }

    fn rhs_matrix(&self, h: &[Complex64], rho: &[Complex64], relax: bool) -> CMatrix {
        let n = self.levels;
        let hr = matmul(h, rho, n);
        let rh = matmul(rho, h, n);
        let mi = Complex64::new(0.0, -1.0);
        let mut out: CMatrix = hr.iter().zip(&rh).map(|(a, b)| mi * (a - b)).collect();
        if relax {
            for a in 0..n {
                for b in 0..n {
                    if a != b {
                        out[a * n + b] -= self.transverse_rate * rho[a * n + b];
                    }
                }
            }
            if let Some(w) = &self.longitudinal {
                for a in 0..n {
                    let mut gain = 0.0;
                    let mut loss = 0.0;
                    for b in 0..n {
                        if a != b {
                            gain += w[a * n + b] * rho[b * n + b].re;
                            loss += w[b * n + a];
                        }
                    }
                    out[a * n + a] += gain - loss * rho[a * n + a].re;
                }
            }
        }
        out
    }
}

impl MatterModel for Bloch {
    fn name(&self) -> &'static str {
        "bloch"
    }

    fn bloch(&self) -> Option<&Bloch> {
        Some(self)
    }

    fn dim(&self) -> usize {
        self.levels * self.levels
    }

    /// Zero for transverse relaxation; with Pauli rates, a Gershgorin bound on
    /// the symmetric part of the population generator.
    fn growth_constant(&self) -> f64 {
        let Some(w) = &self.longitudinal else {
            return 0.0;
        };
        let n = self.levels;
        let gen = |a: usize, b: usize| {
            if a == b {
                -(0..n).filter(|&c| c != a).map(|c| w[c * n + a]).sum::<f64>()
            } else {
                w[a * n + b]
            }
        };
        (0..n)
            .map(|a| {
                gen(a, a)
                    + (0..n)
                        .filter(|&b| b != a)
                        .map(|b| 0.5 * (gen(a, b) + gen(b, a)).abs())
                        .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    fn decoupling_slot(&self) -> usize {
        2
    }

    fn eval_f0(&self, v: &[f64], out: &mut [f64]) {
        let rho = unpack_rho(v, self.levels);
        let d = self.rhs_matrix(&self.hamiltonian, &rho, true);
        out.copy_from_slice(&pack_upper(&d, self.levels));
    }

    fn eval_f1(&self, v: &[f64], u: &[f64; 6], out: &mut [f64]) {
        let rho = unpack_rho(v, self.levels);
        let n = self.levels;
        let mut h = vec![Complex64::new(0.0, 0.0); n * n];
        for (c, g) in self.dipole.iter().enumerate() {
            for (x, y) in h.iter_mut().zip(g) {
                *x -= u[3 + c] * y;
            }
        }
        let d = self.rhs_matrix(&h, &rho, false);
        out.copy_from_slice(&pack_upper(&d, n));
    }

    fn eval_f(&self, v: &[f64], u: &[f64; 6], out: &mut [f64]) {
        let rho = unpack_rho(v, self.levels);
        let h = self.effective_hamiltonian([u[3], u[4], u[5]]);
        let d = self.rhs_matrix(&h, &rho, true);
        out.copy_from_slice(&pack_upper(&d, self.levels));
    }

    /// `l₁ = 0`, `l₂ v = −Tr(Γρ)`, so that `div(εE + P̄) = 0` is the constraint.
    fn coupling(&self, _kappa: [f64; 2], v: &[f64]) -> [[f64; 3]; 2] {
        let p = self.polarization(&unpack_rho(v, self.levels));
        [[0.0; 3], [-p[0], -p[1], -p[2]]]
    }
}
