use super::{cross, dot, MatterModel};
use crate::error::{Error, Result};

/// Landau-Lifschitz magnetization dynamics without exchange:
/// `∂ₜM = γ M∧H_T − α M∧(M∧H_T)` with `H_T = H + Ka(M·e)e + H_ext`.
///
/// Coupling: `l₁ = −μ`, `l₂ = 0`; decoupled in slot 1.
#[derive(Clone, Debug, PartialEq)]
pub struct LandauLifschitz {
    gamma: f64,
    alpha: f64,
    anisotropy: f64,
    easy_axis: [f64; 3],
    h_ext: [f64; 3],
}

impl LandauLifschitz {
    pub fn new(
        gamma: f64,
        alpha: f64,
        anisotropy: f64,
        easy_axis: [f64; 3],
        h_ext: [f64; 3],
    ) -> Result<Self> {
        if gamma == 0.0 || !gamma.is_finite() {
            return Err(Error::config("model.gamma", "must be finite and nonzero"));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::config("model.alpha", "must be finite and non-negative"));
        }
        if !(anisotropy >= 0.0) || !anisotropy.is_finite() {
            return Err(Error::config("model.anisotropy", "must be finite and non-negative"));
        }
        if (dot(easy_axis, easy_axis).sqrt() - 1.0).abs() > 1e-12 {
            return Err(Error::config("model.easy_axis", "must be a unit vector"));
        }
        if h_ext.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("model.h_ext", "must be finite"));
        }
        Ok(Self {
            gamma,
            alpha,
            anisotropy,
            easy_axis,
            h_ext,
        })
    }

    /// Pure precession about `h_ext`: no damping, no anisotropy.
    pub fn precession(gamma: f64, h_ext: [f64; 3]) -> Result<Self> {
        Self::new(gamma, 0.0, 0.0, [0.0, 0.0, 1.0], h_ext)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn anisotropy(&self) -> f64 {
        self.anisotropy
    }

    pub fn easy_axis(&self) -> [f64; 3] {
        self.easy_axis
    }

    pub fn h_ext(&self) -> [f64; 3] {
        self.h_ext
    }

    /// `H_T = h + Ka(m·e)e + H_ext`.
    pub fn total_field(&self, m: [f64; 3], h: [f64; 3]) -> [f64; 3] {
        let p = self.anisotropy * dot(m, self.easy_axis);
        std::array::from_fn(|a| h[a] + p * self.easy_axis[a] + self.h_ext[a])
    }

    /// Uniaxial potential `Φ(m) = (Ka/2)(m·e)²`, so that `H_a = ∇Φ`.
    pub fn anisotropy_potential(&self, m: [f64; 3]) -> f64 {
        0.5 * self.anisotropy * dot(m, self.easy_axis).powi(2)
    }

    fn torque(&self, m: [f64; 3], h: [f64; 3]) -> [f64; 3] {
        let mh = cross(m, h);
        let mmh = cross(m, mh);
        std::array::from_fn(|a| self.gamma * mh[a] - self.alpha * mmh[a])
    }
}

impl MatterModel for LandauLifschitz {
    fn name(&self) -> &'static str {
        "landau_lifschitz"
    }

    fn dim(&self) -> usize {
        3
    }

    fn growth_constant(&self) -> f64 {
        0.0
    }

    fn decoupling_slot(&self) -> usize {
        1
    }

    fn eval_f0(&self, v: &[f64], out: &mut [f64]) {
        let m = [v[0], v[1], v[2]];
        out.copy_from_slice(&self.torque(m, self.total_field(m, [0.0; 3])));
    }

    fn eval_f1(&self, v: &[f64], u: &[f64; 6], out: &mut [f64]) {
        let m = [v[0], v[1], v[2]];
        out.copy_from_slice(&self.torque(m, [u[0], u[1], u[2]]));
    }

    fn eval_f(&self, v: &[f64], u: &[f64; 6], out: &mut [f64]) {
        let m = [v[0], v[1], v[2]];
        out.copy_from_slice(&self.torque(m, self.total_field(m, [u[0], u[1], u[2]])));
    }

    fn coupling(&self, kappa: [f64; 2], v: &[f64]) -> [[f64; 3]; 2] {
        [[-kappa[0] * v[0], -kappa[0] * v[1], -kappa[0] * v[2]], [0.0; 3]]
    }

    fn dissipation_weight(&self) -> Option<f64> {
        Some(self.alpha / (self.alpha * self.alpha + self.gamma * self.gamma))
    }

    fn landau_lifschitz(&self) -> Option<&LandauLifschitz> {
        Some(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
        loop {
            let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let r = dot(v, v).sqrt();
            if r > 0.1 && r <= 1.0 {
                return v.map(|x| x / r);
            }
        }
    }

    #[test]
    fn parallel_field_gives_no_torque() {
        let m = LandauLifschitz::new(1.7, 0.3, 0.0, [0.0, 0.0, 1.0], [0.0; 3]).unwrap();
        let mut out = [1.0; 3];
        m.eval_f(&[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0], &mut out);
        assert_eq!(out, [0.0; 3]);
    }

    #[test]
    fn undamped_precession_direction() {
        let m = LandauLifschitz::new(2.0, 0.0, 0.0, [0.0, 0.0, 1.0], [0.0; 3]).unwrap();
        let mut out = [0.0; 3];
        m.eval_f(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0], &mut out);
        assert_eq!(out, [0.0, -2.0, 0.0]);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(LandauLifschitz::new(0.0, 0.1, 0.0, [0.0, 0.0, 1.0], [0.0; 3]).is_err());
        assert!(LandauLifschitz::new(1.0, -0.1, 0.0, [0.0, 0.0, 1.0], [0.0; 3]).is_err());
        assert!(LandauLifschitz::new(1.0, 0.1, 0.0, [0.0, 1.0, 1.0], [0.0; 3]).is_err());
    }

    #[test]
    fn torque_is_orthogonal_and_satisfies_dissipation_identities() {
        let model =
            LandauLifschitz::new(1.3, 0.4, 0.8, [0.6, 0.0, 0.8], [0.2, -0.5, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let m = unit(&mut rng);
            let h: [f64; 6] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let mut f = [0.0; 3];
            model.eval_f(&m, &h, &mut f);
            assert!(dot(f, m).abs() <= 1e-14);
            let ht = model.total_field(m, [h[0], h[1], h[2]]);
            let mxh = cross(m, ht);
            let s = dot(mxh, mxh);
            let a = model.alpha();
            let g = model.gamma();
            assert!((dot(f, ht) - a * s).abs() <= 1e-12 * (1.0 + s));
            assert!((dot(f, f) - (a * a + g * g) * s).abs() <= 1e-12 * (1.0 + s));
        }
    }

    #[test]
    fn f_is_affine_in_h() {
        let model = LandauLifschitz::new(1.0, 0.5, 0.3, [0.0, 1.0, 0.0], [0.0, 0.0, 0.4]).unwrap();
        let v = [0.3, -0.2, 0.9];
        let u = [0.1, 0.7, -0.3, 5.0, 6.0, 7.0];
        let mut f = [0.0; 3];
        let mut f0 = [0.0; 3];
        let mut f1 = [0.0; 3];
        model.eval_f(&v, &u, &mut f);
        model.eval_f0(&v, &mut f0);
        model.eval_f1(&v, &u, &mut f1);
        for a in 0..3 {
            assert!((f[a] - f0[a] - f1[a]).abs() < 1e-15);
        }
    }
}
