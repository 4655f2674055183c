//! Phase-dependent coefficients and the elastic energy density.
//!
//! Every coefficient is a closed-form family in the phase variable `z = φ`:
//!
//! | coefficient | family |
//! |---|---|
//! | mobility `m`, permeability `κ` | `c0 + c1·z²` with `c0 > 0`, `c1 ≥ 0` |
//! | modulus `M`, Biot–Willis `α`, Lamé pairs of `ℂ` and `ℂ_ν` | `c0 + c1·s(z)` |
//! | potential `ψ` | `a·(1 − z²)²` |
//! | eigenstrain `𝒯 = τ(z)·I` | `τ = c0 + c1·z` |
//!
//! with the switch `s(z) = ½(1 + tanh(k·z))`, which is smooth, bounded in
//! `(0, 1)`, and has bounded derivatives of every order.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::{ScalarField, Sym2, SymTensorField};

/// `c0 + c1·z²`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub c0: f64,
    pub c1: f64,
}

impl Quadratic {
    pub fn constant(c: f64) -> Self {
        Self { c0: c, c1: 0.0 }
    }

    #[inline]
    fn eval(&self, z: f64, order: u8) -> f64 {
        match order {
            0 => self.c0 + self.c1 * z * z,
            1 => 2.0 * self.c1 * z,
            _ => 2.0 * self.c1,
        }
    }
}

/// `c0 + c1·s(z)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Switched {
    pub c0: f64,
    pub c1: f64,
}

impl Switched {
    pub fn constant(c: f64) -> Self {
        Self { c0: c, c1: 0.0 }
    }

    /// Extremes over all `z` (the switch ranges over `(0, 1)`).
    pub fn bounds(&self) -> (f64, f64) {
        let (a, b) = (self.c0, self.c0 + self.c1);
        (a.min(b), a.max(b))
    }
}

/// `c0 + c1·z`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub c0: f64,
    pub c1: f64,
}

/// Isotropic stiffness `A ↦ 2μA + λ tr(A) I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lame {
    pub lambda: f64,
    pub mu: f64,
}

impl Lame {
    #[inline]
    pub fn apply(&self, a: &Sym2) -> Sym2 {
        let t = self.lambda * a.trace();
        Sym2 { xx: 2.0 * self.mu * a.xx + t, yy: 2.0 * self.mu * a.yy + t, xy: 2.0 * self.mu * a.xy }
    }

    pub fn scaled(&self, s: f64) -> Lame {
        Lame { lambda: s * self.lambda, mu: s * self.mu }
    }

    pub fn plus(&self, o: &Lame) -> Lame {
        Lame { lambda: self.lambda + o.lambda, mu: self.mu + o.mu }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coefficient {
    Mobility,
    Permeability,
    Modulus,
    BiotWillis,
    Potential,
    LameLambda,
    LameMu,
    ViscoLambda,
    ViscoMu,
    Eigenstrain,
}

impl Coefficient {
    pub const ALL: [Coefficient; 10] = [
        Coefficient::Mobility,
        Coefficient::Permeability,
        Coefficient::Modulus,
        Coefficient::BiotWillis,
        Coefficient::Potential,
        Coefficient::LameLambda,
        Coefficient::LameMu,
        Coefficient::ViscoLambda,
        Coefficient::ViscoMu,
        Coefficient::Eigenstrain,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Coefficient::Mobility => "m",
            Coefficient::Permeability => "kappa",
            Coefficient::Modulus => "modulus",
            Coefficient::BiotWillis => "alpha",
            Coefficient::Potential => "psi",
            Coefficient::LameLambda => "lambda",
            Coefficient::LameMu => "mu",
            Coefficient::ViscoLambda => "nu_lambda",
            Coefficient::ViscoMu => "nu_mu",
            Coefficient::Eigenstrain => "tau",
        }
    }

    /// Highest derivative order provided in closed form.
    pub fn max_order(self) -> u8 {
        2
    }
}

impl FromStr for Coefficient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Coefficient::ALL
            .iter()
            .copied()
            .find(|c| c.id() == s)
            .ok_or_else(|| Error::UnknownCoefficient(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialModel {
    pub mobility: Quadratic,
    pub permeability: Quadratic,
    pub modulus: Switched,
    pub biot_willis: Switched,
    /// `α_ψ` in `ψ(z) = α_ψ(1 − z²)²`
    pub psi_scale: f64,
    pub lame_lambda: Switched,
    pub lame_mu: Switched,
    pub visco_lambda: Switched,
    pub visco_mu: Switched,
    pub eigenstrain: Affine,
    pub epsilon: f64,
    /// Visco-elastic switch ϱ ∈ {0, 1}.
    pub rho: u8,
    /// Steepness `k` of the switch `s(z)`.
    pub switch_rate: f64,
}

impl Default for MaterialModel {
    fn default() -> Self {
        Self {
            mobility: Quadratic { c0: 1.0, c1: 0.1 },
            permeability: Quadratic { c0: 1.0, c1: 0.1 },
            modulus: Switched { c0: 1.0, c1: 0.5 },
            biot_willis: Switched { c0: 0.5, c1: 0.2 },
            psi_scale: 0.25,
            lame_lambda: Switched { c0: 1.0, c1: 0.5 },
            lame_mu: Switched { c0: 1.0, c1: 0.5 },
            visco_lambda: Switched { c0: 0.5, c1: 0.0 },
            visco_mu: Switched { c0: 0.5, c1: 0.0 },
            eigenstrain: Affine { c0: 0.02, c1: -0.02 },
            epsilon: 0.2,
            rho: 0,
            switch_rate: 2.0,
        }
    }
}

impl MaterialModel {
    /// Checks the positivity and boundedness assumptions on every coefficient.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidMaterial(msg));
        let finite = [
            self.mobility.c0,
            self.mobility.c1,
            self.permeability.c0,
            self.permeability.c1,
            self.modulus.c0,
            self.modulus.c1,
            self.biot_willis.c0,
            self.biot_willis.c1,
            self.psi_scale,
            self.lame_lambda.c0,
            self.lame_lambda.c1,
            self.lame_mu.c0,
            self.lame_mu.c1,
            self.visco_lambda.c0,
            self.visco_lambda.c1,
            self.visco_mu.c0,
            self.visco_mu.c1,
            self.eigenstrain.c0,
            self.eigenstrain.c1,
            self.epsilon,
            self.switch_rate,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite".into());
        }
        if !(self.mobility.c0 > 0.0) || self.mobility.c1 < 0.0 {
            return bad(format!(
                "mobility must satisfy m(z) >= m0 > 0 (need m0 > 0 and m1 >= 0, got m0 = {}, m1 = {})",
                self.mobility.c0, self.mobility.c1
            ));
        }
        if !(self.permeability.c0 > 0.0) || self.permeability.c1 < 0.0 {
            return bad(format!(
                "permeability must satisfy kappa(z) >= kappa0 > 0 (need kappa0 > 0 and kappa1 >= 0, got {}, {})",
                self.permeability.c0, self.permeability.c1
            ));
        }
        if !(self.modulus.c0 > 0.0) || !(self.modulus.bounds().0 > 0.0) {
            return bad(format!(
                "modulus M must be uniformly positive (need M0 > 0 and M0 + M1 > 0, got {}, {})",
                self.modulus.c0, self.modulus.c1
            ));
        }
        if !(self.psi_scale > 0.0) {
            return bad(format!("potential scale must be positive, got {}", self.psi_scale));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("interface parameter epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.switch_rate > 0.0) {
            return bad(format!("switch rate must be positive, got {}", self.switch_rate));
        }
        if self.rho > 1 {
            return bad(format!("rho must be 0 or 1, got {}", self.rho));
        }
        for (name, lam, mu) in [
            ("elasticity", self.lame_lambda, self.lame_mu),
            ("visco-elasticity", self.visco_lambda, self.visco_mu),
        ] {
            let bulk = Switched { c0: lam.c0 + mu.c0, c1: lam.c1 + mu.c1 };
            if !(mu.bounds().0 > 0.0) || !(bulk.bounds().0 > 0.0) {
                return bad(format!("{name} tensor must be positive definite (need mu > 0 and lambda + mu > 0)"));
            }
        }
        Ok(())
    }

    pub fn is_visco(&self) -> bool {
        self.rho == 1
    }

    /// Switch `s(z)` and its first two derivatives.
    #[inline]
    fn switch(&self, z: f64, order: u8) -> f64 {
        let k = self.switch_rate;
        let t = (k * z).tanh();
        match order {
            0 => 0.5 * (1.0 + t),
            1 => 0.5 * k * (1.0 - t * t),
            _ => -k * k * t * (1.0 - t * t),
        }
    }

    #[inline]
    fn switched(&self, c: &Switched, z: f64, order: u8) -> f64 {
        match order {
            0 => c.c0 + c.c1 * self.switch(z, 0),
            o => c.c1 * self.switch(z, o),
        }
    }

    /// Coefficient or derivative at a single phase value.
    pub fn eval(&self, which: Coefficient, z: f64, order: u8) -> Result<f64> {
        if order > which.max_order() {
            return Err(Error::UnsupportedDerivative { which: which.id(), order });
        }
        Ok(self.eval_unchecked(which, z, order))
    }

    #[inline]
    fn eval_unchecked(&self, which: Coefficient, z: f64, order: u8) -> f64 {
        match which {
            Coefficient::Mobility => self.mobility.eval(z, order),
            Coefficient::Permeability => self.permeability.eval(z, order),
            Coefficient::Modulus => self.switched(&self.modulus, z, order),
            Coefficient::BiotWillis => self.switched(&self.biot_willis, z, order),
            Coefficient::Potential => {
                let a = self.psi_scale;
                match order {
                    0 => a * (1.0 - z * z).powi(2),
                    1 => -4.0 * a * z * (1.0 - z * z),
                    _ => a * (12.0 * z * z - 4.0),
                }
            }
            Coefficient::LameLambda => self.switched(&self.lame_lambda, z, order),
            Coefficient::LameMu => self.switched(&self.lame_mu, z, order),
            Coefficient::ViscoLambda => self.switched(&self.visco_lambda, z, order),
            Coefficient::ViscoMu => self.switched(&self.visco_mu, z, order),
            Coefficient::Eigenstrain => match order {
                0 => self.eigenstrain.c0 + self.eigenstrain.c1 * z,
                1 => self.eigenstrain.c1,
                _ => 0.0,
            },
        }
    }

    pub fn mobility(&self, z: f64) -> f64 {
        self.mobility.eval(z, 0)
    }

    pub fn permeability(&self, z: f64) -> f64 {
        self.permeability.eval(z, 0)
    }

    pub fn modulus(&self, z: f64) -> f64 {
        self.switched(&self.modulus, z, 0)
    }

    pub fn modulus_prime(&self, z: f64) -> f64 {
        self.switched(&self.modulus, z, 1)
    }

    pub fn biot_willis(&self, z: f64) -> f64 {
        self.switched(&self.biot_willis, z, 0)
    }

    pub fn biot_willis_prime(&self, z: f64) -> f64 {
        self.switched(&self.biot_willis, z, 1)
    }

    pub fn psi(&self, z: f64) -> f64 {
        self.eval_unchecked(Coefficient::Potential, z, 0)
    }

    pub fn psi_prime(&self, z: f64) -> f64 {
        self.eval_unchecked(Coefficient::Potential, z, 1)
    }

    /// `ℂ(z)`
    pub fn stiffness(&self, z: f64) -> Lame {
        Lame { lambda: self.switched(&self.lame_lambda, z, 0), mu: self.switched(&self.lame_mu, z, 0) }
    }

    /// `ℂ'(z)`
    pub fn stiffness_prime(&self, z: f64) -> Lame {
        Lame { lambda: self.switched(&self.lame_lambda, z, 1), mu: self.switched(&self.lame_mu, z, 1) }
    }

    /// `ℂ_ν(z)`
    pub fn visco_stiffness(&self, z: f64) -> Lame {
        Lame { lambda: self.switched(&self.visco_lambda, z, 0), mu: self.switched(&self.visco_mu, z, 0) }
    }

    /// `𝒯(z)`
    pub fn eigenstrain(&self, z: f64) -> Sym2 {
        Sym2::iso(self.eigenstrain.c0 + self.eigenstrain.c1 * z)
    }

    /// `𝒯'(z)`
    pub fn eigenstrain_prime(&self, _z: f64) -> Sym2 {
        Sym2::iso(self.eigenstrain.c1)
    }

    /// `W(z, ℰ) = ℂ(z)(ℰ − 𝒯(z)) : (ℰ − 𝒯(z))`
    pub fn elastic_density(&self, z: f64, e: &Sym2) -> f64 {
        let a = *e - self.eigenstrain(z);
        self.stiffness(z).apply(&a).ddot(&a)
    }

    /// `W_{,ℰ} = 2ℂ(ℰ − 𝒯)`
    pub fn elastic_density_strain(&self, z: f64, e: &Sym2) -> Sym2 {
        let a = *e - self.eigenstrain(z);
        self.stiffness(z).apply(&a).scale(2.0)
    }

    /// `W_{,φ} = ℂ'(ℰ − 𝒯):(ℰ − 𝒯) − 2ℂ𝒯':(ℰ − 𝒯)`
    pub fn elastic_density_phase(&self, z: f64, e: &Sym2) -> f64 {
        let a = *e - self.eigenstrain(z);
        self.stiffness_prime(z).apply(&a).ddot(&a) - 2.0 * self.stiffness(z).apply(&self.eigenstrain_prime(z)).ddot(&a)
    }

    /// `[min, max]` of the modulus `M` over all phase values.
    pub fn modulus_bounds(&self) -> (f64, f64) {
        self.modulus.bounds()
    }

    /// Constant `C₂` with `|W_{,φ}(z, ℰ)| ≤ C₂(|ℰ|² + z² + 1)` for all inputs.
    pub fn growth_constant(&self) -> f64 {
        let sp = 0.5 * self.switch_rate;
        let lam1 = self.lame_lambda.c1.abs();
        let mu1 = self.lame_mu.c1.abs();
        // |ℂ'A:A| ≤ (2|μ'| + 2|λ'|)|A|²  since (tr A)² ≤ 2|A|² in 2D
        let c_prime = sp * (2.0 * mu1 + 2.0 * lam1);
        let bulk = Switched {
            c0: self.lame_lambda.c0 + self.lame_mu.c0,
            c1: self.lame_lambda.c1 + self.lame_mu.c1,
        };
        let (blo, bhi) = bulk.bounds();
        let big_lambda = blo.abs().max(bhi.abs());
        let t0 = self.eigenstrain.c0.abs();
        let t1 = self.eigenstrain.c1.abs();
        // |2ℂ𝒯':A| = 2|τ'|·|2(λ+μ)|·|tr A| ≤ 2√2·|τ'|·Λ·(|A|² + 1)
        let cross = 2.0 * std::f64::consts::SQRT_2 * t1 * big_lambda;
        // |A|² ≤ 2|ℰ|² + 4τ² ≤ 2|ℰ|² + 8τ0² + 8τ1² z²
        let spread = 2f64.max(8.0 * t1 * t1).max(8.0 * t0 * t0);
        (c_prime + cross) * spread + cross
    }
}

/// Pointwise coefficient (or derivative) over a nodal phase field.
pub fn eval_coefficient(
    material: &MaterialModel,
    which: Coefficient,
    phi: &ScalarField,
    derivative_order: u8,
) -> Result<ScalarField> {
    if derivative_order > which.max_order() {
        return Err(Error::UnsupportedDerivative { which: which.id(), order: derivative_order });
    }
    Ok(phi.map(|z| material.eval_unchecked(which, z, derivative_order)))
}

/// Pointwise `W(φ, ℰ)`.
pub fn elastic_density_w(material: &MaterialModel, phi: &ScalarField, strain: &SymTensorField) -> ScalarField {
    let mut out = phi.clone();
    for k in 0..phi.len() {
        out[k] = material.elastic_density(phi[k], &strain.at(k));
    }
    out
}

/// Pointwise `(W_{,φ}, W_{,ℰ})`.
pub fn elastic_density_derivatives(
    material: &MaterialModel,
    phi: &ScalarField,
    strain: &SymTensorField,
) -> (ScalarField, SymTensorField) {
    let mut w_phi = phi.clone();
    let mut w_strain = strain.clone();
    for k in 0..phi.len() {
        let e = strain.at(k);
        w_phi[k] = material.elastic_density_phase(phi[k], &e);
        w_strain.set(k, material.elastic_density_strain(phi[k], &e));
    }
    (w_phi, w_strain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{EdgeTags, Grid};

    fn grid() -> Grid {
        Grid::unit_square(5, EdgeTags::clamped()).unwrap()
    }

    #[test]
    fn default_model_is_valid() {
        MaterialModel::default().validate().unwrap();
    }

    #[test]
    fn constant_mobility() {
        let g = grid();
        let mat = MaterialModel { mobility: Quadratic { c0: 1.0, c1: 0.0 }, ..Default::default() };
        let phi = ScalarField::from_fn(&g, |x, y| x - y);
        let m = eval_coefficient(&mat, Coefficient::Mobility, &phi, 0).unwrap();
        assert!(m.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn double_well_derivative() {
        let g = grid();
        let mat = MaterialModel { psi_scale: 1.0, ..Default::default() };
        let half = ScalarField::constant(&g, 0.5);
        let d = eval_coefficient(&mat, Coefficient::Potential, &half, 1).unwrap();
        assert!(d.values().iter().all(|&v| (v + 1.5).abs() < 1e-15));
        for pure in [-1.0, 1.0] {
            let d = eval_coefficient(&mat, Coefficient::Potential, &ScalarField::constant(&g, pure), 1).unwrap();
            assert!(d.max_abs() == 0.0);
        }
    }

    #[test]
    fn unknown_id_and_order() {
        assert!(matches!("bogus".parse::<Coefficient>(), Err(Error::UnknownCoefficient(_))));
        assert_eq!("kappa".parse::<Coefficient>().unwrap(), Coefficient::Permeability);
        let g = grid();
        let phi = ScalarField::zeros(&g);
        let mat = MaterialModel::default();
        assert!(matches!(
            eval_coefficient(&mat, Coefficient::Modulus, &phi, 3),
            Err(Error::UnsupportedDerivative { order: 3, .. })
        ));
    }

    fn unit_lame() -> MaterialModel {
        MaterialModel {
            lame_lambda: Switched::constant(1.0),
            lame_mu: Switched::constant(1.0),
            eigenstrain: Affine { c0: 0.0, c1: 0.0 },
            ..Default::default()
        }
    }

    #[test]
    fn identity_strain_density() {
        let g = grid();
        let mat = unit_lame();
        let phi = ScalarField::from_fn(&g, |x, _| x);
        let e = SymTensorField::from_fn(&g, |_, _| Sym2::iso(1.0));
        let w = elastic_density_w(&mat, &phi, &e);
        assert!(w.values().iter().all(|&v| (v - 8.0).abs() < 1e-14));
        let (w_phi, w_e) = elastic_density_derivatives(&mat, &phi, &e);
        assert!(w_phi.max_abs() == 0.0);
        for k in 0..g.len() {
            let s = w_e.at(k);
            assert!((s.xx - 8.0).abs() < 1e-14 && (s.yy - 8.0).abs() < 1e-14 && s.xy == 0.0);
        }
    }

    #[test]
    fn attained_eigenstrain_has_zero_energy() {
        let g = grid();
        let mat = MaterialModel::default();
        let phi = ScalarField::from_fn(&g, |x, y| x * y - 0.3);
        let e = SymTensorField::from_fn(&g, |x, y| mat.eigenstrain(x * y - 0.3));
        let w = elastic_density_w(&mat, &phi, &e);
        assert!(w.max_abs() < 1e-15);
    }

    #[test]
    fn density_matches_scalar_reference() {
        let mat = MaterialModel::default();
        let z: f64 = 0.37;
        let e = Sym2::new(0.3, -0.2, 0.15);
        let s = 0.5 * (1.0 + (mat.switch_rate * z).tanh());
        let lam = mat.lame_lambda.c0 + mat.lame_lambda.c1 * s;
        let mu = mat.lame_mu.c0 + mat.lame_mu.c1 * s;
        let tau = mat.eigenstrain.c0 + mat.eigenstrain.c1 * z;
        let (a, b, c) = (e.xx - tau, e.yy - tau, e.xy);
        let expected = lam * (a + b).powi(2) + 2.0 * mu * (a * a + b * b + 2.0 * c * c);
        assert!((mat.elastic_density(z, &e) - expected).abs() < 1e-14);
    }

    #[test]
    fn rejects_nonpositive_mobility() {
        let mat = MaterialModel { mobility: Quadratic { c0: -1.0, c1: 0.0 }, ..Default::default() };
        let err = mat.validate().unwrap_err().to_string();
        assert!(err.contains("m(z) >= m0 > 0"), "{err}");
    }
}
