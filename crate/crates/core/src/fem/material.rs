use serde::{Deserialize, Serialize};

use super::FemError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialModel {
    LinearElastic,
    NeoHookean,
}

impl std::fmt::Display for MaterialModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MaterialModel::LinearElastic => "linear_elastic",
            MaterialModel::NeoHookean => "neo_hookean",
        })
    }
}

/// Isotropic elastic constants. `mu` and `lambda` are authoritative; `E` and
/// `nu` are kept only when the material was specified through them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialProps {
    pub youngs_modulus: Option<f64>,
    pub poisson_ratio: Option<f64>,
    pub mu: f64,
    pub lambda: f64,
    pub model: MaterialModel,
}

/// Lamé constants `(mu, lambda)` from Young's modulus and Poisson's ratio.
pub fn lame_from_e_nu(youngs: f64, nu: f64) -> Result<(f64, f64), FemError> {
    if !(youngs.is_finite() && youngs > 0.0) {
        return Err(FemError::InvalidMaterial(format!(
            "Young's modulus must be positive, got {youngs}"
        )));
    }
    if !(nu > 0.0 && nu < 0.5) {
        return Err(FemError::InvalidMaterial(format!(
            "Poisson's ratio must lie in (0, 0.5), got {nu}"
        )));
    }
    let mu = youngs / (2.0 * (1.0 + nu));
    let lambda = youngs * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    Ok((mu, lambda))
}

/// Inverse of [`lame_from_e_nu`] for Young's modulus.
pub fn youngs_from_lame(mu: f64, lambda: f64) -> f64 {
    mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu)
}

impl MaterialProps {
    pub fn from_youngs(youngs: f64, nu: f64, model: MaterialModel) -> Result<Self, FemError> {
        let (mu, lambda) = lame_from_e_nu(youngs, nu)?;
        Ok(MaterialProps {
            youngs_modulus: Some(youngs),
            poisson_ratio: Some(nu),
            mu,
            lambda,
            model,
        })
    }

    pub fn from_lame(mu: f64, lambda: f64, model: MaterialModel) -> Result<Self, FemError> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(FemError::InvalidMaterial(format!("mu must be positive, got {mu}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(FemError::InvalidMaterial(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(MaterialProps {
            youngs_modulus: None,
            poisson_ratio: None,
            mu,
            lambda,
            model,
        })
    }

    pub fn with_model(mut self, model: MaterialModel) -> Self {
        self.model = model;
        self
    }

    /// Poisson's ratio implied by the Lamé pair.
    pub fn nu(&self) -> f64 {
        self.lambda / (2.0 * (self.lambda + self.mu))
    }

    /// `E / (1 - nu^2)`, the uniaxial-strain stiffness under plane strain
    /// with free lateral contraction.
    pub fn plane_strain_modulus(&self) -> f64 {
        4.0 * self.mu * (self.lambda + self.mu) / (self.lambda + 2.0 * self.mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lame_reference_values() {
        let (mu, lambda) = lame_from_e_nu(1e9, 0.3).unwrap();
        // 1e9 / 2.6 and 0.3e9 / (1.3 * 0.4)
        assert!((mu - 384_615_384.615_384_6).abs() / mu < 1e-12);
        assert!((lambda - 576_923_076.923_077).abs() / lambda < 1e-12);

        let (mu, _) = lame_from_e_nu(2.6e9, 0.3).unwrap();
        assert!((mu - 1e9).abs() < 1e-3);
    }

    #[test]
    fn quarter_poisson_gives_equal_lame() {
        let (mu, lambda) = lame_from_e_nu(7.3e10, 0.25).unwrap();
        assert!((mu - lambda).abs() / mu < 1e-14);
    }

    #[test]
    fn rejects_out_of_range_poisson() {
        for nu in [0.5, 0.6, 0.0, -0.2, f64::NAN] {
            assert!(matches!(lame_from_e_nu(1e9, nu), Err(FemError::InvalidMaterial(_))));
        }
        assert!(lame_from_e_nu(-1.0, 0.3).is_err());
    }

    #[test]
    fn effective_quantities() {
        let m = MaterialProps::from_youngs(1e9, 0.3, MaterialModel::LinearElastic).unwrap();
        assert!((m.nu() - 0.3).abs() < 1e-14);
        let expect = 1e9 / (1.0 - 0.09);
        assert!((m.plane_strain_modulus() - expect).abs() / expect < 1e-14);
    }
}
