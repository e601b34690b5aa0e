//! Pointwise constitutive laws for plane-strain elasticity.
//!
//! Every law is expressed in terms of the displacement gradient so the
//! assembly code can treat small-strain and finite-strain problems the same
//! way: the "stress" returned by [`Law::first_piola`] is the work conjugate of
//! `∇u` (Cauchy stress for the linear law, first Piola–Kirchhoff stress for
//! Neo-Hookean), and [`Law::tangent`] is its derivative.

use super::material::{MaterialModel, MaterialProps};
use super::tensor::{Mat2, Tangent};
use super::FemError;

/// `ε = ½(∇u + ∇uᵀ)`.
pub fn small_strain(grad_u: &Mat2) -> Mat2 {
    grad_u.sym()
}

/// `σ = λ tr(ε) I + 2μ ε` (in-plane components under plane strain).
pub fn linear_stress(eps: &Mat2, mat: &MaterialProps) -> Mat2 {
    Mat2::IDENTITY * (mat.lambda * eps.trace()) + *eps * (2.0 * mat.mu)
}

/// Compressible Neo-Hookean energy per unit reference volume, with the
/// `Ic - 2` offset of a two-dimensional deformation gradient.
pub fn neo_hookean_energy_density(f: &Mat2, mat: &MaterialProps) -> Result<f64, FemError> {
    let j = f.det();
    if !(j > 0.0) {
        return Err(FemError::InvertedElement { element: None, det: j });
    }
    let c = f.transpose() * *f;
    let ic = c.trace();
    let ln_j = j.ln();
    Ok(0.5 * mat.mu * (ic - 2.0) - mat.mu * ln_j + 0.5 * mat.lambda * ln_j * ln_j)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Law {
    Linear { mu: f64, lambda: f64 },
    NeoHookean { mu: f64, lambda: f64 },
}

impl Law {
    pub fn for_material(mat: &MaterialProps) -> Self {
        match mat.model {
            MaterialModel::LinearElastic => Law::Linear { mu: mat.mu, lambda: mat.lambda },
            MaterialModel::NeoHookean => Law::NeoHookean { mu: mat.mu, lambda: mat.lambda },
        }
    }

    pub fn energy(&self, grad_u: &Mat2) -> Result<f64, FemError> {
        match *self {
            Law::Linear { mu, lambda } => {
                let eps = grad_u.sym();
                let tr = eps.trace();
                Ok(0.5 * lambda * tr * tr + mu * eps.ddot(&eps))
            }
            Law::NeoHookean { mu, lambda } => {
                let f = Mat2::IDENTITY + *grad_u;
                neo_hookean_energy_density(
                    &f,
                    &MaterialProps {
                        youngs_modulus: None,
                        poisson_ratio: None,
                        mu,
                        lambda,
                        model: MaterialModel::NeoHookean,
                    },
                )
            }
        }
    }

    pub fn first_piola(&self, grad_u: &Mat2) -> Result<Mat2, FemError> {
        match *self {
            Law::Linear { mu, lambda } => {
                let eps = grad_u.sym();
                Ok(Mat2::IDENTITY * (lambda * eps.trace()) + eps * (2.0 * mu))
            }
            Law::NeoHookean { mu, lambda } => {
                let f = Mat2::IDENTITY + *grad_u;
                let j = f.det();
                if !(j > 0.0) {
                    return Err(FemError::InvertedElement { element: None, det: j });
                }
                let f_inv_t = f.inverse().expect("det > 0").transpose();
                Ok(f * mu + f_inv_t * (lambda * j.ln() - mu))
            }
        }
    }

    pub fn tangent(&self, grad_u: &Mat2) -> Result<Tangent, FemError> {
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mut t: Tangent = [[[[0.0; 2]; 2]; 2]; 2];
        match *self {
            Law::Linear { mu, lambda } => {
                for (i, ti) in t.iter_mut().enumerate() {
                    for (jj, tij) in ti.iter_mut().enumerate() {
                        for (k, tijk) in tij.iter_mut().enumerate() {
                            for (l, v) in tijk.iter_mut().enumerate() {
                                *v = lambda * delta(i, jj) * delta(k, l)
                                    + mu * (delta(i, k) * delta(jj, l) + delta(i, l) * delta(jj, k));
                            }
                        }
                    }
                }
            }
            Law::NeoHookean { mu, lambda } => {
                let f = Mat2::IDENTITY + *grad_u;
                let j = f.det();
                if !(j > 0.0) {
                    return Err(FemError::InvertedElement { element: None, det: j });
                }
                let fi = f.inverse().expect("det > 0").0;
                let coef = lambda * j.ln() - mu;
                for (i, ti) in t.iter_mut().enumerate() {
                    for (jj, tij) in ti.iter_mut().enumerate() {
                        for (k, tijk) in tij.iter_mut().enumerate() {
                            for (l, v) in tijk.iter_mut().enumerate() {
                                *v = mu * delta(i, k) * delta(jj, l) + lambda * fi[jj][i] * fi[l][k]
                                    - coef * fi[l][i] * fi[jj][k];
                            }
                        }
                    }
                }
            }
        }
        Ok(t)
    }

    /// Out-of-plane Cauchy stress `σ_zz` for the plane-strain state.
    pub fn sigma_zz(&self, grad_u: &Mat2) -> Result<f64, FemError> {
        match *self {
            Law::Linear { lambda, .. } => Ok(lambda * grad_u.trace()),
            Law::NeoHookean { lambda, .. } => {
                let j = (Mat2::IDENTITY + *grad_u).det();
                if !(j > 0.0) {
                    return Err(FemError::InvertedElement { element: None, det: j });
                }
                Ok(lambda * j.ln() / j)
            }
        }
    }

    /// In-plane Cauchy stress.
    pub fn cauchy(&self, grad_u: &Mat2) -> Result<Mat2, FemError> {
        match self {
            Law::Linear { .. } => self.first_piola(grad_u),
            Law::NeoHookean { .. } => {
                let f = Mat2::IDENTITY + *grad_u;
                let p = self.first_piola(grad_u)?;
                Ok((p * f.transpose()).scale(1.0 / f.det()))
            }
        }
    }
}
