//! Finite spectral expansions `y = Σ c_k e_k` of solenoidal fields.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::spectral_basis::{DomainKind, Mode, Parity, SpectralBasis};

#[derive(Clone)]
pub struct Field {
    basis: Arc<SpectralBasis>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("basis", &self.basis)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        same_basis(&self.basis, &other.basis) && self.coeffs == other.coeffs
    }
}

fn same_basis(a: &Arc<SpectralBasis>, b: &Arc<SpectralBasis>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// One `{mode, coefficient}` record of the JSON field format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldEntry {
    pub mode: Mode,
    pub coefficient: f64,
}

impl Field {
    pub fn zeros(basis: &Arc<SpectralBasis>) -> Self {
        Field {
            basis: basis.clone(),
            coeffs: vec![0.0; basis.len()],
        }
    }

    pub fn from_coeffs(basis: &Arc<SpectralBasis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::LengthMismatch {
                expected: basis.len(),
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("field coefficients"));
        }
        Ok(Field {
            basis: basis.clone(),
            coeffs,
        })
    }

    /// Unchecked constructor for internally produced coefficient vectors.
    pub(crate) fn from_raw(basis: Arc<SpectralBasis>, coeffs: Vec<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), basis.len());
        Field { basis, coeffs }
    }

    /// The `index`-th basis field `e_index`.
    pub fn basis_vector(basis: &Arc<SpectralBasis>, index: usize) -> Result<Self> {
        basis.entry(index)?;
        let mut f = Field::zeros(basis);
        f.coeffs[index] = 1.0;
        Ok(f)
    }

    pub fn from_mode(basis: &Arc<SpectralBasis>, mode: &Mode, value: f64) -> Result<Self> {
        let i = basis.index_of(mode)?;
        let mut f = Field::zeros(basis);
        f.coeffs[i] = value;
        Ok(f)
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn check_same_basis(&self, other: &Field) -> Result<()> {
        if same_basis(&self.basis, &other.basis) {
            Ok(())
        } else {
            Err(Error::BasisMismatch)
        }
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_same_basis(other)?;
        let c = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Field::from_raw(self.basis.clone(), c))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_same_basis(other)?;
        let c = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(Field::from_raw(self.basis.clone(), c))
    }

    pub fn scale(&self, alpha: f64) -> Field {
        Field::from_raw(self.basis.clone(), self.coeffs.iter().map(|c| alpha * c).collect())
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: f64, x: &Field) -> Result<()> {
        self.check_same_basis(x)?;
        linalg::axpy(alpha, &x.coeffs, &mut self.coeffs);
        Ok(())
    }

    pub fn inner_h(&self, other: &Field) -> Result<f64> {
        self.check_same_basis(other)?;
        Ok(linalg::dot(&self.coeffs, &other.coeffs))
    }

    pub fn norm_h(&self) -> f64 {
        linalg::norm(&self.coeffs)
    }

    /// `‖y‖_{D(A^γ)} = (Σ λ_k^{2γ} y_k²)^{1/2}`.
    pub fn norm_da(&self, gamma: f64) -> f64 {
        self.basis
            .entries()
            .iter()
            .zip(&self.coeffs)
            .map(|(e, c)| e.lambda.powf(2.0 * gamma) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm_v(&self) -> f64 {
        self.basis
            .entries()
            .iter()
            .zip(&self.coeffs)
            .map(|(e, c)| e.lambda * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Keeps the first `m` coefficients (orthogonal projection onto `ℰ_m`).
    pub fn truncate(&self, m: usize) -> Field {
        let mut c = self.coeffs.clone();
        c.iter_mut().skip(m).for_each(|v| *v = 0.0);
        Field::from_raw(self.basis.clone(), c)
    }

    /// `‖P_{ℰ_m^⊥} y‖²_H`.
    pub fn tail_norm_sq(&self, m: usize) -> f64 {
        self.coeffs.iter().skip(m).map(|c| c * c).sum()
    }

    /// Scalar vorticity `∇⊥·y = -∂₂y₁ + ∂₁y₂`, computed per mode.
    pub fn curl(&self) -> VorticityField {
        let mut w = vec![0.0; self.coeffs.len()];
        match self.basis.domain().kind {
            DomainKind::Torus => {
                for (i, (e, &c)) in self.basis.entries().iter().zip(&self.coeffs).enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let k = e.mode.wavevector;
                    let (target, sign) = match e.mode.parity {
                        Some(Parity::Cos) => (Parity::Sin, -1.0),
                        _ => (Parity::Cos, 1.0),
                    };
                    let j = if e.mode.parity == Some(target) {
                        i
                    } else {
                        self.basis
                            .index_of(&Mode::torus(k[0], k[1], target))
                            .expect("both parities are enumerated")
                    };
                    w[j] += sign * e.kappa_norm * c;
                }
            }
            DomainKind::RectangleLions => {
                for ((e, &c), wi) in self.basis.entries().iter().zip(&self.coeffs).zip(&mut w) {
                    *wi = -e.kappa_norm * c;
                }
            }
        }
        VorticityField {
            basis: self.basis.clone(),
            coeffs: w,
        }
    }

    /// Exact Galerkin coefficients of `Π((y·∇)z)` within the cutoff.
    pub fn bilinear(&self, z: &Field) -> Result<Field> {
        self.check_same_basis(z)?;
        let mut out = vec![0.0; self.len()];
        self.basis.interaction().bilinear(&self.coeffs, &z.coeffs, &mut out);
        Ok(Field::from_raw(self.basis.clone(), out))
    }

    /// `B(y, y)`, through the dealiased FFT on the torus.
    pub fn quadratic(&self) -> Field {
        let inter = self.basis.interaction();
        let mut ws = inter.workspace();
        let mut out = vec![0.0; self.len()];
        inter.quadratic(&self.coeffs, &mut out, &mut ws);
        Field::from_raw(self.basis.clone(), out)
    }

    /// `ℬ(self)y = B(self, y) + B(y, self)`.
    pub fn cal_b(&self, y: &Field) -> Result<Field> {
        self.bilinear(y)?.add(&y.bilinear(self)?)
    }

    /// `b(self, z, w) = (B(self, z), w)_H`.
    pub fn b_form(&self, z: &Field, w: &Field) -> Result<f64> {
        self.bilinear(z)?.inner_h(w)
    }

    /// `Σ |c_k| (1 + |κ_k|) sup|e_k|`, an upper bound for `sup|y| + sup|∇y|`.
    pub fn c1_bound(&self) -> f64 {
        self.basis
            .entries()
            .iter()
            .zip(&self.coeffs)
            .enumerate()
            .map(|(i, (e, c))| c.abs() * (1.0 + e.kappa_norm) * self.basis.sup_norm(i).unwrap_or(0.0))
            .sum()
    }

    pub fn evaluate(&self, point: [f64; 2]) -> Result<[f64; 2]> {
        let mut v = [0.0; 2];
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                let e = self.basis.evaluate(i, point)?;
                v[0] += c * e[0];
                v[1] += c * e[1];
            }
        }
        Ok(v)
    }

    /// Jacobian `J[c][d] = ∂_d y_c`.
    pub fn evaluate_gradient(&self, point: [f64; 2]) -> Result<[[f64; 2]; 2]> {
        let mut g = [[0.0; 2]; 2];
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                let e = self.basis.evaluate_gradient(i, point)?;
                for a in 0..2 {
                    for b in 0..2 {
                        g[a][b] += c * e[a][b];
                    }
                }
            }
        }
        Ok(g)
    }

    pub fn to_entries(&self) -> Vec<FieldEntry> {
        self.basis
            .entries()
            .iter()
            .zip(&self.coeffs)
            .map(|(e, &c)| FieldEntry {
                mode: e.mode,
                coefficient: c,
            })
            .collect()
    }

    /// Builds a field from `{mode, coefficient}` records; unlisted modes are
    /// zero, and a mode listed twice is rejected.
    pub fn from_entries(basis: &Arc<SpectralBasis>, entries: &[FieldEntry]) -> Result<Self> {
        let mut c = vec![0.0; basis.len()];
        let mut seen = vec![false; basis.len()];
        for e in entries {
            let i = basis.index_of(&e.mode)?;
            if seen[i] {
                return Err(Error::InvalidParameter(format!("mode {} listed twice", e.mode)));
            }
            seen[i] = true;
            c[i] = e.coefficient;
        }
        Field::from_coeffs(basis, c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_entries())?)
    }

    pub fn from_json(basis: &Arc<SpectralBasis>, s: &str) -> Result<Self> {
        let entries: Vec<FieldEntry> = serde_json::from_str(s)?;
        Field::from_entries(basis, &entries)
    }
}

/// Scalar field over the orthonormal scalar eigenbasis: `a·sin/cos(κ·x)`
/// indexed like the velocity modes on the torus, normalized sine products on
/// the rectangle.
#[derive(Clone, Debug, PartialEq)]
pub struct VorticityField {
    basis: Arc<SpectralBasis>,
    coeffs: Vec<f64>,
}

impl VorticityField {
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn norm_l2(&self) -> f64 {
        linalg::norm(&self.coeffs)
    }

    pub fn evaluate(&self, point: [f64; 2]) -> Result<f64> {
        let mut v = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                v += c * self.basis.evaluate_scalar(i, point)?;
            }
        }
        Ok(v)
    }

    pub fn evaluate_gradient(&self, point: [f64; 2]) -> Result<[f64; 2]> {
        let mut g = [0.0; 2];
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                let d = self.basis.evaluate_scalar_gradient(i, point)?;
                g[0] += c * d[0];
                g[1] += c * d[1];
            }
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{rng, unit_field};
    use crate::spectral_basis::DomainSpec;

    fn torus(n: usize) -> Arc<SpectralBasis> {
        SpectralBasis::enumerate(DomainSpec::standard_torus(), n).unwrap()
    }

    fn rect(n: usize) -> Arc<SpectralBasis> {
        SpectralBasis::enumerate(DomainSpec::rectangle(1.0, 1.3).unwrap(), n).unwrap()
    }

    #[test]
    fn linear_ops() {
        let b = torus(2);
        let e1 = Field::basis_vector(&b, 0).unwrap();
        let e2 = Field::basis_vector(&b, 1).unwrap();
        assert_eq!(e1.inner_h(&e1).unwrap(), 1.0);
        assert_eq!(e1.inner_h(&e2).unwrap(), 0.0);
        assert_eq!(Field::zeros(&b).norm_h(), 0.0);
        let other = torus(3);
        assert!(matches!(e1.add(&Field::zeros(&other)), Err(Error::BasisMismatch)));
        assert!(Field::from_coeffs(&b, vec![0.0; 3]).is_err());
        assert!(Field::from_coeffs(&b, vec![f64::NAN; b.len()]).is_err());
    }

    #[test]
    fn norm_family() {
        let b = torus(3);
        for i in 0..b.len() {
            let e = Field::basis_vector(&b, i).unwrap();
            let lam = b.entries()[i].lambda;
            assert!((e.norm_v().powi(2) - lam).abs() < 1e-12 * lam);
            assert!((e.norm_da(-0.5) - lam.powf(-0.5)).abs() < 1e-14);
            // ‖y‖_V² = ‖y‖_H² + ‖curl y‖²
            assert!((e.curl().norm_l2().powi(2) - (lam - 1.0)).abs() < 1e-12 * lam);
        }
        let mut r = rng(3);
        for _ in 0..10 {
            let y = unit_field(&b, &mut r);
            assert!((y.norm_da(0.0) - y.norm_h()).abs() < 1e-12);
            let lhs = y.norm_v().powi(2);
            let rhs = y.norm_h().powi(2) + y.curl().norm_l2().powi(2);
            assert!((lhs - rhs).abs() < 1e-12 * lhs);
        }
    }

    #[test]
    fn curl_matches_pointwise_derivatives() {
        for b in [torus(3), rect(3)] {
            let y = unit_field(&b, &mut rng(11));
            let w = y.curl();
            for p in [[0.3, 0.4], [0.71, 1.1], [0.05, 0.9]] {
                let g = y.evaluate_gradient(p).unwrap();
                let direct = g[1][0] - g[0][1];
                assert!((direct - w.evaluate(p).unwrap()).abs() < 1e-12);
            }
        }
        assert_eq!(Field::zeros(&torus(2)).curl().norm_l2(), 0.0);
    }

    #[test]
    fn torus_eigenfields_are_equilibria() {
        let b = torus(4);
        for i in 0..b.len() {
            let e = Field::basis_vector(&b, i).unwrap();
            assert!(e.bilinear(&e).unwrap().norm_h() < 1e-12);
            assert!(e.quadratic().norm_h() < 1e-12);
            assert!(e.cal_b(&e).unwrap().norm_h() < 1e-12);
        }
    }

    #[test]
    fn fft_and_exact_routes_agree() {
        for n in [1, 2, 5, 8] {
            let b = torus(n);
            let y = unit_field(&b, &mut rng(n as u64));
            let exact = y.bilinear(&y).unwrap();
            let fast = y.quadratic();
            assert!(exact.sub(&fast).unwrap().norm_h() < 1e-12, "n={n}");
        }
        let b = SpectralBasis::enumerate(DomainSpec::torus(1.0, 2.7).unwrap(), 4).unwrap();
        let y = unit_field(&b, &mut rng(5));
        assert!(y.bilinear(&y).unwrap().sub(&y.quadratic()).unwrap().norm_h() < 1e-11);
    }

    #[test]
    fn cos_sin_pair_interacts_on_two_wavevectors() {
        let b = torus(3);
        let y = Field::from_mode(&b, &Mode::torus(1, 0, Parity::Cos), 1.0).unwrap();
        let z = Field::from_mode(&b, &Mode::torus(0, 1, Parity::Sin), 1.0).unwrap();
        let bz = y.bilinear(&z).unwrap();
        for (e, c) in b.entries().iter().zip(bz.coeffs()) {
            let k = e.mode.wavevector;
            if k != [1, 1] && k != [1, -1] {
                assert!(c.abs() < 1e-14, "{} {c}", e.mode);
            }
        }
        assert!(bz.norm_h() > 0.1);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn galerkin_consistency_against_quadrature() {
        for b in [torus(2), rect(3)] {
            let (pts, w) = b.quadrature_grid();
            let n = b.len();
            let vals: Vec<Vec<[f64; 2]>> = (0..n)
                .map(|i| pts.iter().map(|p| b.evaluate(i, *p).unwrap()).collect())
                .collect();
            let grads: Vec<Vec<[[f64; 2]; 2]>> = (0..n)
                .map(|i| pts.iter().map(|p| b.evaluate_gradient(i, *p).unwrap()).collect())
                .collect();
            for i in 0..n {
                let ei = Field::basis_vector(&b, i).unwrap();
                for j in 0..n {
                    let bij = ei.bilinear(&Field::basis_vector(&b, j).unwrap()).unwrap();
                    for k in 0..n {
                        let mut q = 0.0;
                        for p in 0..pts.len() {
                            let u = vals[i][p];
                            let g = grads[j][p];
                            let adv = [u[0] * g[0][0] + u[1] * g[0][1], u[0] * g[1][0] + u[1] * g[1][1]];
                            q += adv[0] * vals[k][p][0] + adv[1] * vals[k][p][1];
                        }
                        q *= w;
                        assert!(
                            (q - bij.coeffs()[k]).abs() < 1e-10,
                            "({i},{j},{k}) {q} {}",
                            bij.coeffs()[k]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn c1_bound_dominates_grid_sup() {
        for b in [torus(3), rect(3)] {
            let mut r = rng(2);
            for _ in 0..5 {
                let y = unit_field(&b, &mut r);
                let [lx, ly] = b.domain().lengths;
                let mut sup_v: f64 = 0.0;
                let mut sup_g: f64 = 0.0;
                for i in 0..=40 {
                    for j in 0..=40 {
                        let p = [lx * i as f64 / 40.0, ly * j as f64 / 40.0];
                        let v = y.evaluate(p).unwrap();
                        let g = y.evaluate_gradient(p).unwrap();
                        sup_v = sup_v.max(v[0].hypot(v[1]));
                        let fro = g.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
                        sup_g = sup_g.max(fro);
                    }
                }
                assert!(y.c1_bound() >= sup_v + sup_g);
                assert!((y.scale(-2.5).c1_bound() - 2.5 * y.c1_bound()).abs() < 1e-12 * y.c1_bound());
            }
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let b = torus(3);
        let y = unit_field(&b, &mut rng(9)).scale(std::f64::consts::PI);
        let s = y.to_json().unwrap();
        let back = Field::from_json(&b, &s).unwrap();
        assert_eq!(back, y);
    }
}
