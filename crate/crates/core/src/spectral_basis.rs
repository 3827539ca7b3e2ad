//! Orthonormal eigenfields of the shifted Stokes operator `A = 1 - ΠΔ`.
//!
//! Two backends are provided. On the periodic torus every eigenfield is a
//! plane wave `a·trig(κ·x)·κ⊥/|κ|`; the wavevectors `k` and `-k` span the same
//! pair of fields, so only the representative whose first nonzero component is
//! positive is enumerated, once per parity. On the rectangle with Lions
//! boundary conditions (tangential velocity, vanishing vorticity on the
//! boundary) the eigenfields are `∇⊥` of normalized products of sines.
//!
//! Eigenvalues are `λ = 1 + |κ|²` with `κ` the physical wavevector, computed
//! in closed form.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::Interaction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Torus,
    RectangleLions,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: DomainKind,
    /// Torus periods or rectangle side lengths.
    pub lengths: [f64; 2],
}

impl DomainSpec {
    pub fn new(kind: DomainKind, lengths: [f64; 2]) -> Result<Self> {
        let spec = DomainSpec { kind, lengths };
        spec.validate()?;
        Ok(spec)
    }

    pub fn torus(lx: f64, ly: f64) -> Result<Self> {
        Self::new(DomainKind::Torus, [lx, ly])
    }

    /// The `2π × 2π` torus.
    pub fn standard_torus() -> Self {
        DomainSpec {
            kind: DomainKind::Torus,
            lengths: [2.0 * PI, 2.0 * PI],
        }
    }

    pub fn rectangle(lx: f64, ly: f64) -> Result<Self> {
        Self::new(DomainKind::RectangleLions, [lx, ly])
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengths.iter().all(|l| l.is_finite() && *l > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidDomain(format!(
                "lengths must be finite and positive, got {:?}",
                self.lengths
            )))
        }
    }

    pub fn area(&self) -> f64 {
        self.lengths[0] * self.lengths[1]
    }

    /// Angular wavenumber per unit index along each axis.
    pub fn wavenumber_scale(&self) -> [f64; 2] {
        let base = match self.kind {
            DomainKind::Torus => 2.0 * PI,
            DomainKind::RectangleLions => PI,
        };
        [base / self.lengths[0], base / self.lengths[1]]
    }

    /// Physical wavevector `κ(k)`.
    pub fn kappa(&self, k: [i32; 2]) -> [f64; 2] {
        let s = self.wavenumber_scale();
        [s[0] * k[0] as f64, s[1] * k[1] as f64]
    }

    /// `|κ(k)|²`, with the integer part accumulated exactly when both axes
    /// share a scale so that symmetric modes tie bit-for-bit.
    pub fn kappa_sq(&self, k: [i32; 2]) -> f64 {
        let s = self.wavenumber_scale();
        let (a, b) = ((k[0] as i64).pow(2), (k[1] as i64).pow(2));
        if s[0] == s[1] {
            s[0] * s[0] * (a + b) as f64
        } else {
            s[0] * s[0] * a as f64 + s[1] * s[1] * b as f64
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self.kind {
            DomainKind::Torus => p.iter().all(|v| v.is_finite()),
            DomainKind::RectangleLions => {
                let eps = 1e-12 * self.lengths[0].max(self.lengths[1]);
                (0..2).all(|d| p[d] >= -eps && p[d] <= self.lengths[d] + eps)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Sin,
    Cos,
}

/// Wavevector plus parity (torus only).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub wavevector: [i32; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity: Option<Parity>,
}

impl Mode {
    pub fn torus(k1: i32, k2: i32, parity: Parity) -> Self {
        Mode {
            wavevector: [k1, k2],
            parity: Some(parity),
        }
    }

    pub fn rectangle(k1: i32, k2: i32) -> Self {
        Mode {
            wavevector: [k1, k2],
            parity: None,
        }
    }

    /// Representative of `±k` whose first nonzero component is positive.
    pub fn canonical_wavevector(k: [i32; 2]) -> [i32; 2] {
        if k[0] > 0 || (k[0] == 0 && k[1] > 0) {
            k
        } else {
            [-k[0], -k[1]]
        }
    }

    pub fn is_canonical_torus(k: [i32; 2]) -> bool {
        k[0] > 0 || (k[0] == 0 && k[1] > 0)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b] = self.wavevector;
        match self.parity {
            Some(Parity::Sin) => write!(f, "Sin({a},{b})"),
            Some(Parity::Cos) => write!(f, "Cos({a},{b})"),
            None => write!(f, "({a},{b})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisEntry {
    pub mode: Mode,
    pub lambda: f64,
    pub kappa: [f64; 2],
    /// `|κ|`.
    pub kappa_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub wavevector: [i32; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity: Option<Parity>,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisManifest {
    pub domain: DomainSpec,
    pub cutoff: usize,
    pub modes: Vec<ManifestEntry>,
}

pub struct SpectralBasis {
    domain: DomainSpec,
    cutoff: usize,
    entries: Vec<BasisEntry>,
    index: HashMap<Mode, usize>,
    interaction: OnceLock<Interaction>,
}

impl fmt::Debug for SpectralBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralBasis")
            .field("domain", &self.domain)
            .field("cutoff", &self.cutoff)
            .field("len", &self.entries.len())
            .finish()
    }
}

impl PartialEq for SpectralBasis {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.cutoff == other.cutoff
    }
}

impl SpectralBasis {
    /// All modes with `|k|∞ ≤ cutoff`, sorted by eigenvalue, then wavevector,
    /// then parity.
    ///
    /// The torus yields `(2N+1)² - 1` fields (one per canonical wavevector and
    /// parity); the rectangle yields `N²`.
    pub fn enumerate(domain: DomainSpec, cutoff: usize) -> Result<Arc<Self>> {
        domain.validate()?;
        if cutoff == 0 {
            return Err(Error::EmptyBasis);
        }
        let n = cutoff as i32;
        let mut modes = Vec::new();
        match domain.kind {
            DomainKind::Torus => {
                for k1 in -n..=n {
                    for k2 in -n..=n {
                        if Mode::is_canonical_torus([k1, k2]) {
                            modes.push(Mode::torus(k1, k2, Parity::Sin));
                            modes.push(Mode::torus(k1, k2, Parity::Cos));
                        }
                    }
                }
            }
            DomainKind::RectangleLions => {
                for k1 in 1..=n {
                    for k2 in 1..=n {
                        modes.push(Mode::rectangle(k1, k2));
                    }
                }
            }
        }
        let mut entries: Vec<BasisEntry> = modes
            .into_iter()
            .map(|mode| {
                let ksq = domain.kappa_sq(mode.wavevector);
                BasisEntry {
                    mode,
                    lambda: 1.0 + ksq,
                    kappa: domain.kappa(mode.wavevector),
                    kappa_norm: ksq.sqrt(),
                }
            })
            .collect();
        entries.sort_by(|a, b| {
            a.lambda
                .total_cmp(&b.lambda)
                .then(a.mode.wavevector.cmp(&b.mode.wavevector))
                .then(a.mode.parity.cmp(&b.mode.parity))
        });
        let index = entries.iter().enumerate().map(|(i, e)| (e.mode, i)).collect();
        Ok(Arc::new(SpectralBasis {
            domain,
            cutoff,
            entries,
            index,
            interaction: OnceLock::new(),
        }))
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[BasisEntry] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> Result<&BasisEntry> {
        self.entries.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.entries.len(),
        })
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    pub fn index_of(&self, mode: &Mode) -> Result<usize> {
        let key = match (self.domain.kind, mode.parity) {
            (DomainKind::Torus, Some(p)) => Mode {
                wavevector: Mode::canonical_wavevector(mode.wavevector),
                parity: Some(p),
            },
            (DomainKind::RectangleLions, None) => *mode,
            _ => return Err(Error::UnknownMode(mode.to_string())),
        };
        self.index
            .get(&key)
            .copied()
            .ok_or_else(|| Error::UnknownMode(mode.to_string()))
    }

    /// Amplitude of the normalized torus plane wave, `sqrt(2/|Ω|)`.
    pub(crate) fn torus_amplitude(&self) -> f64 {
        (2.0 / self.domain.area()).sqrt()
    }

    /// Stream-function prefactor of the normalized rectangle mode.
    pub(crate) fn rectangle_amplitude(&self, entry: &BasisEntry) -> f64 {
        2.0 / (entry.kappa_norm * self.domain.area().sqrt())
    }

    /// Value of the `index`-th orthonormal eigenfield at `point`.
    pub fn evaluate(&self, index: usize, point: [f64; 2]) -> Result<[f64; 2]> {
        let e = self.entry(index)?;
        self.check_point(point)?;
        Ok(match self.domain.kind {
            DomainKind::Torus => {
                let a = self.torus_amplitude();
                let theta = e.kappa[0] * point[0] + e.kappa[1] * point[1];
                let g = match e.mode.parity {
                    Some(Parity::Sin) => theta.sin(),
                    _ => theta.cos(),
                };
                let d = torus_direction(e);
                [a * g * d[0], a * g * d[1]]
            }
            DomainKind::RectangleLions => {
                let c = self.rectangle_amplitude(e);
                let [a, b] = e.kappa;
                let (sx, cx) = (a * point[0]).sin_cos();
                let (sy, cy) = (b * point[1]).sin_cos();
                [-c * b * sx * cy, c * a * cx * sy]
            }
        })
    }

    /// Jacobian `J[c][d] = ∂_d e_c` of the `index`-th eigenfield.
    pub fn evaluate_gradient(&self, index: usize, point: [f64; 2]) -> Result<[[f64; 2]; 2]> {
        let e = self.entry(index)?;
        self.check_point(point)?;
        Ok(match self.domain.kind {
            DomainKind::Torus => {
                let a = self.torus_amplitude();
                let theta = e.kappa[0] * point[0] + e.kappa[1] * point[1];
                let dg = match e.mode.parity {
                    Some(Parity::Sin) => theta.cos(),
                    _ => -theta.sin(),
                };
                let d = torus_direction(e);
                let k = e.kappa;
                [
                    [a * dg * d[0] * k[0], a * dg * d[0] * k[1]],
                    [a * dg * d[1] * k[0], a * dg * d[1] * k[1]],
                ]
            }
            DomainKind::RectangleLions => {
                let c = self.rectangle_amplitude(e);
                let [a, b] = e.kappa;
                let (sx, cx) = (a * point[0]).sin_cos();
                let (sy, cy) = (b * point[1]).sin_cos();
                [
                    [-c * b * a * cx * cy, c * b * b * sx * sy],
                    [-c * a * a * sx * sy, c * a * b * cx * cy],
                ]
            }
        })
    }

    /// Value of the `index`-th scalar vorticity basis function.
    ///
    /// On the torus these are `a·sin(κ·x)` and `a·cos(κ·x)` indexed like the
    /// velocity modes; on the rectangle the normalized product of sines.
    pub fn evaluate_scalar(&self, index: usize, point: [f64; 2]) -> Result<f64> {
        let e = self.entry(index)?;
        self.check_point(point)?;
        Ok(match self.domain.kind {
            DomainKind::Torus => {
                let a = self.torus_amplitude();
                let theta = e.kappa[0] * point[0] + e.kappa[1] * point[1];
                match e.mode.parity {
                    Some(Parity::Sin) => a * theta.sin(),
                    _ => a * theta.cos(),
                }
            }
            DomainKind::RectangleLions => {
                let s = 2.0 / self.domain.area().sqrt();
                s * (e.kappa[0] * point[0]).sin() * (e.kappa[1] * point[1]).sin()
            }
        })
    }

    /// Gradient of the `index`-th scalar vorticity basis function.
    pub fn evaluate_scalar_gradient(&self, index: usize, point: [f64; 2]) -> Result<[f64; 2]> {
        let e = self.entry(index)?;
        self.check_point(point)?;
        Ok(match self.domain.kind {
            DomainKind::Torus => {
                let a = self.torus_amplitude();
                let theta = e.kappa[0] * point[0] + e.kappa[1] * point[1];
                let dg = match e.mode.parity {
                    Some(Parity::Sin) => theta.cos(),
                    _ => -theta.sin(),
                };
                [a * dg * e.kappa[0], a * dg * e.kappa[1]]
            }
            DomainKind::RectangleLions => {
                let s = 2.0 / self.domain.area().sqrt();
                let [a, b] = e.kappa;
                let (sx, cx) = (a * point[0]).sin_cos();
                let (sy, cy) = (b * point[1]).sin_cos();
                [s * a * cx * sy, s * b * sx * cy]
            }
        })
    }

    /// Upper bound on `sup |e_k|` (Euclidean norm of the vector value).
    pub fn sup_norm(&self, index: usize) -> Result<f64> {
        let e = self.entry(index)?;
        Ok(match self.domain.kind {
            DomainKind::Torus => self.torus_amplitude(),
            DomainKind::RectangleLions => self.rectangle_amplitude(e) * e.kappa_norm,
        })
    }

    pub fn manifest(&self) -> BasisManifest {
        BasisManifest {
            domain: self.domain,
            cutoff: self.cutoff,
            modes: self
                .entries
                .iter()
                .map(|e| ManifestEntry {
                    wavevector: e.mode.wavevector,
                    parity: e.mode.parity,
                    lambda: e.lambda,
                })
                .collect(),
        }
    }

    /// Midpoint tensor grid with `4N+1` points per axis. Exact for the trig
    /// polynomials produced by products of up to three basis fields.
    pub fn quadrature_grid(&self) -> (Vec<[f64; 2]>, f64) {
        let m = 4 * self.cutoff + 1;
        let [lx, ly] = self.domain.lengths;
        let (hx, hy) = (lx / m as f64, ly / m as f64);
        let mut pts = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                pts.push([(i as f64 + 0.5) * hx, (j as f64 + 0.5) * hy]);
            }
        }
        (pts, hx * hy)
    }

    pub(crate) fn interaction(&self) -> &Interaction {
        self.interaction.get_or_init(|| Interaction::build(self))
    }

    fn check_point(&self, p: [f64; 2]) -> Result<()> {
        if self.domain.contains(p) {
            Ok(())
        } else {
            Err(Error::PointOutsideDomain(p[0], p[1]))
        }
    }
}

/// Unit direction `κ⊥/|κ|` with `κ⊥ = (-κ₂, κ₁)`.
pub(crate) fn torus_direction(e: &BasisEntry) -> [f64; 2] {
    [-e.kappa[1] / e.kappa_norm, e.kappa[0] / e.kappa_norm]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_cutoff_one_has_eight_fields() {
        let b = SpectralBasis::enumerate(DomainSpec::standard_torus(), 1).unwrap();
        assert_eq!(b.len(), 8);
        let mut wv: Vec<_> = b.entries().iter().map(|e| e.mode.wavevector).collect();
        wv.dedup();
        wv.sort();
        wv.dedup();
        assert_eq!(wv, vec![[0, 1], [1, -1], [1, 0], [1, 1]]);
    }

    #[test]
    fn counts_per_backend() {
        for n in 1..6 {
            let t = SpectralBasis::enumerate(DomainSpec::standard_torus(), n).unwrap();
            assert_eq!(t.len(), (2 * n + 1).pow(2) - 1);
            let r = SpectralBasis::enumerate(DomainSpec::rectangle(1.0, 2.0).unwrap(), n).unwrap();
            assert_eq!(r.len(), n * n);
        }
    }

    #[test]
    fn zero_cutoff_is_rejected() {
        let err = SpectralBasis::enumerate(DomainSpec::standard_torus(), 0).unwrap_err();
        assert!(matches!(err, Error::EmptyBasis));
        assert!(DomainSpec::torus(0.0, 1.0).is_err());
        assert!(DomainSpec::rectangle(1.0, -2.0).is_err());
    }

    #[test]
    fn eigenvalues() {
        let r = SpectralBasis::enumerate(DomainSpec::rectangle(1.0, 1.0).unwrap(), 2).unwrap();
        let i = r.index_of(&Mode::rectangle(1, 1)).unwrap();
        assert_eq!(i, 0);
        assert!((r.entries()[i].lambda - (1.0 + 2.0 * PI * PI)).abs() < 1e-12);

        let t = SpectralBasis::enumerate(DomainSpec::standard_torus(), 2).unwrap();
        let i = t.index_of(&Mode::torus(1, 0, Parity::Cos)).unwrap();
        assert!((t.entries()[i].lambda - 2.0).abs() < 1e-14);
        // negative representative maps to the canonical one
        assert_eq!(t.index_of(&Mode::torus(-1, 0, Parity::Cos)).unwrap(), i);
    }

    #[test]
    fn ordering_is_nondecreasing_with_lexicographic_ties() {
        let t = SpectralBasis::enumerate(DomainSpec::torus(2.0, 3.0).unwrap(), 4).unwrap();
        for w in t.entries().windows(2) {
            assert!(w[0].lambda <= w[1].lambda);
            assert!(w[0].lambda >= 1.0);
            if w[0].lambda == w[1].lambda {
                assert!((w[0].mode.wavevector, w[0].mode.parity) < (w[1].mode.wavevector, w[1].mode.parity));
            }
        }
        let sq = SpectralBasis::enumerate(DomainSpec::standard_torus(), 5).unwrap();
        let a = sq.index_of(&Mode::torus(0, 5, Parity::Sin)).unwrap();
        let b = sq.index_of(&Mode::torus(3, 4, Parity::Sin)).unwrap();
        assert_eq!(sq.entries()[a].lambda, sq.entries()[b].lambda);
        assert!(a < b);
    }

    #[test]
    fn pointwise_values() {
        let t = SpectralBasis::enumerate(DomainSpec::standard_torus(), 1).unwrap();
        let s = t.index_of(&Mode::torus(1, 0, Parity::Sin)).unwrap();
        assert_eq!(t.evaluate(s, [0.0, 0.0]).unwrap(), [0.0, 0.0]);
        let c = t.index_of(&Mode::torus(1, 0, Parity::Cos)).unwrap();
        let v = t.evaluate(c, [0.0, 0.0]).unwrap();
        assert!(v[0].abs() < 1e-15);
        assert!((v[1] - t.torus_amplitude()).abs() < 1e-15);

        let r = SpectralBasis::enumerate(DomainSpec::rectangle(1.0, 2.0).unwrap(), 3).unwrap();
        for i in 0..r.len() {
            for s in [0.1, 0.37, 0.8] {
                // normal component and vorticity vanish on every side
                assert!(r.evaluate(i, [0.0, 2.0 * s]).unwrap()[0].abs() < 1e-14);
                assert!(r.evaluate(i, [1.0, 2.0 * s]).unwrap()[0].abs() < 1e-14);
                assert!(r.evaluate(i, [s, 0.0]).unwrap()[1].abs() < 1e-14);
                assert!(r.evaluate(i, [s, 2.0]).unwrap()[1].abs() < 1e-14);
                assert!(r.evaluate_scalar(i, [0.0, 2.0 * s]).unwrap().abs() < 1e-14);
                assert!(r.evaluate_scalar(i, [s, 2.0]).unwrap().abs() < 1e-14);
            }
        }
        assert!(matches!(r.evaluate(0, [1.5, 0.5]), Err(Error::PointOutsideDomain(..))));
        assert!(matches!(r.evaluate(99, [0.5, 0.5]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn quadrature_orthonormality_and_divergence() {
        for domain in [
            DomainSpec::standard_torus(),
            DomainSpec::torus(1.0, 2.5).unwrap(),
            DomainSpec::rectangle(1.0, 1.0).unwrap(),
            DomainSpec::rectangle(2.0, 0.7).unwrap(),
        ] {
            for n in 1..=4 {
                let b = SpectralBasis::enumerate(domain, n).unwrap();
                let (pts, w) = b.quadrature_grid();
                let vals: Vec<Vec<[f64; 2]>> = (0..b.len())
                    .map(|i| pts.iter().map(|p| b.evaluate(i, *p).unwrap()).collect())
                    .collect();
                for i in 0..b.len() {
                    for j in 0..b.len() {
                        let g: f64 = vals[i]
                            .iter()
                            .zip(&vals[j])
                            .map(|(u, v)| u[0] * v[0] + u[1] * v[1])
                            .sum::<f64>()
                            * w;
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((g - want).abs() < 1e-12, "{domain:?} n={n} ({i},{j}) {g}");
                    }
                    for p in pts.iter().step_by(7) {
                        let j = b.evaluate_gradient(i, *p).unwrap();
                        assert!((j[0][0] + j[1][1]).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn manifest_round_trip() {
        let b = SpectralBasis::enumerate(DomainSpec::standard_torus(), 2).unwrap();
        let m = b.manifest();
        let s = serde_json::to_string(&m).unwrap();
        let back: BasisManifest = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.modes.len(), 24);
    }
}
