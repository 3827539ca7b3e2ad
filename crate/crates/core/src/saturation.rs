//! Bracket recursion `𝒢^{j+1} = 𝒢^j + span{ℬ(ψ)φ : ψ ∈ 𝒢⁰, φ ∈ 𝒢^j}` with
//! generator provenance, and coverage of the leading eigenspaces.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::linalg;
use crate::spectral_basis::{Mode, Parity, SpectralBasis};

pub const DEFAULT_TOL: f64 = 1e-8;

/// Where a subspace element came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    /// The `index`-th generator.
    Generator { index: usize },
    /// `ℬ(ψ)φ` with `ψ` the `psi`-th generator and `φ` the `phi`-th element of
    /// the previous level.
    Bracket { psi: usize, phi: usize },
    /// `B(h, h)` for the `index`-th generator `h`.
    SelfInteraction { index: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpanOutcome {
    Added,
    AlreadySpanned,
}

/// Ordered basis with an orthonormal frame of the same span.
///
/// `frame[i]` spans the same space as `elements[..=i]`, so every prefix of a
/// subspace is itself a subspace; the saturation levels are stored that way.
#[derive(Clone, Debug)]
pub struct Subspace {
    basis: Arc<SpectralBasis>,
    elements: Vec<Field>,
    frame: Vec<Vec<f64>>,
    provenance: Vec<Provenance>,
    tol: f64,
}

impl Subspace {
    pub fn new(basis: &Arc<SpectralBasis>, tol: f64) -> Self {
        Subspace {
            basis: basis.clone(),
            elements: Vec::new(),
            frame: Vec::new(),
            provenance: Vec::new(),
            tol,
        }
    }

    /// Subspace spanned by linearly independent generators.
    pub fn from_generators(generators: &[Field], tol: f64) -> Result<Self> {
        let first = generators.first().ok_or(Error::EmptyGenerators)?;
        let mut s = Subspace::new(first.basis(), tol);
        for (i, g) in generators.iter().enumerate() {
            if s.span_extend(g, Provenance::Generator { index: i })? == SpanOutcome::AlreadySpanned {
                return Err(Error::DependentGenerator(i));
            }
        }
        Ok(s)
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Field] {
        &self.elements
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    /// Orthonormal frame as coefficient vectors.
    pub fn frame(&self) -> &[Vec<f64>] {
        &self.frame
    }

    pub fn frame_fields(&self) -> Vec<Field> {
        self.frame
            .iter()
            .map(|c| Field::from_raw(self.basis.clone(), c.clone()))
            .collect()
    }

    /// Frame as the columns of an `n × dim` matrix.
    pub fn frame_matrix(&self) -> DMatrix<f64> {
        linalg::columns(self.basis.len(), &self.frame)
    }

    pub fn elements_matrix(&self) -> DMatrix<f64> {
        let cols: Vec<&[f64]> = self.elements.iter().map(|f| f.coeffs()).collect();
        linalg::columns(self.basis.len(), &cols)
    }

    /// The subspace spanned by the first `dim` elements.
    pub fn prefix(&self, dim: usize) -> Subspace {
        let d = dim.min(self.dim());
        Subspace {
            basis: self.basis.clone(),
            elements: self.elements[..d].to_vec(),
            frame: self.frame[..d].to_vec(),
            provenance: self.provenance[..d].to_vec(),
            tol: self.tol,
        }
    }

    fn residual(&self, c: &[f64]) -> Vec<f64> {
        let mut r = c.to_vec();
        // classical Gram–Schmidt, applied twice
        for _ in 0..2 {
            let coefs: Vec<f64> = self.frame.iter().map(|q| linalg::dot(q, &r)).collect();
            for (q, a) in self.frame.iter().zip(coefs) {
                linalg::axpy(-a, q, &mut r);
            }
        }
        r
    }

    /// Appends `candidate` if its residual after orthogonal projection onto
    /// the frame exceeds `tol · max(1, ‖candidate‖_H)`.
    pub fn span_extend(&mut self, candidate: &Field, provenance: Provenance) -> Result<SpanOutcome> {
        if !candidate.is_finite() {
            return Err(Error::NonFinite("span candidate"));
        }
        if !Arc::ptr_eq(&self.basis, candidate.basis()) && *self.basis != **candidate.basis() {
            return Err(Error::BasisMismatch);
        }
        let r = self.residual(candidate.coeffs());
        let rn = linalg::norm(&r);
        if rn > self.tol * candidate.norm_h().max(1.0) {
            self.frame.push(r.iter().map(|v| v / rn).collect());
            self.elements.push(candidate.clone());
            self.provenance.push(provenance);
            Ok(SpanOutcome::Added)
        } else {
            Ok(SpanOutcome::AlreadySpanned)
        }
    }

    /// Orthogonal projection onto the span.
    pub fn project(&self, z: &Field) -> Result<Field> {
        let mut out = vec![0.0; self.basis.len()];
        for q in &self.frame {
            linalg::axpy(linalg::dot(q, z.coeffs()), q, &mut out);
        }
        Ok(Field::from_raw(self.basis.clone(), out))
    }

    /// `‖z - P z‖_H` for the orthogonal projection `P`.
    pub fn residual_norm(&self, z: &Field) -> f64 {
        linalg::norm(&self.residual(z.coeffs()))
    }

    /// `(1/M) Σ_{i<M} ‖P e_i‖²`: the fraction of `ℰ_M` captured by the span.
    pub fn coverage(&self, m: usize) -> f64 {
        let m = m.min(self.basis.len());
        if m == 0 {
            return 1.0;
        }
        let s: f64 = self
            .frame
            .iter()
            .map(|q| q[..m].iter().map(|v| v * v).sum::<f64>())
            .sum();
        (s / m as f64).clamp(0.0, 1.0)
    }

    /// Coverage of `ℰ_M` for every `M = 1..=n`.
    pub fn coverage_curve(&self) -> Vec<f64> {
        let n = self.basis.len();
        let mut partial = vec![0.0; n];
        for q in &self.frame {
            for (p, v) in partial.iter_mut().zip(q) {
                *p += v * v;
            }
        }
        let mut acc = 0.0;
        partial
            .iter()
            .enumerate()
            .map(|(i, p)| {
                acc += p;
                (acc / (i + 1) as f64).clamp(0.0, 1.0)
            })
            .collect()
    }

    /// Largest `M` such that `ℰ_M` lies in the span up to `tol`.
    pub fn covered_prefix(&self, tol: f64) -> usize {
        let mut m = 0;
        for i in 0..self.basis.len() {
            let mut e = vec![0.0; self.basis.len()];
            e[i] = 1.0;
            if linalg::norm(&self.residual(&e)) > tol {
                break;
            }
            m = i + 1;
        }
        m
    }
}

/// One recursion step. `filter` is the regularity hook: candidates it
/// rejects are skipped. Within the truncated basis every field is smooth, so
/// [`saturate_step`] accepts everything.
pub fn saturate_step_filtered(g0: &Subspace, gj: &Subspace, filter: &dyn Fn(&Field) -> bool) -> Result<Subspace> {
    if g0.is_empty() {
        return Err(Error::EmptyGenerators);
    }
    let mut next = gj.clone();
    for (i, psi) in g0.elements().iter().enumerate() {
        for (l, phi) in gj.elements().iter().enumerate() {
            let cand = psi.cal_b(phi)?;
            if filter(&cand) {
                next.span_extend(&cand, Provenance::Bracket { psi: i, phi: l })?;
            }
        }
    }
    Ok(next)
}

pub fn saturate_step(g0: &Subspace, gj: &Subspace) -> Result<Subspace> {
    saturate_step_filtered(g0, gj, &|_| true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AddedPair {
    pub psi: usize,
    pub phi: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub dim: usize,
    /// Coverage of the whole truncated space.
    pub coverage: f64,
    pub added: Vec<AddedPair>,
    /// Coverage of `ℰ_M` for `M = 1..=n`.
    pub coverage_curve: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub levels: Vec<LevelReport>,
    pub terminal_level: usize,
    pub stalled: bool,
    pub tol: f64,
    pub regularity_filter: String,
}

/// Result of a run: the last level as a single subspace (earlier levels are
/// its prefixes) plus the report.
#[derive(Clone, Debug)]
pub struct Saturation {
    pub generators: Subspace,
    pub space: Subspace,
    pub level_dims: Vec<usize>,
    pub report: SaturationReport,
}

impl Saturation {
    pub fn level(&self, j: usize) -> Subspace {
        let d = self.level_dims[j.min(self.level_dims.len() - 1)];
        self.space.prefix(d)
    }

    pub fn terminal_level(&self) -> usize {
        self.report.terminal_level
    }

    /// First level whose span contains `ℰ_m` up to `tol`.
    pub fn level_covering(&self, m: usize, tol: f64) -> Option<usize> {
        (0..self.level_dims.len()).find(|&j| self.level(j).covered_prefix(tol) >= m)
    }
}

fn level_report(space: &Subspace, from: usize) -> LevelReport {
    let n = space.basis().len();
    LevelReport {
        dim: space.dim(),
        coverage: space.coverage(n),
        added: space.provenance()[from..]
            .iter()
            .filter_map(|p| match *p {
                Provenance::Bracket { psi, phi } => Some(AddedPair { psi, phi }),
                _ => None,
            })
            .collect(),
        coverage_curve: space.coverage_curve(),
    }
}

/// Iterates [`saturate_step`] until the span fills the truncated space,
/// stalls, or `max_depth` steps have run.
pub fn run_saturation(g0: &Subspace, max_depth: usize) -> Result<Saturation> {
    if g0.is_empty() {
        return Err(Error::EmptyGenerators);
    }
    let n = g0.basis().len();
    let mut space = g0.clone();
    let mut level_dims = vec![space.dim()];
    let mut levels = vec![level_report(&space, 0)];
    let mut stalled = false;
    for _ in 0..max_depth {
        if space.dim() == n {
            break;
        }
        let prev = space.dim();
        let next = saturate_step(g0, &space)?;
        if next.dim() == prev {
            stalled = true;
            break;
        }
        space = next;
        level_dims.push(space.dim());
        levels.push(level_report(&space, prev));
    }
    let report = SaturationReport {
        terminal_level: level_dims.len() - 1,
        levels,
        stalled,
        tol: g0.tol(),
        regularity_filter: "none (all truncated fields are smooth)".into(),
    };
    Ok(Saturation {
        generators: g0.clone(),
        space,
        level_dims,
        report,
    })
}

/// Linearly independent spanning list of `G₀ ∪ {B(h, h) : h ∈ G₀}`.
pub fn actuator_set(g0: &Subspace) -> Result<Subspace> {
    if g0.is_empty() {
        return Err(Error::EmptyGenerators);
    }
    let mut u = g0.clone();
    for (i, h) in g0.elements().iter().enumerate() {
        let bhh = h.bilinear(h)?;
        u.span_extend(&bhh, Provenance::SelfInteraction { index: i })?;
    }
    Ok(u)
}

/// Named generator sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorPreset {
    /// Both parities at `(1,0)`, `(0,1)`, `(1,1)`, `(1,-1)` on the torus.
    Torus8,
    /// The single eigenfield `Cos(1,0)`, which never brackets.
    TorusSingle,
    /// Both parities at `(1,1)`, `(2,1)`, `(1,2)`: every generator is an
    /// equilibrium and the shell `|k| = 1` is reached at level one.
    TorusShells,
    /// Lions modes `(1,1)`, `(1,2)`, `(2,1)` on the rectangle.
    RectangleLow,
}

impl GeneratorPreset {
    pub fn modes(self) -> Vec<Mode> {
        let both = |ks: &[(i32, i32)]| -> Vec<Mode> {
            ks.iter()
                .flat_map(|&(a, b)| [Parity::Sin, Parity::Cos].map(|p| Mode::torus(a, b, p)))
                .collect()
        };
        match self {
            GeneratorPreset::Torus8 => both(&[(1, 0), (0, 1), (1, 1), (1, -1)]),
            GeneratorPreset::TorusSingle => vec![Mode::torus(1, 0, Parity::Cos)],
            GeneratorPreset::TorusShells => both(&[(1, 1), (2, 1), (1, 2)]),
            GeneratorPreset::RectangleLow => [(1, 1), (1, 2), (2, 1)]
                .iter()
                .map(|&(a, b)| Mode::rectangle(a, b))
                .collect(),
        }
    }

    pub fn generators(self, basis: &Arc<SpectralBasis>) -> Result<Subspace> {
        let fields = self
            .modes()
            .iter()
            .map(|m| Field::from_mode(basis, m, 1.0))
            .collect::<Result<Vec<_>>>()?;
        Subspace::from_generators(&fields, DEFAULT_TOL)
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

    fn mode(b: &Arc<SpectralBasis>, k1: i32, k2: i32, p: Parity) -> Field {
        Field::from_mode(b, &Mode::torus(k1, k2, p), 1.0).unwrap()
    }

    #[test]
    fn span_extend_outcomes() {
        let b = torus(2);
        let mut s = Subspace::new(&b, DEFAULT_TOL);
        let e0 = Field::basis_vector(&b, 0).unwrap();
        let e1 = Field::basis_vector(&b, 1).unwrap();
        assert_eq!(
            s.span_extend(&e0, Provenance::Generator { index: 0 }).unwrap(),
            SpanOutcome::Added
        );
        assert_eq!(
            s.span_extend(&e0.scale(3.0), Provenance::Generator { index: 1 })
                .unwrap(),
            SpanOutcome::AlreadySpanned
        );
        assert_eq!(
            s.span_extend(&e1, Provenance::Generator { index: 1 }).unwrap(),
            SpanOutcome::Added
        );
        assert_eq!(s.dim(), 2);

        // in-span part plus a 1e-9 orthogonal perturbation stays spanned
        let mut c = e0.scale(0.6);
        c.axpy(0.8, &e1).unwrap();
        c.axpy(1e-9, &Field::basis_vector(&b, 5).unwrap()).unwrap();
        assert!((s.residual_norm(&c) - 1e-9).abs() < 1e-15);
        assert_eq!(
            s.span_extend(&c, Provenance::Generator { index: 2 }).unwrap(),
            SpanOutcome::AlreadySpanned
        );

        let bad = Field::from_raw(b.clone(), vec![f64::NAN; b.len()]);
        assert!(s.span_extend(&bad, Provenance::Generator { index: 3 }).is_err());
    }

    #[test]
    fn dependent_and_empty_generators_are_rejected() {
        let b = torus(2);
        let e = Field::basis_vector(&b, 0).unwrap();
        assert!(matches!(
            Subspace::from_generators(&[], DEFAULT_TOL),
            Err(Error::EmptyGenerators)
        ));
        assert!(matches!(
            Subspace::from_generators(&[e.clone(), e.scale(2.0)], DEFAULT_TOL),
            Err(Error::DependentGenerator(1))
        ));
        assert!(matches!(
            Subspace::from_generators(&[Field::zeros(&b)], DEFAULT_TOL),
            Err(Error::DependentGenerator(0))
        ));
    }

    #[test]
    fn single_eigenfield_stalls_at_level_zero() {
        let b = torus(3);
        let g0 = Subspace::from_generators(&[mode(&b, 1, 0, Parity::Cos)], DEFAULT_TOL).unwrap();
        let g1 = saturate_step(&g0, &g0).unwrap();
        assert_eq!(g1.dim(), 1);
        let run = run_saturation(&g0, 5).unwrap();
        assert!(run.report.stalled);
        assert_eq!(run.report.terminal_level, 0);
        assert_eq!(run.report.levels.len(), 1);
    }

    #[test]
    fn zero_depth_reports_level_zero_only() {
        let b = torus(3);
        let g0 = Subspace::from_generators(&[mode(&b, 1, 0, Parity::Cos), mode(&b, 1, 1, Parity::Sin)], DEFAULT_TOL)
            .unwrap();
        let run = run_saturation(&g0, 0).unwrap();
        assert_eq!(run.report.levels.len(), 1);
        assert!(!run.report.stalled);
        assert_eq!(run.report.levels[0].dim, 2);
    }

    #[test]
    fn frame_is_orthonormal_and_provenance_reconstructs() {
        let b = torus(3);
        let gens: Vec<Field> = [(1, 0), (0, 1), (1, 1), (1, -1)]
            .iter()
            .flat_map(|&(a, c)| [mode(&b, a, c, Parity::Sin), mode(&b, a, c, Parity::Cos)])
            .collect();
        let g0 = Subspace::from_generators(&gens, DEFAULT_TOL).unwrap();
        let run = run_saturation(&g0, 10).unwrap();
        let q = run.space.frame_matrix();
        let gram = q.transpose() * &q;
        assert!((gram - DMatrix::identity(run.space.dim(), run.space.dim())).amax() < 1e-10);
        for j in 1..run.level_dims.len() {
            let prev = run.level(j - 1);
            for (idx, p) in run
                .space
                .provenance()
                .iter()
                .enumerate()
                .take(run.level_dims[j])
                .skip(run.level_dims[j - 1])
            {
                let Provenance::Bracket { psi, phi } = *p else {
                    panic!("expected bracket")
                };
                let rebuilt = g0.elements()[psi].cal_b(&prev.elements()[phi]).unwrap();
                assert!(rebuilt.sub(&run.space.elements()[idx]).unwrap().norm_h() < 1e-10);
            }
            // monotone spans and the finite-dimensionality bound
            let next = run.level(j);
            for e in prev.elements() {
                assert!(next.residual_norm(e) < 1e-10);
            }
            assert!(next.dim() <= prev.dim() + g0.dim() * prev.dim());
        }
    }

    #[test]
    fn actuator_sets() {
        let b = torus(3);
        let g0 = Subspace::from_generators(&[mode(&b, 1, 0, Parity::Cos), mode(&b, 1, 1, Parity::Sin)], DEFAULT_TOL)
            .unwrap();
        assert_eq!(actuator_set(&g0).unwrap().dim(), 2);

        // h = e₁ + e₂ with interacting modes is not an equilibrium
        let mut h = mode(&b, 1, 0, Parity::Cos);
        h.axpy(1.0, &mode(&b, 1, 1, Parity::Sin)).unwrap();
        let g = Subspace::from_generators(&[h.clone()], DEFAULT_TOL).unwrap();
        let u = actuator_set(&g).unwrap();
        assert_eq!(u.dim(), 2);
        assert!(g.residual_norm(&h.bilinear(&h).unwrap()) > 1e-3);
        assert_eq!(u.provenance()[1], Provenance::SelfInteraction { index: 0 });
    }

    #[test]
    fn coverage_curve_is_consistent() {
        let b = torus(2);
        let y = unit_field(&b, &mut rng(1));
        let s = Subspace::from_generators(&[Field::basis_vector(&b, 0).unwrap(), y], DEFAULT_TOL).unwrap();
        let curve = s.coverage_curve();
        for (m, c) in curve.iter().enumerate() {
            assert!((c - s.coverage(m + 1)).abs() < 1e-14);
            assert!((0.0..=1.0).contains(c));
        }
        assert_eq!(s.covered_prefix(1e-10), 1);
    }
}
