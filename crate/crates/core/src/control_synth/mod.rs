//! Control synthesis from a saturating generator set.
//!
//! The pipeline has three parts. [`stage_a`] steers with fictitious actuators
//! taken from a deep saturation level `𝒢^ȷ̄`. [`imitation`] then replaces the
//! bracket actuators `ℬ(ψ)φ` one at a time by fast oscillations in the
//! lower-level directions. [`pipeline`] repeats this level by level until
//! only the physical actuators `U = G₀ ∪ {B(h, h)}` remain. The
//! existence parameters `μ`, `β` and `K` are found by monitored searches
//! whose acceptance test is the simulated endpoint error.

pub mod imitation;
pub mod oblique;
pub mod pipeline;
pub mod schedule;
pub mod stage_a;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::galerkin_sim::Forcing;
use crate::random::{rng, unit_field};
use crate::saturation::{Saturation, Subspace};
use crate::spectral_basis::SpectralBasis;

pub use oblique::{oblique_project, ObliqueProjector};
pub use schedule::{ControlSchedule, Piece, TimeFn, TrigKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisParams {
    /// Target tolerance in the H-norm.
    pub epsilon: f64,
    /// Tail exponent in `(0, 1/2)`, used for the a priori tail bounds.
    pub s_bar: f64,
    /// First decay rate of the steering search; doubled up to `mu_cap`.
    pub mu0: f64,
    pub mu_cap: f64,
    /// Decreasing `β` candidates.
    pub beta_grid: Vec<f64>,
    /// Increasing carrier counts `K`.
    pub k_schedule: Vec<u32>,
    /// Base integration step, refined automatically for fast rates and
    /// carriers.
    pub dt: f64,
    pub max_saturation_depth: usize,
    pub saturation_tol: f64,
    /// `‖P_{ℰ_M^⊥}^{𝒰_M} P_{ℰ_M}‖` target; derived from `ε`, `T` and `f`
    /// when absent.
    pub rho: Option<f64>,
    /// Largest admissible `M`; the cutoff dimension when absent.
    pub max_m: Option<usize>,
    /// Forces `M` instead of choosing it from the tail bounds.
    pub m: Option<usize>,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        SynthesisParams {
            epsilon: 0.1,
            s_bar: 0.25,
            mu0: 1.0,
            mu_cap: 256.0,
            beta_grid: (0..7).map(|i| 0.5f64.powi(i)).collect(),
            k_schedule: (3..10).map(|i| 1u32 << i).collect(),
            dt: 1e-2,
            max_saturation_depth: 8,
            saturation_tol: crate::saturation::DEFAULT_TOL,
            rho: None,
            max_m: None,
            m: None,
        }
    }
}

impl SynthesisParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(self.s_bar > 0.0 && self.s_bar < 0.5) {
            return bad("s_bar must lie in (0, 1/2)");
        }
        if !(self.mu0 > 0.0 && self.mu_cap >= self.mu0) {
            return bad("need 0 < mu0 <= mu_cap");
        }
        if self.beta_grid.is_empty()
            || self.beta_grid.iter().any(|b| !(*b > 0.0))
            || self.beta_grid.windows(2).any(|w| w[1] >= w[0])
        {
            return bad("beta_grid must be strictly decreasing positives");
        }
        if self.k_schedule.is_empty() || self.k_schedule[0] == 0 || self.k_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return bad("k_schedule must be strictly increasing positive integers");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if let Some(r) = self.rho {
            if !(r >= 0.0) {
                return bad("rho must be nonnegative");
            }
        }
        Ok(())
    }

    /// `ϱ = (ε²/40 · e^{-3T})^{1/2} (1 + ∫‖f‖²)^{-1/2}` unless overridden.
    pub fn rho_for(&self, horizon: f64, forcing_l2_sq: f64) -> f64 {
        self.rho.unwrap_or_else(|| {
            (self.epsilon * self.epsilon / 40.0 * (-3.0 * horizon).exp()).sqrt() / (1.0 + forcing_l2_sq).sqrt()
        })
    }
}

/// The tuple `(T, f, y₀, y_a)` of a steering problem.
#[derive(Clone, Debug)]
pub struct ControlProblem {
    pub y0: Field,
    pub target: Field,
    pub forcing: Forcing,
    pub horizon: f64,
}

impl ControlProblem {
    pub fn new(y0: Field, target: Field, forcing: Forcing, horizon: f64) -> Result<Self> {
        y0.check_same_basis(&target)?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if !(y0.is_finite() && target.is_finite()) {
            return Err(Error::NonFinite("endpoint state"));
        }
        Ok(ControlProblem {
            y0,
            target,
            forcing,
            horizon,
        })
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        self.y0.basis()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageId {
    FreeFlow,
    StageA,
    Imitation { level: usize, step: usize },
    Level { level: usize },
    Final,
}

/// One `(parameters, error)` pair tried by a search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: StageId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jbar: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    /// Measured endpoint error `‖y(T) - y_a‖_H`.
    pub error: f64,
    pub budget: f64,
    pub pass: bool,
    pub diagnostics: BTreeMap<String, f64>,
    pub attempts: Vec<Attempt>,
}

impl StageReport {
    pub fn new(stage: StageId, error: f64, budget: f64) -> Self {
        StageReport {
            stage,
            m: None,
            jbar: None,
            mu: None,
            beta: None,
            k: None,
            error,
            budget,
            pass: error <= budget,
            diagnostics: BTreeMap::new(),
            attempts: Vec::new(),
        }
    }

    /// Records a diagnostic; non-finite values are skipped so that the
    /// report stays valid JSON.
    pub fn diag(&mut self, key: &str, value: f64) {
        if value.is_finite() {
            self.diagnostics.insert(key.to_string(), value);
        }
    }

    pub fn set_error(&mut self, error: f64) {
        self.error = error;
        self.pass = error <= self.budget;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiceM {
    pub m: usize,
    /// `‖P_{ℰ_M^⊥} y₀‖²`, `‖P_{ℰ_M^⊥} y_a‖²`, `∫‖P_{ℰ_M^⊥} f‖²` at the chosen `M`.
    pub tails: [f64; 3],
    pub thresholds: [f64; 3],
    /// `λ_{M+1}^{-s̄} ‖·‖²_{D(A^{s̄/2})}` for `y₀` and `y_a`, the a priori
    /// bounds on the first two tails.
    pub a_priori: [f64; 2],
}

/// Per-mode `∫_0^T f_k(t)² dt`.
pub fn forcing_mode_l2_sq(basis: &Arc<SpectralBasis>, forcing: &Forcing, horizon: f64) -> Vec<f64> {
    let n = basis.len();
    if forcing.is_zero() {
        return vec![0.0; n];
    }
    let panels = 64 + (forcing.max_frequency() * horizon / std::f64::consts::PI).ceil() as usize;
    let (x, w) = crate::quadrature::gauss_legendre(8);
    let h = horizon / panels as f64;
    let mut acc = vec![0.0; n];
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            let f = forcing.eval(basis, mid + 0.5 * h * xi);
            for (a, c) in acc.iter_mut().zip(f.coeffs()) {
                *a += 0.5 * h * wi * c * c;
            }
        }
    }
    acc
}

/// Smallest `M` with `‖P_{ℰ_M^⊥}y₀‖² < ε²e^{-3T}/20`,
/// `‖P_{ℰ_M^⊥}y_a‖² < ε²/20` and `∫‖P_{ℰ_M^⊥}f‖² < ε²e^{-3T}/20`.
pub fn choose_m(
    y0: &Field,
    ya: &Field,
    forcing: &Forcing,
    epsilon: f64,
    horizon: f64,
    s_bar: f64,
    max_m: Option<usize>,
) -> Result<ChoiceM> {
    y0.check_same_basis(ya)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    let basis = y0.basis();
    let n = basis.len();
    let max_m = max_m.unwrap_or(n).min(n);
    let decay = (-3.0 * horizon).exp();
    let e2 = epsilon * epsilon / 20.0;
    let thresholds = [e2 * decay, e2, e2 * decay];
    let fq = forcing_mode_l2_sq(basis, forcing, horizon);
    for m in 1..=max_m {
        let tails = [
            y0.tail_norm_sq(m),
            ya.tail_norm_sq(m),
            fq[m.min(n)..].iter().sum::<f64>(),
        ];
        if tails.iter().zip(&thresholds).all(|(t, th)| t < th) {
            let lam = if m < n {
                basis.entries()[m].lambda
            } else {
                f64::INFINITY
            };
            let ap = |y: &Field| lam.powf(-s_bar) * y.norm_da(s_bar / 2.0).powi(2);
            return Ok(ChoiceM {
                m,
                tails,
                thresholds,
                a_priori: [ap(y0), ap(ya)],
            });
        }
    }
    Err(Error::CutoffTooSmall { max: max_m })
}

/// Fictitious actuators `𝒰_M ⊂ 𝒢^ȷ̄` approximating `ℰ_M`.
#[derive(Clone, Debug)]
pub struct UmSelection {
    pub jbar: usize,
    pub m: usize,
    /// Orthogonal projections of `e_1..e_M` onto `𝒢^ȷ̄`.
    pub picks: Vec<Field>,
    pub frame: DMatrix<f64>,
    /// `P_{𝒰_M}^{ℰ_M^⊥}`.
    pub projector: ObliqueProjector,
    /// `‖P_{ℰ_M^⊥}^{𝒰_M} P_{ℰ_M}‖`.
    pub leakage: f64,
    pub rho: f64,
    /// All picks coincide with the `e_i` (residuals below `1e-12`).
    pub exact: bool,
    pub residuals: Vec<f64>,
}

/// Smallest level `ȷ̄` whose projections of `e_1..e_M` span a space `𝒰_M`
/// with leakage below `rho`. Exact containment passes for every `rho ≥ 0`.
pub fn build_um(m: usize, saturation: &Saturation, rho: f64) -> Result<UmSelection> {
    let basis = saturation.space.basis().clone();
    let n = basis.len();
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("M = {m} outside 1..={n}")));
    }
    let e = oblique::leading_frame(n, m);
    for j in 0..saturation.level_dims.len() {
        let level = saturation.level(j);
        let mut picks = Vec::with_capacity(m);
        let mut residuals = Vec::with_capacity(m);
        for i in 0..m {
            let ei = Field::basis_vector(&basis, i)?;
            let p = level.project(&ei)?;
            residuals.push(p.sub(&ei)?.norm_h());
            picks.push(p);
        }
        let Ok(span) = Subspace::from_generators(&picks, saturation.space.tol()) else {
            continue;
        };
        let frame = span.frame_matrix();
        let Ok(projector) = ObliqueProjector::new(frame.clone(), e.clone()) else {
            continue;
        };
        let leakage = projector.leakage();
        let exact = residuals.iter().all(|r| *r < 1e-12);
        if exact || leakage < rho {
            return Ok(UmSelection {
                jbar: j,
                m,
                picks,
                frame,
                projector,
                leakage,
                rho,
                exact,
                residuals,
            });
        }
    }
    Err(Error::SaturationNeeded { m })
}

/// Empirical `C_b = max |b(y, z, w)| / (‖y‖_H ‖z‖_{𝒞¹} ‖w‖_H)` over seeded
/// random triples, with the coefficient surrogate for the `𝒞¹` norm.
pub fn measure_cb(basis: &Arc<SpectralBasis>, trials: usize, seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let mut best: f64 = 0.0;
    for _ in 0..trials {
        let y = unit_field(basis, &mut r);
        let z = unit_field(basis, &mut r);
        let w = unit_field(basis, &mut r);
        let b = y.b_form(&z, &w)?;
        best = best.max(b.abs() / z.c1_bound());
    }
    Ok(best)
}

/// Base step for simulating a schedule: fast exponential rates are
/// resolved with at least 20 steps per e-fold.
pub fn step_for(params: &SynthesisParams, schedule: Option<&ControlSchedule>) -> f64 {
    let rate = schedule
        .map(|s| {
            s.coefficients
                .iter()
                .flat_map(|f| f.pieces.iter().map(|p| p.rate.abs()))
                .fold(0.0, f64::max)
        })
        .unwrap_or(0.0);
    if rate > 0.0 {
        params.dt.min(0.05 / rate)
    } else {
        params.dt
    }
}
