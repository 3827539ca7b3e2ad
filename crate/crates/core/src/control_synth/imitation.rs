//! Replacing one bracket actuator `ℬ(ψ)φ` by fast oscillations.
//!
//! With unit `ψ̂`, `φ̂` and `ρ = v ℬ(ψ̂)φ̂` the component to remove, the
//! oscillating control is
//!
//! ```text
//! 𝔉_{β,K}(u) = u - ρ + β⁻² v² B(ψ̂, ψ̂) - κ̇₂,   κ₂ = √2 sin(πKt/T)(β⁻¹ v ψ̂ - β φ̂)
//! ```
//!
//! and the comparator is `𝔥_β(u) = u - β² B(φ̂, φ̂)`. For small `β` the
//! comparator stays close to the incoming trajectory, and for large `K`
//! the oscillating control stays close to the comparator.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::galerkin_sim::endpoint;

use super::stage_a::coordinates;
use super::{step_for, Attempt, ControlProblem, ControlSchedule, StageId, StageReport, SynthesisParams, TimeFn};

/// Relative size below which a bracket coefficient counts as `v ≡ 0`.
pub const ZERO_COEFFICIENT: f64 = 1e-12;

/// Factors of a bracket actuator `ℬ(ψ)φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct BracketPair {
    pub psi: Field,
    pub phi: Field,
}

/// Precomputed data for replacing the last actuator of a schedule.
#[derive(Clone, Debug)]
pub struct Imitation {
    base: ControlSchedule,
    /// Coefficient of `ℬ(ψ̂)φ̂`.
    pub v: TimeFn,
    pub psi_hat: Field,
    pub phi_hat: Field,
    coords_bpp: Vec<f64>,
    coords_psi: Vec<f64>,
    coords_phi: Vec<f64>,
}

impl Imitation {
    /// `keep` leading actuators must span `U + 𝒢^{j-1}`; the corrections are
    /// expressed over them only.
    pub fn new(schedule: &ControlSchedule, pair: &BracketPair, keep: usize) -> Result<Self> {
        let m = schedule.len();
        if m == 0 || keep >= m {
            return Err(Error::InvalidParameter(format!(
                "need a bracket actuator after {keep} kept actuators, schedule has {m}"
            )));
        }
        let (np, nf) = (pair.psi.norm_h(), pair.phi.norm_h());
        if np == 0.0 || nf == 0.0 {
            return Err(Error::InvalidParameter("bracket factor with zero norm".into()));
        }
        let psi_hat = pair.psi.scale(1.0 / np);
        let phi_hat = pair.phi.scale(1.0 / nf);
        let mut v = schedule.coefficients[m - 1].scale(np * nf);
        v.simplify();
        let kept = &schedule.actuators[..keep];
        let coords_bpp = coordinates(kept, &psi_hat.bilinear(&psi_hat)?)?;
        let coords_psi = coordinates(kept, &psi_hat)?;
        let coords_phi = coordinates(kept, &phi_hat)?;
        Ok(Imitation {
            base: ControlSchedule::new(
                schedule.actuators[..m - 1].to_vec(),
                schedule.coefficients[..m - 1].to_vec(),
                schedule.horizon,
            )?,
            v,
            psi_hat,
            phi_hat,
            coords_bpp,
            coords_psi,
            coords_phi,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.base.horizon
    }

    /// The schedule with the bracket actuator dropped, used when `v ≡ 0`.
    pub fn dropped(&self) -> &ControlSchedule {
        &self.base
    }

    /// `√2 sin(πKt/T)`.
    pub fn carrier(&self, k: u32) -> TimeFn {
        TimeFn::sin(2f64.sqrt(), std::f64::consts::PI * k as f64 / self.horizon())
    }

    /// `𝔉_{β,K}(u)` over the remaining actuators.
    pub fn oscillating(&self, beta: f64, k: u32) -> Result<ControlSchedule> {
        if !(beta > 0.0) || k == 0 {
            return Err(Error::InvalidParameter(format!(
                "need beta > 0 and K > 0, got {beta}, {k}"
            )));
        }
        let s = self.carrier(k);
        let ds = s.derivative();
        let dsv = s.mul(&self.v).derivative();
        let v2 = self.v.mul(&self.v);
        let mut coefficients = self.base.coefficients.clone();
        for (i, u) in coefficients.iter_mut().take(self.coords_bpp.len()).enumerate() {
            let mut w = u
                .add_scaled(self.coords_bpp[i] / (beta * beta), &v2)
                .add_scaled(-self.coords_psi[i] / beta, &dsv)
                .add_scaled(self.coords_phi[i] * beta, &ds);
            w.simplify();
            *u = w;
        }
        ControlSchedule::new(self.base.actuators.clone(), coefficients, self.horizon())
    }

    /// `𝔥_β(u)`: the incoming control plus `B(φ̂, φ̂)` with weight `-β²`.
    pub fn comparator(&self, incoming: &ControlSchedule, beta: f64) -> Result<ControlSchedule> {
        let mut actuators = incoming.actuators.clone();
        let mut coefficients = incoming.coefficients.clone();
        actuators.push(self.phi_hat.bilinear(&self.phi_hat)?);
        coefficients.push(TimeFn::constant(-beta * beta));
        ControlSchedule::new(actuators, coefficients, incoming.horizon)
    }

    /// `κ₂(t)` as a field.
    pub fn kappa2(&self, beta: f64, k: u32, t: f64) -> Field {
        let s = self.carrier(k).eval(t);
        let mut out = self.psi_hat.scale(s * self.v.eval(t) / beta);
        out.axpy(-s * beta, &self.phi_hat).expect("same basis");
        out
    }

    /// `β⁻² v² B(ψ̂,ψ̂) - v ℬ(ψ̂)φ̂ + β² B(φ̂,φ̂)` at time `t`.
    pub fn averaged_defect(&self, beta: f64, t: f64) -> Result<Field> {
        let v = self.v.eval(t);
        let mut out = self.psi_hat.bilinear(&self.psi_hat)?.scale(v * v / (beta * beta));
        out.axpy(-v, &self.psi_hat.cal_b(&self.phi_hat)?)?;
        out.axpy(beta * beta, &self.phi_hat.bilinear(&self.phi_hat)?)?;
        Ok(out)
    }
}

/// Everything one imitation step needs besides the search parameters.
pub struct StepInput<'a> {
    pub problem: &'a ControlProblem,
    pub schedule: &'a ControlSchedule,
    pub pair: &'a BracketPair,
    pub keep: usize,
    /// Endpoint of the incoming controlled trajectory.
    pub incoming: &'a Field,
    pub budget: f64,
    pub stage: StageId,
}

fn simulate(problem: &ControlProblem, schedule: &ControlSchedule, params: &SynthesisParams) -> Result<Field> {
    let dt = step_for(params, Some(schedule)).min(problem.horizon);
    endpoint(&problem.y0, problem.horizon, &problem.forcing, Some(schedule), dt)
}

/// Searches `β` over the grid (outer) and `K` over the schedule (inner) for
/// an oscillating control whose endpoint error exceeds the incoming one by
/// at most the budget.
///
/// A `β` whose comparator already exceeds the budget is skipped, since the
/// oscillating trajectories approach the comparator as `K` grows. On
/// failure the best candidate is returned with `pass == false`.
pub fn imitate(input: &StepInput, params: &SynthesisParams) -> Result<(ControlSchedule, StageReport, Field)> {
    let problem = input.problem;
    let target = &problem.target;
    let err_in = input.incoming.sub(target)?.norm_h();
    let imitation = Imitation::new(input.schedule, input.pair, input.keep)?;
    let mut report = StageReport::new(input.stage.clone(), f64::INFINITY, err_in + input.budget);
    report.diag("incoming_error", err_in);
    report.diag("step_budget", input.budget);
    let samples = 256;
    let v_sup = (0..=samples)
        .map(|i| imitation.v.eval(problem.horizon * i as f64 / samples as f64).abs())
        .fold(0.0, f64::max);
    report.diag("v_sup", v_sup);
    let scale = (0..=samples)
        .map(|i| {
            let t = problem.horizon * i as f64 / samples as f64;
            input.schedule.force(problem.basis(), t).norm_h()
        })
        .fold(1.0, f64::max);

    // coefficients at round-off level come from least-squares coordinates
    // of directions that do not involve this actuator
    if imitation.v.is_zero() || v_sup <= ZERO_COEFFICIENT * scale {
        let schedule = imitation.dropped().clone();
        let y = simulate(problem, &schedule, params)?;
        report.set_error(y.sub(target)?.norm_h());
        report.diag("v_zero", 1.0);
        return Ok((schedule, report, y));
    }

    let mut best: Option<(ControlSchedule, Field, f64, f64, u32, f64, f64)> = None;
    'outer: for &beta in &params.beta_grid {
        let comparator = imitation.comparator(input.schedule, beta)?;
        let y_h = simulate(problem, &comparator, params)?;
        let err_h = y_h.sub(target)?.norm_h();
        let gap_h = y_h.sub(input.incoming)?.norm_h();
        report.attempts.push(Attempt {
            mu: None,
            beta: Some(beta),
            k: None,
            error: err_h,
        });
        if err_h - err_in > input.budget {
            continue;
        }
        for &k in &params.k_schedule {
            let schedule = imitation.oscillating(beta, k)?;
            let y_f = simulate(problem, &schedule, params)?;
            let err = y_f.sub(target)?.norm_h();
            let gap_f = y_f.sub(&y_h)?.norm_h();
            report.attempts.push(Attempt {
                mu: None,
                beta: Some(beta),
                k: Some(k),
                error: err,
            });
            let accepted = err - err_in <= input.budget;
            if accepted || best.as_ref().is_none_or(|b| err < b.2) {
                best = Some((schedule, y_f, err, beta, k, gap_h, gap_f));
            }
            if accepted {
                break 'outer;
            }
        }
    }
    let Some((schedule, y_f, err, beta, k, gap_h, gap_f)) = best else {
        // every comparator exceeded the budget; report the smallest β with
        // the largest K as the best effort
        let beta = *params.beta_grid.last().expect("validated grid");
        let k = *params.k_schedule.last().expect("validated schedule");
        let schedule = imitation.oscillating(beta, k)?;
        let y_f = simulate(problem, &schedule, params)?;
        report.beta = Some(beta);
        report.k = Some(k);
        report.set_error(y_f.sub(target)?.norm_h());
        return Ok((schedule, report, y_f));
    };
    report.beta = Some(beta);
    report.k = Some(k);
    report.diag("gap_comparator", gap_h);
    report.diag("gap_oscillating", gap_f);
    report.set_error(err);
    Ok((schedule, report, y_f))
}

/// `‖y_F(T) - y_H(T)‖` for each `K` at fixed `β`.
pub fn gap_sweep(
    problem: &ControlProblem,
    schedule: &ControlSchedule,
    pair: &BracketPair,
    keep: usize,
    beta: f64,
    ks: &[u32],
    params: &SynthesisParams,
) -> Result<Vec<(u32, f64)>> {
    let imitation = Imitation::new(schedule, pair, keep)?;
    let y_h = simulate(problem, &imitation.comparator(schedule, beta)?, params)?;
    ks.iter()
        .map(|&k| {
            let y_f = simulate(problem, &imitation.oscillating(beta, k)?, params)?;
            Ok((k, y_f.sub(&y_h)?.norm_h()))
        })
        .collect()
}
