//! The full descent: steering at level `ȷ̄`, then imitation level by level
//! down to the physical actuators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::galerkin_sim::endpoint;
use crate::saturation::{actuator_set, run_saturation, Provenance, Saturation, Subspace};

use super::imitation::{imitate, BracketPair, StepInput};
use super::stage_a::steer;
use super::{
    build_um, choose_m, forcing_mode_l2_sq, step_for, ControlProblem, ControlSchedule, StageId, StageReport,
    SynthesisParams, TimeFn,
};

/// Actuator list `F_ȷ̄` ordered by level: `F_j` is the prefix of length
/// `level_ends[j]` and spans `U + 𝒢^j`.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    pub actuators: Vec<Field>,
    pub level_ends: Vec<usize>,
    /// Bracket factors for every actuator above level 0.
    pub pairs: Vec<Option<BracketPair>>,
}

impl Hierarchy {
    /// `F_0` is a basis of `U = span(G₀ ∪ B(G₀, G₀)_{diag})`; level `j` adds
    /// the level-`j` saturation brackets that are new modulo `F_{j-1}`.
    pub fn build(saturation: &Saturation, jbar: usize) -> Result<Self> {
        let u = actuator_set(&saturation.generators)?;
        let mut span = u.clone();
        let mut pairs = vec![None; u.dim()];
        let mut level_ends = vec![u.dim()];
        let gens = saturation.generators.elements();
        let elements = saturation.space.elements();
        for j in 1..=jbar {
            let lo = saturation.level_dims[j - 1];
            let hi = saturation.level_dims[j];
            for idx in lo..hi {
                let Provenance::Bracket { psi, phi } = saturation.space.provenance()[idx] else {
                    continue;
                };
                let pair = BracketPair {
                    psi: gens[psi].clone(),
                    phi: elements[phi].clone(),
                };
                if span.span_extend(&elements[idx], Provenance::Bracket { psi, phi })?
                    == crate::saturation::SpanOutcome::Added
                {
                    pairs.push(Some(pair));
                }
            }
            level_ends.push(span.dim());
        }
        Ok(Hierarchy {
            actuators: span.elements().to_vec(),
            level_ends,
            pairs,
        })
    }

    pub fn jbar(&self) -> usize {
        self.level_ends.len() - 1
    }

    /// `n_j`, the number of bracket actuators added at level `j ≥ 1`.
    pub fn added(&self, j: usize) -> usize {
        self.level_ends[j] - self.level_ends[j - 1]
    }

    pub fn physical(&self) -> &[Field] {
        &self.actuators[..self.level_ends[0]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub epsilon: f64,
    pub horizon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jbar: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// `n_j` for `j = 1..=ȷ̄`.
    pub added_per_level: Vec<usize>,
    pub physical_actuators: usize,
    /// Per-step allowances `ε/(2 n_j ȷ̄)` in execution order.
    pub budget_ledger: Vec<f64>,
    pub stages: Vec<StageReport>,
    pub final_error: f64,
    /// Largest distance of `U◇u(t)` from `span U` over the sample times.
    pub admissibility_residual: f64,
    /// Base step handed to the integrator when measuring the final error.
    pub sim_dt: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct Synthesis {
    pub schedule: ControlSchedule,
    pub endpoint: Field,
    pub report: PipelineReport,
}

/// `sup_t dist(U◇u(t), span U)` over `samples + 1` equispaced times.
pub fn admissibility_residual(schedule: &ControlSchedule, u: &Subspace, samples: usize) -> f64 {
    let basis = u.basis();
    (0..=samples)
        .map(|i| {
            let f = schedule.force(basis, schedule.horizon * i as f64 / samples as f64);
            u.residual_norm(&f)
        })
        .fold(0.0, f64::max)
}

fn finish(
    problem: &ControlProblem,
    params: &SynthesisParams,
    mut report: PipelineReport,
    schedule: ControlSchedule,
    y_t: Field,
    u: &Subspace,
) -> Result<Synthesis> {
    report.final_error = y_t.sub(&problem.target)?.norm_h();
    report.admissibility_residual = admissibility_residual(&schedule, u, 200);
    report.sim_dt = step_for(params, Some(&schedule)).min(problem.horizon);
    let mut fin = StageReport::new(StageId::Final, report.final_error, params.epsilon);
    fin.diag("admissibility_residual", report.admissibility_residual);
    report.pass = report
        .stages
        .iter()
        .filter(|s| s.stage != StageId::FreeFlow)
        .all(|s| s.pass)
        && fin.pass
        && report.admissibility_residual <= 1e-10;
    report.stages.push(fin);
    Ok(Synthesis {
        schedule,
        endpoint: y_t,
        report,
    })
}

/// Runs the descent. Stage failures end the run early and come back as a
/// report with `pass == false`; structural problems (cutoff too small,
/// insufficient saturation) are errors.
pub fn synthesize(problem: &ControlProblem, g0: &Subspace, params: &SynthesisParams) -> Result<Synthesis> {
    params.validate()?;
    if g0.is_empty() {
        return Err(Error::EmptyGenerators);
    }
    problem.y0.check_same_basis(&g0.elements()[0])?;
    let u = actuator_set(g0)?;
    let eps = params.epsilon;
    let horizon = problem.horizon;
    let mut report = PipelineReport {
        epsilon: eps,
        horizon,
        m: None,
        jbar: None,
        rho: None,
        added_per_level: Vec::new(),
        physical_actuators: u.dim(),
        budget_ledger: Vec::new(),
        stages: Vec::new(),
        final_error: f64::INFINITY,
        admissibility_residual: 0.0,
        sim_dt: params.dt,
        pass: false,
    };

    // uncontrolled flow first
    let zero = ControlSchedule::zero(u.elements().to_vec(), horizon)?;
    let y_free = endpoint(&problem.y0, horizon, &problem.forcing, None, params.dt.min(horizon))?;
    let free_err = y_free.sub(&problem.target)?.norm_h();
    report.stages.push(StageReport::new(StageId::FreeFlow, free_err, eps));
    if free_err <= eps {
        return finish(problem, params, report, zero, y_free, &u);
    }

    let m = match params.m {
        Some(m) => m,
        None => {
            choose_m(
                &problem.y0,
                &problem.target,
                &problem.forcing,
                eps,
                horizon,
                params.s_bar,
                params.max_m,
            )?
            .m
        }
    };
    report.m = Some(m);
    let saturation = run_saturation(g0, params.max_saturation_depth)?;
    let f_l2: f64 = forcing_mode_l2_sq(problem.basis(), &problem.forcing, horizon)
        .iter()
        .sum();
    let rho = params.rho_for(horizon, f_l2);
    report.rho = Some(rho);
    let um = build_um(m, &saturation, rho)?;
    let jbar = um.jbar;
    report.jbar = Some(jbar);
    let hierarchy = Hierarchy::build(&saturation, jbar)?;
    report.added_per_level = (1..=jbar).map(|j| hierarchy.added(j)).collect();

    let (mut schedule, mut stage, mut y_t) = steer(problem, &um.projector, &hierarchy.actuators, params)?;
    stage.jbar = Some(jbar);
    stage.diag("rho", rho);
    stage.diag("um_leakage", um.leakage);
    let ok = stage.pass;
    report.stages.push(stage);
    if !ok {
        return finish(problem, params, report, schedule, y_t, &u);
    }

    for j in (1..=jbar).rev() {
        let n_j = hierarchy.added(j);
        let step_budget = eps / (2.0 * n_j as f64 * jbar as f64);
        let keep = hierarchy.level_ends[j - 1];
        for step in 0..n_j {
            let idx = hierarchy.level_ends[j] - 1 - step;
            debug_assert_eq!(schedule.len(), idx + 1);
            let pair = hierarchy.pairs[idx].as_ref().expect("bracket actuator above level 0");
            let input = StepInput {
                problem,
                schedule: &schedule,
                pair,
                keep,
                incoming: &y_t,
                budget: step_budget,
                stage: StageId::Imitation { level: j, step },
            };
            let (next, mut rep, y_next) = imitate(&input, params)?;
            rep.m = Some(m);
            rep.jbar = Some(jbar);
            report.budget_ledger.push(step_budget);
            let ok = rep.pass;
            report.stages.push(rep);
            schedule = next;
            y_t = y_next;
            if !ok {
                return finish(problem, params, report, schedule, y_t, &u);
            }
        }
        let bound = (2 * jbar - (j - 1)) as f64 / (2 * jbar) as f64 * eps;
        let err = y_t.sub(&problem.target)?.norm_h();
        let mut level = StageReport::new(StageId::Level { level: j - 1 }, err, bound);
        level.jbar = Some(jbar);
        let ok = level.pass;
        report.stages.push(level);
        if !ok {
            return finish(problem, params, report, schedule, y_t, &u);
        }
    }
    // F_0 lists the elements of U in order, so the schedule is already over U
    let schedule = ControlSchedule::new(
        schedule.actuators,
        schedule
            .coefficients
            .into_iter()
            .map(|mut c: TimeFn| {
                c.simplify();
                c
            })
            .collect(),
        horizon,
    )?;
    finish(problem, params, report, schedule, y_t, &u)
}
