//! Steering with fictitious actuators through the oblique projection
//! `P = P_{𝒰_M}^{ℰ_M^⊥}`.
//!
//! With `a(t) = (1 - t/T)e^{-μt}` and `b(t) = (t/T)e^{-μ(T-t)}`, the
//! reference `η = a P y₀ + b P y_a` interpolates the projected endpoints and
//! the control is `c = η̇ - P f`.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::galerkin_sim::{endpoint, Forcing};
use crate::linalg;

use super::{
    measure_cb, step_for, Attempt, ControlProblem, ControlSchedule, ObliqueProjector, StageId, StageReport,
    SynthesisParams, TimeFn,
};

/// `(1 - t/T) e^{-μt}`.
pub fn decay_weight(mu: f64, horizon: f64) -> TimeFn {
    TimeFn::exp_poly(vec![1.0, -1.0 / horizon], -mu, 0.0)
}

/// `(t/T) e^{-μ(T-t)}`.
pub fn growth_weight(mu: f64, horizon: f64) -> TimeFn {
    TimeFn::exp_poly(vec![0.0, 1.0 / horizon], mu, horizon)
}

/// Coordinates of `target` in the list `actuators`, rejecting targets that
/// are not in their span.
pub fn coordinates(actuators: &[Field], target: &Field) -> Result<Vec<f64>> {
    if actuators.is_empty() {
        return if target.norm_h() == 0.0 {
            Ok(Vec::new())
        } else {
            Err(Error::Dimension("empty actuator list".into()))
        };
    }
    let cols: Vec<&[f64]> = actuators.iter().map(|f| f.coeffs()).collect();
    let a = linalg::columns(target.len(), &cols);
    let (x, residual) = linalg::least_squares(&a, target.coeffs())?;
    let scale = target.norm_h().max(1.0);
    if residual > 1e-9 * scale {
        return Err(Error::Dimension(format!(
            "direction leaves the actuator span (residual {residual:e})"
        )));
    }
    Ok(x)
}

/// The reference trajectory `η` as a field-valued pair of weights.
pub struct Reference {
    pub p0: Field,
    pub pa: Field,
    pub a: TimeFn,
    pub b: TimeFn,
}

impl Reference {
    pub fn new(problem: &ControlProblem, projector: &ObliqueProjector, mu: f64) -> Result<Self> {
        Ok(Reference {
            p0: projector.apply_field(&problem.y0)?,
            pa: projector.apply_field(&problem.target)?,
            a: decay_weight(mu, problem.horizon),
            b: growth_weight(mu, problem.horizon),
        })
    }

    pub fn eval(&self, t: f64) -> Field {
        let mut out = self.p0.scale(self.a.eval(t));
        out.axpy(self.b.eval(t), &self.pa).expect("same basis");
        out
    }
}

/// Stage A control for a fixed `μ`, expressed over `actuators`.
pub fn stage_a_schedule(
    problem: &ControlProblem,
    projector: &ObliqueProjector,
    actuators: &[Field],
    mu: f64,
) -> Result<ControlSchedule> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    let eta = Reference::new(problem, projector, mu)?;
    let da = eta.a.derivative();
    let db = eta.b.derivative();
    let c0 = coordinates(actuators, &eta.p0)?;
    let ca = coordinates(actuators, &eta.pa)?;
    let mut forcing_terms = Vec::new();
    match &problem.forcing {
        Forcing::Zero => {}
        Forcing::ClosedForm(terms) => {
            for (g, w) in terms {
                forcing_terms.push((coordinates(actuators, &projector.apply_field(g)?)?, w));
            }
        }
        Forcing::Sampled { .. } => {
            return Err(Error::Unsupported(
                "steering needs a closed-form forcing to keep the control analytic".into(),
            ))
        }
    }
    let coefficients = (0..actuators.len())
        .map(|i| {
            let mut u = da.scale(c0[i]).add_scaled(ca[i], &db);
            for (cf, w) in &forcing_terms {
                u = u.add_scaled(-cf[i], w);
            }
            u.simplify();
            u
        })
        .collect();
    ControlSchedule::new(actuators.to_vec(), coefficients, problem.horizon)
}

/// Doubling search over `μ` until the endpoint error is at most `ε/2`.
///
/// Returns the last schedule tried together with its report; a report with
/// `pass == false` means the cap was reached.
pub fn steer(
    problem: &ControlProblem,
    projector: &ObliqueProjector,
    actuators: &[Field],
    params: &SynthesisParams,
) -> Result<(ControlSchedule, StageReport, Field)> {
    params.validate()?;
    let budget = params.epsilon / 2.0;
    let mut report = StageReport::new(StageId::StageA, f64::INFINITY, budget);
    report.m = Some(projector.range().ncols());
    let basis = problem.y0.basis();
    report.diag("P_norm", projector.norm());
    report.diag("P_complement_norm", projector.complement_norm());
    report.diag("leakage", projector.leakage());
    report.diag("xi_condition", projector.condition());
    report.diag("C_b", measure_cb(basis, 16, 0x5eed)?);

    let mut best: Option<(ControlSchedule, Field, f64, f64)> = None;
    let mut mu = params.mu0;
    while mu <= params.mu_cap * (1.0 + 1e-12) {
        let schedule = stage_a_schedule(problem, projector, actuators, mu)?;
        let dt = step_for(params, Some(&schedule)).min(problem.horizon);
        let y_t = endpoint(&problem.y0, problem.horizon, &problem.forcing, Some(&schedule), dt)?;
        let error = y_t.sub(&problem.target)?.norm_h();
        report.attempts.push(Attempt {
            mu: Some(mu),
            beta: None,
            k: None,
            error,
        });
        let better = best.as_ref().is_none_or(|b| error < b.2);
        let accepted = error <= budget;
        if better || accepted {
            best = Some((schedule, y_t, error, mu));
        }
        if accepted {
            break;
        }
        mu *= 2.0;
    }
    let (schedule, y_t, error, mu) = best.expect("at least one mu tried");
    report.mu = Some(mu);
    report.set_error(error);
    let eta = Reference::new(problem, projector, mu)?;
    let samples = 64;
    let eta_c1 = (0..=samples)
        .map(|i| eta.eval(problem.horizon * i as f64 / samples as f64).c1_bound())
        .fold(0.0, f64::max);
    report.diag("eta_c1_max", eta_c1);
    report.diag("z0_norm", problem.y0.sub(&eta.eval(0.0))?.norm_h());
    Ok((schedule, report, y_t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control_synth::oblique::leading_frame;
    use crate::random::{rng, unit_field_leading};
    use crate::spectral_basis::{DomainSpec, SpectralBasis};
    use std::sync::Arc;

    fn setup(n: usize, m: usize) -> (Arc<SpectralBasis>, ObliqueProjector, Vec<Field>) {
        let b = SpectralBasis::enumerate(DomainSpec::standard_torus(), n).unwrap();
        let e = leading_frame(b.len(), m);
        let p = ObliqueProjector::new(e.clone(), e).unwrap();
        let acts = (0..m).map(|i| Field::basis_vector(&b, i).unwrap()).collect();
        (b, p, acts)
    }

    #[test]
    fn weights_hit_endpoints() {
        let (mu, t) = (3.0, 2.0);
        assert_eq!(decay_weight(mu, t).eval(0.0), 1.0);
        assert_eq!(decay_weight(mu, t).eval(t), 0.0);
        assert_eq!(growth_weight(mu, t).eval(0.0), 0.0);
        assert_eq!(growth_weight(mu, t).eval(t), 1.0);
    }

    #[test]
    fn zero_problem_gives_zero_control() {
        let (b, p, acts) = setup(2, 4);
        let problem = ControlProblem::new(Field::zeros(&b), Field::zeros(&b), Forcing::Zero, 1.0).unwrap();
        let s = stage_a_schedule(&problem, &p, &acts, 1.0).unwrap();
        assert!(s.is_zero());
        let (_, report, _) = steer(&problem, &p, &acts, &SynthesisParams::default()).unwrap();
        assert!(report.pass);
        assert_eq!(report.error, 0.0);
    }

    #[test]
    fn reference_matches_projected_endpoints() {
        let (b, p, _) = setup(3, 6);
        let mut r = rng(3);
        let y0 = unit_field_leading(&b, 10, &mut r);
        let ya = unit_field_leading(&b, 10, &mut r);
        let problem = ControlProblem::new(y0.clone(), ya.clone(), Forcing::Zero, 1.0).unwrap();
        let eta = Reference::new(&problem, &p, 4.0).unwrap();
        assert!(eta.eval(0.0).sub(&y0.truncate(6)).unwrap().norm_h() < 1e-15);
        assert!(eta.eval(1.0).sub(&ya.truncate(6)).unwrap().norm_h() < 1e-15);
    }

    #[test]
    fn steering_in_a_single_shell() {
        let (b, p, acts) = setup(4, 4);
        let mut r = rng(5);
        let y0 = unit_field_leading(&b, 4, &mut r);
        let ya = unit_field_leading(&b, 4, &mut r).scale(0.5);
        let problem = ControlProblem::new(y0, ya, Forcing::Zero, 1.0).unwrap();
        let (s, report, _) = steer(&problem, &p, &acts, &SynthesisParams::default()).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.error < 1e-9);
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn sampled_forcing_is_rejected() {
        let (b, p, acts) = setup(2, 4);
        let z = Field::zeros(&b);
        let f = Forcing::sampled(vec![0.0, 1.0], vec![z.clone(), z.clone()]).unwrap();
        let problem = ControlProblem::new(z.clone(), z, f, 1.0).unwrap();
        assert!(matches!(
            stage_a_schedule(&problem, &p, &acts, 1.0),
            Err(Error::Unsupported(_))
        ));
    }
}
