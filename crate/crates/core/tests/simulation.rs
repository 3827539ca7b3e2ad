use std::sync::Arc;

use euler_ac::control_synth::{ControlSchedule, TimeFn};
use euler_ac::galerkin_sim::{endpoint, integrate, Forcing, SimOptions};
use euler_ac::random::{rng, unit_field};
use euler_ac::{DomainSpec, Field, Mode, Parity, SpectralBasis};

fn torus(n: usize) -> Arc<SpectralBasis> {
    SpectralBasis::enumerate(DomainSpec::standard_torus(), n).unwrap()
}

#[test]
fn eigenfield_is_a_steady_state() {
    let b = torus(5);
    let y0 = Field::from_mode(&b, &Mode::torus(3, 1, Parity::Cos), 0.7).unwrap();
    let y = endpoint(&y0, 2.0, &Forcing::Zero, None, 1e-2).unwrap();
    assert!(y.sub(&y0).unwrap().norm_h() < 1e-13);
}

#[test]
fn rectangle_flow_conserves_energy() {
    let b = SpectralBasis::enumerate(DomainSpec::rectangle(1.5, 1.0).unwrap(), 5).unwrap();
    let y0 = unit_field(&b, &mut rng(9));
    let traj = integrate(&y0, 0.5, &Forcing::Zero, None, &SimOptions::with_dt(1e-3)).unwrap();
    let e0 = traj.energy[0];
    let drift = traj.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    assert!(drift <= 1e-8 * e0, "drift {drift}");
}

#[test]
fn constant_control_on_a_mode_adds_linearly_from_rest() {
    // starting at rest, a force along one eigenfield drives that mode only
    let b = torus(4);
    let e = Field::from_mode(&b, &Mode::torus(1, 2, Parity::Sin), 1.0).unwrap();
    let s = ControlSchedule::new(vec![e.clone()], vec![TimeFn::constant(0.3)], 1.0).unwrap();
    let y = endpoint(&Field::zeros(&b), 1.0, &Forcing::Zero, Some(&s), 1e-2).unwrap();
    assert!(y.sub(&e.scale(0.3)).unwrap().norm_h() < 1e-13);
}

#[test]
fn sampled_forcing_matches_closed_form_for_linear_ramps() {
    let b = torus(3);
    let g = Field::from_mode(&b, &Mode::torus(1, 1, Parity::Cos), 1.0).unwrap();
    let closed = Forcing::ClosedForm(vec![(g.clone(), TimeFn::exp_poly(vec![0.0, 2.0], 0.0, 0.0))]);
    let sampled = Forcing::sampled(vec![0.0, 1.0], vec![Field::zeros(&b), g.scale(2.0)]).unwrap();
    let y0 = unit_field(&b, &mut rng(4)).scale(0.3);
    let a = endpoint(&y0, 1.0, &closed, None, 1e-3).unwrap();
    let c = endpoint(&y0, 1.0, &sampled, None, 1e-3).unwrap();
    assert!(a.sub(&c).unwrap().norm_h() < 1e-12);
}
