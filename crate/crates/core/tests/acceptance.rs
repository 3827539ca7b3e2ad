//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so
//! the lines are always visible; exits nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use euler_ac::control_synth::imitation::{gap_sweep, imitate, BracketPair, StepInput};
use euler_ac::control_synth::pipeline::{synthesize, Hierarchy, Synthesis};
use euler_ac::control_synth::stage_a::steer;
use euler_ac::control_synth::{build_um, ControlProblem, ControlSchedule, StageId, SynthesisParams, TimeFn};
use euler_ac::galerkin_sim::{endpoint, Forcing};
use euler_ac::harness::{self, loglog_slope, Mutation, Weight};
use euler_ac::random::{rng, unit_field_leading};
use euler_ac::saturation::{run_saturation, GeneratorPreset, Subspace, DEFAULT_TOL};
use euler_ac::{DomainSpec, Field, Mode, Parity, SpectralBasis};

type Outcome = Result<String, String>;

fn torus(n: usize) -> Arc<SpectralBasis> {
    SpectralBasis::enumerate(DomainSpec::standard_torus(), n).unwrap()
}

fn mode(b: &Arc<SpectralBasis>, k1: i32, k2: i32, p: Parity, amp: f64) -> Field {
    Field::from_mode(b, &Mode::torus(k1, k2, p), amp).unwrap()
}

fn require(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn trilinear() -> Outcome {
    let r = harness::check_trilinear(&torus(8), 1000, 11, Mutation::None).map_err(|e| e.to_string())?;
    require(
        r.pass,
        format!(
            "max|b(y,z,z)| = {:.1e}, max|b(y,z,w)+b(y,w,z)| = {:.1e} over 1000 unit triples (bound 1e-11)",
            r.values["max_b_yzz"], r.values["max_b_yzw_plus_b_ywz"]
        ),
    )
}

fn equilibria() -> Outcome {
    let b = torus(8);
    let eq = harness::check_equilibria(&b, Mutation::None).map_err(|e| e.to_string())?;
    let sup = harness::check_interaction_support(&b, b.len(), Mutation::None).map_err(|e| e.to_string())?;
    require(
        eq.pass && sup.pass,
        format!(
            "max‖B(e,e)‖ = {:.1e} (bound 1e-12); {} support violations over {} mode pairs",
            eq.measured, sup.measured, sup.metadata["pairs"]
        ),
    )
}

fn conservation() -> Outcome {
    let [e, z] = harness::check_energy(&torus(8), 20, 1.0, 1e-3, Mutation::None).map_err(|e| e.to_string())?;
    require(
        e.pass && z.pass,
        format!(
            "energy drift {:.1e} (bound 1e-8), enstrophy drift {:.1e} (bound 1e-6), 20 seeds",
            e.measured, z.measured
        ),
    )
}

fn oscillatory() -> Outcome {
    let ks: Vec<u32> = (2..=256).collect();
    let pow2: Vec<u32> = (1..=8).map(|i| 1 << i).collect();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut slope = f64::NAN;
    for (name, theta, derivative) in harness::standard_weights() {
        let w = Weight {
            name,
            theta: &theta,
            derivative: &derivative,
        };
        let r = harness::check_osc_integral(&w, 1.0, &ks, Mutation::None).map_err(|e| e.to_string())?;
        ok &= r.pass;
        worst = worst.max(r.measured);
        if name == "exp" {
            let s = harness::check_osc_slope(&w, 1.0, &pow2, 0.2, Mutation::None).map_err(|e| e.to_string())?;
            ok &= s.pass;
            slope = s.values["slope"];
        }
    }
    require(
        ok,
        format!("worst integral/bound ratio {worst:.3} over Θ ∈ {{1, s, s², eˢ}}, K = 2..256; sin slope for eˢ = {slope:.3} (−1 ± 0.2)"),
    )
}

fn oblique() -> Outcome {
    let g = harness::check_oblique_gram(100, 32, 5, Mutation::None).map_err(|e| e.to_string())?;
    let [d, s] = harness::check_oblique_perturbation(32, 4, &[1e-1, 1e-2, 1e-3, 1e-4], 5, Mutation::None)
        .map_err(|e| e.to_string())?;
    require(
        g.pass && d.pass && s.pass,
        format!(
            "Gram vs dense max diff {:.1e} on 100 splits; leakage vs dense {:.1e}; leakage slope {:.4} (1 ± 0.1)",
            g.measured, d.measured, s.values["slope"]
        ),
    )
}

/// Wavevector closure: level `j+1` adds `k ± l` for generator wavevectors
/// `k` and level-`j` wavevectors `l` that interact (`k × l ≠ 0`,
/// `|k| ≠ |l|`), inside the cutoff box.
fn closure_dims(generators: &[[i32; 2]], cutoff: i32, depth: usize) -> Vec<usize> {
    let canon = |k: [i32; 2]| {
        if k[0] < 0 || (k[0] == 0 && k[1] < 0) {
            [-k[0], -k[1]]
        } else {
            k
        }
    };
    let s0: BTreeSet<[i32; 2]> = generators.iter().map(|&k| canon(k)).collect();
    let mut levels = vec![s0.clone()];
    for _ in 0..depth {
        let cur = levels.last().unwrap().clone();
        let mut next = cur.clone();
        for k in &s0 {
            for l in &cur {
                let cross = k[0] * l[1] - k[1] * l[0];
                let (nk, nl) = (k[0] * k[0] + k[1] * k[1], l[0] * l[0] + l[1] * l[1]);
                if cross == 0 || nk == nl {
                    continue;
                }
                for t in [[k[0] + l[0], k[1] + l[1]], [k[0] - l[0], k[1] - l[1]]] {
                    if t != [0, 0] && t[0].abs() <= cutoff && t[1].abs() <= cutoff {
                        next.insert(canon(t));
                    }
                }
            }
        }
        if next.len() == cur.len() {
            break;
        }
        levels.push(next);
    }
    levels.iter().map(|s| 2 * s.len()).collect()
}

fn saturation() -> Outcome {
    let b = torus(3);
    let g0 = GeneratorPreset::Torus8.generators(&b).map_err(|e| e.to_string())?;
    let run = run_saturation(&g0, 10).map_err(|e| e.to_string())?;
    let coverage = run.space.coverage(b.len());
    let oracle = closure_dims(&[[1, 0], [0, 1], [1, 1], [1, -1]], 3, 10);
    let single = run_saturation(
        &GeneratorPreset::TorusSingle.generators(&b).map_err(|e| e.to_string())?,
        10,
    )
    .map_err(|e| e.to_string())?;
    let b6 = torus(6);
    let shells = run_saturation(
        &GeneratorPreset::TorusShells
            .generators(&b6)
            .map_err(|e| e.to_string())?,
        3,
    )
    .map_err(|e| e.to_string())?;
    let shells_oracle = closure_dims(&[[1, 1], [2, 1], [1, 2]], 6, 3);
    require(
        (coverage - 1.0).abs() < 1e-12
            && run.level_dims == oracle
            && single.report.stalled
            && single.report.terminal_level == 0
            && shells.level_dims == shells_oracle,
        format!(
            "torus8 preset: dims {:?} (closure oracle {:?}), coverage {coverage:.12} at ȷ̄ = {}; single eigenfield stalls at level {}; shell preset dims {:?} = oracle {:?}",
            run.level_dims,
            oracle,
            run.terminal_level(),
            single.report.terminal_level,
            shells.level_dims,
            shells_oracle
        ),
    )
}

fn stage_a() -> Outcome {
    let b = torus(8);
    let g0 = GeneratorPreset::Torus8.generators(&b).map_err(|e| e.to_string())?;
    let sat = run_saturation(&g0, 2).map_err(|e| e.to_string())?;
    let hierarchy = Hierarchy::build(&sat, 0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut mus = Vec::new();
    let mut ok = true;
    let mut run = |y0: Field, ya: Field, f: Forcing| -> Result<(), String> {
        let params = SynthesisParams {
            epsilon: 0.1 * y0.norm_h().max(ya.norm_h()),
            ..Default::default()
        };
        let problem = ControlProblem::new(y0, ya, f, 1.0).map_err(|e| e.to_string())?;
        let rho = params.rho_for(1.0, 0.0);
        let um = build_um(4, &sat, rho).map_err(|e| e.to_string())?;
        let (_, report, _) =
            steer(&problem, &um.projector, &hierarchy.actuators, &params).map_err(|e| e.to_string())?;
        ok &= report.pass && report.error <= params.epsilon / 2.0;
        worst = worst.max(report.error / params.epsilon);
        mus.push(report.mu.unwrap_or(f64::NAN));
        Ok(())
    };
    for seed in 0..10 {
        let mut r = rng(100 + seed);
        let y0 = unit_field_leading(&b, 4, &mut r);
        let ya = unit_field_leading(&b, 4, &mut r).scale(0.5 + 0.1 * seed as f64);
        run(y0, ya, Forcing::Zero)?;
    }
    // smooth forcing with a small component outside ℰ_4
    let mut g = mode(&b, 1, 0, Parity::Cos, 0.5);
    g.axpy(0.02, &mode(&b, 2, 1, Parity::Sin, 1.0))
        .map_err(|e| e.to_string())?;
    let f = Forcing::ClosedForm(vec![(g, TimeFn::cos(1.0, PI))]);
    let mut r = rng(200);
    run(unit_field_leading(&b, 4, &mut r), unit_field_leading(&b, 4, &mut r), f)?;
    require(
        ok,
        format!("11 cases (10 unforced, 1 forced): worst error/ε = {worst:.2e} (bound 0.5), μ = {mus:?}"),
    )
}

/// Level-one scenario with one bracket actuator `ℬ(ψ)φ`, where `φ` mixes
/// two shells so the comparator differs from the incoming flow.
fn imitation() -> Outcome {
    let b = torus(6);
    let psi = mode(&b, 1, 1, Parity::Cos, 1.0);
    let mut phi = mode(&b, 2, 1, Parity::Sin, 1.0);
    phi.axpy(1.0, &mode(&b, 1, 0, Parity::Cos, 1.0))
        .map_err(|e| e.to_string())?;
    let g0 = Subspace::from_generators(&[psi, phi], DEFAULT_TOL).map_err(|e| e.to_string())?;
    let sat = run_saturation(&g0, 1).map_err(|e| e.to_string())?;
    let h = Hierarchy::build(&sat, 1).map_err(|e| e.to_string())?;
    if h.added(1) != 1 {
        return Err(format!("scenario has {} bracket actuators, expected 1", h.added(1)));
    }
    let m = h.actuators.len();
    let mut coefficients = vec![TimeFn::zero(); m];
    coefficients[m - 1] = TimeFn::exp_poly(vec![1.0, 2.0], -1.0, 0.0);
    let schedule = ControlSchedule::new(h.actuators.clone(), coefficients, 1.0).map_err(|e| e.to_string())?;
    let pair: &BracketPair = h.pairs[m - 1].as_ref().unwrap();
    let y0 = mode(&b, 1, 0, Parity::Cos, 0.5);
    let params = SynthesisParams::default();
    let incoming = endpoint(&y0, 1.0, &Forcing::Zero, Some(&schedule), params.dt).map_err(|e| e.to_string())?;
    let problem = ControlProblem::new(y0, incoming.clone(), Forcing::Zero, 1.0).map_err(|e| e.to_string())?;

    let ks: Vec<u32> = (3..10).map(|i| 1 << i).collect();
    let gaps = gap_sweep(&problem, &schedule, pair, h.level_ends[0], 0.5, &ks, &params).map_err(|e| e.to_string())?;
    let slope = loglog_slope(&gaps.iter().map(|&(k, g)| (k as f64, g)).collect::<Vec<_>>());

    let epsilon = 0.02 * incoming.norm_h();
    let budget = epsilon / 2.0; // ε/(2 n ȷ̄) with n = ȷ̄ = 1
    let input = StepInput {
        problem: &problem,
        schedule: &schedule,
        pair,
        keep: h.level_ends[0],
        incoming: &incoming,
        budget,
        stage: StageId::Imitation { level: 1, step: 0 },
    };
    let (out, report, _) = imitate(&input, &params).map_err(|e| e.to_string())?;
    let increase = report.error - report.diagnostics["incoming_error"];
    require(
        (slope + 1.0).abs() <= 0.3 && report.pass && increase <= budget && out.len() == m - 1,
        format!(
            "gap slope {slope:.3} at β = 0.5 over K = 8..512 (−1 ± 0.3); accepted β = {:?}, K = {:?}, error increase {increase:.2e} ≤ budget {budget:.2e}; comparator gap {:.2e}",
            report.beta,
            report.k,
            report.diagnostics.get("gap_comparator").copied().unwrap_or(f64::NAN)
        ),
    )
}

fn pipeline_problem() -> (ControlProblem, Subspace, SynthesisParams) {
    let b = torus(6);
    let g0 = GeneratorPreset::TorusShells.generators(&b).unwrap();
    let y0 = mode(&b, 1, 0, Parity::Cos, 0.5);
    let ya = mode(&b, 0, 1, Parity::Sin, 0.5);
    let params = SynthesisParams {
        epsilon: 0.02,
        ..Default::default()
    };
    (ControlProblem::new(y0, ya, Forcing::Zero, 1.0).unwrap(), g0, params)
}

fn pipeline(run: &Synthesis) -> Outcome {
    let r = &run.report;
    let jbar = r.jbar.unwrap_or(0);
    let mut levels_ok = true;
    let mut level_errors = Vec::new();
    for s in &r.stages {
        if let StageId::Level { level } = s.stage {
            let bound = (2 * jbar - level) as f64 / (2 * jbar) as f64 * r.epsilon;
            levels_ok &= s.error <= bound && s.pass;
            level_errors.push((level, s.error, bound));
        }
    }
    let ledger: f64 = r.budget_ledger.iter().sum();
    let steps = r
        .stages
        .iter()
        .filter(|s| matches!(s.stage, StageId::Imitation { .. }))
        .count();
    let physical = run.schedule.len() == r.physical_actuators;
    require(
        r.pass
            && r.final_error <= r.epsilon
            && r.admissibility_residual <= 1e-10
            && levels_ok
            && physical
            && jbar >= 1
            && (ledger - r.epsilon / 2.0).abs() <= 1e-15 * r.epsilon,
        format!(
            "final error {:.3e} ≤ ε = {}; ȷ̄ = {jbar}, n_j = {:?}, {steps} imitation steps; level errors (level, err, bound) {:?}; span U residual {:.1e}; budget ledger sum {:.6e} = ε/2",
            r.final_error, r.epsilon, r.added_per_level, level_errors, r.admissibility_residual, ledger
        ),
    )
}

fn determinism(first: &Synthesis) -> Outcome {
    let (problem, g0, params) = pipeline_problem();
    let json = first.schedule.to_json().map_err(|e| e.to_string())?;
    let replayed = ControlSchedule::from_json(&json).map_err(|e| e.to_string())?;
    let y0 = Field::from_entries(replayed.actuators[0].basis(), &problem.y0.to_entries()).map_err(|e| e.to_string())?;
    let ya =
        Field::from_entries(replayed.actuators[0].basis(), &problem.target.to_entries()).map_err(|e| e.to_string())?;
    let y_t = endpoint(
        &y0,
        problem.horizon,
        &problem.forcing,
        Some(&replayed),
        first.report.sim_dt,
    )
    .map_err(|e| e.to_string())?;
    let replay_err = y_t.sub(&ya).map_err(|e| e.to_string())?.norm_h();
    let diff = (replay_err - first.report.final_error).abs();
    let second = synthesize(&problem, &g0, &params).map_err(|e| e.to_string())?;
    let a = serde_json::to_string(&first.report).map_err(|e| e.to_string())?;
    let b = serde_json::to_string(&second.report).map_err(|e| e.to_string())?;
    let same_schedule = second.schedule.to_json().map_err(|e| e.to_string())? == json;
    require(
        diff <= 1e-10 && a == b && same_schedule,
        format!(
            "replayed error differs from the logged one by {diff:.1e}; rerun report bit-identical: {}; schedule identical: {same_schedule}",
            a == b
        ),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |id: usize, name: &str, limit: Duration, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let outcome = f();
        let elapsed = t.elapsed();
        let (ok, msg) = match outcome {
            Ok(m) if elapsed <= limit => (true, m),
            Ok(m) => (false, format!("{m}; runtime {elapsed:.1?} exceeds {limit:?}")),
            Err(m) => (false, m),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "{} {id:>2} {name}: {msg} [{:.2?}]",
            if ok { "PASS" } else { "FAIL" },
            elapsed
        );
    };
    let secs = Duration::from_secs;
    report(1, "trilinear identities", secs(10), &mut trilinear);
    report(
        2,
        "eigenfield equilibria and interaction support",
        secs(5),
        &mut equilibria,
    );
    report(3, "unforced conservation", secs(30), &mut conservation);
    report(4, "oscillatory integrals", secs(10), &mut oscillatory);
    report(5, "oblique projections", secs(20), &mut oblique);
    report(6, "saturation", secs(60), &mut saturation);
    report(7, "stage A steering", secs(300), &mut stage_a);
    report(8, "imitation step", secs(600), &mut imitation);
    let mut synthesis = None;
    report(9, "end-to-end descent", secs(1800), &mut || {
        let (problem, g0, params) = pipeline_problem();
        let run = synthesize(&problem, &g0, &params).map_err(|e| e.to_string())?;
        let out = pipeline(&run);
        synthesis = Some(run);
        out
    });
    report(10, "determinism and replay", secs(3600), &mut || match &synthesis {
        Some(s) => determinism(s),
        None => Err("no synthesis to replay".into()),
    });
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
