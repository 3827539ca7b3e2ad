//! Browser bindings: a live vorticity heatmap of the truncated flow and the
//! saturation coverage of the generator presets.

use std::sync::Arc;

use euler_ac::galerkin_sim::{integrate, Forcing, SimOptions};
use euler_ac::random::{rng, unit_field_leading};
use euler_ac::saturation::{run_saturation, GeneratorPreset};
use euler_ac::{DomainSpec, Field, SpectralBasis};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Flow {
    basis: Arc<SpectralBasis>,
    state: Field,
    time: f64,
}

#[wasm_bindgen]
impl Flow {
    /// A random flow on the `2π` torus over the eigenfields with `|k_i| ≤ cutoff`.
    #[wasm_bindgen(constructor)]
    pub fn new(cutoff: usize, seed: u32) -> Result<Flow, JsError> {
        let basis = SpectralBasis::enumerate(DomainSpec::standard_torus(), cutoff).map_err(js_err)?;
        let mut flow = Flow {
            state: Field::zeros(&basis),
            basis,
            time: 0.0,
        };
        flow.randomize(seed, 12);
        Ok(flow)
    }

    /// Unit-energy state over the `leading` lowest eigenfields.
    pub fn randomize(&mut self, seed: u32, leading: usize) {
        self.state = unit_field_leading(&self.basis, leading, &mut rng(seed as u64));
        self.time = 0.0;
    }

    /// Advances by `duration` with RK4 steps of at most `dt`.
    pub fn advance(&mut self, duration: f64, dt: f64) -> Result<(), JsError> {
        let traj = integrate(&self.state, duration, &Forcing::Zero, None, &SimOptions::with_dt(dt)).map_err(js_err)?;
        self.state = traj.final_state().clone();
        self.time += duration;
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn energy(&self) -> f64 {
        0.5 * self.state.norm_h().powi(2)
    }

    pub fn modes(&self) -> usize {
        self.basis.len()
    }

    /// Row-major `n × n` samples of the vorticity on the periodic cell.
    pub fn vorticity(&self, n: usize) -> Result<Vec<f64>, JsError> {
        let w = self.state.curl();
        let [lx, ly] = self.basis.domain().lengths;
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let p = [lx * (i as f64 + 0.5) / n as f64, ly * (j as f64 + 0.5) / n as f64];
                out.push(w.evaluate(p).map_err(js_err)?);
            }
        }
        Ok(out)
    }
}

/// Level dimensions and coverage for a named preset, as JSON:
/// `{"basis_dim": n, "levels": [{"dim": d, "coverage": c}, ...], "stalled": bool}`.
#[wasm_bindgen]
pub fn saturation_levels(preset: &str, cutoff: usize, depth: usize) -> Result<String, JsError> {
    let preset: GeneratorPreset = serde_json::from_value(serde_json::Value::String(preset.into()))
        .map_err(|_| JsError::new(&format!("unknown preset {preset}")))?;
    let domain = match preset {
        GeneratorPreset::RectangleLow => {
            DomainSpec::rectangle(std::f64::consts::PI, std::f64::consts::PI).map_err(js_err)?
        }
        _ => DomainSpec::standard_torus(),
    };
    let basis = SpectralBasis::enumerate(domain, cutoff).map_err(js_err)?;
    let run = run_saturation(&preset.generators(&basis).map_err(js_err)?, depth).map_err(js_err)?;
    let levels: Vec<_> = run
        .report
        .levels
        .iter()
        .map(|l| serde_json::json!({"dim": l.dim, "coverage": l.coverage}))
        .collect();
    Ok(serde_json::json!({"basis_dim": basis.len(), "levels": levels, "stalled": run.report.stalled}).to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flow_conserves_energy_and_samples_the_grid() {
        let mut f = Flow::new(4, 3).unwrap();
        let e0 = f.energy();
        f.advance(0.2, 1e-2).unwrap();
        assert!((f.energy() - e0).abs() < 1e-9 * e0);
        assert_eq!(f.vorticity(8).unwrap().len(), 64);
        assert!((f.time() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn torus8_saturates_fully_at_cutoff_three() {
        let s: serde_json::Value = serde_json::from_str(&saturation_levels("torus8", 3, 8).unwrap()).unwrap();
        let last = s["levels"].as_array().unwrap().last().unwrap().clone();
        assert_eq!(last["dim"], s["basis_dim"]);
    }
}
