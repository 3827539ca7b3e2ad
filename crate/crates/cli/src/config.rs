//! Experiment configuration: a JSON document that fully determines a run.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use euler_ac::control_synth::{ControlProblem, SynthesisParams, TimeFn};
use euler_ac::field::FieldEntry;
use euler_ac::galerkin_sim::Forcing;
use euler_ac::harness::SuiteConfig;
use euler_ac::random::{rng, unit_field_leading};
use euler_ac::saturation::{GeneratorPreset, Subspace};
use euler_ac::{DomainSpec, Field, Mode, SpectralBasis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub cutoff: usize,
    pub generators: GeneratorSpec,
    pub horizon: f64,
    pub forcing: ForcingSpec,
    pub initial: FieldSpec,
    pub target: FieldSpec,
    /// Overrides for the synthesis parameters, `epsilon` and `s_bar`
    /// included.
    pub synthesis: SynthesisParams,
    pub simulation: SimulationSpec,
    pub verify: SuiteConfig,
    pub out: PathBuf,
    /// Seeds random field descriptors that carry no seed of their own.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let synthesis = SynthesisParams {
            epsilon: 0.05,
            ..Default::default()
        };
        ExperimentConfig {
            domain: DomainSpec::standard_torus(),
            cutoff: 6,
            generators: GeneratorSpec::Preset(GeneratorPreset::TorusShells),
            horizon: 1.0,
            forcing: ForcingSpec::Zero,
            initial: FieldSpec::Entries(vec![FieldEntry {
                mode: Mode::torus(1, 0, euler_ac::Parity::Cos),
                coefficient: 0.5,
            }]),
            target: FieldSpec::Entries(vec![FieldEntry {
                mode: Mode::torus(0, 1, euler_ac::Parity::Sin),
                coefficient: 0.5,
            }]),
            synthesis,
            simulation: SimulationSpec::default(),
            verify: SuiteConfig::default(),
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorSpec {
    Preset(GeneratorPreset),
    /// Each entry list becomes one generator.
    Fields(Vec<Vec<FieldEntry>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSpec {
    Entries(Vec<FieldEntry>),
    Random(RandomField),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomField {
    /// Number of leading eigenfields carrying coefficients.
    pub leading: usize,
    #[serde(default = "one")]
    pub norm: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ForcingSpec {
    Zero,
    ClosedForm { terms: Vec<ForcingTerm> },
    Sampled { times: Vec<f64>, values: Vec<FieldSpec> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingTerm {
    pub field: FieldSpec,
    pub time: TimeFn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSpec {
    pub dt: f64,
    pub snapshot_stride: usize,
    pub blowup_bound: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            dt: 1e-3,
            snapshot_stride: 10,
            blowup_bound: 1e6,
        }
    }
}

/// Everything built from a config that the subcommands share.
pub struct Setup {
    pub basis: Arc<SpectralBasis>,
    pub problem: ControlProblem,
}

impl ExperimentConfig {
    /// Parses and validates; serde errors carry line and column.
    pub fn from_str_checked(text: &str, origin: &Path) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).with_context(|| format!("invalid config {}", origin.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_str_checked(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate().context("domain")?;
        if self.cutoff == 0 {
            bail!("cutoff must be at least 1");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            bail!("horizon must be positive and finite, got {}", self.horizon);
        }
        self.synthesis.validate().context("synthesis")?;
        let s = &self.simulation;
        if !(s.dt > 0.0) || s.snapshot_stride == 0 || !(s.blowup_bound > 0.0) {
            bail!("simulation: dt, snapshot_stride and blowup_bound must be positive");
        }
        if let GeneratorSpec::Fields(g) = &self.generators {
            if g.is_empty() {
                bail!("generators: empty field list");
            }
        }
        if self.verify.cutoff == 0 || self.verify.trials == 0 || self.verify.seeds == 0 {
            bail!("verify: cutoff, trials and seeds must be positive");
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn basis(&self) -> Result<Arc<SpectralBasis>> {
        Ok(SpectralBasis::enumerate(self.domain, self.cutoff)?)
    }

    pub fn field(&self, basis: &Arc<SpectralBasis>, spec: &FieldSpec, salt: u64) -> Result<Field> {
        Ok(match spec {
            FieldSpec::Entries(e) => Field::from_entries(basis, e)?,
            FieldSpec::Random(r) => {
                let seed = r.seed.unwrap_or(self.seed.wrapping_mul(0x9e37_79b9).wrapping_add(salt));
                unit_field_leading(basis, r.leading.max(1), &mut rng(seed)).scale(r.norm)
            }
        })
    }

    pub fn forcing(&self, basis: &Arc<SpectralBasis>) -> Result<Forcing> {
        Ok(match &self.forcing {
            ForcingSpec::Zero => Forcing::Zero,
            ForcingSpec::ClosedForm { terms } => Forcing::ClosedForm(
                terms
                    .iter()
                    .enumerate()
                    .map(|(i, t)| Ok((self.field(basis, &t.field, 100 + i as u64)?, t.time.clone())))
                    .collect::<Result<_>>()?,
            ),
            ForcingSpec::Sampled { times, values } => {
                let values = values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| self.field(basis, v, 1000 + i as u64))
                    .collect::<Result<_>>()?;
                Forcing::sampled(times.clone(), values)?
            }
        })
    }

    pub fn generators(&self, basis: &Arc<SpectralBasis>) -> Result<Subspace> {
        Ok(match &self.generators {
            GeneratorSpec::Preset(p) => p.generators(basis)?,
            GeneratorSpec::Fields(list) => {
                let fields = list
                    .iter()
                    .map(|e| Field::from_entries(basis, e))
                    .collect::<euler_ac::Result<Vec<_>>>()?;
                Subspace::from_generators(&fields, self.synthesis.saturation_tol)?
            }
        })
    }

    pub fn setup(&self) -> Result<Setup> {
        let basis = self.basis()?;
        let y0 = self.field(&basis, &self.initial, 1).context("initial")?;
        let ya = self.field(&basis, &self.target, 2).context("target")?;
        let forcing = self.forcing(&basis).context("forcing")?;
        let problem = ControlProblem::new(y0, ya, forcing, self.horizon)?;
        Ok(Setup { basis, problem })
    }
}
