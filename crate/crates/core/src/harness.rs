//! Executable checks for the structural identities and estimates the control
//! construction relies on.
//!
//! Every check is deterministic for a fixed seed and returns a
//! [`CheckResult`] whose pass flag is recomputable from its own fields.
//! Each check also has a [`Mutation`] that corrupts the implementation under
//! test and must flip it to a failure.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control_synth::oblique::leading_frame;
use crate::control_synth::ObliqueProjector;
use crate::error::Result;
use crate::field::Field;
use crate::galerkin_sim::{integrate, Forcing, SimOptions};
use crate::linalg;
use crate::quadrature::integrate_doubling;
use crate::random::{rng, unit_field};
use crate::spectral_basis::{DomainKind, DomainSpec, SpectralBasis};
use rand::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    /// The quantity compared against `bound`.
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    /// Supporting measurements.
    pub values: BTreeMap<String, f64>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl CheckResult {
    pub fn new(id: &str, measured: f64, bound: f64) -> Self {
        CheckResult {
            id: id.to_string(),
            measured,
            bound,
            pass: measured.is_finite() && measured <= bound,
            values: BTreeMap::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn value(mut self, key: &str, v: f64) -> Self {
        if v.is_finite() {
            self.values.insert(key.to_string(), v);
        }
        self
    }

    pub fn meta(mut self, key: &str, v: impl Into<serde_json::Value>) -> Self {
        self.metadata.insert(key.to_string(), v.into());
        self
    }

    /// Recomputes the pass decision from the stored numbers.
    pub fn recheck(&self) -> bool {
        self.measured.is_finite() && self.measured <= self.bound
    }
}

/// One JSON object per line.
pub fn to_json_lines(results: &[CheckResult]) -> Result<String> {
    let mut out = String::new();
    for r in results {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn from_json_lines(s: &str) -> Result<Vec<CheckResult>> {
    s.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

pub fn summary_csv(results: &[CheckResult]) -> String {
    let mut out = String::from("id,measured,bound,pass\n");
    for r in results {
        out.push_str(&format!("{},{:e},{:e},{}\n", r.id, r.measured, r.bound, r.pass));
    }
    out
}

/// Deliberate corruptions used to show that each check can fail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    #[default]
    None,
    /// Negates the first output coefficient of `B`.
    FlipFirstOutput,
    /// Adds `10⁻³ e_last` to the second argument of `B`.
    ShiftSecondArgument,
    /// Uses `Ξᵀ` in place of `Ξ⁻¹` in the oblique projector.
    TransposeGram,
    /// Replaces the carrier `sin(πKs/T)` by `sin(πs/T)`.
    FrozenCarrier,
    /// Drops the vorticity term from the norm-equivalence denominator.
    DropCurl,
    /// Simulates the "unforced" flow with a constant forcing.
    ConstantForcing,
}

impl Mutation {
    pub fn bilinear(self, y: &Field, z: &Field) -> Result<Field> {
        match self {
            Mutation::FlipFirstOutput => {
                let mut c = y.bilinear(z)?.into_coeffs();
                c[0] = -c[0];
                Field::from_coeffs(y.basis(), c)
            }
            Mutation::ShiftSecondArgument => {
                let mut z = z.clone();
                let last = Field::basis_vector(z.basis(), z.len() - 1)?;
                z.axpy(1e-3, &last)?;
                y.bilinear(&z)
            }
            _ => y.bilinear(z),
        }
    }
}

/// `max |b(y,z,z)|` and `max |b(y,z,w) + b(y,w,z)|` over seeded unit triples.
pub fn check_trilinear(
    basis: &Arc<SpectralBasis>,
    trials: usize,
    seed: u64,
    mutation: Mutation,
) -> Result<CheckResult> {
    let mut r = rng(seed);
    let (mut zz, mut anti) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let y = unit_field(basis, &mut r);
        let z = unit_field(basis, &mut r);
        let w = unit_field(basis, &mut r);
        let byz = mutation.bilinear(&y, &z)?;
        let byw = mutation.bilinear(&y, &w)?;
        zz = zz.max(byz.inner_h(&z)?.abs());
        anti = anti.max((byz.inner_h(&w)? + byw.inner_h(&z)?).abs());
    }
    Ok(CheckResult::new("trilinear_antisymmetry", zz.max(anti), 1e-11)
        .value("max_b_yzz", zz)
        .value("max_b_yzw_plus_b_ywz", anti)
        .meta("cutoff", basis.cutoff())
        .meta("trials", trials)
        .meta("seed", seed))
}

/// `max_e ‖B(e, e)‖_H` over every basis field.
pub fn check_equilibria(basis: &Arc<SpectralBasis>, mutation: Mutation) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for i in 0..basis.len() {
        let e = Field::basis_vector(basis, i)?;
        worst = worst.max(mutation.bilinear(&e, &e)?.norm_h());
    }
    Ok(CheckResult::new("eigenfield_equilibria", worst, 1e-12).meta("cutoff", basis.cutoff()))
}

fn canonical(k: [i32; 2]) -> [i32; 2] {
    if k[0] < 0 || (k[0] == 0 && k[1] < 0) {
        [-k[0], -k[1]]
    } else {
        k
    }
}

/// On the torus `B(e_k, e_l)` lives on the wavevectors `k + l` and `k - l`.
/// Counts coefficients above `10⁻¹²` outside that set, and pairs touching
/// more than two wavevectors. The first `pairs_limit` modes are paired
/// exhaustively.
pub fn check_interaction_support(
    basis: &Arc<SpectralBasis>,
    pairs_limit: usize,
    mutation: Mutation,
) -> Result<CheckResult> {
    let n = basis.len().min(pairs_limit);
    let mut violations = 0usize;
    let mut pairs = 0usize;
    for i in 0..n {
        let ei = Field::basis_vector(basis, i)?;
        let ki = basis.entries()[i].mode.wavevector;
        for j in 0..n {
            let ej = Field::basis_vector(basis, j)?;
            let kj = basis.entries()[j].mode.wavevector;
            let allowed = [
                canonical([ki[0] + kj[0], ki[1] + kj[1]]),
                canonical([ki[0] - kj[0], ki[1] - kj[1]]),
            ];
            let b = mutation.bilinear(&ei, &ej)?;
            let mut seen: Vec<[i32; 2]> = Vec::new();
            for (c, entry) in b.coeffs().iter().zip(basis.entries()) {
                if c.abs() > 1e-12 {
                    let k = entry.mode.wavevector;
                    if !allowed.contains(&k) {
                        violations += 1;
                    }
                    if !seen.contains(&k) {
                        seen.push(k);
                    }
                }
            }
            if seen.len() > 2 {
                violations += 1;
            }
            pairs += 1;
        }
    }
    Ok(CheckResult::new("interaction_support", violations as f64, 0.0)
        .meta("cutoff", basis.cutoff())
        .meta("pairs", pairs))
}

/// `b(y, z, w)` from the coefficients against midpoint quadrature of
/// `∫ ((y·∇)z)·w`, which is exact for trigonometric integrands of this
/// degree.
pub fn check_galerkin_consistency(
    basis: &Arc<SpectralBasis>,
    trials: usize,
    seed: u64,
    mutation: Mutation,
) -> Result<CheckResult> {
    let (pts, w) = basis.quadrature_grid();
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let y = unit_field(basis, &mut r);
        let z = unit_field(basis, &mut r);
        let v = unit_field(basis, &mut r);
        let mut q = 0.0;
        for p in &pts {
            let u = y.evaluate(*p)?;
            let g = z.evaluate_gradient(*p)?;
            let t = v.evaluate(*p)?;
            q += (u[0] * g[0][0] + u[1] * g[0][1]) * t[0] + (u[0] * g[1][0] + u[1] * g[1][1]) * t[1];
        }
        q *= w;
        worst = worst.max((q - mutation.bilinear(&y, &z)?.inner_h(&v)?).abs());
    }
    let id = match basis.domain().kind {
        DomainKind::Torus => "galerkin_consistency_torus",
        DomainKind::RectangleLions => "galerkin_consistency_rectangle",
    };
    Ok(CheckResult::new(id, worst, 1e-10)
        .meta("cutoff", basis.cutoff())
        .meta("trials", trials)
        .meta("seed", seed))
}

/// Relative drift of energy and enstrophy over `[0, T]` for seeded unit
/// initial states, without forcing.
pub fn check_energy(
    basis: &Arc<SpectralBasis>,
    seeds: usize,
    horizon: f64,
    dt: f64,
    mutation: Mutation,
) -> Result<[CheckResult; 2]> {
    let forcing = match mutation {
        Mutation::ConstantForcing => Forcing::constant(Field::basis_vector(basis, 0)?.scale(1e-3)),
        _ => Forcing::Zero,
    };
    let (mut de, mut dz) = (0.0f64, 0.0f64);
    for s in 0..seeds {
        let y0 = unit_field(basis, &mut rng(s as u64));
        let tr = integrate(&y0, horizon, &forcing, None, &SimOptions::with_dt(dt))?;
        let (e0, e1) = (tr.energy[0], *tr.energy.last().expect("endpoint"));
        let (z0, z1) = (tr.enstrophy[0], *tr.enstrophy.last().expect("endpoint"));
        de = de.max((e1 - e0).abs() / e0);
        dz = dz.max((z1 - z0).abs() / z0);
    }
    let meta = |c: CheckResult| {
        c.meta("cutoff", basis.cutoff())
            .meta("seeds", seeds)
            .meta("horizon", horizon)
            .meta("dt", dt)
    };
    Ok([
        meta(CheckResult::new("energy_conservation", de, 1e-8)),
        meta(CheckResult::new("enstrophy_conservation", dz, 1e-6)),
    ])
}

/// A test weight `Θ` on `[0, T]` with its derivative.
pub struct Weight<'a> {
    pub name: &'a str,
    pub theta: &'a dyn Fn(f64) -> f64,
    pub derivative: &'a dyn Fn(f64) -> f64,
}

pub type ScalarFn = fn(f64) -> f64;

/// Standard weights `1`, `s`, `s²`, `eˢ`.
pub fn standard_weights() -> Vec<(&'static str, ScalarFn, ScalarFn)> {
    vec![
        ("one", |_| 1.0, |_| 0.0),
        ("s", |s| s, |_| 1.0),
        ("s2", |s| s * s, |s| 2.0 * s),
        ("exp", f64::exp, f64::exp),
    ]
}

/// `(∫ sin(πKs/T)Θ, ∫ cos(πKs/T)Θ)` to `10⁻¹²`.
pub fn oscillatory_integrals(w: &Weight, horizon: f64, k: u32, mutation: Mutation) -> Result<(f64, f64)> {
    let freq = match mutation {
        Mutation::FrozenCarrier => PI / horizon,
        _ => PI * k as f64 / horizon,
    };
    let start = 2 * k as usize + 4;
    let s = integrate_doubling(&|t| (freq * t).sin() * (w.theta)(t), 0.0, horizon, start, 1e-12)?;
    let c = integrate_doubling(&|t| (freq * t).cos() * (w.theta)(t), 0.0, horizon, start, 1e-12)?;
    Ok((s.value, c.value))
}

/// Both oscillatory-integral bounds for every `K` in `ks`. The embedding
/// constant is the per-weight surrogate `sup|Θ| / ‖Θ‖_{W^{1,1}}`.
pub fn check_osc_integral(w: &Weight, horizon: f64, ks: &[u32], mutation: Mutation) -> Result<CheckResult> {
    let l1 = |f: &dyn Fn(f64) -> f64| integrate_doubling(&|t| f(t).abs(), 0.0, horizon, 8, 1e-12).map(|r| r.value);
    let w11 = l1(w.theta)? + l1(w.derivative)?;
    let sup = (0..=1000)
        .map(|i| (w.theta)(horizon * i as f64 / 1000.0).abs())
        .fold(0.0, f64::max);
    let c = sup / w11;
    let mut worst = 0.0f64;
    for &k in ks {
        let (s, co) = oscillatory_integrals(w, horizon, k, mutation)?;
        let bound_sin = (PI * c + 1.0) * horizon / PI * w11 / k as f64;
        let bound_cos = horizon / PI * w11 / k as f64;
        worst = worst.max(s.abs() / bound_sin).max(co.abs() / bound_cos);
    }
    Ok(CheckResult::new(&format!("osc_integral_{}", w.name), worst, 1.0)
        .value("w11_norm", w11)
        .value("embedding_surrogate", c)
        .meta("horizon", horizon)
        .meta("k_min", ks.iter().min().copied().unwrap_or(0))
        .meta("k_max", ks.iter().max().copied().unwrap_or(0)))
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

/// Decay slope of `|∫ sin(πKs/T)Θ|` over `ks`, expected `-1 ± tol`.
pub fn check_osc_slope(w: &Weight, horizon: f64, ks: &[u32], tol: f64, mutation: Mutation) -> Result<CheckResult> {
    let pts = ks
        .iter()
        .map(|&k| Ok((k as f64, oscillatory_integrals(w, horizon, k, mutation)?.0.abs())))
        .collect::<Result<Vec<_>>>()?;
    let slope = loglog_slope(&pts);
    Ok(CheckResult::new(&format!("osc_integral_slope_{}", w.name), (slope + 1.0).abs(), tol).value("slope", slope))
}

/// `‖y‖²_{W^{1,2}} / (‖y‖²_{L²} + ‖∇^⊥·y‖²_{L²})` by midpoint quadrature.
pub fn curl_ratio(y: &Field, mutation: Mutation) -> Result<f64> {
    let (pts, w) = y.basis().quadrature_grid();
    let omega = y.curl();
    let (mut l2, mut grad, mut curl) = (0.0, 0.0, 0.0);
    for p in &pts {
        let u = y.evaluate(*p)?;
        let g = y.evaluate_gradient(*p)?;
        l2 += u[0] * u[0] + u[1] * u[1];
        grad += g.iter().flatten().map(|v| v * v).sum::<f64>();
        curl += omega.evaluate(*p)?.powi(2);
    }
    let denom = match mutation {
        Mutation::DropCurl => l2,
        _ => l2 + curl,
    };
    Ok((l2 + grad) * w / (denom * w))
}

/// Largest ratio over seeded fields at each cutoff; passes when the spread
/// across cutoffs stays within a factor of two.
pub fn check_curl_equiv(
    domain: DomainSpec,
    cutoffs: &[usize],
    samples: usize,
    seed: u64,
    mutation: Mutation,
) -> Result<CheckResult> {
    let mut maxima = Vec::new();
    for &n in cutoffs {
        let basis = SpectralBasis::enumerate(domain, n)?;
        let mut r = rng(seed);
        let mut best = 0.0f64;
        for _ in 0..samples {
            best = best.max(curl_ratio(&unit_field(&basis, &mut r), mutation)?);
        }
        maxima.push(best);
    }
    let hi = maxima.iter().copied().fold(0.0, f64::max);
    let lo = maxima.iter().copied().fold(f64::INFINITY, f64::min);
    let mut c = CheckResult::new("curl_equivalence", hi / lo, 2.0)
        .value("max_ratio", hi)
        .meta("samples", samples)
        .meta("seed", seed);
    for (n, m) in cutoffs.iter().zip(&maxima) {
        c = c.value(&format!("ratio_cutoff_{n}"), *m);
    }
    Ok(c)
}

fn random_frame<R: rand::Rng>(n: usize, m: usize, r: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, m, |_, _| r.random_range(-1.0..1.0));
    a.qr().q()
}

fn projector_matrix(x: &DMatrix<f64>, w: &DMatrix<f64>, mutation: Mutation) -> Result<DMatrix<f64>> {
    match mutation {
        Mutation::TransposeGram => Ok(x * (w.transpose() * x).transpose() * w.transpose()),
        _ => Ok(ObliqueProjector::new(x.clone(), w.clone())?.matrix()),
    }
}

/// Gram-formula projector against the dense solve `[X Y] c = z` on random
/// splits, maximum entrywise difference of the projector matrices.
pub fn check_oblique_gram(trials: usize, max_dim: usize, seed: u64, mutation: Mutation) -> Result<CheckResult> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let n = r.random_range(2..=max_dim);
        let m = r.random_range(1..n);
        let x = random_frame(n, m, &mut r);
        let y = random_frame(n, n - m, &mut r);
        let w = linalg::orthogonal_complement(&y);
        let p = projector_matrix(&x, &w, mutation)?;
        let mut xy = DMatrix::zeros(n, n);
        xy.view_mut((0, 0), (n, m)).copy_from(&x);
        xy.view_mut((0, m), (n, n - m)).copy_from(&y);
        let inv = xy.try_inverse().ok_or(crate::Error::DegenerateSum(f64::INFINITY))?;
        let dense = &x * inv.rows(0, m);
        worst = worst.max((p - dense).abs().max());
    }
    Ok(CheckResult::new("oblique_gram_vs_dense", worst, 1e-10)
        .meta("trials", trials)
        .meta("max_dim", max_dim)
        .meta("seed", seed))
}

/// `‖P_{ℰ^⊥}^{𝒰} P_ℰ‖` computed by a dense solve in the whole space.
pub fn dense_leakage(u: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<f64> {
    let n = u.nrows();
    let m = u.ncols();
    let ec = linalg::orthogonal_complement(e);
    let mut basis = DMatrix::zeros(n, n);
    basis.view_mut((0, 0), (n, m)).copy_from(u);
    basis.view_mut((0, m), (n, n - m)).copy_from(&ec);
    let inv = basis.try_inverse().ok_or(crate::Error::DegenerateSum(f64::INFINITY))?;
    // component along E^⊥ of each column of E, split along U
    let along = &ec * inv.rows(m, n - m) * e;
    Ok(linalg::spectral_norm(&along))
}

/// Leakage when the first vector of `ℰ_m` is tilted by `δ`, checked against
/// [`dense_leakage`]; the log-log slope in `δ` must be `1 ± 0.1`.
pub fn check_oblique_perturbation(
    n: usize,
    m: usize,
    deltas: &[f64],
    seed: u64,
    mutation: Mutation,
) -> Result<[CheckResult; 2]> {
    let e = leading_frame(n, m);
    let mut r = rng(seed);
    let dir = DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0)).normalize();
    let mut pts = Vec::new();
    let mut worst = 0.0f64;
    for &d in deltas {
        let mut u = e.clone();
        let mut c0 = u.column(0).clone_owned() + d * &dir;
        c0.normalize_mut();
        u.set_column(0, &c0);
        let leak = match mutation {
            Mutation::TransposeGram => {
                let xi = e.transpose() * &u;
                linalg::spectral_norm(&(&e - &u * xi.transpose()))
            }
            _ => ObliqueProjector::new(u.clone(), e.clone())?.leakage(),
        };
        worst = worst.max((leak - dense_leakage(&u, &e)?).abs());
        pts.push((d, leak));
    }
    let slope = loglog_slope(&pts);
    let mut slope_check = CheckResult::new("oblique_perturbation_slope", (slope - 1.0).abs(), 0.1)
        .value("slope", slope)
        .meta("n", n)
        .meta("m", m);
    for (d, l) in &pts {
        slope_check = slope_check.value(&format!("leakage_{d:e}"), *l);
    }
    Ok([
        CheckResult::new("oblique_perturbation_dense", worst, 1e-10)
            .meta("n", n)
            .meta("m", m),
        slope_check,
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub cutoff: usize,
    pub trials: usize,
    pub seeds: usize,
    pub seed: u64,
    pub horizon: f64,
    pub dt: f64,
    /// Modes paired exhaustively by the support check.
    pub support_modes: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            cutoff: 8,
            trials: 1000,
            seeds: 20,
            seed: 7,
            horizon: 1.0,
            dt: 1e-3,
            support_modes: 120,
        }
    }
}

/// Every check at the configured scale, sorted by id.
pub fn run_suite(cfg: &SuiteConfig, mutation: Mutation) -> Result<Vec<CheckResult>> {
    let torus = SpectralBasis::enumerate(DomainSpec::standard_torus(), cfg.cutoff)?;
    let small_torus = SpectralBasis::enumerate(DomainSpec::standard_torus(), 2)?;
    let small_rect = SpectralBasis::enumerate(DomainSpec::rectangle(PI, 2.0)?, 3)?;
    let mut out = vec![
        check_trilinear(&torus, cfg.trials, cfg.seed, mutation)?,
        check_equilibria(&torus, mutation)?,
        check_interaction_support(&torus, cfg.support_modes, mutation)?,
        check_galerkin_consistency(&small_torus, 5, cfg.seed, mutation)?,
        check_galerkin_consistency(&small_rect, 5, cfg.seed, mutation)?,
    ];
    out.extend(check_energy(&torus, cfg.seeds, cfg.horizon, cfg.dt, mutation)?);
    let ks: Vec<u32> = (2..=256).collect();
    let pow2: Vec<u32> = (1..=8).map(|i| 1 << i).collect();
    for (name, theta, derivative) in standard_weights() {
        let w = Weight {
            name,
            theta: &theta,
            derivative: &derivative,
        };
        out.push(check_osc_integral(&w, 1.0, &ks, mutation)?);
        if name == "exp" {
            out.push(check_osc_slope(&w, 1.0, &pow2, 0.2, mutation)?);
        }
    }
    out.push(check_curl_equiv(
        DomainSpec::standard_torus(),
        &[4, 8, 16],
        2,
        cfg.seed,
        mutation,
    )?);
    out.push(check_oblique_gram(100, 32, cfg.seed, mutation)?);
    out.extend(check_oblique_perturbation(
        32,
        4,
        &[1e-1, 1e-2, 1e-3, 1e-4],
        cfg.seed,
        mutation,
    )?);
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}
