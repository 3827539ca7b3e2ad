//! Fixed-step RK4 integration of the truncated system `ẏ + B(y, y) = f + c`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::control_synth::schedule::{ControlSchedule, TimeFn};
use crate::error::{Error, Result};
use crate::field::{Field, FieldEntry};
use crate::quadrature;
use crate::spectral_basis::SpectralBasis;

/// External forcing `f(t)`.
#[derive(Clone, Debug, Default)]
pub enum Forcing {
    #[default]
    Zero,
    /// `Σ g_i(t) F_i` with closed-form `g_i`.
    ClosedForm(Vec<(Field, TimeFn)>),
    /// Values on a time grid, linearly interpolated in between and held
    /// constant outside it.
    Sampled { times: Vec<f64>, values: Vec<Field> },
}

impl Forcing {
    pub fn constant(g: Field) -> Self {
        Forcing::ClosedForm(vec![(g, TimeFn::constant(1.0))])
    }

    pub fn sampled(times: Vec<f64>, values: Vec<Field>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidParameter(
                "sampled forcing needs one field per time".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("sample times must increase strictly".into()));
        }
        for v in &values[1..] {
            values[0].check_same_basis(v)?;
        }
        Ok(Forcing::Sampled { times, values })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Forcing::Zero => true,
            Forcing::ClosedForm(terms) => terms.iter().all(|(_, g)| g.is_zero()),
            Forcing::Sampled { values, .. } => values.iter().all(|v| v.norm_h() == 0.0),
        }
    }

    pub fn add_into(&self, t: f64, out: &mut [f64]) {
        match self {
            Forcing::Zero => {}
            Forcing::ClosedForm(terms) => {
                for (field, g) in terms {
                    let a = g.eval(t);
                    for (o, c) in out.iter_mut().zip(field.coeffs()) {
                        *o += a * c;
                    }
                }
            }
            Forcing::Sampled { times, values } => {
                let i = times.partition_point(|&s| s <= t);
                let (lo, hi, w) = if i == 0 {
                    (0, 0, 0.0)
                } else if i == times.len() {
                    (i - 1, i - 1, 0.0)
                } else {
                    (i - 1, i, (t - times[i - 1]) / (times[i] - times[i - 1]))
                };
                for ((o, a), b) in out.iter_mut().zip(values[lo].coeffs()).zip(values[hi].coeffs()) {
                    *o += (1.0 - w) * a + w * b;
                }
            }
        }
    }

    pub fn eval(&self, basis: &Arc<SpectralBasis>, t: f64) -> Field {
        let mut out = vec![0.0; basis.len()];
        self.add_into(t, &mut out);
        Field::from_raw(basis.clone(), out)
    }

    pub fn max_frequency(&self) -> f64 {
        match self {
            Forcing::ClosedForm(terms) => terms.iter().map(|(_, g)| g.max_frequency()).fold(0.0, f64::max),
            _ => 0.0,
        }
    }

    /// `∫_0^T ‖P_{ℰ_m^⊥} f(t)‖²_H dt`; `m = 0` gives the full squared norm.
    pub fn tail_l2_sq(&self, basis: &Arc<SpectralBasis>, m: usize, horizon: f64) -> f64 {
        if matches!(self, Forcing::Zero) {
            return 0.0;
        }
        let panels = 64 + (self.max_frequency() * horizon / PI).ceil() as usize;
        quadrature::composite_gauss(&|t| self.eval(basis, t).tail_norm_sq(m), 0.0, horizon, panels, 8)
    }

    fn check_basis(&self, basis: &Arc<SpectralBasis>) -> Result<()> {
        let probe = Field::zeros(basis);
        match self {
            Forcing::Zero => Ok(()),
            Forcing::ClosedForm(terms) => terms.iter().try_for_each(|(f, _)| probe.check_same_basis(f)),
            Forcing::Sampled { values, .. } => values.iter().try_for_each(|f| probe.check_same_basis(f)),
        }
    }
}

/// `-B(y, y) + f(t) + c(t)`.
pub fn rhs(y: &Field, t: f64, f: &Forcing, c: Option<&ControlSchedule>) -> Result<Field> {
    if !y.is_finite() {
        return Err(Error::NonFinite("state"));
    }
    let mut out = y.quadratic().scale(-1.0).into_coeffs();
    f.add_into(t, &mut out);
    if let Some(c) = c {
        c.add_force_into(t, &mut out);
    }
    Ok(Field::from_raw(y.basis().clone(), out))
}

#[derive(Clone, Debug)]
pub struct SimOptions {
    pub dt: f64,
    /// Abort when `‖y‖_H` exceeds this.
    pub blowup_bound: f64,
    /// Number of times the step is halved and the run restarted after a
    /// blow-up before giving up.
    pub max_halvings: usize,
    /// Record a snapshot every `stride` steps; `None` keeps only the
    /// endpoints.
    pub snapshot_stride: Option<usize>,
    /// Target for the distance series.
    pub target: Option<Field>,
    /// Steps per half-period of the fastest carrier; the step is reduced
    /// to at least this resolution.
    pub steps_per_half_period: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            dt: 1e-3,
            blowup_bound: 1e6,
            max_halvings: 0,
            snapshot_stride: None,
            target: None,
            steps_per_half_period: 64.0,
        }
    }
}

impl SimOptions {
    pub fn with_dt(dt: f64) -> Self {
        SimOptions {
            dt,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
    pub energy: Vec<f64>,
    pub enstrophy: Vec<f64>,
    pub distance: Option<Vec<f64>>,
    pub dt: f64,
    pub steps: usize,
}

#[derive(Serialize)]
struct SnapshotDoc<'a> {
    times: &'a [f64],
    snapshots: Vec<Vec<FieldEntry>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &Field {
        self.snapshots.last().expect("trajectory has at least two snapshots")
    }

    /// `t,energy,enstrophy,distance` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,energy,enstrophy,distance\n");
        for i in 0..self.times.len() {
            let d = self.distance.as_ref().map(|d| d[i].to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{}", self.times[i], self.energy[i], self.enstrophy[i], d);
        }
        s
    }

    pub fn snapshots_json(&self) -> Result<String> {
        let doc = SnapshotDoc {
            times: &self.times,
            snapshots: self.snapshots.iter().map(Field::to_entries).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }
}

pub fn enstrophy(basis: &SpectralBasis, y: &[f64]) -> f64 {
    basis
        .entries()
        .iter()
        .zip(y)
        .map(|(e, c)| (e.lambda - 1.0) * c * c)
        .sum()
}

/// Step actually used: `dt` reduced to resolve the fastest carrier, then
/// shrunk so that an integer number of steps lands exactly on `horizon`.
pub fn effective_step(horizon: f64, dt: f64, max_frequency: f64, steps_per_half_period: f64) -> (f64, usize) {
    let mut h = dt;
    if max_frequency > 0.0 {
        h = h.min(PI / (steps_per_half_period * max_frequency));
    }
    let n = ((horizon / h) - 1e-9).ceil().max(1.0) as usize;
    (horizon / n as f64, n)
}

/// Classical RK4 from `y0` over `[0, horizon]`.
pub fn integrate(
    y0: &Field,
    horizon: f64,
    forcing: &Forcing,
    control: Option<&ControlSchedule>,
    opts: &SimOptions,
) -> Result<Trajectory> {
    if !(opts.dt > 0.0 && horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and T > 0, got dt = {}, T = {horizon}",
            opts.dt
        )));
    }
    if opts.dt > horizon * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "dt = {} exceeds T = {horizon}",
            opts.dt
        )));
    }
    if !y0.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    forcing.check_basis(y0.basis())?;
    if let Some(c) = control {
        if let Some(a) = c.actuators.first() {
            y0.check_same_basis(a)?;
        }
    }
    if let Some(t) = &opts.target {
        y0.check_same_basis(t)?;
    }
    let freq = forcing
        .max_frequency()
        .max(control.map(|c| c.max_frequency()).unwrap_or(0.0));
    let mut dt = opts.dt;
    let mut halvings = 0;
    loop {
        match run(y0, horizon, forcing, control, opts, dt, freq) {
            Err(Error::BlowUp { .. }) if halvings < opts.max_halvings => {
                halvings += 1;
                dt *= 0.5;
            }
            other => return other,
        }
    }
}

fn run(
    y0: &Field,
    horizon: f64,
    forcing: &Forcing,
    control: Option<&ControlSchedule>,
    opts: &SimOptions,
    dt: f64,
    freq: f64,
) -> Result<Trajectory> {
    let basis = y0.basis().clone();
    let inter = basis.interaction();
    let mut ws = inter.workspace();
    let n = basis.len();
    let (h, steps) = effective_step(horizon, dt, freq, opts.steps_per_half_period);

    let mut y = y0.coeffs().to_vec();
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];

    let eval = |y: &[f64], t: f64, out: &mut [f64], ws: &mut _| {
        inter.quadratic(y, out, ws);
        out.iter_mut().for_each(|v| *v = -*v);
        forcing.add_into(t, out);
        if let Some(c) = control {
            c.add_force_into(t, out);
        }
    };

    let mut traj = Trajectory {
        times: Vec::new(),
        snapshots: Vec::new(),
        energy: Vec::new(),
        enstrophy: Vec::new(),
        distance: opts.target.as_ref().map(|_| Vec::new()),
        dt: h,
        steps,
    };
    let record = |traj: &mut Trajectory, t: f64, y: &[f64]| {
        let f = Field::from_raw(basis.clone(), y.to_vec());
        traj.times.push(t);
        traj.energy.push(y.iter().map(|v| v * v).sum());
        traj.enstrophy.push(enstrophy(&basis, y));
        if let (Some(d), Some(target)) = (traj.distance.as_mut(), opts.target.as_ref()) {
            d.push(f.sub(target).map(|r| r.norm_h()).unwrap_or(f64::NAN));
        }
        traj.snapshots.push(f);
    };
    record(&mut traj, 0.0, &y);

    for step in 0..steps {
        let t = step as f64 * h;
        eval(&y, t, &mut k[0], &mut ws);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k[0][i];
        }
        eval(&tmp, t + 0.5 * h, &mut k[1], &mut ws);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k[1][i];
        }
        eval(&tmp, t + 0.5 * h, &mut k[2], &mut ws);
        for i in 0..n {
            tmp[i] = y[i] + h * k[2][i];
        }
        eval(&tmp, t + h, &mut k[3], &mut ws);
        for i in 0..n {
            y[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        let t_next = if step + 1 == steps {
            horizon
        } else {
            (step + 1) as f64 * h
        };
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > opts.blowup_bound {
            return Err(Error::BlowUp {
                time: t_next,
                norm,
                bound: opts.blowup_bound,
            });
        }
        let last = step + 1 == steps;
        let take = match opts.snapshot_stride {
            Some(s) => (step + 1) % s.max(1) == 0,
            None => false,
        };
        if last || take {
            record(&mut traj, t_next, &y);
        }
    }
    Ok(traj)
}

/// Endpoint of the controlled flow.
pub fn endpoint(
    y0: &Field,
    horizon: f64,
    forcing: &Forcing,
    control: Option<&ControlSchedule>,
    dt: f64,
) -> Result<Field> {
    let traj = integrate(y0, horizon, forcing, control, &SimOptions::with_dt(dt))?;
    Ok(traj.final_state().clone())
}
