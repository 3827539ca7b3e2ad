//! Closed-form coefficient functions and control schedules.
//!
//! A [`TimeFn`] is a finite sum of pieces
//! `p(t) · exp(rate·(t - shift)) · trig(frequency·t)` with `p` a polynomial
//! and `trig` one of `sin`, `cos`. The class is closed under differentiation,
//! products and linear combinations, all computed exactly. Writing the
//! exponential with an explicit shift keeps `exp` in range for large rates.

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, FieldEntry};
use crate::spectral_basis::{DomainSpec, SpectralBasis};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrigKind {
    Sin,
    Cos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub kind: TrigKind,
    /// Polynomial coefficients in increasing powers of `t`.
    pub coefficients: Vec<f64>,
    pub frequency: f64,
    pub rate: f64,
    pub shift: f64,
}

impl Piece {
    pub fn constant(c: f64) -> Self {
        Piece::poly(vec![c])
    }

    pub fn poly(coefficients: Vec<f64>) -> Self {
        Piece {
            kind: TrigKind::Cos,
            coefficients,
            frequency: 0.0,
            rate: 0.0,
            shift: 0.0,
        }
    }

    fn poly_value(&self, t: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    fn envelope(&self, t: f64) -> f64 {
        if self.rate == 0.0 {
            1.0
        } else {
            (self.rate * (t - self.shift)).exp()
        }
    }

    fn carrier(&self, t: f64) -> f64 {
        match self.kind {
            TrigKind::Cos if self.frequency == 0.0 => 1.0,
            TrigKind::Cos => (self.frequency * t).cos(),
            TrigKind::Sin => (self.frequency * t).sin(),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.poly_value(t) * self.envelope(t) * self.carrier(t)
    }

    fn derivative(&self) -> Vec<Piece> {
        // (p' + r p) e g  +  p e g'
        let n = self.coefficients.len();
        let mut q = vec![0.0; n];
        for (i, c) in self.coefficients.iter().enumerate() {
            q[i] += self.rate * c;
            if i > 0 {
                q[i - 1] += i as f64 * c;
            }
        }
        let mut out = vec![Piece {
            coefficients: q,
            ..self.clone()
        }];
        if self.frequency != 0.0 {
            let (kind, sign) = match self.kind {
                TrigKind::Sin => (TrigKind::Cos, 1.0),
                TrigKind::Cos => (TrigKind::Sin, -1.0),
            };
            out.push(Piece {
                kind,
                coefficients: self.coefficients.iter().map(|c| sign * self.frequency * c).collect(),
                ..self.clone()
            });
        }
        out
    }

    fn product(&self, other: &Piece) -> Vec<Piece> {
        let mut poly = vec![0.0; self.coefficients.len() + other.coefficients.len() - 1];
        for (i, a) in self.coefficients.iter().enumerate() {
            for (j, b) in other.coefficients.iter().enumerate() {
                poly[i + j] += a * b;
            }
        }
        let rate = self.rate + other.rate;
        let offset = self.rate * self.shift + other.rate * other.shift;
        let shift = if rate == 0.0 {
            // exp(-offset) is a constant factor
            let f = (-offset).exp();
            poly.iter_mut().for_each(|c| *c *= f);
            0.0
        } else {
            offset / rate
        };
        let (w1, w2) = (self.frequency, other.frequency);
        let (sum, diff) = (w1 + w2, w1 - w2);
        // product-to-sum, terms as (kind, frequency, factor)
        let terms: [(TrigKind, f64, f64); 2] = match (self.kind, other.kind) {
            (TrigKind::Cos, TrigKind::Cos) => [(TrigKind::Cos, diff, 0.5), (TrigKind::Cos, sum, 0.5)],
            (TrigKind::Sin, TrigKind::Sin) => [(TrigKind::Cos, diff, 0.5), (TrigKind::Cos, sum, -0.5)],
            (TrigKind::Sin, TrigKind::Cos) => [(TrigKind::Sin, sum, 0.5), (TrigKind::Sin, diff, 0.5)],
            (TrigKind::Cos, TrigKind::Sin) => [(TrigKind::Sin, sum, 0.5), (TrigKind::Sin, diff, -0.5)],
        };
        terms
            .iter()
            .filter_map(|&(kind, w, f)| {
                let (w, f) = match kind {
                    TrigKind::Sin if w < 0.0 => (-w, -f),
                    _ => (w.abs(), f),
                };
                if kind == TrigKind::Sin && w == 0.0 {
                    return None;
                }
                Some(Piece {
                    kind,
                    coefficients: poly.iter().map(|c| f * c).collect(),
                    frequency: w,
                    rate,
                    shift,
                })
            })
            .collect()
    }

    fn key_cmp(&self, other: &Piece) -> Ordering {
        self.kind
            .cmp(&other.kind)
            .then(self.frequency.total_cmp(&other.frequency))
            .then(self.rate.total_cmp(&other.rate))
            .then(self.shift.total_cmp(&other.shift))
    }
}

/// Sum of closed-form pieces.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeFn {
    pub pieces: Vec<Piece>,
}

impl TimeFn {
    pub fn zero() -> Self {
        TimeFn { pieces: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        TimeFn::from_pieces(vec![Piece::constant(c)])
    }

    pub fn from_pieces(pieces: Vec<Piece>) -> Self {
        let mut f = TimeFn { pieces };
        f.simplify();
        f
    }

    /// `p(t) exp(rate (t - shift))`.
    pub fn exp_poly(coefficients: Vec<f64>, rate: f64, shift: f64) -> Self {
        TimeFn::from_pieces(vec![Piece {
            kind: TrigKind::Cos,
            coefficients,
            frequency: 0.0,
            rate,
            shift,
        }])
    }

    pub fn sin(amplitude: f64, frequency: f64) -> Self {
        TimeFn::from_pieces(vec![Piece {
            kind: TrigKind::Sin,
            coefficients: vec![amplitude],
            frequency,
            rate: 0.0,
            shift: 0.0,
        }])
    }

    pub fn cos(amplitude: f64, frequency: f64) -> Self {
        TimeFn::from_pieces(vec![Piece {
            kind: TrigKind::Cos,
            coefficients: vec![amplitude],
            frequency,
            rate: 0.0,
            shift: 0.0,
        }])
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.pieces.iter().map(|p| p.eval(t)).sum()
    }

    pub fn derivative(&self) -> TimeFn {
        TimeFn::from_pieces(self.pieces.iter().flat_map(|p| p.derivative()).collect())
    }

    pub fn mul(&self, other: &TimeFn) -> TimeFn {
        let mut out = Vec::new();
        for a in &self.pieces {
            for b in &other.pieces {
                out.extend(a.product(b));
            }
        }
        TimeFn::from_pieces(out)
    }

    pub fn scale(&self, alpha: f64) -> TimeFn {
        TimeFn::from_pieces(
            self.pieces
                .iter()
                .map(|p| Piece {
                    coefficients: p.coefficients.iter().map(|c| alpha * c).collect(),
                    ..p.clone()
                })
                .collect(),
        )
    }

    pub fn add(&self, other: &TimeFn) -> TimeFn {
        let mut v = self.pieces.clone();
        v.extend(other.pieces.iter().cloned());
        TimeFn::from_pieces(v)
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &TimeFn) -> TimeFn {
        self.add(&other.scale(alpha))
    }

    /// Largest carrier frequency.
    pub fn max_frequency(&self) -> f64 {
        self.pieces.iter().map(|p| p.frequency).fold(0.0, f64::max)
    }

    /// Merges pieces sharing `(kind, frequency, rate, shift)`, drops zero
    /// pieces and trims trailing zero coefficients. Order is canonical.
    pub fn simplify(&mut self) {
        let mut v: Vec<Piece> = std::mem::take(&mut self.pieces)
            .into_iter()
            .filter(|p| !(p.kind == TrigKind::Sin && p.frequency == 0.0))
            .collect();
        v.sort_by(|a, b| a.key_cmp(b));
        let mut out: Vec<Piece> = Vec::with_capacity(v.len());
        for p in v {
            match out.last_mut() {
                Some(last) if last.key_cmp(&p) == Ordering::Equal => {
                    if last.coefficients.len() < p.coefficients.len() {
                        last.coefficients.resize(p.coefficients.len(), 0.0);
                    }
                    for (a, b) in last.coefficients.iter_mut().zip(&p.coefficients) {
                        *a += b;
                    }
                }
                _ => out.push(p),
            }
        }
        for p in &mut out {
            while p.coefficients.last() == Some(&0.0) {
                p.coefficients.pop();
            }
        }
        out.retain(|p| !p.coefficients.is_empty());
        self.pieces = out;
    }
}

/// Control `U◇u(t) = Σ u_i(t) Φ_i` over a fixed actuator list.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSchedule {
    pub actuators: Vec<Field>,
    pub coefficients: Vec<TimeFn>,
    pub horizon: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleDoc {
    domain: DomainSpec,
    cutoff: usize,
    horizon: f64,
    actuators: Vec<Vec<FieldEntry>>,
    coefficients: Vec<TimeFn>,
}

impl ControlSchedule {
    pub fn new(actuators: Vec<Field>, coefficients: Vec<TimeFn>, horizon: f64) -> Result<Self> {
        if actuators.len() != coefficients.len() {
            return Err(Error::LengthMismatch {
                expected: actuators.len(),
                got: coefficients.len(),
            });
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if let Some(first) = actuators.first() {
            for a in &actuators[1..] {
                first.check_same_basis(a)?;
            }
        }
        Ok(ControlSchedule {
            actuators,
            coefficients,
            horizon,
        })
    }

    /// Zero control over the given actuators.
    pub fn zero(actuators: Vec<Field>, horizon: f64) -> Result<Self> {
        let n = actuators.len();
        ControlSchedule::new(actuators, vec![TimeFn::zero(); n], horizon)
    }

    pub fn len(&self) -> usize {
        self.actuators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actuators.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(TimeFn::is_zero)
    }

    pub fn values(&self, t: f64) -> Vec<f64> {
        self.coefficients.iter().map(|f| f.eval(t)).collect()
    }

    /// `U◇u(t)` accumulated into `out`.
    pub fn add_force_into(&self, t: f64, out: &mut [f64]) {
        for (a, f) in self.actuators.iter().zip(&self.coefficients) {
            if f.is_zero() {
                continue;
            }
            let u = f.eval(t);
            for (o, c) in out.iter_mut().zip(a.coeffs()) {
                *o += u * c;
            }
        }
    }

    pub fn force(&self, basis: &Arc<SpectralBasis>, t: f64) -> Field {
        let mut out = vec![0.0; basis.len()];
        self.add_force_into(t, &mut out);
        Field::from_raw(basis.clone(), out)
    }

    pub fn max_frequency(&self) -> f64 {
        self.coefficients.iter().map(TimeFn::max_frequency).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        let basis = self
            .actuators
            .first()
            .map(|a| a.basis().clone())
            .ok_or_else(|| Error::InvalidParameter("schedule without actuators".into()))?;
        let doc = ScheduleDoc {
            domain: *basis.domain(),
            cutoff: basis.cutoff(),
            horizon: self.horizon,
            actuators: self.actuators.iter().map(Field::to_entries).collect(),
            coefficients: self.coefficients.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Reads a schedule, building a fresh basis from the recorded domain and
    /// cutoff.
    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ScheduleDoc = serde_json::from_str(s)?;
        let basis = SpectralBasis::enumerate(doc.domain, doc.cutoff)?;
        ControlSchedule::from_doc(&basis, doc)
    }

    /// Reads a schedule onto an existing basis, which must match the recorded
    /// one.
    pub fn from_json_on(basis: &Arc<SpectralBasis>, s: &str) -> Result<Self> {
        let doc: ScheduleDoc = serde_json::from_str(s)?;
        if doc.domain != *basis.domain() || doc.cutoff != basis.cutoff() {
            return Err(Error::BasisMismatch);
        }
        ControlSchedule::from_doc(basis, doc)
    }

    fn from_doc(basis: &Arc<SpectralBasis>, doc: ScheduleDoc) -> Result<Self> {
        let actuators = doc
            .actuators
            .iter()
            .map(|e| Field::from_entries(basis, e))
            .collect::<Result<Vec<_>>>()?;
        ControlSchedule::new(actuators, doc.coefficients, doc.horizon)
    }
}
