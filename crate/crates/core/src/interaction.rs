//! Galerkin coefficients of `Π((y·∇)z)`.
//!
//! Testing against a solenoidal, tangent basis field removes the gradient
//! part, so the Leray projection never has to be formed explicitly. The torus
//! has two routes: an exact sparse Fourier convolution for arbitrary pairs and
//! a dealiased FFT for the quadratic term `B(y, y)` used by the integrator.
//! Both are exact for the truncated product. The rectangle uses a sparse
//! tensor of closed-form sine/cosine triple integrals.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::spectral_basis::{torus_direction, DomainKind, Mode, Parity, SpectralBasis};

pub(crate) enum Interaction {
    Torus(TorusInteraction),
    Rectangle(RectangleTensor),
}

impl Interaction {
    pub(crate) fn build(basis: &SpectralBasis) -> Self {
        match basis.domain().kind {
            DomainKind::Torus => Interaction::Torus(TorusInteraction::new(basis)),
            DomainKind::RectangleLions => Interaction::Rectangle(RectangleTensor::new(basis)),
        }
    }

    /// Exact `B(y, z)` coefficients, accumulated into `out`.
    pub(crate) fn bilinear(&self, y: &[f64], z: &[f64], out: &mut [f64]) {
        match self {
            Interaction::Torus(t) => t.bilinear_exact(y, z, out),
            Interaction::Rectangle(r) => r.bilinear(y, z, out),
        }
    }

    pub(crate) fn workspace(&self) -> Workspace {
        match self {
            Interaction::Torus(t) => Workspace::new(t.grid * t.grid, t.grid),
            Interaction::Rectangle(_) => Workspace::new(0, 0),
        }
    }

    /// `B(y, y)` written to `out` (overwritten).
    pub(crate) fn quadratic(&self, y: &[f64], out: &mut [f64], ws: &mut Workspace) {
        match self {
            Interaction::Torus(t) => t.quadratic_fft(y, out, ws),
            Interaction::Rectangle(r) => {
                out.iter_mut().for_each(|v| *v = 0.0);
                r.bilinear(y, y, out)
            }
        }
    }
}

/// Scratch buffers for the FFT route.
pub(crate) struct Workspace {
    u1: Vec<Complex64>,
    u2: Vec<Complex64>,
    w: Vec<Complex64>,
    line: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Workspace {
    fn new(size: usize, g: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Workspace {
            u1: vec![z; size],
            u2: vec![z; size],
            w: vec![z; size],
            line: vec![z; g],
            scratch: vec![z; 4 * g],
        }
    }
}

#[derive(Clone, Copy)]
struct TorusMode {
    k: [i32; 2],
    sin: bool,
    kappa_norm: f64,
    dir: [f64; 2],
}

pub(crate) struct TorusInteraction {
    cutoff: i32,
    modes: Vec<TorusMode>,
    amplitude: f64,
    area: f64,
    scale: [f64; 2],
    grid: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Smallest 2,3,5-smooth integer that is at least `n`.
pub(crate) fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

impl TorusInteraction {
    fn new(basis: &SpectralBasis) -> Self {
        let modes = basis
            .entries()
            .iter()
            .map(|e| TorusMode {
                k: e.mode.wavevector,
                sin: e.mode.parity == Some(Parity::Sin),
                kappa_norm: e.kappa_norm,
                dir: torus_direction(e),
            })
            .collect();
        let n = basis.cutoff();
        // 3N+1 points per axis keep every product mode from aliasing onto
        // a retained one.
        let grid = smooth_size(3 * n + 1);
        let mut planner = FftPlanner::new();
        TorusInteraction {
            cutoff: n as i32,
            modes,
            amplitude: basis.torus_amplitude(),
            area: basis.domain().area(),
            scale: basis.domain().wavenumber_scale(),
            grid,
            fwd: planner.plan_fft_forward(grid),
            inv: planner.plan_fft_inverse(grid),
        }
    }

    fn width(&self) -> usize {
        (2 * self.cutoff + 1) as usize
    }

    fn slot(&self, k: [i32; 2]) -> usize {
        let w = self.width() as i32;
        ((k[0] + self.cutoff) * w + (k[1] + self.cutoff)) as usize
    }

    /// Complex amplitude of the `e^{iκ·x}` component contributed by mode `m`
    /// with coefficient `c`: `a (c_cos - i c_sin) / 2`.
    fn half_amp(&self, m: &TorusMode, c: f64) -> Complex64 {
        let h = 0.5 * self.amplitude * c;
        if m.sin {
            Complex64::new(0.0, -h)
        } else {
            Complex64::new(h, 0.0)
        }
    }

    fn velocity_spectrum(&self, y: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let size = self.width() * self.width();
        let zero = Complex64::new(0.0, 0.0);
        let (mut u1, mut u2) = (vec![zero; size], vec![zero; size]);
        for (m, &c) in self.modes.iter().zip(y) {
            if c == 0.0 {
                continue;
            }
            let alpha = self.half_amp(m, c);
            let p = self.slot(m.k);
            let q = self.slot([-m.k[0], -m.k[1]]);
            u1[p] += alpha * m.dir[0];
            u2[p] += alpha * m.dir[1];
            u1[q] += alpha.conj() * m.dir[0];
            u2[q] += alpha.conj() * m.dir[1];
        }
        (u1, u2)
    }

    /// Projection of a real vector field with Fourier amplitudes `q̂` onto
    /// basis mode `m`.
    fn project(&self, m: &TorusMode, q1: Complex64, q2: Complex64) -> f64 {
        let z = q1 * m.dir[0] + q2 * m.dir[1];
        let s = self.area * self.amplitude;
        if m.sin {
            -s * z.im
        } else {
            s * z.re
        }
    }

    fn bilinear_exact(&self, y: &[f64], z: &[f64], out: &mut [f64]) {
        let n = self.cutoff;
        let (y1, y2) = self.velocity_spectrum(y);
        let (z1, z2) = self.velocity_spectrum(z);
        let size = y1.len();
        let zero = Complex64::new(0.0, 0.0);
        let (mut w1, mut w2) = (vec![zero; size], vec![zero; size]);
        let nonzero_y: Vec<[i32; 2]> = (-n..=n)
            .flat_map(|a| (-n..=n).map(move |b| [a, b]))
            .filter(|p| {
                let s = self.slot(*p);
                y1[s] != zero || y2[s] != zero
            })
            .collect();
        for m in self.modes.iter().filter(|m| !m.sin) {
            let k = m.k;
            let (mut a1, mut a2) = (zero, zero);
            for p in &nonzero_y {
                let q = [k[0] - p[0], k[1] - p[1]];
                if q[0].abs() > n || q[1].abs() > n {
                    continue;
                }
                let (sp, sq) = (self.slot(*p), self.slot(q));
                let kq = [self.scale[0] * q[0] as f64, self.scale[1] * q[1] as f64];
                // (ŷ(p)·iκ_q)
                let adv = Complex64::new(0.0, 1.0) * (y1[sp] * kq[0] + y2[sp] * kq[1]);
                a1 += adv * z1[sq];
                a2 += adv * z2[sq];
            }
            let s = self.slot(k);
            w1[s] = a1;
            w2[s] = a2;
        }
        for (m, o) in self.modes.iter().zip(out.iter_mut()) {
            let s = self.slot(m.k);
            *o += self.project(m, w1[s], w2[s]);
        }
    }

    fn grid_slot(&self, k: [i32; 2]) -> usize {
        let g = self.grid as i32;
        (k[0].rem_euclid(g) * g + k[1].rem_euclid(g)) as usize
    }

    fn fft2(
        &self,
        data: &mut [Complex64],
        plan: &Arc<dyn Fft<f64>>,
        ws_line: &mut [Complex64],
        scratch: &mut [Complex64],
    ) {
        let g = self.grid;
        let need = plan.get_inplace_scratch_len();
        let scratch = &mut scratch[..need];
        for row in data.chunks_exact_mut(g) {
            plan.process_with_scratch(row, scratch);
        }
        for col in 0..g {
            for r in 0..g {
                ws_line[r] = data[r * g + col];
            }
            plan.process_with_scratch(ws_line, scratch);
            for r in 0..g {
                data[r * g + col] = ws_line[r];
            }
        }
    }

    /// `B(y, y) = Π(ω (-y₂, y₁))`, with `ω` the vorticity; the remaining
    /// part of `(y·∇)y` is the gradient of `|y|²/2`.
    fn quadratic_fft(&self, y: &[f64], out: &mut [f64], ws: &mut Workspace) {
        let zero = Complex64::new(0.0, 0.0);
        ws.u1.iter_mut().for_each(|v| *v = zero);
        ws.u2.iter_mut().for_each(|v| *v = zero);
        ws.w.iter_mut().for_each(|v| *v = zero);
        for (m, &c) in self.modes.iter().zip(y) {
            if c == 0.0 {
                continue;
            }
            let alpha = self.half_amp(m, c);
            let om = Complex64::new(0.0, m.kappa_norm) * alpha;
            let p = self.grid_slot(m.k);
            let q = self.grid_slot([-m.k[0], -m.k[1]]);
            ws.u1[p] += alpha * m.dir[0];
            ws.u2[p] += alpha * m.dir[1];
            ws.w[p] += om;
            ws.u1[q] += alpha.conj() * m.dir[0];
            ws.u2[q] += alpha.conj() * m.dir[1];
            ws.w[q] += om.conj();
        }
        let Workspace {
            u1,
            u2,
            w,
            line,
            scratch,
        } = ws;
        self.fft2(u1, &self.inv, line, scratch);
        self.fft2(u2, &self.inv, line, scratch);
        self.fft2(w, &self.inv, line, scratch);
        let norm = 1.0 / (self.grid * self.grid) as f64;
        for i in 0..u1.len() {
            let om = w[i].re * norm;
            let (a, b) = (u1[i].re, u2[i].re);
            u1[i] = Complex64::new(-om * b, 0.0);
            u2[i] = Complex64::new(om * a, 0.0);
        }
        self.fft2(u1, &self.fwd, line, scratch);
        self.fft2(u2, &self.fwd, line, scratch);
        for (m, o) in self.modes.iter().zip(out.iter_mut()) {
            let s = self.grid_slot(m.k);
            *o = self.project(m, u1[s], u2[s]);
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Trig {
    S,
    C,
}

/// `∫_0^L f₁(n₁πx/L) f₂(n₂πx/L) f₃(n₃πx/L) dx` for `f ∈ {sin, cos}`, by
/// expanding into complex exponentials.
fn triple_integral(kinds: [Trig; 3], ns: [i32; 3], len: f64) -> f64 {
    let mut total = Complex64::new(0.0, 0.0);
    for signs in 0..8u32 {
        let mut coef = Complex64::new(1.0, 0.0);
        let mut freq = 0i32;
        for r in 0..3 {
            let s = if signs >> r & 1 == 0 { 1 } else { -1 };
            freq += s * ns[r];
            coef *= match kinds[r] {
                Trig::C => Complex64::new(0.5, 0.0),
                Trig::S => Complex64::new(0.0, -0.5 * s as f64),
            };
        }
        let integral = if freq == 0 {
            Complex64::new(len, 0.0)
        } else {
            let parity = if freq.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            // L((-1)^N - 1)/(iπN)
            Complex64::new(0.0, -len * (parity - 1.0) / (PI * freq as f64))
        };
        total += coef * integral;
    }
    total.re
}

#[derive(Clone, Copy)]
struct RectMode {
    k: [i32; 2],
    a: f64,
    b: f64,
    c: f64,
}

impl RectMode {
    /// Velocity component `d`: coefficient and x/y factors.
    fn comp(&self, d: usize) -> (f64, Trig, Trig) {
        match d {
            0 => (-self.c * self.b, Trig::S, Trig::C),
            _ => (self.c * self.a, Trig::C, Trig::S),
        }
    }

    /// `∂_d` of velocity component `c`.
    fn grad(&self, c: usize, d: usize) -> (f64, Trig, Trig) {
        let (a, b, k) = (self.a, self.b, self.c);
        match (c, d) {
            (0, 0) => (-k * b * a, Trig::C, Trig::C),
            (0, _) => (k * b * b, Trig::S, Trig::S),
            (_, 0) => (-k * a * a, Trig::S, Trig::S),
            _ => (k * a * b, Trig::C, Trig::C),
        }
    }
}

/// `T[i] = [(j, m, ∫((e_i·∇)e_j)·e_m)]` for the nonzero entries.
pub(crate) struct RectangleTensor {
    rows: Vec<Vec<(u32, u32, f64)>>,
}

impl RectangleTensor {
    fn new(basis: &SpectralBasis) -> Self {
        let [lx, ly] = basis.domain().lengths;
        let modes: Vec<RectMode> = basis
            .entries()
            .iter()
            .map(|e| RectMode {
                k: e.mode.wavevector,
                a: e.kappa[0],
                b: e.kappa[1],
                c: basis.rectangle_amplitude(e),
            })
            .collect();
        let mut rows = Vec::with_capacity(modes.len());
        for mi in &modes {
            let mut row = Vec::new();
            for (j, mj) in modes.iter().enumerate() {
                let xs = candidates(mi.k[0], mj.k[0]);
                let ys = candidates(mi.k[1], mj.k[1]);
                for &kx in &xs {
                    for &ky in &ys {
                        let Ok(m) = basis.index_of(&Mode::rectangle(kx, ky)) else {
                            continue;
                        };
                        let mm = &modes[m];
                        let mut v = 0.0;
                        for c in 0..2 {
                            for d in 0..2 {
                                let (ci, xi, yi) = mi.comp(d);
                                let (cj, xj, yj) = mj.grad(c, d);
                                let (cm, xm, ym) = mm.comp(c);
                                let ix = triple_integral([xi, xj, xm], [mi.k[0], mj.k[0], mm.k[0]], lx);
                                let iy = triple_integral([yi, yj, ym], [mi.k[1], mj.k[1], mm.k[1]], ly);
                                v += ci * cj * cm * ix * iy;
                            }
                        }
                        if v != 0.0 {
                            row.push((j as u32, m as u32, v));
                        }
                    }
                }
            }
            rows.push(row);
        }
        RectangleTensor { rows }
    }

    fn bilinear(&self, y: &[f64], z: &[f64], out: &mut [f64]) {
        for (row, &yi) in self.rows.iter().zip(y) {
            if yi == 0.0 {
                continue;
            }
            for &(j, m, v) in row {
                out[m as usize] += yi * z[j as usize] * v;
            }
        }
    }
}

fn candidates(p: i32, q: i32) -> Vec<i32> {
    let mut v = vec![p + q];
    let d = (p - q).abs();
    if d != 0 {
        v.push(d);
    }
    v
}
