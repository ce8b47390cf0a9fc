//! Time evolution of `iψ_t = −½ψ_xx − ½|x|^{2γ}ψ + g|ψ|^{2σ}ψ` on a
//! periodic box by Strang splitting: half a local phase rotation, a full
//! kinetic step in Fourier space, another half rotation.
//!
//! The box `[−L, L)` is built from a half-line stationary state whose edge
//! `L` sits at a zero of `φ'` (even) or `φ` (odd), so the periodic
//! continuation is smooth. The potential is frozen at `|x| = x_c` and an
//! edge layer of width `w` either damps `ψ` or relaxes it toward the
//! stationary tail `e^{−iEt}φ`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::analysis::tail_corrected_norm;
use crate::error::{Error, Result};
use crate::model::{spacing_bound, Geometry, Grid, Parity, ProblemSpec, WaveFunction};
use crate::numerics::quadrature::simpson;
use crate::solver1d::{solve_stationary_1d, ShootConfig};

/// Factor on the initial peak amplitude that declares a blowup.
pub const PEAK_FACTOR: f64 = 10.0;
/// Largest accepted core-profile deviation for a stable verdict.
pub const STABLE_DEVIATION: f64 = 0.05;

/// What the edge layer does to `ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbsorberKind {
    /// `ψ ← ψ e^{−η dt}`.
    Damping,
    /// `ψ ← ψ_ref + (ψ − ψ_ref) e^{−η dt}` with `ψ_ref = e^{−iEt}φ`.
    Relaxation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub t_end: f64,
    pub dt: f64,
    pub absorber_width: f64,
    pub absorber_strength: f64,
    pub absorber: AbsorberKind,
    pub snapshot_stride: usize,
    pub core_radius: f64,
    /// Potential frozen beyond `|x| = clamp`; `None` means one unit beyond
    /// the core radius.
    pub clamp: Option<f64>,
    /// Switches the potential off (free propagation).
    pub potential: bool,
    /// Spectral power fraction above half the Nyquist wavenumber that
    /// trips the resolution monitor.
    pub spectral_threshold: f64,
    pub keep_snapshots: bool,
    /// Largest nonlinear phase `dt·|g|·|ψ|^{2σ}` per step; the step is
    /// halved whenever the peak amplitude pushes past it.
    pub nonlinear_phase: f64,
    /// Compare a short run against one at `dt/2` before the main run.
    pub step_check: bool,
    pub seed: u64,
}

impl EvolveConfig {
    pub fn new(t_end: f64, dt: f64, core_radius: f64) -> Self {
        Self {
            t_end,
            dt,
            absorber_width: 1.5,
            absorber_strength: 50.0,
            absorber: AbsorberKind::Relaxation,
            snapshot_stride: 100,
            core_radius,
            clamp: None,
            potential: true,
            spectral_threshold: 1e-3,
            keep_snapshots: false,
            nonlinear_phase: 0.05,
            step_check: true,
            seed: 1,
        }
    }

    pub fn with_absorber(mut self, kind: AbsorberKind, width: f64, strength: f64) -> Self {
        self.absorber = kind;
        self.absorber_width = width;
        self.absorber_strength = strength;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn with_clamp(mut self, clamp: f64) -> Self {
        self.clamp = Some(clamp);
        self
    }

    pub fn without_potential(mut self) -> Self {
        self.potential = false;
        self
    }

    pub fn with_snapshots(mut self) -> Self {
        self.keep_snapshots = true;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_step_check(mut self, on: bool) -> Self {
        self.step_check = on;
        self
    }

    /// Checks the plain ranges; box-dependent conditions are checked when
    /// the box is known.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} = {v} must be positive")))
            }
        };
        positive("t_end", self.t_end)?;
        positive("dt", self.dt)?;
        positive("core_radius", self.core_radius)?;
        if !(self.absorber_width >= 0.0 && self.absorber_strength >= 0.0) {
            return Err(Error::InvalidConfig("absorber width and strength must be non-negative".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidConfig("snapshot_stride must be positive".into()));
        }
        if let Some(c) = self.clamp {
            positive("clamp", c)?;
        }
        positive("nonlinear_phase", self.nonlinear_phase)?;
        Ok(())
    }

    pub fn effective_clamp(&self) -> f64 {
        self.clamp.unwrap_or(self.core_radius + 1.0)
    }

    fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

/// Time step rotating the local phase by at most `phase` radians per step
/// for `state` under the clamped potential of `cfg`.
pub fn suggested_dt(spec: &ProblemSpec, state: &WaveFunction, cfg: &EvolveConfig, phase: f64) -> f64 {
    let peak = state.values.iter().map(|v| v.abs()).fold(0.0, f64::max) * state.log_scale.exp();
    let v_max = 0.5 * cfg.effective_clamp().powf(2.0 * spec.gamma);
    let rate = v_max + spec.energy.abs() + spec.g().abs() * peak.powi(2 * spec.sigma() as i32);
    phase / rate.max(1.0)
}

/// Core radius used when none is given: `1.5·x_t` with the turning point
/// `x_t = (2|E|)^{1/(2γ)}` for `E < 0`, else `max(1.5·E^{1/(2γ)}, 5)`.
pub fn default_core_radius(spec: &ProblemSpec) -> f64 {
    let e = spec.energy;
    if e < 0.0 {
        1.5 * (-2.0 * e).powf(0.5 / spec.gamma)
    } else {
        (1.5 * e.powf(0.5 / spec.gamma)).max(5.0)
    }
}

/// Half-line stationary state with the potential clamped at the clamp of
/// `cfg`, cut at the first zero of `φ'` (even) or `φ` (odd) beyond the
/// clamp plus the absorber width.
pub fn prepare_state(spec: &ProblemSpec, amplitude: f64, cfg: &EvolveConfig, points_per_wavelength: u32) -> Result<WaveFunction> {
    cfg.validate()?;
    let (clamp, width) = (cfg.effective_clamp(), cfg.absorber_width);
    let Some(parity) = spec.geometry.parity() else {
        return Err(Error::InvalidConfig("time evolution needs a line geometry".into()));
    };
    let k_c = (clamp.powf(2.0 * spec.gamma) + 2.0 * spec.energy.abs()).sqrt().max(1.0);
    let probe_extent = clamp + width + 4.0 * 2.0 * PI / k_c;
    let probe_cfg = ShootConfig::new(probe_extent)
        .with_amplitude(amplitude)
        .with_clamp(clamp)
        .with_points_per_wavelength(4 * points_per_wavelength);
    let probe = solve_stationary_1d(spec, &probe_cfg)?;
    let target = match parity {
        Parity::Even => &probe.slopes,
        Parity::Odd => &probe.values,
    };
    let xs = probe.coordinates();
    let edge = (1..xs.len())
        .find(|&i| xs[i - 1] >= clamp + width && target[i - 1].signum() != target[i].signum() && target[i] != 0.0)
        .map(|i| xs[i - 1] + (xs[i] - xs[i - 1]) * target[i - 1] / (target[i - 1] - target[i]))
        .ok_or_else(|| Error::InvalidConfig("no parity-matched box edge found".into()))?;
    let peak = probe.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let k_max = (k_c * k_c + 2.0 * spec.g().abs() * peak.powi(2 * spec.sigma() as i32)).sqrt();
    let bound = spacing_bound(k_max, points_per_wavelength);
    let cells = fft_friendly((edge / bound).ceil() as usize);
    solve_stationary_1d(
        spec,
        &ShootConfig::new(edge)
            .with_amplitude(amplitude)
            .with_clamp(clamp)
            .with_points_per_wavelength(points_per_wavelength)
            .with_samples(cells + 1),
    )
}

/// Smallest `m' ≥ m` whose only prime factors are 2, 3 and 5.
fn fft_friendly(m: usize) -> usize {
    (m.max(1)..)
        .find(|&c| {
            let mut r = c;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            r == 1
        })
        .unwrap_or(m)
}

/// Complex field on the periodic box `x_j = −L + j·h`, `j = 0..2(n−1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullLineField {
    pub half_width: f64,
    pub spacing: f64,
    pub psi: Vec<Complex64>,
}

impl FullLineField {
    /// Parity extension of a half-line state; the sample at `+L` is
    /// dropped because it coincides with `−L`.
    pub fn from_half_line(wf: &WaveFunction) -> Result<Self> {
        let (_, mut values) = wf
            .to_full_line()
            .ok_or_else(|| Error::InvalidConfig("time evolution needs a line geometry".into()))?;
        values.pop();
        let scale = wf.log_scale.exp();
        Ok(Self {
            half_width: wf.grid.end(),
            spacing: wf.spacing(),
            psi: values.into_iter().map(|v| Complex64::new(v * scale, 0.0)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.len()).map(|j| -self.half_width + j as f64 * self.spacing).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlowupTrigger {
    Peak,
    Resolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupEvent {
    pub t: f64,
    pub trigger: BlowupTrigger,
    pub peak_ratio: f64,
    pub high_k_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub psi: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub core_norm: Vec<f64>,
    pub total_norm: Vec<f64>,
    pub peak_amplitude: Vec<f64>,
    /// Core deviation from the reference profile after amplitude and
    /// phase matching.
    pub profile_deviation: Vec<f64>,
    /// Phase of `ψ` at the sample nearest `x = 0`.
    pub origin_phase: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub blowup: Option<BlowupEvent>,
    pub final_field: FullLineField,
}

impl Trajectory {
    pub fn max_profile_deviation(&self) -> f64 {
        self.profile_deviation.iter().copied().fold(0.0, f64::max)
    }
}

struct Propagator {
    n: usize,
    dt: f64,
    potential: Vec<f64>,
    ramp: Vec<f64>,
    wavenumbers: Vec<f64>,
    kinetic: Vec<Complex64>,
    high_k: Vec<bool>,
    g: f64,
    sigma: i32,
    energy: f64,
    absorber: AbsorberKind,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

fn kinetic_factors(wavenumbers: &[f64], dt: f64) -> Vec<Complex64> {
    wavenumbers
        .iter()
        .map(|k| Complex64::from_polar(1.0, -0.5 * k * k * dt))
        .collect()
}

struct StepInfo {
    peak_sq: f64,
    high_k_fraction: f64,
}

impl Propagator {
    fn new(field: &FullLineField, spec: &ProblemSpec, cfg: &EvolveConfig, dt: f64) -> Result<Self> {
        let n = field.len();
        let h = field.spacing;
        let l = field.half_width;
        let onset = l - cfg.absorber_width;
        let clamp = cfg.effective_clamp();
        let xs = field.coordinates();
        let potential = xs
            .iter()
            .map(|x| {
                if cfg.potential {
                    spec.potential_value(x.abs().min(clamp))
                } else {
                    0.0
                }
            })
            .collect();
        let ramp = xs
            .iter()
            .map(|x| {
                if cfg.absorber_width > 0.0 {
                    let s = ((x.abs() - onset) / cfg.absorber_width).clamp(0.0, 1.0);
                    cfg.absorber_strength * s * s
                } else {
                    0.0
                }
            })
            .collect();
        let dk = 2.0 * PI / (n as f64 * h);
        let wavenumbers: Vec<f64> = (0..n)
            .map(|j| if j <= n / 2 { j as f64 * dk } else { (j as f64 - n as f64) * dk })
            .collect();
        let nyquist = PI / h;
        let kinetic = kinetic_factors(&wavenumbers, dt);
        let high_k = wavenumbers.iter().map(|k| k.abs() > 0.5 * nyquist).collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let scratch_len = fft.get_inplace_scratch_len().max(ifft.get_inplace_scratch_len());
        Ok(Self {
            n,
            dt,
            potential,
            ramp,
            kinetic,
            wavenumbers,
            high_k,
            g: spec.g(),
            sigma: spec.sigma() as i32,
            energy: spec.energy,
            absorber: cfg.absorber,
            fft,
            ifft,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        })
    }

    fn set_dt(&mut self, dt: f64) {
        self.dt = dt;
        self.kinetic = kinetic_factors(&self.wavenumbers, dt);
    }

    fn half_local(&self, psi: &mut [Complex64]) -> f64 {
        let mut peak: f64 = 0.0;
        for (p, v) in psi.iter_mut().zip(&self.potential) {
            let a2 = p.norm_sqr();
            peak = peak.max(a2);
            let phase = -0.5 * self.dt * (v + self.g * a2.powi(self.sigma));
            *p *= Complex64::from_polar(1.0, phase);
        }
        peak
    }

    /// Half a step of the edge layer at time `t`.
    fn half_absorb(&self, psi: &mut [Complex64], t: f64, reference: &[f64]) {
        let phase = Complex64::from_polar(1.0, -self.energy * t);
        for ((p, eta), phi) in psi.iter_mut().zip(&self.ramp).zip(reference) {
            if *eta == 0.0 {
                continue;
            }
            let decay = (-0.5 * eta * self.dt).exp();
            match self.absorber {
                AbsorberKind::Damping => *p *= decay,
                AbsorberKind::Relaxation => {
                    let r = phase * phi;
                    *p = r + (*p - r) * decay;
                }
            }
        }
    }

    /// One symmetric step from `t` to `t + dt`: edge layer, local phase,
    /// kinetic, local phase, edge layer, each outer part for `dt/2`.
    fn step(&mut self, psi: &mut [Complex64], t: f64, reference: &[f64]) -> StepInfo {
        self.half_absorb(psi, t, reference);
        self.half_local(psi);
        self.fft.process_with_scratch(psi, &mut self.scratch);
        let (mut high, mut total) = (0.0, 0.0);
        for ((p, k), hi) in psi.iter_mut().zip(&self.kinetic).zip(&self.high_k) {
            let a2 = p.norm_sqr();
            total += a2;
            if *hi {
                high += a2;
            }
            *p *= k;
        }
        self.ifft.process_with_scratch(psi, &mut self.scratch);
        let inv = 1.0 / self.n as f64;
        psi.iter_mut().for_each(|p| *p *= inv);
        let peak_sq = self.half_local(psi);
        self.half_absorb(psi, t + self.dt, reference);
        StepInfo {
            peak_sq,
            high_k_fraction: if total > 0.0 { high / total } else { 0.0 },
        }
    }
}

fn norm_over(psi: &[Complex64], xs: &[f64], h: f64, radius: f64) -> f64 {
    psi.iter()
        .zip(xs)
        .filter(|(_, x)| x.abs() < radius)
        .map(|(p, _)| p.norm_sqr())
        .sum::<f64>()
        * h
}

/// `‖ψ − cφ‖/‖cφ‖` over `|x| < radius` with `c = ⟨φ,ψ⟩/⟨φ,φ⟩`.
fn core_deviation(psi: &[Complex64], reference: &[f64], xs: &[f64], radius: f64) -> f64 {
    let mut dot = Complex64::new(0.0, 0.0);
    let mut ref_sq = 0.0;
    for ((p, r), x) in psi.iter().zip(reference).zip(xs) {
        if x.abs() < radius {
            dot += p * r;
            ref_sq += r * r;
        }
    }
    if ref_sq == 0.0 {
        return 0.0;
    }
    let c = dot / ref_sq;
    let mut err = 0.0;
    for ((p, r), x) in psi.iter().zip(reference).zip(xs) {
        if x.abs() < radius {
            err += (p - c * r).norm_sqr();
        }
    }
    (err / (c.norm_sqr() * ref_sq)).sqrt()
}

fn check_box(field: &FullLineField, spec: &ProblemSpec, cfg: &EvolveConfig) -> Result<()> {
    let l = field.half_width;
    if cfg.absorber_width >= 0.25 * l {
        return Err(Error::InvalidConfig(format!(
            "absorber width {} must be below L/4 = {}",
            cfg.absorber_width,
            0.25 * l
        )));
    }
    if cfg.core_radius > l - cfg.absorber_width {
        return Err(Error::InvalidConfig("core region overlaps the absorber".into()));
    }
    let clamp = cfg.effective_clamp();
    if clamp > l - cfg.absorber_width + 1e-9 {
        return Err(Error::InvalidConfig(format!("clamp {clamp} lies inside the absorber")));
    }
    let peak = field.psi.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let nonlinear = spec.g().abs() * peak.powi(2 * spec.sigma() as i32);
    let v_max = if cfg.potential { 0.5 * clamp.powf(2.0 * spec.gamma) } else { 0.0 };
    let k_c = (2.0 * v_max + 2.0 * spec.energy.abs() + 2.0 * nonlinear).sqrt();
    let bound = spacing_bound(k_c, 8);
    if field.spacing > bound * (1.0 + 1e-12) {
        return Err(Error::Resolution {
            spacing: field.spacing,
            bound,
            points_per_wavelength: 8,
        });
    }
    let phase = cfg.dt * (v_max + nonlinear);
    if phase > 1.0 {
        return Err(Error::InvalidConfig(format!(
            "dt = {} rotates the local phase by {phase:.3} rad per step (limit 1)",
            cfg.dt
        )));
    }
    Ok(())
}

/// Advances `field` with the reference profile `reference` (used by the
/// relaxation layer and the deviation diagnostic).
/// Smallest step, relative to the configured one, before halving gives up.
const MIN_STEP_FRACTION: f64 = 1.0 / (1u64 << 24) as f64;

fn run(field: &FullLineField, reference: &[f64], spec: &ProblemSpec, cfg: &EvolveConfig, dt: f64, steps: usize, record: bool) -> Result<Trajectory> {
    let mut prop = Propagator::new(field, spec, cfg, dt)?;
    let xs = field.coordinates();
    let h = field.spacing;
    let origin = (field.half_width / h).round() as usize;
    let mut psi = field.psi.clone();
    let peak0 = psi.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let mut traj = Trajectory {
        times: Vec::new(),
        core_norm: Vec::new(),
        total_norm: Vec::new(),
        peak_amplitude: Vec::new(),
        profile_deviation: Vec::new(),
        origin_phase: Vec::new(),
        snapshots: Vec::new(),
        blowup: None,
        final_field: field.clone(),
    };
    let log = |traj: &mut Trajectory, psi: &[Complex64], t: f64| {
        if !record {
            return;
        }
        traj.times.push(t);
        traj.core_norm.push(norm_over(psi, &xs, h, cfg.core_radius));
        traj.total_norm.push(psi.iter().map(|p| p.norm_sqr()).sum::<f64>() * h);
        traj.peak_amplitude.push(psi.iter().map(|p| p.norm()).fold(0.0, f64::max));
        traj.profile_deviation.push(core_deviation(psi, reference, &xs, cfg.core_radius));
        traj.origin_phase.push(psi[origin].arg());
        if cfg.keep_snapshots {
            traj.snapshots.push(Snapshot { t, psi: psi.to_vec() });
        }
    };
    log(&mut traj, &psi, 0.0);
    let t_end = steps as f64 * dt;
    let record_every = cfg.snapshot_stride as f64 * dt;
    let nonlinear = spec.g().abs();
    let power = spec.sigma() as i32;
    let (mut base, mut taken, mut step) = (0.0, 0usize, dt);
    let mut peak_sq = peak0 * peak0;
    let mut next_record = 1usize;
    loop {
        while nonlinear * peak_sq.powi(power) * step > cfg.nonlinear_phase {
            step *= 0.5;
            if step < dt * MIN_STEP_FRACTION {
                return Err(Error::SchemeFailure {
                    t: base + taken as f64 * 2.0 * step,
                    reason: "time step underflow without a declared blowup".into(),
                });
            }
            base += taken as f64 * 2.0 * step;
            taken = 0;
            prop.set_dt(step);
        }
        let t = base + taken as f64 * step;
        if t >= t_end - 0.5 * step {
            break;
        }
        let info = prop.step(&mut psi, t, reference);
        taken += 1;
        let t_next = base + taken as f64 * step;
        peak_sq = info.peak_sq;
        let peak_ratio = info.peak_sq.sqrt() / peak0;
        if !(peak_ratio.is_finite() && info.high_k_fraction.is_finite()) {
            return Err(Error::SchemeFailure {
                t: t_next,
                reason: "non-finite field without a declared blowup".into(),
            });
        }
        let trigger = if peak_ratio > PEAK_FACTOR {
            Some(BlowupTrigger::Peak)
        } else if info.high_k_fraction > cfg.spectral_threshold {
            Some(BlowupTrigger::Resolution)
        } else {
            None
        };
        if let Some(trigger) = trigger {
            log(&mut traj, &psi, t_next);
            traj.blowup = Some(BlowupEvent {
                t: t_next,
                trigger,
                peak_ratio,
                high_k_fraction: info.high_k_fraction,
            });
            break;
        }
        let last = t_next >= t_end - 0.5 * step;
        if t_next >= next_record as f64 * record_every - 0.5 * step || last {
            log(&mut traj, &psi, t_next);
            while next_record as f64 * record_every <= t_next + 0.5 * step {
                next_record += 1;
            }
        }
    }
    traj.final_field.psi = psi;
    Ok(traj)
}

/// Relative core-region difference between two fields on the same box.
pub fn core_difference(a: &FullLineField, b: &FullLineField, radius: f64) -> f64 {
    let xs = a.coordinates();
    let (mut num, mut den) = (0.0, 0.0);
    for ((p, q), x) in a.psi.iter().zip(&b.psi).zip(&xs) {
        if x.abs() < radius {
            num += (p - q).norm_sqr();
            den += q.norm_sqr();
        }
    }
    (num / den).sqrt()
}

const PROBE_STEPS: usize = 32;
const PROBE_TOLERANCE: f64 = 1e-2;

fn step_probe(field: &FullLineField, reference: &[f64], spec: &ProblemSpec, cfg: &EvolveConfig) -> Result<()> {
    let steps = PROBE_STEPS.min(cfg.steps());
    let coarse = run(field, reference, spec, cfg, cfg.dt, steps, false)?;
    let fine = run(field, reference, spec, cfg, 0.5 * cfg.dt, 2 * steps, false)?;
    if coarse.blowup.is_some() || fine.blowup.is_some() {
        return Ok(());
    }
    let diff = core_difference(&coarse.final_field, &fine.final_field, cfg.core_radius);
    if !(diff < PROBE_TOLERANCE) {
        return Err(Error::SchemeFailure {
            t: steps as f64 * cfg.dt,
            reason: format!("step-halving disagreement {diff:.3e}"),
        });
    }
    Ok(())
}

fn propagate_field(field: &FullLineField, reference: &[f64], spec: &ProblemSpec, cfg: &EvolveConfig) -> Result<Trajectory> {
    spec.validate()?;
    cfg.validate()?;
    check_box(field, spec, cfg)?;
    if cfg.step_check {
        step_probe(field, reference, spec, cfg)?;
    }
    run(field, reference, spec, cfg, cfg.dt, cfg.steps(), true)
}

/// Evolves the parity extension of the half-line state `initial`, which
/// also serves as the reference profile.
pub fn propagate(initial: &WaveFunction, spec: &ProblemSpec, cfg: &EvolveConfig) -> Result<Trajectory> {
    let field = FullLineField::from_half_line(initial)?;
    let reference: Vec<f64> = field.psi.iter().map(|p| p.re).collect();
    propagate_field(&field, &reference, spec, cfg)
}

/// Evolves an arbitrary complex field; the reference profile is its real
/// part at `t = 0`.
pub fn propagate_complex(field: &FullLineField, spec: &ProblemSpec, cfg: &EvolveConfig) -> Result<Trajectory> {
    let reference: Vec<f64> = field.psi.iter().map(|p| p.re).collect();
    propagate_field(field, &reference, spec, cfg)
}

/// Ratio of successive differences of the final core field for time steps
/// `dt`, `dt/2`, `dt/4`; close to 4 for a second-order scheme. The
/// relaxation layer pulls toward the real part of `field`.
pub fn time_step_ratio(field: &FullLineField, spec: &ProblemSpec, cfg: &EvolveConfig) -> Result<f64> {
    let reference: Vec<f64> = field.psi.iter().map(|p| p.re).collect();
    check_box(field, spec, cfg)?;
    let field = field.clone();
    let steps = cfg.steps();
    let finals: Vec<FullLineField> = (0..3)
        .map(|k| {
            let m = 1usize << k;
            run(&field, &reference, spec, cfg, cfg.dt / m as f64, steps * m, false).map(|t| t.final_field)
        })
        .collect::<Result<_>>()?;
    Ok(core_difference(&finals[0], &finals[1], cfg.core_radius) / core_difference(&finals[1], &finals[2], cfg.core_radius))
}

/// Smooth random field `Σ a_j cos(k_j x + θ_j)` scaled to peak `epsilon`
/// inside `|x| < radius`, with wavenumbers up to `4π/radius`.
pub fn smooth_noise(xs: &[f64], radius: f64, epsilon: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..4.0 * PI / radius),
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let raw: Vec<f64> = xs
        .iter()
        .map(|x| modes.iter().map(|(a, k, th)| a * (k * x + th).cos()).sum())
        .collect();
    let peak = raw
        .iter()
        .zip(xs)
        .filter(|(_, x)| x.abs() < radius)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max);
    if peak == 0.0 || epsilon == 0.0 {
        return vec![0.0; xs.len()];
    }
    raw.into_iter().map(|v| epsilon * v / peak).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Deformed,
    Collapse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub verdict: Verdict,
    pub max_profile_deviation: f64,
    pub blowup_time: Option<f64>,
}

/// Verdict and the trajectory it was read from.
pub fn stability_run(stationary: &WaveFunction, spec: &ProblemSpec, epsilon: f64, cfg: &EvolveConfig) -> Result<(StabilityVerdict, Trajectory)> {
    if !(0.0..=0.1).contains(&epsilon) {
        return Err(Error::InvalidConfig(format!("perturbation {epsilon} outside [0, 0.1]")));
    }
    let clean = FullLineField::from_half_line(stationary)?;
    let reference: Vec<f64> = clean.psi.iter().map(|p| p.re).collect();
    let xs = clean.coordinates();
    let noise = smooth_noise(&xs, cfg.core_radius, epsilon, cfg.seed);
    let mut field = clean.clone();
    field.psi.iter_mut().zip(&noise).for_each(|(p, d)| *p *= 1.0 + d);
    let traj = propagate_field(&field, &reference, spec, cfg)?;
    let deviation = traj.max_profile_deviation();
    let verdict = match traj.blowup {
        Some(event) => StabilityVerdict {
            verdict: Verdict::Collapse,
            max_profile_deviation: deviation,
            blowup_time: Some(event.t),
        },
        None => StabilityVerdict {
            verdict: if deviation < STABLE_DEVIATION { Verdict::Stable } else { Verdict::Deformed },
            max_profile_deviation: deviation,
            blowup_time: None,
        },
    };
    Ok((verdict, traj))
}

/// Propagates `(1+δ)·stationary` and classifies the outcome.
pub fn stability_test(stationary: &WaveFunction, spec: &ProblemSpec, epsilon: f64, cfg: &EvolveConfig) -> Result<StabilityVerdict> {
    stability_run(stationary, spec, epsilon, cfg).map(|(v, _)| v)
}

/// Norm of the homogeneous quintic soliton of `iψ_t = −½ψ_xx − |ψ|⁴ψ`,
/// by quadrature of `φ² = √(3|μ|) sech(√(8|μ|) x)` at `μ = −1`.
pub fn townes_norm() -> f64 {
    let (half, samples) = (30.0, 60_001);
    let h = 2.0 * half / (samples - 1) as f64;
    let density: Vec<f64> = (0..samples)
        .map(|i| {
            let x = -half + i as f64 * h;
            3f64.sqrt() / (8f64.sqrt() * x).cosh()
        })
        .collect();
    simpson(&density, h)
}

/// Settings shared by every rung of a collapse scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseScanConfig {
    pub evolve: EvolveConfig,
    pub epsilon: f64,
    pub points_per_wavelength: u32,
    /// Extent of the unclamped solve used for the norm.
    pub norm_extent: f64,
    /// Stop bisecting once `N_high/N_low` is at most this.
    pub ratio: f64,
    pub max_bisections: usize,
}

impl CollapseScanConfig {
    pub fn new(evolve: EvolveConfig) -> Self {
        Self {
            evolve,
            epsilon: 0.01,
            points_per_wavelength: 16,
            norm_extent: 20.0,
            ratio: 1.2,
            max_bisections: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RungOutcome {
    pub amplitude: f64,
    pub norm: f64,
    pub verdict: StabilityVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseBracket {
    pub n_low: f64,
    pub n_high: f64,
    pub amplitude_low: f64,
    pub amplitude_high: f64,
    pub ladder: Vec<RungOutcome>,
    pub bisections: Vec<RungOutcome>,
    pub townes_norm: f64,
}

fn rung(spec: &ProblemSpec, amplitude: f64, cfg: &CollapseScanConfig) -> Result<RungOutcome> {
    let ev = &cfg.evolve;
    let state = prepare_state(spec, amplitude, ev, cfg.points_per_wavelength)?;
    let free = ShootConfig::new(cfg.norm_extent)
        .with_amplitude(amplitude)
        .with_points_per_wavelength(cfg.points_per_wavelength);
    let norm = tail_corrected_norm(&solve_stationary_1d(spec, &free)?, spec)?;
    let verdict = stability_test(&state, spec, cfg.epsilon, ev)?;
    Ok(RungOutcome {
        amplitude,
        norm,
        verdict,
    })
}

fn verdict_table(rows: &[RungOutcome]) -> String {
    rows.iter()
        .map(|r| format!("A={} N={:.4} {:?}", r.amplitude, r.norm, r.verdict.verdict))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Brackets the critical norm of a quintic focusing state between the
/// last non-collapsing and the first collapsing rung, then bisects the
/// origin amplitude until `N_high/N_low ≤ cfg.ratio`.
pub fn collapse_scan(spec: &ProblemSpec, amplitudes: &[f64], cfg: &CollapseScanConfig) -> Result<CollapseBracket> {
    if !(spec.g() < 0.0 && spec.sigma() == 2) {
        return Err(Error::InvalidConfig("collapse scan needs g = -1 and sigma = 2".into()));
    }
    if amplitudes.is_empty() || amplitudes.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidConfig("amplitudes must be non-empty and ascending".into()));
    }
    let ladder: Vec<RungOutcome> = amplitudes
        .par_iter()
        .map(|&a| rung(spec, a, cfg))
        .collect::<Result<_>>()?;
    let collapsed: Vec<bool> = ladder.iter().map(|r| r.verdict.verdict == Verdict::Collapse).collect();
    let first = collapsed.iter().position(|&c| c);
    let Some(first) = first else {
        let largest_norm = ladder.iter().map(|r| r.norm).fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::NoUpperBracket { largest_norm });
    };
    if collapsed[first..].iter().any(|&c| !c) {
        return Err(Error::NonMonotone {
            table: verdict_table(&ladder),
        });
    }
    if first == 0 {
        let smallest_norm = ladder.iter().map(|r| r.norm).fold(f64::INFINITY, f64::min);
        return Err(Error::NoLowerBracket { smallest_norm });
    }
    let (mut low, mut high) = (ladder[first - 1], ladder[first]);
    let mut bisections = Vec::new();
    while high.norm / low.norm > cfg.ratio && bisections.len() < cfg.max_bisections {
        let mid = rung(spec, 0.5 * (low.amplitude + high.amplitude), cfg)?;
        bisections.push(mid);
        if mid.verdict.verdict == Verdict::Collapse {
            high = mid;
        } else {
            low = mid;
        }
    }
    Ok(CollapseBracket {
        n_low: low.norm,
        n_high: high.norm,
        amplitude_low: low.amplitude,
        amplitude_high: high.amplitude,
        ladder,
        bisections,
        townes_norm: townes_norm(),
    })
}

/// Half-line Gaussian `exp(−x²/(2s²))` on `[0, extent]` as an even state.
pub fn gaussian_state(width: f64, extent: f64, samples: usize) -> Result<WaveFunction> {
    let grid = Grid::new(extent, samples)?;
    WaveFunction::sample(grid, Geometry::Line { parity: Parity::Even }, |x| (-x * x / (2.0 * width * width)).exp())
}
