//! Stationary states on the line by outward integration from the origin.
//!
//! Every energy admits a solution, so there is no eigenvalue search: the
//! parity fixes the initial data and the ODE is integrated to the edge of
//! the domain with a step ceiling tied to the local wavelength.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::tail_corrected_norm;
use crate::error::{Error, Result};
use crate::model::{Geometry, Grid, Normalization, Parity, ProblemSpec, WaveFunction, DEFAULT_POINTS_PER_WAVELENGTH};
use crate::numerics::lsq::linear_least_squares;
use crate::numerics::ode::{integrate_nodes, OdeOptions, StepControl};
use crate::numerics::roots::{bisect, sign_change_roots};
use crate::numerics::stencil::sampled_derivatives;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootConfig {
    /// `φ(0)` for even states, `φ'(0)` for odd ones, `a0` for radial ones.
    pub amplitude: f64,
    pub points_per_wavelength: u32,
    pub extent: f64,
    /// Explicit sample count; `None` picks the coarsest resolving grid.
    pub samples: Option<usize>,
    #[serde(skip, default = "default_control")]
    pub control: StepControl,
    /// Freeze the potential at `min(x, clamp)`.
    pub clamp: Option<f64>,
}

fn default_control() -> StepControl {
    OdeOptions::default().control
}

impl ShootConfig {
    pub fn new(extent: f64) -> Self {
        Self {
            amplitude: 1.0,
            points_per_wavelength: DEFAULT_POINTS_PER_WAVELENGTH,
            extent,
            samples: None,
            control: default_control(),
            clamp: None,
        }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_points_per_wavelength(mut self, p: u32) -> Self {
        self.points_per_wavelength = p;
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = Some(samples);
        self
    }

    pub fn with_control(mut self, control: StepControl) -> Self {
        self.control = control;
        self
    }

    pub fn with_clamp(mut self, clamp: f64) -> Self {
        self.clamp = Some(clamp);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return Err(Error::InvalidConfig(format!("extent {} must be positive", self.extent)));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "origin amplitude {} must be positive",
                self.amplitude
            )));
        }
        if self.points_per_wavelength < 8 {
            return Err(Error::InvalidConfig(format!(
                "points per wavelength {} below 8",
                self.points_per_wavelength
            )));
        }
        if let Some(c) = self.clamp {
            if !(c > 0.0) {
                return Err(Error::InvalidConfig(format!("clamp {c} must be positive")));
            }
        }
        Ok(())
    }

    /// Coordinate at which the potential is evaluated.
    pub(crate) fn effective(&self, x: f64) -> f64 {
        match self.clamp {
            Some(c) => x.min(c),
            None => x,
        }
    }

    /// Output grid for `spec`, checked against the resolution bound.
    pub(crate) fn grid(&self, spec: &ProblemSpec) -> Result<Grid> {
        let k_edge = (self.effective(self.extent).powf(2.0 * spec.gamma) + 2.0 * spec.energy.abs()).sqrt();
        let grid = match self.samples {
            Some(n) => Grid::new(self.extent, n)?,
            None => Grid::resolving(self.extent, k_edge, self.points_per_wavelength)?,
        };
        let bound = crate::model::spacing_bound(k_edge, self.points_per_wavelength);
        if grid.spacing() > bound * (1.0 + 1e-12) {
            return Err(Error::Resolution {
                spacing: grid.spacing(),
                bound,
                points_per_wavelength: self.points_per_wavelength,
            });
        }
        Ok(grid)
    }

    /// Step ceiling `2π/(k(x)·P)` from the local wavenumber, including the
    /// nonlinear contribution at the origin amplitude.
    pub(crate) fn ceiling(&self, spec: &ProblemSpec) -> impl Fn(f64) -> f64 {
        let gamma = spec.gamma;
        let base = 2.0 * spec.energy.abs()
            + 2.0 * spec.g().abs() * self.amplitude.powi(2 * spec.sigma() as i32)
            + 1.0;
        let clamp = self.clamp;
        let p = f64::from(self.points_per_wavelength);
        move |x: f64| {
            let xe = clamp.map_or(x, |c| x.min(c));
            2.0 * PI / ((xe.powf(2.0 * gamma) + base).sqrt() * p)
        }
    }

    pub(crate) fn ode_options(&self, spec: &ProblemSpec) -> OdeOptions {
        OdeOptions {
            control: self.control,
            overflow_cap: 1e8 * self.amplitude.max(1.0),
            renormalize: spec.nonlinearity.is_linear(),
        }
    }
}

/// Integrates `φ'' = −2Eφ − x^{2γ}φ + 2gφ^{2σ+1}` on `[0, L]` from
/// `(φ, φ')(0) = (A, 0)` (even) or `(0, A)` (odd).
pub fn solve_stationary_1d(spec: &ProblemSpec, cfg: &ShootConfig) -> Result<WaveFunction> {
    spec.validate()?;
    cfg.validate()?;
    let Geometry::Line { parity } = spec.geometry else {
        return Err(Error::InvalidConfig("one-dimensional solve needs a line geometry".into()));
    };
    let grid = cfg.grid(spec)?;
    let nodes = grid.points();
    let two_e = 2.0 * spec.energy;
    let two_g = 2.0 * spec.g();
    let power = 2 * spec.sigma() as i32 + 1;
    let gamma2 = 2.0 * spec.gamma;
    let clamp = cfg.clamp;
    let rhs = move |x: f64, y: [f64; 2]| {
        let xe = clamp.map_or(x, |c| x.min(c));
        [
            y[1],
            -(two_e + xe.powf(gamma2)) * y[0] + two_g * y[0].powi(power),
        ]
    };
    let (y0, normalization) = match parity {
        Parity::Even => ([cfg.amplitude, 0.0], Normalization::OriginValue(cfg.amplitude)),
        Parity::Odd => ([0.0, cfg.amplitude], Normalization::OriginSlope(cfg.amplitude)),
    };
    let sol = integrate_nodes(rhs, &nodes, y0, cfg.ceiling(spec), &cfg.ode_options(spec))?;
    let mut wf = WaveFunction::new(grid, spec.geometry, normalization, sol.values, sol.slopes)?;
    wf.log_scale = sol.log_scale;
    Ok(wf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub zeros: Vec<f64>,
    pub inflexions: Vec<f64>,
    /// Whether each inflexion lies within one grid cell of a zero.
    pub matched: Vec<bool>,
    pub extra_inflexions: Vec<f64>,
    /// Global maximiser of `|φ|`, reported for `E < 0`.
    pub x_max: Option<f64>,
    /// `(−2E)^{1/(2γ)}` for `E < 0`.
    pub expected_extra: Option<f64>,
    pub cell: f64,
}

impl StructureReport {
    pub fn all_matched(&self) -> bool {
        self.matched.iter().all(|m| *m)
    }
}

/// Zeros and inflexion points of a linear stationary state on `(0, L)`.
///
/// The second derivative is taken from the samples by finite differences,
/// not from the equation, so that the coincidence of inflexions with zeros
/// is an observation rather than an identity.
pub fn classify_structure(wf: &WaveFunction, spec: &ProblemSpec) -> Result<StructureReport> {
    if !spec.nonlinearity.is_linear() {
        return Err(Error::InvalidConfig(
            "inflexion classification applies to the linear equation only".into(),
        ));
    }
    if !wf.geometry.is_line() {
        return Err(Error::InvalidConfig("structure report needs a line state".into()));
    }
    let h = wf.spacing();
    let peak = wf.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zeros: Vec<f64> = sign_change_roots(wf.grid.start, h, &wf.values, 1e-13 * peak)
        .into_iter()
        .filter(|&z| z > 0.5 * h)
        .collect();

    let d = sampled_derivatives(&wf.values, h);
    let significant: Vec<f64> = d
        .second
        .iter()
        .zip(&d.second_error)
        .map(|(v, e)| if v.abs() > 10.0 * e + 1e-13 * peak { *v } else { 0.0 })
        .collect();
    let x0 = wf.grid.point(d.offset);
    let inflexions = sign_change_roots(x0, h, &significant, 0.0);

    let matched: Vec<bool> = inflexions
        .iter()
        .map(|x| zeros.iter().any(|z| (z - x).abs() <= h))
        .collect();
    let extra_inflexions = inflexions
        .iter()
        .zip(&matched)
        .filter(|(_, m)| !**m)
        .map(|(x, _)| *x)
        .collect();
    let negative = spec.energy < 0.0;
    Ok(StructureReport {
        zeros,
        inflexions,
        matched,
        extra_inflexions,
        x_max: negative.then(|| refine_x_max(wf, spec)),
        expected_extra: negative.then(|| (-2.0 * spec.energy).powf(1.0 / (2.0 * spec.gamma))),
        cell: h,
    })
}

/// Global maximiser of `|φ|`, refined by a parabola through the three
/// samples around the discrete maximum.
pub fn locate_x_max(wf: &WaveFunction) -> f64 {
    let (i, _) = wf
        .values
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
    let h = wf.spacing();
    if i == 0 || i + 1 == wf.values.len() {
        return wf.grid.point(i);
    }
    let (a, b, c) = (wf.values[i - 1].abs(), wf.values[i].abs(), wf.values[i + 1].abs());
    let denom = a - 2.0 * b + c;
    let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    wf.grid.point(i) + shift.clamp(-0.5, 0.5) * h
}

/// Zero of `φ'` next to the sampled maximum, found by Newton iteration on
/// a Taylor expansion whose coefficients come from the linear ODE
/// `φ'' = (−2E − x^{2γ})φ`. Falls back to [`locate_x_max`] when slopes
/// are missing or the problem is nonlinear.
pub fn refine_x_max(wf: &WaveFunction, spec: &ProblemSpec) -> f64 {
    let coarse = locate_x_max(wf);
    if wf.slopes.is_empty() || !spec.nonlinearity.is_linear() {
        return coarse;
    }
    let h = wf.spacing();
    let i = ((coarse - wf.grid.start) / h).round() as usize;
    let i = i.min(wf.values.len() - 1);
    let x0 = wf.grid.point(i);
    let d = taylor_derivatives(spec, x0, wf.values[i], wf.slopes[i]);
    let slope_at = |t: f64| -> (f64, f64) {
        // φ'(x0 + t) and φ''(x0 + t)
        let (mut p1, mut p2, mut term) = (0.0, 0.0, 1.0);
        for n in 0..TAYLOR_ORDER - 1 {
            p1 += d[n + 1] * term;
            p2 += d[n + 2] * term;
            term *= t / (n + 1) as f64;
        }
        (p1, p2)
    };
    let mut t = coarse - x0;
    for _ in 0..20 {
        let (f, df) = slope_at(t);
        if df == 0.0 {
            break;
        }
        let step = f / df;
        t = (t - step).clamp(-h, h);
        if step.abs() < 1e-15 * x0.abs().max(1.0) {
            break;
        }
    }
    x0 + t
}

const TAYLOR_ORDER: usize = 12;

/// `φ^{(n)}(x)` for `n < TAYLOR_ORDER + 1` from `φ(x)` and `φ'(x)` by the
/// Leibniz rule applied to `φ'' = Wφ`.
fn taylor_derivatives(spec: &ProblemSpec, x: f64, phi: f64, dphi: f64) -> [f64; TAYLOR_ORDER + 1] {
    let p = 2.0 * spec.gamma;
    let mut w = [0.0; TAYLOR_ORDER];
    let mut falling = 1.0;
    for (j, wj) in w.iter_mut().enumerate() {
        // j-th derivative of −x^p
        *wj = if x == 0.0 && p - (j as f64) < 0.0 { 0.0 } else { -falling * x.powf(p - j as f64) };
        falling *= p - j as f64;
    }
    w[0] -= 2.0 * spec.energy;
    let mut d = [0.0; TAYLOR_ORDER + 1];
    d[0] = phi;
    d[1] = dphi;
    for n in 0..TAYLOR_ORDER - 1 {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for j in 0..=n {
            acc += binom * w[j] * d[n - j];
            binom *= (n - j) as f64 / (j + 1) as f64;
        }
        d[n + 2] = acc;
    }
    d
}

/// Largest deviation of `φ` from the free standing wave
/// `φ(0)cos(kx) + φ'(0)sin(kx)/k`, `k = √(2E)`, over `|x| ≤ ½E^{1/(2γ)}`,
/// relative to the standing-wave amplitude.
pub fn core_wave_check(wf: &WaveFunction, spec: &ProblemSpec) -> Result<f64> {
    if !spec.nonlinearity.is_linear() {
        return Err(Error::InvalidConfig("core standing-wave check needs g = 0".into()));
    }
    if spec.energy < 10.0 {
        return Err(Error::InvalidConfig(format!(
            "core standing-wave check needs E ≥ 10 (got {})",
            spec.energy
        )));
    }
    let k = (2.0 * spec.energy).sqrt();
    let radius = 0.5 * spec.energy.powf(1.0 / (2.0 * spec.gamma));
    if radius < 2.0 * PI / k {
        return Err(Error::InvalidConfig(format!(
            "core radius {radius:.3} is shorter than one wavelength {:.3}",
            2.0 * PI / k
        )));
    }
    if radius > wf.grid.end() {
        return Err(Error::InvalidConfig("core radius exceeds the domain".into()));
    }
    let phi0 = wf.values[0];
    let slope0 = wf.slopes.first().copied().unwrap_or(0.0);
    let amp = (phi0 * phi0 + (slope0 / k).powi(2)).sqrt();
    let mut worst = 0.0f64;
    for (x, v) in wf.grid.points().into_iter().zip(&wf.values) {
        if x > radius {
            break;
        }
        let reference = phi0 * (k * x).cos() + slope0 / k * (k * x).sin();
        worst = worst.max((v - reference).abs() / amp);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XmaxPoint {
    pub energy: f64,
    pub x_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub points: Vec<XmaxPoint>,
    pub slope: f64,
    pub intercept: f64,
    /// Residuals of `ln x_max − (intercept + slope·ln(−E))`.
    pub residuals: Vec<f64>,
}

/// Domain half-width used for an `E < 0` state: far enough past the
/// turning point `(−2E)^{1/(2γ)}` to see the maximum.
pub fn xmax_extent(gamma: f64, energy: f64, requested: f64) -> f64 {
    requested.max(1.5 * (-2.0 * energy).powf(1.0 / (2.0 * gamma)) + 2.0)
}

/// Solves even linear states for each `E < 0`, locates `x_max` and fits
/// `ln x_max` against `ln(−E)`.
pub fn xmax_scan(gamma: f64, energies: &[f64], cfg: &ShootConfig) -> Result<ScanResult> {
    if energies.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "x_max scan needs at least 3 energies (got {})",
            energies.len()
        )));
    }
    if let Some(e) = energies.iter().find(|e| !(**e < 0.0)) {
        return Err(Error::InvalidConfig(format!("x_max scan needs E < 0 (got {e})")));
    }
    let points: Vec<Result<XmaxPoint>> = energies
        .par_iter()
        .map(|&energy| {
            let spec = ProblemSpec::line(gamma, energy, Parity::Even);
            let mut local = *cfg;
            local.extent = xmax_extent(gamma, energy, cfg.extent);
            local.samples = None;
            let wf = solve_stationary_1d(&spec, &local).map_err(|e| Error::ScanPoint {
                energy,
                source: Box::new(e),
            })?;
            Ok(XmaxPoint {
                energy,
                x_max: refine_x_max(&wf, &spec),
            })
        })
        .collect();
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    let lx: Vec<f64> = points.iter().map(|p| (-p.energy).ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.x_max.ln()).collect();
    let (coeffs, _) = linear_least_squares(&[vec![1.0; lx.len()], lx.clone()], &ly)
        .ok_or_else(|| Error::InvalidConfig("degenerate energy ladder".into()))?;
    let residuals = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| y - coeffs[0] - coeffs[1] * x)
        .collect();
    Ok(ScanResult {
        points,
        slope: coeffs[1],
        intercept: coeffs[0],
        residuals,
    })
}

/// A nonlinear state tuned to a prescribed norm.
#[derive(Debug, Clone, PartialEq)]
pub struct NormTarget {
    pub state: WaveFunction,
    pub amplitude: f64,
    pub norm: f64,
}

/// Finds the smallest origin amplitude in `[low, high]` whose state has
/// the (tail-corrected) norm `target`.
///
/// The norm need not be monotone in the amplitude, so a geometric ladder
/// is walked upward until the first crossing, which is then bisected.
pub fn solve_for_norm(spec: &ProblemSpec, cfg: &ShootConfig, target: f64, low: f64, high: f64) -> Result<NormTarget> {
    let norm_at = |a: f64| -> Result<f64> {
        let wf = solve_stationary_1d(spec, &cfg.with_amplitude(a))?;
        tail_corrected_norm(&wf, spec)
    };
    let rungs = 24;
    let ratio = (high / low).powf(1.0 / rungs as f64);
    let mut prev = (low, norm_at(low)? - target);
    for k in 1..=rungs {
        let a = low * ratio.powi(k);
        let Ok(n) = norm_at(a) else { break };
        let cur = (a, n - target);
        if prev.1.signum() != cur.1.signum() {
            let amp = bisect(|a| norm_at(a).map_or(f64::NAN, |n| n - target), prev.0, cur.0, 1e-12, 200)
                .ok_or(Error::NormTargetUnreachable { target, low, high })?;
            let state = solve_stationary_1d(spec, &cfg.with_amplitude(amp))?;
            let norm = tail_corrected_norm(&state, spec)?;
            return Ok(NormTarget {
                state,
                amplitude: amp,
                norm,
            });
        }
        prev = cur;
    }
    Err(Error::NormTargetUnreachable { target, low, high })
}
