//! Radial stationary states with vorticity `S`, started off the centrifugal
//! singularity by a Frobenius series.
//!
//! Substituting `φ = Σ a_k r^{S+k}` into
//! `φ'' + φ'/r − S²φ/r² = −2Eφ − r^{2γ}φ + 2gφ³` gives, at order `r^S`,
//! `a2·((S+2)² − S²) = −2E·a0 + 2g·a0³·[S = 0]`, i.e.
//! `a2 = (−E·a0 + g·a0³·[S = 0]) / (2(S+1))`. The potential first appears
//! at order `r^{S+2γ}` and the cubic term at `r^{3S}`, so for `γ ≥ 1` and
//! `S ≥ 1` only the energy enters `a2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::closedform::exact_vortex;
use crate::error::{Error, Result};
use crate::model::{Geometry, Normalization, ProblemSpec, WaveFunction};
use crate::numerics::ode::integrate_nodes;
use crate::solver1d::ShootConfig;

/// Start-up data at the hand-off radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialStart {
    pub epsilon: f64,
    pub a0: f64,
    pub a2: f64,
    /// Largest accepted relative size of the first neglected series term.
    pub tolerance: f64,
}

/// Default hand-off radius in grid cells.
pub const START_CELLS: usize = 4;

impl RadialStart {
    /// Series coefficients for `spec` with `a0 = cfg.amplitude` and the
    /// hand-off four cells from the origin, moved inward on coarse grids
    /// until the truncation estimate is a tenth of the tolerance.
    pub fn for_problem(spec: &ProblemSpec, cfg: &ShootConfig) -> Result<Self> {
        let grid = cfg.grid(spec)?;
        let s = spec.geometry.vorticity().unwrap_or(0);
        let a0 = cfg.amplitude;
        let mut start = Self {
            epsilon: START_CELLS as f64 * grid.spacing(),
            a0,
            a2: frobenius_a2(spec.energy, spec.g(), s, a0),
            tolerance: 1e-4,
        };
        while start.truncation_estimate(spec) > 0.1 * start.tolerance {
            start.epsilon *= 0.5;
        }
        Ok(start)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// `(φ, φ')` of the two-term series at `r`.
    pub fn series(&self, vorticity: u32, r: f64) -> [f64; 2] {
        let s = f64::from(vorticity);
        let rs = r.powi(vorticity as i32);
        let value = rs * (self.a0 + self.a2 * r * r);
        let slope = if vorticity == 0 {
            2.0 * self.a2 * r
        } else {
            r.powi(vorticity as i32 - 1) * (s * self.a0 + (s + 2.0) * self.a2 * r * r)
        };
        [value, slope]
    }

    /// Size of the first neglected terms relative to `a0 r^S` at `ε`.
    pub fn truncation_estimate(&self, spec: &ProblemSpec) -> f64 {
        let s = f64::from(spec.geometry.vorticity().unwrap_or(0));
        let e = self.epsilon;
        let a0 = self.a0.abs().max(f64::MIN_POSITIVE);
        let a4_energy = spec.energy * self.a2 / (4.0 * (s + 2.0));
        let a4_cubic = if s == 0.0 {
            6.0 * spec.g() * a0 * a0 * self.a2 / (8.0 * (s + 2.0))
        } else {
            0.0
        };
        let m = 2.0 * spec.gamma + 2.0;
        let potential = a0 / (m * (2.0 * s + m));
        ((a4_energy.abs() + a4_cubic.abs()) * e.powi(4) + potential * e.powf(m)) / a0
    }
}

/// `a2 = (−E·a0 + g·a0³·[S = 0]) / (2(S+1))`.
pub fn frobenius_a2(energy: f64, g: f64, vorticity: u32, a0: f64) -> f64 {
    let cubic = if vorticity == 0 { g * a0.powi(3) } else { 0.0 };
    (-energy * a0 + cubic) / (2.0 * (f64::from(vorticity) + 1.0))
}

/// Integrates the radial equation outward from `start.epsilon` onto the
/// output grid; samples inside `ε` come from the series.
pub fn solve_stationary_2d(spec: &ProblemSpec, cfg: &ShootConfig, start: &RadialStart) -> Result<WaveFunction> {
    spec.validate()?;
    cfg.validate()?;
    let Geometry::Radial { vorticity } = spec.geometry else {
        return Err(Error::InvalidConfig("radial solve needs a radial geometry".into()));
    };
    if spec.g() != 0.0 && spec.sigma() != 1 {
        return Err(Error::InvalidConfig("radial states support the cubic term only".into()));
    }
    if !(start.epsilon > 0.0 && start.a0 != 0.0) {
        return Err(Error::InvalidConfig("series start needs ε > 0 and a0 ≠ 0".into()));
    }
    let estimate = start.truncation_estimate(spec);
    if estimate > start.tolerance {
        return Err(Error::SeriesTruncation {
            epsilon: start.epsilon,
            estimate,
        });
    }
    let grid = cfg.grid(spec)?;
    if start.epsilon >= grid.end() {
        return Err(Error::InvalidConfig("series start lies outside the domain".into()));
    }
    let points = grid.points();
    let first = points.iter().position(|&r| r > start.epsilon).unwrap_or(points.len());
    let mut nodes = Vec::with_capacity(points.len() - first + 1);
    nodes.push(start.epsilon);
    nodes.extend_from_slice(&points[first..]);

    let s2 = f64::from(vorticity).powi(2);
    let two_e = 2.0 * spec.energy;
    let two_g = 2.0 * spec.g();
    let gamma2 = 2.0 * spec.gamma;
    let rhs = move |r: f64, y: [f64; 2]| {
        [
            y[1],
            -y[1] / r + (s2 / (r * r) - r.powf(gamma2) - two_e) * y[0] + two_g * y[0].powi(3),
        ]
    };
    let gamma = spec.gamma;
    let p = f64::from(cfg.points_per_wavelength);
    let base = 2.0 * spec.energy.abs() + 2.0 * spec.g().abs() * start.a0 * start.a0 + 1.0;
    let ceiling = move |r: f64| 2.0 * PI / ((r.powf(2.0 * gamma) + s2 / (r * r) + base).sqrt() * p);
    let mut options = cfg.ode_options(spec);
    options.overflow_cap = 1e8 * start.a0.abs().max(1.0);
    let sol = integrate_nodes(rhs, &nodes, start.series(vorticity, start.epsilon), ceiling, &options)?;

    let scale = (-sol.log_scale).exp();
    let mut values = Vec::with_capacity(points.len());
    let mut slopes = Vec::with_capacity(points.len());
    for &r in &points[..first] {
        let [v, d] = start.series(vorticity, r);
        values.push(v * scale);
        slopes.push(d * scale);
    }
    values.extend_from_slice(&sol.values[1..]);
    slopes.extend_from_slice(&sol.slopes[1..]);
    let mut wf = WaveFunction::new(
        grid,
        spec.geometry,
        Normalization::LeadingCoefficient(start.a0),
        values,
        slopes,
    )?;
    wf.log_scale = sol.log_scale;
    Ok(wf)
}

/// Least-squares factor `c` minimising `Σ(c·a − b)²`.
pub fn amplitude_match(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let den: f64 = a.iter().map(|x| x * x).sum();
    num / den
}

/// Largest deviation between the numerical `γ = 2S − 1` vortex and the
/// exact profile over `[ε, 0.9L]`, after least-squares amplitude matching,
/// in units of the exact envelope `r^{-S} min(1, r^{2S}/(2S))`.
pub fn verify_exact_vortex(vorticity: u32, cfg: &ShootConfig) -> Result<f64> {
    if vorticity == 0 {
        return Err(Error::InvalidConfig("exact vortex needs S ≥ 1".into()));
    }
    let spec = ProblemSpec::radial(f64::from(2 * vorticity) - 1.0, 0.0, vorticity);
    let start = RadialStart::for_problem(&spec, cfg)?;
    let wf = solve_stationary_2d(&spec, cfg, &start)?;
    let n = f64::from(2 * vorticity);
    let (mut numeric, mut exact, mut envelope) = (Vec::new(), Vec::new(), Vec::new());
    for (r, v) in wf.coordinates().into_iter().zip(&wf.values) {
        if r < start.epsilon || r > 0.9 * cfg.extent {
            continue;
        }
        numeric.push(*v);
        exact.push(exact_vortex(vorticity, 1.0, r));
        envelope.push(r.powi(-(vorticity as i32)) * (r.powf(n) / n).min(1.0));
    }
    let c = amplitude_match(&numeric, &exact);
    Ok(numeric
        .iter()
        .zip(&exact)
        .zip(&envelope)
        .map(|((a, b), e)| (c * a - b).abs() / e)
        .fold(0.0, f64::max))
}
