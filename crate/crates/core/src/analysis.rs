//! Tail fitting, norms and their convergence, and deviation metrics between
//! numerical states and the asymptotic formulas.
//!
//! All quantities refer to the stored samples of a [`WaveFunction`]; the
//! `log_scale` of renormalised linear solves is not reapplied.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::closedform::{envelope_exponent, tail_model, tail_phase, AsymptoteParams};
use crate::error::{Error, Result};
use crate::model::{Geometry, ProblemSpec, WaveFunction};
use crate::numerics::lsq::{levenberg_marquardt, linear_least_squares, LsqOptions};
use crate::numerics::quadrature::{cumulative_trapezoid, simpson};
use crate::numerics::roots::sign_change_roots;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailModelKind {
    /// `γ > 1`: algebraic envelope with the power-law expansion.
    PowerTail,
    /// `γ = 1`: inverted oscillator with logarithmic phase.
    Antiho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub phi0: f64,
    /// In `[0, 2π)`. Zero when the phase is carried by `core_scale`.
    pub chi0: f64,
    pub core_scale: Option<f64>,
    /// RMS of `(φ − model)/(φ0 x^{-p})` over the window.
    pub residual: f64,
    pub window: (f64, f64),
    pub model: TailModelKind,
    pub order: u8,
    pub iterations: usize,
}

impl TailFit {
    pub fn params(&self) -> AsymptoteParams {
        AsymptoteParams {
            phi0: self.phi0,
            chi0: self.chi0,
            core_scale: self.core_scale,
            order: self.order,
        }
    }
}

/// Phase used by the tail model, without the fitted offset (`l = 1`).
fn model_phase(spec: &ProblemSpec, x: f64) -> f64 {
    if spec.gamma == 1.0 {
        0.5 * x * x + spec.energy * x.ln()
    } else {
        tail_phase(spec.gamma, x)
    }
}

/// Fits `(φ0, χ0)` (and `l` for `γ = 1`, `E ≠ 0`) with the default order:
/// 2 when `E ≠ 0`, 1 otherwise.
pub fn fit_tail(wf: &WaveFunction, spec: &ProblemSpec, window: (f64, f64)) -> Result<TailFit> {
    let order = if spec.energy != 0.0 && spec.gamma > 1.0 { 2 } else { 1 };
    fit_tail_with_order(wf, spec, window, order)
}

/// First coordinate past the origin where the state changes sign.
pub fn first_zero(wf: &WaveFunction) -> Option<f64> {
    let peak = wf.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let h = wf.spacing();
    sign_change_roots(wf.grid.start, h, &wf.values, 1e-13 * peak)
        .into_iter()
        .find(|z| *z > 0.5 * h)
}

pub fn fit_tail_with_order(wf: &WaveFunction, spec: &ProblemSpec, window: (f64, f64), order: u8) -> Result<TailFit> {
    let (inner, outer) = window;
    let model = if spec.gamma == 1.0 {
        TailModelKind::Antiho
    } else if spec.gamma > 1.0 {
        TailModelKind::PowerTail
    } else {
        return Err(Error::InvalidConfig(format!("tail fit needs γ ≥ 1 (got {})", spec.gamma)));
    };
    if model == TailModelKind::Antiho && order != 1 {
        return Err(Error::InvalidConfig("the anti-trap tail has a single term".into()));
    }
    let z = first_zero(wf).ok_or(Error::WindowOutsideTail { inner, outer })?;
    if !(inner < outer) || outer > 0.95 * wf.grid.end() || inner < 3.0 * z {
        return Err(Error::WindowOutsideTail { inner, outer });
    }
    let oscillations = (model_phase(spec, outer) - model_phase(spec, inner)) / TAU;
    if oscillations < 3.0 {
        return Err(Error::WindowTooShort { oscillations });
    }

    let xs = wf.coordinates();
    let sel: Vec<usize> = (0..xs.len()).filter(|&i| xs[i] >= inner && xs[i] <= outer).collect();
    let p = envelope_exponent(spec);
    let xw: Vec<f64> = sel.iter().map(|&i| xs[i]).collect();
    let yw: Vec<f64> = sel.iter().map(|&i| wf.values[i]).collect();
    let weight: Vec<f64> = xw.iter().map(|x| x.powf(p)).collect();

    // seed: phase at the outermost zero, amplitude from the nearest extremum
    let h = wf.spacing();
    let zeros = sign_change_roots(xw[0], h, &yw, 0.0);
    let zo = *zeros.last().ok_or(Error::WindowOutsideTail { inner, outer })?;
    let iz = ((zo - xw[0]) / h).floor() as usize;
    let falling = yw[iz + 1] < yw[iz];
    let phase_z = model_phase(spec, zo);
    let chi_seed = if falling { phase_z - PI / 2.0 } else { phase_z + PI / 2.0 };
    let phi_seed = (0..yw.len())
        .filter(|&i| (xw[i] - zo).abs() < 2.0 * PI / spec.local_wavenumber(zo))
        .map(|i| yw[i].abs() * weight[i])
        .fold(0.0f64, f64::max)
        .max(1e-300);

    let antiho_log = model == TailModelKind::Antiho && spec.energy != 0.0;
    let params_from = |q: &[f64]| {
        let base = AsymptoteParams::new(q[0], q[1], order);
        if antiho_log {
            base.with_core_scale(1.0)
        } else {
            base
        }
    };
    let residuals = |q: &[f64], out: &mut [f64]| {
        let prm = params_from(q);
        for i in 0..xw.len() {
            let m = tail_model(spec, &prm, xw[i]).unwrap_or(f64::NAN);
            out[i] = (yw[i] - m) * weight[i];
        }
    };
    let outcome = levenberg_marquardt(residuals, &[phi_seed, reduce(chi_seed)], xw.len(), LsqOptions::default());
    let mut phi0 = outcome.params[0];
    let mut chi0 = outcome.params[1];
    if phi0 < 0.0 {
        phi0 = -phi0;
        chi0 += PI;
    }
    let residual = (outcome.cost / xw.len() as f64).sqrt() / phi0;
    if !outcome.converged || !residual.is_finite() {
        return Err(Error::FitDiverged {
            iterations: outcome.iterations,
            residual,
        });
    }
    let chi0 = reduce(chi0);
    let (chi0, core_scale) = if antiho_log {
        (0.0, Some((chi0 / spec.energy).exp()))
    } else {
        (chi0, None)
    };
    Ok(TailFit {
        phi0,
        chi0,
        core_scale,
        residual,
        window,
        model,
        order,
        iterations: outcome.iterations,
    })
}

fn reduce(x: f64) -> f64 {
    crate::closedform::reduce_phase(x)
}

/// Largest `|φ − model|` over the fit window, measured in units of the
/// local envelope `φ0 x^{-p}`.
pub fn asymptotic_deviation(wf: &WaveFunction, fit: &TailFit, spec: &ProblemSpec) -> Result<f64> {
    let params = fit.params();
    let p = envelope_exponent(spec);
    let mut worst = 0.0f64;
    for (x, v) in wf.coordinates().into_iter().zip(&wf.values) {
        if x < fit.window.0 || x > fit.window.1 {
            continue;
        }
        let m = tail_model(spec, &params, x)?;
        worst = worst.max((v - m).abs() / (fit.phi0 * x.powf(-p)));
    }
    Ok(worst)
}

/// Quadrature weight turning the stored samples into norm density:
/// `2φ²` on the half-line (both sides), `2πrφ²` for radial states.
fn density(wf: &WaveFunction) -> Vec<f64> {
    let xs = wf.coordinates();
    match wf.geometry {
        Geometry::Line { .. } => wf.values.iter().map(|v| 2.0 * v * v).collect(),
        Geometry::Radial { .. } => xs
            .iter()
            .zip(&wf.values)
            .map(|(r, v)| TAU * r * v * v)
            .collect(),
    }
}

/// Norm over the whole domain plus the integral of the leading envelope
/// beyond it (`γ > 1` only). The tail amplitude is estimated from the last
/// sample through the invariant `x^{2p}(φ² + φ'²/k²)`.
pub fn tail_corrected_norm(wf: &WaveFunction, spec: &ProblemSpec) -> Result<f64> {
    let h = wf.spacing();
    let bulk = simpson(&density(wf), h);
    if !(spec.gamma > 1.0) {
        return Ok(bulk);
    }
    let n = wf.values.len();
    let x = wf.grid.end();
    let slope = match wf.slopes.last() {
        Some(s) => *s,
        None => (wf.values[n - 1] - wf.values[n - 2]) / h,
    };
    let k2 = x.powf(2.0 * spec.gamma) + 2.0 * spec.energy;
    if !(k2 > 0.0) {
        return Ok(bulk);
    }
    let p = envelope_exponent(spec);
    let phi0_sq = x.powf(2.0 * p) * (wf.values[n - 1].powi(2) + slope * slope / k2);
    let tail = x.powf(1.0 - spec.gamma) / (spec.gamma - 1.0);
    let factor = match wf.geometry {
        Geometry::Line { .. } => 1.0,
        Geometry::Radial { .. } => PI,
    };
    Ok(bulk + factor * phi0_sq * tail)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormClass {
    Convergent,
    LogDivergent,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormCurve {
    pub truncations: Vec<f64>,
    pub norms: Vec<f64>,
    pub classification: NormClass,
    /// Limit `a` of the saturating model `a − c L^{-p}`.
    pub limit: Option<f64>,
    pub saturating_exponent: Option<f64>,
    /// Slope `b` of `a + b ln L`.
    pub log_slope: Option<f64>,
    /// Residual sum of squares of the logarithmic fit over that of the
    /// saturating fit.
    pub f_ratio: f64,
}

/// Threshold on the residual ratio for preferring one model.
pub const F_THRESHOLD: f64 = 4.0;

/// Partial norms at each truncation, averaged over one local period so
/// the oscillating part of the density does not masquerade as a trend.
pub fn partial_norms(wf: &WaveFunction, spec: &ProblemSpec, truncations: &[f64]) -> Result<Vec<f64>> {
    let h = wf.spacing();
    let cumulative = cumulative_trapezoid(&density(wf), h);
    let last = wf.grid.samples - 1;
    truncations
        .iter()
        .map(|&l| {
            if !(l > wf.grid.start && l <= wf.grid.end() * (1.0 + 1e-12)) {
                return Err(Error::InvalidConfig(format!("truncation {l} outside the domain")));
            }
            let half = PI / spec.local_wavenumber(l).max(1.0);
            let lo = wf.grid.index_below((l - half).max(wf.grid.start));
            let hi = (wf.grid.index_below(l + half) + 1).min(last);
            let hi = hi.max(lo);
            let slice = &cumulative[lo..=hi];
            Ok(slice.iter().sum::<f64>() / slice.len() as f64)
        })
        .collect()
}

/// Partial norms `N(L_k)` and their classification as convergent or
/// logarithmically divergent.
pub fn norm_curve(wf: &WaveFunction, spec: &ProblemSpec, truncations: &[f64]) -> Result<NormCurve> {
    if truncations.len() < 4 {
        return Err(Error::InvalidConfig(format!(
            "norm curve needs at least 4 truncations (got {})",
            truncations.len()
        )));
    }
    if truncations.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidConfig("truncations must be strictly ascending".into()));
    }
    let norms = partial_norms(wf, spec, truncations)?;
    let m = truncations.len();
    let ones = vec![1.0; m];
    let logs: Vec<f64> = truncations.iter().map(|l| l.ln()).collect();
    let (log_coeffs, rss_log) = linear_least_squares(&[ones.clone(), logs], &norms)
        .ok_or_else(|| Error::InvalidConfig("degenerate truncations".into()))?;

    let mut best: Option<(f64, f64, f64)> = None;
    for step in 0..=380 {
        let p = 0.2 + 0.01 * f64::from(step);
        let col: Vec<f64> = truncations.iter().map(|l| -l.powf(-p)).collect();
        if let Some((c, rss)) = linear_least_squares(&[ones.clone(), col], &norms) {
            if c[1] >= 0.0 && best.map_or(true, |b| rss < b.2) {
                best = Some((c[0], p, rss));
            }
        }
    }
    let scale = norms.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let floor = (1e-14 * scale).powi(2) * m as f64;
    let rss_sat = best.map_or(f64::INFINITY, |b| b.2);
    let f_ratio = (rss_log + floor) / (rss_sat + floor);
    let slope = log_coeffs[1];
    let classification = if f_ratio > F_THRESHOLD {
        NormClass::Convergent
    } else if f_ratio < 1.0 / F_THRESHOLD && slope > 0.0 {
        NormClass::LogDivergent
    } else {
        NormClass::Undetermined
    };
    Ok(NormCurve {
        truncations: truncations.to_vec(),
        norms,
        classification,
        limit: best.map(|b| b.0),
        saturating_exponent: best.map(|b| b.1),
        log_slope: Some(slope),
        f_ratio,
    })
}
