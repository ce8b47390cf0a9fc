//! Analytic reference expressions: asymptotic tails, exact vortex states,
//! the von Neumann–Wigner state and the exact solution of the coupled
//! trap/anti-trap system, together with residual checks against the
//! differential equations they solve.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;

use crate::error::{Error, Result};
use crate::model::{Geometry, Grid, ProblemSpec};
use crate::numerics::stencil::{point_derivatives, sampled_derivatives};

/// Parameters of an asymptotic tail model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteParams {
    pub phi0: f64,
    pub chi0: f64,
    /// Reference scale `l` in `E ln(x/l)`; only used for `γ = 1`, `E ≠ 0`.
    pub core_scale: Option<f64>,
    /// Number of expansion terms retained, 1 to 3.
    pub order: u8,
}

impl AsymptoteParams {
    pub fn new(phi0: f64, chi0: f64, order: u8) -> Self {
        Self {
            phi0,
            chi0,
            core_scale: None,
            order,
        }
    }

    pub fn with_core_scale(mut self, l: f64) -> Self {
        self.core_scale = Some(l);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.order) {
            return Err(Error::InvalidConfig(format!(
                "asymptote order {} outside 1..=3",
                self.order
            )));
        }
        if !(self.phi0.is_finite() && self.chi0.is_finite()) {
            return Err(Error::InvalidConfig("asymptote parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Accumulated tail phase `x^{γ+1}/(γ+1)`.
pub fn tail_phase(gamma: f64, coordinate: f64) -> f64 {
    coordinate.powf(gamma + 1.0) / (gamma + 1.0)
}

/// Exponent `p` of the leading envelope `x^{-p}`: `γ/2` on the line and
/// `(γ+1)/2` for radial states.
pub fn envelope_exponent(spec: &ProblemSpec) -> f64 {
    if spec.geometry.is_line() {
        spec.gamma / 2.0
    } else {
        (spec.gamma + 1.0) / 2.0
    }
}

/// Leading-order envelope `φ0·x^{-p}` of the tail.
pub fn tail_envelope(spec: &ProblemSpec, phi0: f64, coordinate: f64) -> f64 {
    phi0 * coordinate.powf(-envelope_exponent(spec))
}

/// Coefficient of the third-order term.
///
/// On the line it is `γ(γ+2)/(8(γ+1))`. For radial states the same WKB
/// expansion gives `((γ+1)² − 4S²)/(8(γ+1))`, which reduces to the line
/// value at `S² = 1/4` as it must.
pub fn third_order_coefficient(spec: &ProblemSpec) -> f64 {
    let g = spec.gamma;
    match spec.geometry {
        Geometry::Line { .. } => g * (g + 2.0) / (8.0 * (g + 1.0)),
        Geometry::Radial { vorticity } => {
            let s = f64::from(vorticity);
            ((g + 1.0).powi(2) - 4.0 * s * s) / (8.0 * (g + 1.0))
        }
    }
}

/// The individual expansion terms (terms beyond `params.order` are zero).
pub fn asymptote_terms(spec: &ProblemSpec, params: &AsymptoteParams, coordinate: f64) -> Result<[f64; 3]> {
    params.validate()?;
    let g = spec.gamma;
    if !(g > 1.0) {
        return Err(Error::InvalidConfig(format!(
            "power-law tail needs γ > 1 (got {g}); use the anti-trap tail for γ = 1"
        )));
    }
    if !(coordinate > 0.0 && coordinate.is_finite()) {
        return Err(Error::InvalidConfig(format!("tail coordinate {coordinate} must be positive")));
    }
    let x = coordinate;
    let p = envelope_exponent(spec);
    let phase = tail_phase(g, x) - params.chi0;
    let (s, c) = phase.sin_cos();
    let mut terms = [params.phi0 * x.powf(-p) * c, 0.0, 0.0];
    if params.order >= 2 {
        terms[1] = params.phi0 * spec.energy / (g - 1.0) * x.powf(-p - g + 1.0) * s;
    }
    if params.order >= 3 {
        terms[2] = params.phi0 * third_order_coefficient(spec) * x.powf(-p - g - 1.0) * s;
    }
    Ok(terms)
}

/// Partial sum of the large-coordinate expansion for `γ > 1`.
pub fn asymptotic_tail(spec: &ProblemSpec, params: &AsymptoteParams, coordinate: f64) -> Result<f64> {
    Ok(asymptote_terms(spec, params, coordinate)?.iter().sum())
}

/// Tail for the inverted oscillator `γ = 1`:
/// `φ0 x^{-p} cos(x²/2 + E ln(x/l) − χ0)` with `p = 1/2` (line) or `1` (radial).
pub fn antiho_tail(spec: &ProblemSpec, params: &AsymptoteParams, coordinate: f64) -> Result<f64> {
    if spec.gamma != 1.0 {
        return Err(Error::InvalidConfig(format!(
            "anti-trap tail requires γ = 1 (got {})",
            spec.gamma
        )));
    }
    if !(coordinate > 0.0 && coordinate.is_finite()) {
        return Err(Error::InvalidConfig(format!("tail coordinate {coordinate} must be positive")));
    }
    let log_term = if spec.energy == 0.0 {
        0.0
    } else {
        let l = params.core_scale.ok_or_else(|| {
            Error::InvalidConfig("core scale l is required for γ = 1 with E ≠ 0".into())
        })?;
        if !(l > 0.0) {
            return Err(Error::InvalidConfig(format!("core scale {l} must be positive")));
        }
        spec.energy * (coordinate / l).ln()
    };
    let phase = 0.5 * coordinate * coordinate + log_term - params.chi0;
    Ok(tail_envelope(spec, params.phi0, coordinate) * phase.cos())
}

/// Evaluates whichever tail model applies to `spec`.
pub fn tail_model(spec: &ProblemSpec, params: &AsymptoteParams, coordinate: f64) -> Result<f64> {
    if spec.gamma == 1.0 {
        antiho_tail(spec, params, coordinate)
    } else {
        asymptotic_tail(spec, params, coordinate)
    }
}

/// `x mod 2π` in `[0, 2π)`.
pub(crate) fn reduce_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Phase increment `((r+d)^n − r^n)/n` expanded binomially, so that it is
/// accurate even when `r^n` itself is huge.
fn power_increment(r: f64, d: f64, n: u32) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    for k in 1..=n {
        binom *= f64::from(n - k + 1) / f64::from(k);
        total += binom * r.powi((n - k) as i32) * d.powi(k as i32);
    }
    total / f64::from(n)
}

/// Exact zero-energy linear vortex `(φ0/r^S) sin(r^{2S}/(2S))` of the
/// radial equation with `γ = 2S − 1`.
pub fn exact_vortex(vorticity: u32, phi0: f64, r: f64) -> f64 {
    exact_vortex_offset(vorticity, phi0, r, 0.0)
}

/// `exact_vortex` at `r + d`, with the phase difference taken exactly.
pub fn exact_vortex_offset(vorticity: u32, phi0: f64, r: f64, d: f64) -> f64 {
    let n = 2 * vorticity;
    let base = reduce_phase(r.powi(n as i32) / f64::from(n));
    let phase = base + power_increment(r, d, n);
    phi0 * (r + d).powi(-(vorticity as i32)) * phase.sin()
}

/// Potential exponent for which `exact_vortex` is exact.
pub fn exact_vortex_gamma(vorticity: u32) -> f64 {
    f64::from(2 * vorticity) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum VortexNorm {
    Finite(f64),
    Divergent,
}

impl VortexNorm {
    pub fn finite(self) -> Option<f64> {
        match self {
            VortexNorm::Finite(v) => Some(v),
            VortexNorm::Divergent => None,
        }
    }
}

/// `2π∫φ² r dr` of the exact vortex, in closed form.
pub fn exact_vortex_norm(vorticity: u32, phi0: f64) -> VortexNorm {
    if vorticity <= 1 {
        return VortexNorm::Divergent;
    }
    let s = f64::from(vorticity);
    let value = phi0 * phi0 * PI * gamma_fn(1.0 / s) / (2.0 * s.powf(1.0 - 1.0 / s) * (s - 1.0))
        * (PI / 2.0 * (1.0 - 1.0 / s)).cos();
    VortexNorm::Finite(value)
}

/// The von Neumann–Wigner pair `(U(r), φ(r)) = (1/r² − 9r⁴/2, sin(r³)/r²)`.
pub fn vnw_state(r: f64) -> (f64, f64) {
    (1.0 / (r * r) - 4.5 * r.powi(4), vnw_offset(r, 0.0))
}

fn vnw_offset(r: f64, d: f64) -> f64 {
    let base = reduce_phase(r.powi(3));
    let phase = base + 3.0 * power_increment(r, d, 3);
    phase.sin() / (r + d).powi(2)
}

/// Residual of `φ'' + (a/r)φ' + c·φ + q·φ³` at one point.
///
/// `scale` is `k²·sqrt(φ² + (φ'/k)²)` with `k² = |c| + a/r² + |q|φ² + 1`,
/// the natural size of each term for an oscillation with local wavenumber
/// `k`; `absolute / scale` is the relative residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub r: f64,
    pub absolute: f64,
    pub scale: f64,
}

impl ResidualSample {
    pub fn relative(&self) -> f64 {
        self.absolute / self.scale
    }
}

/// Evaluates the radial operator residual with Richardson-refined
/// centred differences of `f(d) = φ(r + d)`.
pub fn radial_residual(
    first_order: f64,
    coefficient: f64,
    cubic: f64,
    r: f64,
    f: impl Fn(f64) -> f64,
) -> ResidualSample {
    let phi = f(0.0);
    let k2 = coefficient.abs() + first_order / (r * r) + cubic.abs() * phi * phi + 1.0;
    let h = (3e-3 / k2.sqrt()).min(0.1 * r);
    let (d1, d2) = point_derivatives(&f, h);
    let value = d2 + first_order / r * d1 + coefficient * phi + cubic * phi.powi(3);
    let amp = (phi * phi + d1 * d1 / k2).sqrt();
    ResidualSample {
        r,
        absolute: value.abs(),
        scale: k2 * amp.max(f64::MIN_POSITIVE),
    }
}

/// Residual of the exact vortex in the linear zero-energy radial equation.
pub fn exact_vortex_residual(vorticity: u32, r: f64) -> ResidualSample {
    let s = f64::from(vorticity);
    let gamma = exact_vortex_gamma(vorticity);
    let c = r.powf(2.0 * gamma) - s * s / (r * r);
    radial_residual(1.0, c, 0.0, r, |d| exact_vortex_offset(vorticity, 1.0, r, d))
}

/// Residual of the vNW state in `−½(φ'' + 2φ'/r) + Uφ = 0`, i.e. the
/// zero-energy three-dimensional radial equation.
pub fn vnw_residual(r: f64) -> ResidualSample {
    let (u, _) = vnw_state(r);
    radial_residual(2.0, -2.0 * u, 0.0, r, |d| vnw_offset(r, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum VortexAmplitude {
    /// `φ0²` of the approximate nonlinear vortex.
    Squared(f64),
    NoSolution,
}

/// Amplitude `φ0² = −2(S² − 1)/(3g)` of the approximate nonlinear vortex
/// `φ0 r^{-1} sin(r²/2)` in the `γ = 1`, `E = 0` radial equation.
pub fn nonlinear_vortex_amplitude(vorticity: u32, g: i8) -> Result<VortexAmplitude> {
    if g != 1 && g != -1 {
        return Err(Error::InvalidConfig(format!("nonlinearity sign must be ±1 (got {g})")));
    }
    let s = f64::from(vorticity);
    let squared = -2.0 * (s * s - 1.0) / (3.0 * f64::from(g));
    Ok(if squared > 0.0 {
        VortexAmplitude::Squared(squared)
    } else {
        VortexAmplitude::NoSolution
    })
}

/// The approximate nonlinear vortex at `r + d`. With `third_harmonic`
/// set, the first correction `(gφ0³/16) sin(3Φ)/r⁵` generated by the
/// `sin³` term is added.
pub fn approximate_nonlinear_vortex(vorticity: u32, g: i8, r: f64, d: f64, third_harmonic: bool) -> Result<f64> {
    let VortexAmplitude::Squared(sq) = nonlinear_vortex_amplitude(vorticity, g)? else {
        return Err(Error::Constraint(format!(
            "no nonlinear vortex amplitude for S = {vorticity}, g = {g}"
        )));
    };
    let phi0 = sq.sqrt();
    let x = r + d;
    let phase = reduce_phase(0.5 * r * r) + r * d + 0.5 * d * d;
    let mut value = phi0 * phase.sin() / x;
    if third_harmonic {
        value += f64::from(g) * phi0.powi(3) / 16.0 * (3.0 * phase).sin() / x.powi(5);
    }
    Ok(value)
}

/// Residual of the approximate nonlinear vortex in the full nonlinear
/// radial equation (`γ = 1`, `E = 0`).
pub fn approximate_vortex_residual(vorticity: u32, g: i8, r: f64, third_harmonic: bool) -> Result<ResidualSample> {
    approximate_nonlinear_vortex(vorticity, g, r, 0.0, third_harmonic)?;
    let s = f64::from(vorticity);
    let c = r * r - s * s / (r * r);
    Ok(radial_residual(1.0, c, -2.0 * f64::from(g), r, |d| {
        approximate_nonlinear_vortex(vorticity, g, r, d, third_harmonic).unwrap_or(f64::NAN)
    }))
}

/// Parameters of the linearly coupled trap (`u`) / anti-trap (`v`) system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledSystemSpec {
    pub lambda: f64,
    pub kappa: f64,
    pub omega: f64,
    pub vorticity: u32,
    pub energy: f64,
    pub amplitude: f64,
    /// True iff `ω = ½(5 + S − λ²)`.
    pub constraint_satisfied: bool,
}

impl CoupledSystemSpec {
    pub fn new(lambda: f64, kappa: f64, omega: f64, vorticity: u32, energy: f64, amplitude: f64) -> Result<Self> {
        if !(kappa >= 0.0) {
            return Err(Error::InvalidConfig(format!("κ = {kappa} must be non-negative")));
        }
        for v in [lambda, omega, energy, amplitude] {
            if !v.is_finite() {
                return Err(Error::InvalidConfig("coupled-system parameters must be finite".into()));
            }
        }
        let target = Self::constrained_omega(lambda, vorticity);
        Ok(Self {
            lambda,
            kappa,
            omega,
            vorticity,
            energy,
            amplitude,
            constraint_satisfied: (omega - target).abs() <= 1e-12 * target.abs().max(1.0),
        })
    }

    /// The system on the constraint surface, with `E` set to `E_exact`.
    pub fn constrained(lambda: f64, kappa: f64, vorticity: u32, amplitude: f64) -> Result<Self> {
        let omega = Self::constrained_omega(lambda, vorticity);
        Self::new(lambda, kappa, omega, vorticity, exact_energy(lambda, vorticity), amplitude)
    }

    pub fn constrained_omega(lambda: f64, vorticity: u32) -> f64 {
        0.5 * (5.0 + f64::from(vorticity) - lambda * lambda)
    }
}

/// `E_exact = ½(λ² + 1 + S)`.
pub fn exact_energy(lambda: f64, vorticity: u32) -> f64 {
    0.5 * (lambda * lambda + 1.0 + f64::from(vorticity))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledFields {
    pub grid: Grid,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub energy_exact: f64,
}

/// Samples the exact coupled solution on `grid`.
pub fn coupled_exact_fields(spec: &CoupledSystemSpec, grid: &Grid) -> Result<CoupledFields> {
    if !spec.constraint_satisfied {
        return Err(Error::Constraint(format!(
            "ω = {} but the exact solution needs ω = ½(5 + S − λ²) = {}",
            spec.omega,
            CoupledSystemSpec::constrained_omega(spec.lambda, spec.vorticity)
        )));
    }
    let s = spec.vorticity as i32;
    let l2 = spec.lambda * spec.lambda;
    let mut u = Vec::with_capacity(grid.samples);
    let mut v = Vec::with_capacity(grid.samples);
    for r in grid.points() {
        let base = spec.amplitude * r.powi(s) * (-0.5 * r * r).exp();
        u.push((l2 - 1.0 - f64::from(spec.vorticity) + r * r) * base);
        v.push(-2.0 * spec.lambda * base);
    }
    Ok(CoupledFields {
        grid: *grid,
        u,
        v,
        energy_exact: exact_energy(spec.lambda, spec.vorticity),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledResidual {
    pub r: Vec<f64>,
    pub res_u: Vec<f64>,
    pub res_v: Vec<f64>,
    /// Largest estimated error of the discrete Laplacian term.
    pub discretization_error: f64,
}

impl CoupledResidual {
    pub fn max_u(&self) -> f64 {
        self.res_u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_v(&self) -> f64 {
        self.res_v.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Stationary left-hand sides of both coupled equations, with `i∂_t → E`
/// and the standard polar Laplacian `∂² + ∂/r − S²/r²`, evaluated at the
/// interior grid points (four samples are lost at each end).
pub fn coupled_residual(spec: &CoupledSystemSpec, fields: &CoupledFields, tolerance: f64) -> Result<CoupledResidual> {
    let n = fields.grid.samples;
    if fields.u.len() != n || fields.v.len() != n {
        return Err(Error::InvalidConfig("field lengths do not match grid".into()));
    }
    if n < 9 {
        return Err(Error::InvalidConfig("coupled residual needs at least 9 samples".into()));
    }
    let h = fields.grid.spacing();
    let du = sampled_derivatives(&fields.u, h);
    let dv = sampled_derivatives(&fields.v, h);
    let s2 = f64::from(spec.vorticity).powi(2);
    let e = spec.energy;
    let mut out = CoupledResidual {
        r: Vec::new(),
        res_u: Vec::new(),
        res_v: Vec::new(),
        discretization_error: 0.0,
    };
    for k in 0..du.second.len() {
        let i = k + du.offset;
        let r = fields.grid.point(i);
        if r <= 0.0 {
            continue;
        }
        let (u, v) = (fields.u[i], fields.v[i]);
        let lap_u = du.second[k] + du.first[k] / r - s2 * u / (r * r);
        let lap_v = dv.second[k] + dv.first[k] / r - s2 * v / (r * r);
        out.r.push(r);
        out.res_u
            .push(e * u + 0.5 * lap_u + spec.lambda * v - 0.5 * r * r * u + spec.omega * u);
        out.res_v
            .push(e * v + 0.5 * lap_v + spec.lambda * u + 0.5 * spec.kappa * r * r * v);
        let err = 0.5 * du.second_error[k].max(dv.second_error[k]);
        out.discretization_error = out.discretization_error.max(err);
    }
    if out.discretization_error > tolerance {
        return Err(Error::GridTooCoarse {
            estimate: out.discretization_error,
            tolerance,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSweep {
    /// `(κ, max|res_v|)` pairs.
    pub samples: Vec<(f64, f64)>,
    /// Least-squares slope of `max|res_v|` against `κ`.
    pub slope: f64,
    /// The swept κ at which the residual falls below the tolerance, if any.
    pub vanishing_kappa: Option<f64>,
}

/// Sweeps κ on the constraint surface and records the `v`-equation residual
/// of the exact fields.
pub fn kappa_sweep(lambda: f64, vorticity: u32, amplitude: f64, grid: &Grid, kappas: &[f64], tolerance: f64) -> Result<KappaSweep> {
    let mut samples = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        let spec = CoupledSystemSpec::constrained(lambda, kappa, vorticity, amplitude)?;
        let fields = coupled_exact_fields(&spec, grid)?;
        let res = coupled_residual(&spec, &fields, tolerance)?;
        samples.push((kappa, res.max_v()));
    }
    let vanishing_kappa = samples
        .iter()
        .filter(|(_, r)| *r <= tolerance)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| *k);
    let n = samples.len() as f64;
    let (mk, mr) = samples
        .iter()
        .fold((0.0, 0.0), |(a, b), (k, r)| (a + k / n, b + r / n));
    let (num, den) = samples.iter().fold((0.0, 0.0), |(num, den), (k, r)| {
        (num + (k - mk) * (r - mr), den + (k - mk).powi(2))
    });
    Ok(KappaSweep {
        samples,
        slope: if den > 0.0 { num / den } else { 0.0 },
        vanishing_kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Parity;
    use proptest::prelude::*;

    fn line(gamma: f64, energy: f64) -> ProblemSpec {
        ProblemSpec::line(gamma, energy, Parity::Even)
    }

    #[test]
    fn tail_at_half_period() {
        let x = (3.0 * PI).cbrt();
        let v = asymptotic_tail(&line(2.0, 0.0), &AsymptoteParams::new(1.0, 0.0, 2), x).unwrap();
        assert!((v + (3.0 * PI).powf(-1.0 / 3.0)).abs() < 1e-12);
        assert!((v + 0.4736).abs() < 5e-4);
    }

    #[test]
    fn first_order_ignores_energy() {
        let p = AsymptoteParams::new(0.8, 0.3, 1);
        let a = asymptotic_tail(&line(2.0, 0.0), &p, 4.2).unwrap();
        let b = asymptotic_tail(&line(2.0, 17.0), &p, 4.2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn radial_third_order_vanishes_at_balance() {
        let spec = ProblemSpec::radial(3.0, 0.5, 2);
        assert_eq!(third_order_coefficient(&spec), 0.0);
        let p2 = AsymptoteParams::new(1.0, 0.2, 2);
        let p3 = AsymptoteParams::new(1.0, 0.2, 3);
        assert_eq!(
            asymptotic_tail(&spec, &p2, 2.5).unwrap(),
            asymptotic_tail(&spec, &p3, 2.5).unwrap()
        );
    }

    #[test]
    fn line_and_radial_third_order_agree_at_quarter() {
        // the radial coefficient at S² = 1/4 is the line coefficient
        let g = 2.5f64;
        let radial = ((g + 1.0).powi(2) - 1.0) / (8.0 * (g + 1.0));
        assert!((third_order_coefficient(&line(g, 0.0)) - radial).abs() < 1e-15);
    }

    #[test]
    fn power_tail_rejects_inverted_oscillator() {
        let p = AsymptoteParams::new(1.0, 0.0, 1);
        assert!(asymptotic_tail(&line(1.0, 0.0), &p, 2.0).is_err());
        assert!(asymptotic_tail(&line(0.5, 0.0), &p, 2.0).is_err());
        assert!(asymptotic_tail(&line(2.0, 0.0), &AsymptoteParams::new(1.0, 0.0, 4), 2.0).is_err());
    }

    #[test]
    fn antiho_examples() {
        let p = AsymptoteParams::new(1.3, 0.0, 1);
        let x = (4.0 * PI).sqrt();
        let v = antiho_tail(&line(1.0, 0.0), &p, x).unwrap();
        assert!((v - 1.3 * x.powf(-0.5)).abs() < 1e-12);

        let radial = ProblemSpec::radial(1.0, 0.0, 0);
        let v = antiho_tail(&radial, &AsymptoteParams::new(1.0, 0.0, 1), 1.0).unwrap();
        assert!((v - 0.5f64.cos()).abs() < 1e-15);
        assert!((v - 0.8776).abs() < 1e-4);

        assert!(antiho_tail(&line(2.0, 0.0), &p, 1.0).is_err());
        assert!(antiho_tail(&line(1.0, 1.0), &p, 1.0).is_err());
    }

    #[test]
    fn doubling_core_scale_shifts_phase() {
        let e = 0.7;
        let spec = line(1.0, e);
        let x = 2.3;
        let a = antiho_tail(&spec, &AsymptoteParams::new(1.0, 0.0, 1).with_core_scale(1.0), x).unwrap();
        let b = antiho_tail(&spec, &AsymptoteParams::new(1.0, 0.0, 1).with_core_scale(2.0), x).unwrap();
        let phase = 0.5 * x * x + e * x.ln();
        assert!((a - x.powf(-0.5) * phase.cos()).abs() < 1e-14);
        assert!((b - x.powf(-0.5) * (phase - e * 2f64.ln()).cos()).abs() < 1e-14);
    }

    #[test]
    fn vortex_limits_and_zeros() {
        let r = 1e-3;
        assert!((exact_vortex(1, 2.0, r) / (2.0 * r / 2.0) - 1.0).abs() < 1e-6);
        for k in 1..5 {
            let z = (2.0 * PI * k as f64).sqrt();
            assert!(exact_vortex(1, 1.0, z).abs() < 1e-12);
        }
    }

    #[test]
    fn offset_evaluation_matches_direct() {
        for s in 1..=3 {
            let r = 1.7;
            let d = 0.013;
            let direct = exact_vortex(s, 1.0, r + d);
            assert!((exact_vortex_offset(s, 1.0, r, d) - direct).abs() < 1e-12);
        }
        assert!((vnw_offset(1.3, -0.02) - vnw_state(1.28).1).abs() < 1e-12);
    }

    #[test]
    fn exact_vortex_residuals_small() {
        for s in 1..=3 {
            for i in 0..=99 {
                let r = 0.1 + 9.9 * i as f64 / 99.0;
                let res = exact_vortex_residual(s, r);
                assert!(res.relative() < 1e-8, "S={s} r={r} rel={}", res.relative());
            }
        }
    }

    #[test]
    fn wrong_operator_gives_large_residual() {
        // the S=2 vortex is not a solution for γ = 2
        let r: f64 = 1.5;
        let c = r.powi(4) - 4.0 / (r * r);
        let res = radial_residual(1.0, c, 0.0, r, |d| exact_vortex_offset(2, 1.0, r, d));
        assert!(res.relative() > 1e-3);
    }

    #[test]
    fn vnw_examples() {
        assert_eq!(vnw_state(1.0).0, -3.5);
        for k in 1..4 {
            let z = (k as f64 * PI).cbrt();
            assert!(vnw_state(z).1.abs() < 1e-12);
        }
        for i in 0..=50 {
            let r = 0.2 + 2.8 * i as f64 / 50.0;
            assert!(vnw_residual(r).relative() < 1e-8);
        }
    }

    #[test]
    fn vortex_norm_values() {
        assert_eq!(exact_vortex_norm(1, 1.0), VortexNorm::Divergent);
        let n2 = exact_vortex_norm(2, 1.0).finite().unwrap();
        assert!((n2 - 1.39208).abs() < 1e-4, "{n2}");
        let n2x = exact_vortex_norm(2, 2.0).finite().unwrap();
        assert!((n2x / n2 - 4.0).abs() < 1e-14);
    }

    #[test]
    fn nonlinear_vortex_amplitudes() {
        assert_eq!(nonlinear_vortex_amplitude(1, 1).unwrap(), VortexAmplitude::NoSolution);
        assert_eq!(nonlinear_vortex_amplitude(1, -1).unwrap(), VortexAmplitude::NoSolution);
        match nonlinear_vortex_amplitude(2, -1).unwrap() {
            VortexAmplitude::Squared(v) => assert!((v - 2.0).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        match nonlinear_vortex_amplitude(0, 1).unwrap() {
            VortexAmplitude::Squared(v) => assert!((v - 2.0 / 3.0).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert_eq!(nonlinear_vortex_amplitude(2, 1).unwrap(), VortexAmplitude::NoSolution);
        assert!(nonlinear_vortex_amplitude(0, 0).is_err());
    }

    #[test]
    fn third_harmonic_reduces_residual() {
        let mean = |harmonic: bool| {
            let rs: Vec<f64> = (0..200).map(|i| 4.0 + 4.0 * i as f64 / 200.0).collect();
            rs.iter()
                .map(|&r| approximate_vortex_residual(0, 1, r, harmonic).unwrap().absolute)
                .fold(0.0, f64::max)
        };
        let bare = mean(false);
        let corrected = mean(true);
        assert!(corrected < 0.3 * bare, "{corrected} vs {bare}");
    }

    fn fine_grid(start: f64, end: f64, h: f64) -> Grid {
        let samples = ((end - start) / h).round() as usize + 1;
        Grid {
            start,
            extent: end - start,
            samples,
        }
    }

    #[test]
    fn coupled_examples() {
        let spec = CoupledSystemSpec::constrained(1.0, 0.5, 0, 1.0).unwrap();
        assert!(spec.constraint_satisfied);
        let grid = fine_grid(0.0, 4.0, 0.01);
        let f = coupled_exact_fields(&spec, &grid).unwrap();
        assert_eq!(f.energy_exact, 1.0);
        for (i, r) in grid.points().into_iter().enumerate() {
            let g = (-0.5 * r * r).exp();
            assert!((f.u[i] - r * r * g).abs() < 1e-14);
            assert!((f.v[i] + 2.0 * g).abs() < 1e-14);
        }
        assert_eq!(exact_energy(2.0, 1), 3.0);

        let doubled = CoupledSystemSpec::constrained(1.0, 0.5, 0, 3.0).unwrap();
        let f3 = coupled_exact_fields(&doubled, &grid).unwrap();
        assert!(f3.u.iter().zip(&f.u).all(|(a, b)| (a - 3.0 * b).abs() < 1e-13));

        let off = CoupledSystemSpec::new(1.0, 0.5, 0.0, 0, 1.0, 1.0).unwrap();
        assert!(!off.constraint_satisfied);
        assert!(matches!(coupled_exact_fields(&off, &grid), Err(Error::Constraint(_))));
    }

    #[test]
    fn zero_fields_zero_residual() {
        let spec = CoupledSystemSpec::constrained(1.0, 1.0, 1, 1.0).unwrap();
        let grid = fine_grid(0.1, 3.0, 0.01);
        let fields = CoupledFields {
            grid,
            u: vec![0.0; grid.samples],
            v: vec![0.0; grid.samples],
            energy_exact: 0.0,
        };
        let res = coupled_residual(&spec, &fields, 1e-8).unwrap();
        assert_eq!(res.max_u(), 0.0);
        assert_eq!(res.max_v(), 0.0);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let spec = CoupledSystemSpec::constrained(1.0, 0.0, 0, 1.0).unwrap();
        let grid = fine_grid(0.1, 6.0, 0.2);
        let fields = coupled_exact_fields(&spec, &grid).unwrap();
        assert!(matches!(
            coupled_residual(&spec, &fields, 1e-8),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn v_residual_is_linear_in_kappa() {
        let h = 0.002;
        let grid = fine_grid(0.1 - 4.0 * h, 6.0 + 4.0 * h, h);
        let sweep = kappa_sweep(1.0, 0, 1.0, &grid, &[0.0, 0.5, 1.0, 2.0], 1e-8).unwrap();
        assert_eq!(sweep.vanishing_kappa, Some(0.0));
        // res_v = −κλU0 r^{S+2} e^{−r²/2}, maximal at r² = S + 2
        let expected = 2.0 * (-1.0f64).exp();
        assert!((sweep.slope - expected).abs() < 1e-6, "{}", sweep.slope);
    }

    proptest! {
        #[test]
        fn orders_differ_by_one_term(phi0 in 0.1f64..2.0, chi0 in 0.0f64..6.0, x in 1.0f64..20.0, e in -3.0f64..3.0) {
            let spec = line(2.0, e);
            let t = asymptote_terms(&spec, &AsymptoteParams::new(phi0, chi0, 3), x).unwrap();
            for order in 1..3u8 {
                let lo = asymptotic_tail(&spec, &AsymptoteParams::new(phi0, chi0, order), x).unwrap();
                let hi = asymptotic_tail(&spec, &AsymptoteParams::new(phi0, chi0, order + 1), x).unwrap();
                prop_assert!((hi - lo - t[order as usize]).abs() <= 1e-12 * (1.0 + lo.abs()));
            }
        }

        #[test]
        fn terms_are_ordered_far_out(x in 5.0f64..40.0) {
            // compare envelopes: the oscillating factors are bounded by one
            let spec = line(2.0, 1.0);
            let p = AsymptoteParams::new(1.0, 0.0, 3);
            let envelopes = [
                x.powf(-1.0),
                spec.energy / 1.0 * x.powf(-2.0),
                third_order_coefficient(&spec) * x.powf(-4.0),
            ];
            prop_assert!(envelopes[0] > envelopes[1] && envelopes[1] > envelopes[2]);
            let t = asymptote_terms(&spec, &p, x).unwrap();
            prop_assert!(t[1].abs() <= envelopes[1] + 1e-15 && t[2].abs() <= envelopes[2] + 1e-15);
        }

        #[test]
        fn vortex_norm_scales_quadratically(s in 2u32..6, phi0 in 0.1f64..5.0) {
            let one = exact_vortex_norm(s, 1.0).finite().unwrap();
            let scaled = exact_vortex_norm(s, phi0).finite().unwrap();
            prop_assert!((scaled - phi0 * phi0 * one).abs() <= 1e-12 * scaled);
        }
    }
}
