//! Problem vocabulary shared by every solver: the expulsive potential
//! `-½|x|^{2γ}`, the power-law nonlinearity `g|ψ|^{2σ}ψ`, uniform grids and
//! sampled wave functions.
//!
//! One-dimensional problems live on the half-line `[0, L]`; the negative
//! half is recovered from the parity of the state. Radial problems live on
//! `[0, R]` and carry the vorticity `S` through the centrifugal term.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of grid points per local wavelength at the domain edge.
pub const DEFAULT_POINTS_PER_WAVELENGTH: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::Even => f.write_str("even"),
            Parity::Odd => f.write_str("odd"),
        }
    }
}

/// Spatial setting of a stationary problem. Parity only exists on the line
/// and vorticity only in the radial reduction, so the two are carried by
/// the variant rather than as optional fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "dimension", rename_all = "kebab-case")]
pub enum Geometry {
    #[serde(rename = "1d")]
    Line { parity: Parity },
    #[serde(rename = "2d-radial")]
    Radial { vorticity: u32 },
}

impl Geometry {
    pub fn is_line(&self) -> bool {
        matches!(self, Geometry::Line { .. })
    }

    pub fn parity(&self) -> Option<Parity> {
        match *self {
            Geometry::Line { parity } => Some(parity),
            Geometry::Radial { .. } => None,
        }
    }

    pub fn vorticity(&self) -> Option<u32> {
        match *self {
            Geometry::Line { .. } => None,
            Geometry::Radial { vorticity } => Some(vorticity),
        }
    }
}

/// `g|ψ|^{2σ}ψ` with `g ∈ {-1, 0, +1}` and `σ ∈ {1, 2}` (cubic, quintic).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub g: i8,
    pub sigma: u32,
}

impl Nonlinearity {
    pub const LINEAR: Nonlinearity = Nonlinearity { g: 0, sigma: 1 };

    pub fn is_linear(&self) -> bool {
        self.g == 0
    }

    pub fn validate(&self) -> Result<()> {
        if !(-1..=1).contains(&self.g) {
            return Err(Error::InvalidConfig(format!(
                "nonlinearity sign g = {} not in {{-1, 0, 1}}",
                self.g
            )));
        }
        if !(1..=2).contains(&self.sigma) {
            return Err(Error::InvalidConfig(format!(
                "nonlinearity exponent sigma = {} not in {{1, 2}}",
                self.sigma
            )));
        }
        Ok(())
    }
}

impl Default for Nonlinearity {
    fn default() -> Self {
        Self::LINEAR
    }
}

/// Fully determines a stationary problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(flatten)]
    pub geometry: Geometry,
    pub gamma: f64,
    #[serde(flatten)]
    pub nonlinearity: Nonlinearity,
    pub energy: f64,
}

impl ProblemSpec {
    pub fn line(gamma: f64, energy: f64, parity: Parity) -> Self {
        Self {
            geometry: Geometry::Line { parity },
            gamma,
            nonlinearity: Nonlinearity::LINEAR,
            energy,
        }
    }

    pub fn radial(gamma: f64, energy: f64, vorticity: u32) -> Self {
        Self {
            geometry: Geometry::Radial { vorticity },
            gamma,
            nonlinearity: Nonlinearity::LINEAR,
            energy,
        }
    }

    pub fn with_nonlinearity(mut self, g: i8, sigma: u32) -> Self {
        self.nonlinearity = Nonlinearity { g, sigma };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "potential exponent gamma = {} must be >= 1",
                self.gamma
            )));
        }
        if !self.energy.is_finite() {
            return Err(Error::InvalidConfig("energy must be finite".into()));
        }
        self.nonlinearity.validate()
    }

    pub fn g(&self) -> f64 {
        f64::from(self.nonlinearity.g)
    }

    pub fn sigma(&self) -> u32 {
        self.nonlinearity.sigma
    }

    pub fn potential_value(&self, coordinate: f64) -> f64 {
        potential_value(self.gamma, coordinate)
    }

    pub fn nonlinear_term(&self, amplitude: f64) -> Result<f64> {
        nonlinear_term(self.nonlinearity, amplitude)
    }

    /// Local wavenumber `sqrt(x^{2γ} + 2|E|)`: the larger of the classical
    /// momentum in the tail and the growth/oscillation rate set by `E`.
    pub fn local_wavenumber(&self, coordinate: f64) -> f64 {
        (coordinate.abs().powf(2.0 * self.gamma) + 2.0 * self.energy.abs()).sqrt()
    }

    /// Flat `key = value` representation used by configuration files.
    pub fn to_key_values(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        match self.geometry {
            Geometry::Line { parity } => {
                out.insert("dimension".into(), "1d".into());
                out.insert("parity".into(), parity.to_string());
            }
            Geometry::Radial { vorticity } => {
                out.insert("dimension".into(), "2d-radial".into());
                out.insert("vorticity".into(), vorticity.to_string());
            }
        }
        out.insert("gamma".into(), format_real(self.gamma));
        out.insert("g".into(), self.nonlinearity.g.to_string());
        out.insert("sigma".into(), self.nonlinearity.sigma.to_string());
        out.insert("energy".into(), format_real(self.energy));
        out
    }

    /// Inverse of [`ProblemSpec::to_key_values`]. Missing `g`/`sigma`
    /// default to the linear problem.
    pub fn from_key_values(map: &BTreeMap<String, String>) -> Result<Self> {
        let dimension = map.get("dimension").map(String::as_str).unwrap_or("1d");
        let geometry = match dimension {
            "1d" => {
                if map.contains_key("vorticity") {
                    return Err(Error::InvalidConfig("vorticity given for a 1d problem".into()));
                }
                let parity = match map.get("parity").map(String::as_str) {
                    Some("even") | None => Parity::Even,
                    Some("odd") => Parity::Odd,
                    Some(other) => {
                        return Err(Error::InvalidConfig(format!("unknown parity '{other}'")))
                    }
                };
                Geometry::Line { parity }
            }
            "2d-radial" => {
                if map.contains_key("parity") {
                    return Err(Error::InvalidConfig("parity given for a radial problem".into()));
                }
                let vorticity = parse_key(map, "vorticity")?.unwrap_or(0);
                Geometry::Radial { vorticity }
            }
            other => return Err(Error::InvalidConfig(format!("unknown dimension '{other}'"))),
        };
        let spec = ProblemSpec {
            geometry,
            gamma: parse_key(map, "gamma")?
                .ok_or_else(|| Error::InvalidConfig("missing key 'gamma'".into()))?,
            nonlinearity: Nonlinearity {
                g: parse_key(map, "g")?.unwrap_or(0),
                sigma: parse_key(map, "sigma")?.unwrap_or(1),
            },
            energy: parse_key(map, "energy")?.unwrap_or(0.0),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_key<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    map.get(key)
        .map(|raw| {
            raw.trim()
                .parse::<T>()
                .map_err(|_| Error::InvalidConfig(format!("cannot parse '{key}' = '{raw}'")))
        })
        .transpose()
}

/// Shortest round-trip decimal form.
pub(crate) fn format_real(value: f64) -> String {
    format!("{value:?}")
}

/// `-½ · x^{2γ}`.
pub fn potential_value(gamma: f64, coordinate: f64) -> f64 {
    -0.5 * coordinate.abs().powf(2.0 * gamma)
}

/// `g · a^{2σ+1}`, the stationary nonlinear contribution for amplitude `a`.
pub fn nonlinear_term(nonlinearity: Nonlinearity, amplitude: f64) -> Result<f64> {
    nonlinearity.validate()?;
    Ok(f64::from(nonlinearity.g) * amplitude.powi(2 * nonlinearity.sigma as i32 + 1))
}

/// Uniform grid `start + i·h`, `i = 0..samples`, `h = extent / (samples - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub extent: f64,
    pub samples: usize,
}

impl Grid {
    pub fn new(extent: f64, samples: usize) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidConfig(format!("grid extent {extent} must be positive")));
        }
        if samples < 2 {
            return Err(Error::InvalidConfig("grid needs at least two samples".into()));
        }
        Ok(Self {
            start: 0.0,
            extent,
            samples,
        })
    }

    /// Smallest grid on `[0, extent]` whose spacing resolves the local
    /// wavelength `2π/k_edge` with `points_per_wavelength` samples.
    pub fn resolving(extent: f64, k_edge: f64, points_per_wavelength: u32) -> Result<Self> {
        let bound = spacing_bound(k_edge, points_per_wavelength);
        let cells = (extent / bound).ceil().max(1.0) as usize;
        Self::new(extent, cells + 1)
    }

    /// Grid resolving the tail of `spec` on `[0, extent]`.
    pub fn for_problem(spec: &ProblemSpec, extent: f64, points_per_wavelength: u32) -> Result<Self> {
        Self::resolving(extent, spec.local_wavenumber(extent), points_per_wavelength)
    }

    pub fn spacing(&self) -> f64 {
        self.extent / (self.samples - 1) as f64
    }

    pub fn end(&self) -> f64 {
        self.start + self.extent
    }

    pub fn point(&self, index: usize) -> f64 {
        if index + 1 == self.samples {
            self.end()
        } else {
            self.start + index as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.samples).map(|i| self.point(i)).collect()
    }

    /// Index of the last sample at or below `coordinate`.
    pub fn index_below(&self, coordinate: f64) -> usize {
        let raw = ((coordinate - self.start) / self.spacing()).floor();
        (raw.max(0.0) as usize).min(self.samples - 1)
    }

    /// Checks `h ≤ (2π / k_edge) / P` for the problem's edge wavenumber.
    pub fn check_resolution(&self, spec: &ProblemSpec, points_per_wavelength: u32) -> Result<()> {
        let bound = spacing_bound(spec.local_wavenumber(self.end()), points_per_wavelength);
        let spacing = self.spacing();
        // one ulp of slack for grids built by `resolving`
        if spacing > bound * (1.0 + 1e-12) {
            return Err(Error::Resolution {
                spacing,
                bound,
                points_per_wavelength,
            });
        }
        Ok(())
    }
}

pub fn spacing_bound(k_edge: f64, points_per_wavelength: u32) -> f64 {
    2.0 * PI / k_edge.max(1.0) / f64::from(points_per_wavelength.max(1))
}

/// How the arbitrary amplitude of a stationary state was fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Normalization {
    /// `φ(0) = A` (even states).
    OriginValue(f64),
    /// `φ'(0) = A` (odd states).
    OriginSlope(f64),
    /// Leading Frobenius coefficient of `r^S` (radial states).
    LeadingCoefficient(f64),
    /// Sampled from an analytic expression or external data.
    Sampled,
}

/// A real stationary profile on a half-line or radial grid.
///
/// `values[i]·exp(log_scale)` is the profile in the stated normalization;
/// linear solves that pass through exponentially growing regions rescale
/// the stored samples and record the factor here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveFunction {
    pub grid: Grid,
    pub geometry: Geometry,
    pub normalization: Normalization,
    pub values: Vec<f64>,
    /// `dφ/dx` at the samples; empty when unavailable.
    pub slopes: Vec<f64>,
    pub log_scale: f64,
}

impl WaveFunction {
    pub fn new(
        grid: Grid,
        geometry: Geometry,
        normalization: Normalization,
        values: Vec<f64>,
        slopes: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != grid.samples {
            return Err(Error::InvalidConfig(format!(
                "{} values for a grid of {} samples",
                values.len(),
                grid.samples
            )));
        }
        if !slopes.is_empty() && slopes.len() != grid.samples {
            return Err(Error::InvalidConfig("slope count does not match grid".into()));
        }
        if let Some(i) = values.iter().chain(&slopes).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                x: grid.point(i % grid.samples),
            });
        }
        Ok(Self {
            grid,
            geometry,
            normalization,
            values,
            slopes,
            log_scale: 0.0,
        })
    }

    /// Samples `f` on `grid`.
    pub fn sample(grid: Grid, geometry: Geometry, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().into_iter().map(f).collect();
        Self::new(grid, geometry, Normalization::Sampled, values, Vec::new())
    }

    pub fn coordinates(&self) -> Vec<f64> {
        self.grid.points()
    }

    pub fn spacing(&self) -> f64 {
        self.grid.spacing()
    }

    /// Copy with every sample multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out.slopes.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Linear interpolation of the stored samples.
    pub fn value_at(&self, coordinate: f64) -> f64 {
        let i = self.grid.index_below(coordinate).min(self.grid.samples - 2);
        let x0 = self.grid.point(i);
        let t = (coordinate - x0) / self.spacing();
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Full-line samples on `[-L, L]` built from the half-line by parity.
    pub fn to_full_line(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let parity = self.geometry.parity()?;
        let n = self.grid.samples;
        let xs = self.grid.points();
        let mut x_full = Vec::with_capacity(2 * n - 1);
        let mut v_full = Vec::with_capacity(2 * n - 1);
        for i in (1..n).rev() {
            x_full.push(-xs[i]);
            v_full.push(parity.sign() * self.values[i]);
        }
        x_full.extend_from_slice(&xs);
        v_full.extend_from_slice(&self.values);
        Some((x_full, v_full))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_examples() {
        assert_eq!(potential_value(1.0, 2.0), -2.0);
        assert_eq!(potential_value(2.0, 0.0), 0.0);
        assert_eq!(potential_value(2.0, 1.0), -0.5);
        assert_eq!(potential_value(2.0, -1.5), potential_value(2.0, 1.5));
    }

    #[test]
    fn nonlinear_term_examples() {
        let lin = Nonlinearity { g: 0, sigma: 1 };
        assert_eq!(nonlinear_term(lin, 3.0).unwrap(), 0.0);
        assert_eq!(nonlinear_term(Nonlinearity { g: -1, sigma: 1 }, 2.0).unwrap(), -8.0);
        assert_eq!(nonlinear_term(Nonlinearity { g: 1, sigma: 2 }, 2.0).unwrap(), 32.0);
        assert!(nonlinear_term(Nonlinearity { g: 1, sigma: 3 }, 2.0).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(ProblemSpec::line(0.5, 0.0, Parity::Even).validate().is_err());
        assert!(ProblemSpec::line(1.0, 0.0, Parity::Even).validate().is_ok());
        assert!(ProblemSpec::line(2.0, 0.0, Parity::Odd)
            .with_nonlinearity(2, 1)
            .validate()
            .is_err());
        assert!(ProblemSpec::radial(3.0, 0.0, 2)
            .with_nonlinearity(-1, 4)
            .validate()
            .is_err());
    }

    #[test]
    fn key_value_round_trip() {
        let spec = ProblemSpec::radial(1.25, -3.5, 2).with_nonlinearity(-1, 1);
        let back = ProblemSpec::from_key_values(&spec.to_key_values()).unwrap();
        assert_eq!(spec, back);

        let mut bad = ProblemSpec::line(2.0, 0.0, Parity::Odd).to_key_values();
        bad.insert("vorticity".into(), "1".into());
        assert!(ProblemSpec::from_key_values(&bad).is_err());
    }

    #[test]
    fn resolution_grid_meets_bound() {
        let spec = ProblemSpec::line(2.0, 0.0, Parity::Even);
        let grid = Grid::for_problem(&spec, 30.0, 16).unwrap();
        assert!(grid.check_resolution(&spec, 16).is_ok());
        assert!(grid.spacing() <= 2.0 * PI / 900.0 / 16.0 + 1e-15);
        let coarse = Grid::new(30.0, 1000).unwrap();
        assert!(matches!(
            coarse.check_resolution(&spec, 16),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn full_line_extension_respects_parity() {
        let grid = Grid::new(2.0, 5).unwrap();
        let odd = WaveFunction::sample(grid, Geometry::Line { parity: Parity::Odd }, |x| x).unwrap();
        let (xs, vs) = odd.to_full_line().unwrap();
        assert_eq!(xs.len(), 9);
        for (x, v) in xs.iter().zip(&vs) {
            assert!((x - v).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_finite_samples() {
        let grid = Grid::new(1.0, 3).unwrap();
        let geometry = Geometry::Line { parity: Parity::Even };
        let err = WaveFunction::new(grid, geometry, Normalization::Sampled, vec![0.0, f64::NAN, 1.0], vec![]);
        assert!(matches!(err, Err(Error::NonFinite { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn potential_decreasing(gamma in 1.0f64..4.0, a in 0.0f64..10.0, b in 0.0f64..10.0) {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assert!(potential_value(gamma, hi) <= potential_value(gamma, lo));
            }
        }
    }
}
