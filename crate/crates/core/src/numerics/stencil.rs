//! Centred finite differences with Richardson refinement.

/// First and second derivatives at a point from an evaluator `f(d)` that
/// returns the function at offset `d` from that point.
///
/// The evaluator takes the offset rather than the absolute coordinate so
/// that functions with large phases can difference the phase increment
/// exactly instead of subtracting two large numbers.
pub fn point_derivatives(f: impl Fn(f64) -> f64, h: f64) -> (f64, f64) {
    let f0 = f(0.0);
    let (fp, fm) = (f(h), f(-h));
    let (fp2, fm2) = (f(0.5 * h), f(-0.5 * h));
    let d1_h = (fp - fm) / (2.0 * h);
    let d1_h2 = (fp2 - fm2) / h;
    let d2_h = (fp - 2.0 * f0 + fm) / (h * h);
    let d2_h2 = (fp2 - 2.0 * f0 + fm2) / (0.25 * h * h);
    ((4.0 * d1_h2 - d1_h) / 3.0, (4.0 * d2_h2 - d2_h) / 3.0)
}

/// Richardson-refined derivatives of uniformly sampled data.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDerivatives {
    /// Index of the first sample the derivatives refer to.
    pub offset: usize,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    /// Error estimate of the refined second derivative, from comparing it
    /// with the refinement built on the `2h`/`4h` stencils.
    pub second_error: Vec<f64>,
}

/// Derivatives at samples `4..n-4` combining the `h` and `2h` stencils.
pub fn sampled_derivatives(values: &[f64], h: f64) -> SampledDerivatives {
    let n = values.len();
    let d1 = |i: usize, s: usize| (values[i + s] - values[i - s]) / (2.0 * s as f64 * h);
    let d2 = |i: usize, s: usize| {
        let w = s as f64 * h;
        (values[i + s] - 2.0 * values[i] + values[i - s]) / (w * w)
    };
    let mut first = Vec::new();
    let mut second = Vec::new();
    let mut second_error = Vec::new();
    for i in 4..n.saturating_sub(4) {
        first.push((4.0 * d1(i, 1) - d1(i, 2)) / 3.0);
        let fine = (4.0 * d2(i, 1) - d2(i, 2)) / 3.0;
        let coarse = (4.0 * d2(i, 2) - d2(i, 4)) / 3.0;
        second.push(fine);
        second_error.push((fine - coarse).abs() / 15.0);
    }
    SampledDerivatives {
        offset: 4,
        first,
        second,
        second_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_derivatives_of_sine() {
        let x = 0.7f64;
        let (d1, d2) = point_derivatives(|d| (x + d).sin(), 1e-2);
        assert!((d1 - x.cos()).abs() < 1e-10);
        assert!((d2 + x.sin()).abs() < 1e-8);
    }

    #[test]
    fn sampled_derivatives_are_fourth_order() {
        let x = 0.4;
        let err = |h: f64| {
            let vals: Vec<f64> = (0..200).map(|i| (i as f64 * h).exp()).collect();
            let d = sampled_derivatives(&vals, h);
            let i = (x / h).round() as usize;
            let e = (d.second[i - d.offset] - x.exp()).abs();
            (e, d.second_error[i - d.offset])
        };
        let (coarse, est) = err(0.04);
        let (fine, _) = err(0.02);
        let ratio = coarse / fine;
        assert!((10.0..24.0).contains(&ratio), "ratio {ratio}");
        assert!(est > 0.2 * coarse && est < 5.0 * coarse, "estimate {est} vs {coarse}");
    }
}
