//! Dormand–Prince 5(4) integration of a two-component first-order system,
//! reporting the state at a prescribed ascending sequence of nodes.
//!
//! Between consecutive nodes the integrator takes as many substeps as the
//! error control (or the fixed substep count) requires; the step is also
//! capped by a caller-supplied ceiling so that rapidly accelerating phases
//! are never stepped over.

use crate::error::{Error, Result};

pub type State = [f64; 2];

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

// 5th-order weights (also row 7 of the tableau, FSAL)
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// b - b*, the embedded 4th-order difference
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepControl {
    /// Error-controlled steps. `atol` is relative to the running peak of
    /// the state, so the control is invariant under rescaling.
    Adaptive { rtol: f64, atol: f64 },
    /// Exactly `substeps` equal steps per node interval, no error control.
    Fixed { substeps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub control: StepControl,
    /// Abort with [`Error::Overflow`] once `|y[0]|` exceeds this.
    pub overflow_cap: f64,
    /// Instead of failing on large values, rescale the stored history and
    /// keep going. Only meaningful for linear equations.
    pub renormalize: bool,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            control: StepControl::Adaptive {
                rtol: 1e-11,
                atol: 1e-13,
            },
            overflow_cap: 1e12,
            renormalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSolution {
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
    /// Natural log of the factor removed by renormalisation.
    pub log_scale: f64,
    pub steps: usize,
}

const RENORM_THRESHOLD: f64 = 1e100;

/// Integrates `y' = rhs(x, y)` from `nodes[0]` (where `y = y0`) through
/// every node, returning the state at each one.
pub fn integrate_nodes<F, C>(
    rhs: F,
    nodes: &[f64],
    y0: State,
    ceiling: C,
    options: &OdeOptions,
) -> Result<NodeSolution>
where
    F: Fn(f64, State) -> State,
    C: Fn(f64) -> f64,
{
    let n = nodes.len();
    let mut values = Vec::with_capacity(n);
    let mut slopes = Vec::with_capacity(n);
    let mut log_scale = 0.0;
    let mut steps = 0usize;
    if n == 0 {
        return Ok(NodeSolution {
            values,
            slopes,
            log_scale,
            steps,
        });
    }

    let mut x = nodes[0];
    let mut y = y0;
    values.push(y[0]);
    slopes.push(y[1]);
    let mut k1 = rhs(x, y);
    let mut peak = [y[0].abs(), y[1].abs()];
    let mut h_try = match nodes.get(1) {
        Some(next) => (next - x).min(ceiling(x)),
        None => 0.0,
    };

    for &target in &nodes[1..] {
        match options.control {
            StepControl::Fixed { substeps } => {
                let substeps = substeps.max(1);
                let h = (target - x) / substeps as f64;
                for s in 0..substeps {
                    let (y_new, k_last, _) = dopri_step(&rhs, x, y, k1, h);
                    x = if s + 1 == substeps { target } else { x + h };
                    y = y_new;
                    k1 = k_last;
                    steps += 1;
                }
            }
            StepControl::Adaptive { rtol, atol } => {
                while x < target {
                    let remaining = target - x;
                    let mut h = h_try.min(ceiling(x)).min(remaining);
                    let last = h >= remaining * (1.0 - 1e-12);
                    if last {
                        h = remaining;
                    }
                    if h <= 1e-14 * x.abs().max(1.0) {
                        return Err(Error::StepUnderflow { x });
                    }
                    let (y_new, k_last, err) = dopri_step(&rhs, x, y, k1, h);
                    let mut norm = 0.0;
                    let floor = peak[0]
                        .max(peak[1])
                        .max(y_new[0].abs())
                        .max(y_new[1].abs())
                        .max(f64::MIN_POSITIVE);
                    for i in 0..2 {
                        let scale = atol * floor + rtol * y[i].abs().max(y_new[i].abs());
                        let e = err[i] / scale;
                        norm += e * e;
                    }
                    let norm = (norm / 2.0).sqrt();
                    if !norm.is_finite() {
                        h_try = h * 0.1;
                        if !y_new.iter().all(|v| v.is_finite()) && h < 1e-10 {
                            return Err(Error::NonFinite { x });
                        }
                        continue;
                    }
                    let factor = if norm == 0.0 {
                        5.0
                    } else {
                        (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    if norm <= 1.0 {
                        x = if last { target } else { x + h };
                        y = y_new;
                        k1 = k_last;
                        steps += 1;
                        peak[0] = peak[0].max(y[0].abs());
                        peak[1] = peak[1].max(y[1].abs());
                        // keep the unclipped proposal so landing on a node
                        // does not shrink the next interval's first step
                        h_try = if last { h_try.max(h * factor) } else { h * factor };
                    } else {
                        h_try = h * factor.min(1.0);
                    }
                }
            }
        }

        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(Error::NonFinite { x });
        }
        let magnitude = y[0].abs().max(y[1].abs());
        if options.renormalize {
            if magnitude > RENORM_THRESHOLD {
                let factor = 1.0 / RENORM_THRESHOLD;
                values.iter_mut().for_each(|v| *v *= factor);
                slopes.iter_mut().for_each(|v| *v *= factor);
                y = [y[0] * factor, y[1] * factor];
                k1 = [k1[0] * factor, k1[1] * factor];
                peak = [peak[0] * factor, peak[1] * factor];
                log_scale += RENORM_THRESHOLD.ln();
            }
        } else if y[0].abs() > options.overflow_cap {
            return Err(Error::Overflow { x });
        }
        values.push(y[0]);
        slopes.push(y[1]);
    }

    Ok(NodeSolution {
        values,
        slopes,
        log_scale,
        steps,
    })
}

/// One Dormand–Prince step. Returns the 5th-order state, the derivative at
/// the new point (first stage of the next step) and the error estimate.
fn dopri_step<F>(rhs: &F, x: f64, y: State, k1: State, h: f64) -> (State, State, State)
where
    F: Fn(f64, State) -> State,
{
    let comb = |coeffs: &[(f64, &State)]| -> State {
        let mut out = y;
        for (c, k) in coeffs {
            out[0] += h * c * k[0];
            out[1] += h * c * k[1];
        }
        out
    };
    let k2 = rhs(x + C2 * h, comb(&[(A21, &k1)]));
    let k3 = rhs(x + C3 * h, comb(&[(A31, &k1), (A32, &k2)]));
    let k4 = rhs(x + C4 * h, comb(&[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = rhs(
        x + C5 * h,
        comb(&[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = rhs(
        x + h,
        comb(&[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y_new = comb(&[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = rhs(x + h, y_new);
    let mut err = [0.0; 2];
    for i in 0..2 {
        err[i] = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y_new, k7, err)
}
