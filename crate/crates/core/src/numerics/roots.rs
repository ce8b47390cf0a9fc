//! Sign-change location on sampled data.

/// Roots of the sampled function `ys` on the uniform grid `x0 + i·h`.
///
/// Samples whose magnitude is at or below `floor` are treated as
/// indeterminate and skipped when looking for sign changes. Each bracket
/// is refined by bisection on the cubic through the four surrounding
/// samples (falling back to linear interpolation at the grid ends).
pub fn sign_change_roots(x0: f64, h: f64, ys: &[f64], floor: f64) -> Vec<f64> {
    let mut roots = Vec::new();
    let mut prev: Option<usize> = None;
    for (i, &y) in ys.iter().enumerate() {
        if !(y.abs() > floor) {
            continue;
        }
        if let Some(p) = prev {
            if ys[p].signum() != y.signum() {
                roots.push(refine(x0, h, ys, p, i));
            }
        }
        prev = Some(i);
    }
    roots
}

fn refine(x0: f64, h: f64, ys: &[f64], lo: usize, hi: usize) -> f64 {
    if hi != lo + 1 {
        // bracket spans skipped samples: linear between the significant ones
        let (ya, yb) = (ys[lo], ys[hi]);
        let t = ya / (ya - yb);
        return x0 + h * (lo as f64 + t * (hi - lo) as f64);
    }
    let interp: Box<dyn Fn(f64) -> f64> = if lo >= 1 && hi + 1 < ys.len() {
        let (p0, p1, p2, p3) = (ys[lo - 1], ys[lo], ys[hi], ys[hi + 1]);
        // Lagrange cubic through t = -1, 0, 1, 2
        Box::new(move |t: f64| {
            -p0 * t * (t - 1.0) * (t - 2.0) / 6.0 + p1 * (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
                - p2 * (t + 1.0) * t * (t - 2.0) / 2.0
                + p3 * (t + 1.0) * t * (t - 1.0) / 6.0
        })
    } else {
        let (a, b) = (ys[lo], ys[hi]);
        Box::new(move |t: f64| a + (b - a) * t)
    };
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let fa = interp(a);
    for _ in 0..50 {
        let m = 0.5 * (a + b);
        let fm = interp(m);
        if fm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if fm.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    x0 + h * (lo as f64 + 0.5 * (a + b))
}

/// Bisection on a continuous function with a sign change on `[a, b]`.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a).abs() < tol {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sine_zeros_to_high_accuracy() {
        let h = 0.05;
        let ys: Vec<f64> = (0..400).map(|i| (i as f64 * h).sin()).collect();
        let roots = sign_change_roots(0.0, h, &ys, 0.0);
        // the sample at x = 0 is exactly zero and skipped
        assert_eq!(roots.len(), 6);
        for (k, r) in roots.iter().enumerate() {
            let exact = (k + 1) as f64 * std::f64::consts::PI;
            assert!((r - exact).abs() < 1e-5, "{r} vs {exact}");
        }
    }

    #[test]
    fn floor_suppresses_noise() {
        let ys = [1e-20, -1e-20, 1e-20, 1.0, 0.5, -0.5];
        let roots = sign_change_roots(0.0, 1.0, &ys, 1e-12);
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - 4.5).abs() < 0.2);
    }

    #[test]
    fn bisect_cubic() {
        let r = bisect(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-10, 10).is_none());
    }
}
