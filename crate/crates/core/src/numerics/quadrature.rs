//! Composite quadrature on uniformly sampled data.

/// Running trapezoid integral: `out[i] = ∫_{x_0}^{x_i} f`.
pub fn cumulative_trapezoid(values: &[f64], spacing: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for pair in values.windows(2) {
        acc += 0.5 * spacing * (pair[0] + pair[1]);
        out.push(acc);
    }
    out
}

/// Composite Simpson rule; an odd trailing interval is closed with the
/// 3/8 rule so that any sample count ≥ 2 is accepted.
pub fn simpson(values: &[f64], spacing: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * spacing * (values[0] + values[1]),
        3 => spacing / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let intervals = n - 1;
            let (simpson_end, tail) = if intervals % 2 == 0 {
                (n - 1, None)
            } else {
                (n - 4, Some(n - 4))
            };
            let mut acc = values[0] + values[simpson_end];
            for (i, v) in values.iter().enumerate().take(simpson_end).skip(1) {
                acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = acc * spacing / 3.0;
            if let Some(j) = tail {
                total += 3.0 * spacing / 8.0
                    * (values[j] + 3.0 * values[j + 1] + 3.0 * values[j + 2] + values[j + 3]);
            }
            total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        for n in [4usize, 5, 8, 11] {
            let h = 2.0 / (n - 1) as f64;
            let vals: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(3)).collect();
            assert!((simpson(&vals, h) - 4.0).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn trapezoid_gaussian_converges() {
        // ∫_{-8}^{8} e^{-x²} dx = √π to double precision
        let err = |n: usize| {
            let h = 16.0 / (n - 1) as f64;
            let vals: Vec<f64> = (0..n).map(|i| (-(-8.0 + i as f64 * h).powi(2)).exp()).collect();
            (cumulative_trapezoid(&vals, h).last().unwrap() - std::f64::consts::PI.sqrt()).abs()
        };
        assert!(err(65) < 1e-10);
    }
}
