//! Least-squares power-law fits on log-log scale.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub coeff: f64,
    pub exponent: f64,
    pub points: usize,
}

/// Fits `y = coeff * x^exponent` to the points with `x, y > 0`.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Option<PowerFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    Some(PowerFit {
        coeff: (my - exponent * mx).exp(),
        exponent,
        points: pts.len(),
    })
}

/// Dyadic horizons `2^k` from `min` up to `max`, always ending at `max`.
pub fn dyadic_horizons(min: u64, max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut h = min.max(1).next_power_of_two();
    while h < max {
        out.push(h);
        h *= 2;
    }
    out.push(max);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let xs: Vec<f64> = (1..20).map(|i| i as f64 * 3.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x.powf(-1.3)).collect();
        let f = power_law_fit(&xs, &ys).unwrap();
        assert!((f.exponent + 1.3).abs() < 1e-12);
        assert!((f.coeff - 2.5).abs() < 1e-10);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(power_law_fit(&[1.0], &[1.0]).is_none());
        assert!(power_law_fit(&[2.0, 2.0], &[1.0, 3.0]).is_none());
        assert!(power_law_fit(&[1.0, 2.0], &[0.0, 0.0]).is_none());
    }

    #[test]
    fn dyadic() {
        assert_eq!(dyadic_horizons(8, 100), vec![8, 16, 32, 64, 100]);
        assert_eq!(dyadic_horizons(8, 64), vec![8, 16, 32, 64]);
    }
}
