//! Empirical samples and the two-sample Kolmogorov-Smirnov distance.

use serde::Serialize;

/// Sorted sample of `Z_n` (or of `Z_n / a_n` after [`normalized`]).
///
/// [`normalized`]: EmpiricalDistribution::normalized
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    pub n: u64,
    pub seed: u64,
    values: Vec<f64>,
    /// Replications that breached the overflow guard.
    pub exploded: u64,
}

impl EmpiricalDistribution {
    pub fn from_counts(n: u64, seed: u64, counts: Vec<u64>, exploded: u64) -> Self {
        let mut values: Vec<f64> = counts.into_iter().map(|c| c as f64).collect();
        values.sort_by(f64::total_cmp);
        EmpiricalDistribution {
            n,
            seed,
            values,
            exploded,
        }
    }

    pub fn from_values(n: u64, seed: u64, mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        EmpiricalDistribution {
            n,
            seed,
            values,
            exploded: 0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn reps(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Relative frequency of the value `k`.
    pub fn frequency(&self, k: u64) -> f64 {
        let k = k as f64;
        let lo = self.values.partition_point(|v| *v < k);
        let hi = self.values.partition_point(|v| *v <= k);
        (hi - lo) as f64 / self.values.len() as f64
    }

    /// Fraction of strictly positive values.
    pub fn positive_fraction(&self) -> f64 {
        let zeros = self.values.partition_point(|v| *v <= 0.0);
        (self.values.len() - zeros) as f64 / self.values.len() as f64
    }

    /// The sample divided by `scale`.
    pub fn normalized(&self, scale: f64) -> Self {
        EmpiricalDistribution {
            n: self.n,
            seed: self.seed,
            values: self.values.iter().map(|v| v / scale).collect(),
            exploded: self.exploded,
        }
    }
}

/// `sup_x |F_a(x) - F_b(x)|` for sorted samples; ties are consumed together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value `1.6276 sqrt((n + m) / (n m))`.
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.6276 * ((n + m) / (n * m)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&a, &[4.0, 5.0]), 1.0);
    }

    #[test]
    fn ks_with_ties() {
        // F_a jumps to 1/2 at 0 and to 1 at 1; F_b to 3/4 at 0.
        let a = [0.0, 0.0, 1.0, 1.0];
        let b = [0.0, 0.0, 0.0, 1.0];
        assert!((ks_two_sample(&a, &b) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ks_brute_force_agreement() {
        let a = [0.1, 0.4, 0.4, 0.9, 1.3];
        let b = [0.2, 0.4, 1.0, 1.1];
        let ecdf =
            |s: &[f64], x: f64| s.iter().filter(|v| **v <= x).count() as f64 / s.len() as f64;
        let brute = a
            .iter()
            .chain(&b)
            .map(|x| (ecdf(&a, *x) - ecdf(&b, *x)).abs())
            .fold(0.0, f64::max);
        assert!((ks_two_sample(&a, &b) - brute).abs() < 1e-15);
    }

    #[test]
    fn frequencies() {
        let d = EmpiricalDistribution::from_counts(1, 0, vec![2, 0, 1, 1, 0, 0], 0);
        assert_eq!(d.frequency(0), 0.5);
        assert!((d.frequency(1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(d.frequency(5), 0.0);
        assert_eq!(d.positive_fraction(), 0.5);
        assert_eq!(d.values()[0], 0.0);
        assert!((d.normalized(2.0).mean() - 1.0 / 3.0).abs() < 1e-15);
    }
}
