//! Sampling. `sample_sum` draws the total offspring of `count` independent
//! individuals in one step using exact distributional identities:
//!
//! * Bernoulli shift: `Binomial(count, p)`
//! * geometric / linear fractional: negative binomial, drawn as
//!   `Poisson(Gamma(count, q / p))`
//! * Poisson: `Poisson(count * rate)`
//! * finite pmf: multinomial category counts via conditional binomials
//!
//! `sample_sum_individual` is the reference path (one draw per individual).

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Poisson};

use super::{Law, LawInstance};

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let d: Poisson<f64> =
        Poisson::new(lambda.min(Poisson::<f64>::MAX_LAMBDA)).expect("valid poisson");
    d.sample(rng) as u64
}

impl LawInstance {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.law {
            Law::BernoulliShift { p } => rng.random_bool(*p) as u64,
            Law::Geometric { .. } | Law::LinearFractional { .. } => {
                let p = self.geometric_p().unwrap_or(1.0);
                Geometric::new(p).expect("valid geometric").sample(rng)
            }
            Law::Poisson { rate } => poisson(*rate, rng),
            Law::FinitePmf { probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (k, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return k as u64;
                    }
                }
                probs.iter().rposition(|p| *p > 0.0).unwrap_or(0) as u64
            }
        }
    }

    /// Sum of `count` i.i.d. draws, one draw per individual.
    pub fn sample_sum_individual<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> u64 {
        (0..count).map(|_| self.sample(rng)).sum()
    }

    /// Sum of `count` i.i.d. draws via the closed-form law of the sum.
    pub fn sample_sum<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> u64 {
        if count == 0 {
            return 0;
        }
        match &self.law {
            Law::BernoulliShift { p } => binomial(count, *p, rng),
            Law::Geometric { .. } | Law::LinearFractional { .. } => {
                let p = self.geometric_p().unwrap_or(1.0);
                let scale = (1.0 - p) / p;
                let g: f64 = Gamma::new(count as f64, scale)
                    .expect("valid gamma")
                    .sample(rng);
                poisson(g, rng)
            }
            Law::Poisson { rate } => poisson(count as f64 * rate, rng),
            Law::FinitePmf { probs } => {
                let mut remaining = count;
                let mut rest = 1.0;
                let mut total = 0u64;
                for (k, p) in probs.iter().enumerate() {
                    if remaining == 0 {
                        break;
                    }
                    let c = if rest <= *p {
                        remaining
                    } else {
                        binomial(remaining, p / rest, rng)
                    };
                    total += k as u64 * c;
                    remaining -= c;
                    rest -= p;
                }
                // Rounding can leave stragglers; they belong to the top category.
                if remaining > 0 {
                    total += remaining * self.support_max().unwrap_or(0);
                }
                total
            }
        }
    }
}
