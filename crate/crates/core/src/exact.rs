//! Exact finite-window law of `Z_n` by probability-vector propagation.
//!
//! Mass leaving the window `0..=K` is added to `tail` and never returns, so
//! every window probability is a lower bound for the true one (up to
//! rounding, which is bounded separately by `rel_err`).

use serde::Serialize;

use crate::environment::{BpveiModel, LawTable};
use crate::error::{Error, Result};
use crate::laws::LawInstance;

pub const DEFAULT_CUTOFF: usize = 2048;
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;
pub const MAX_CUTOFF: usize = 1 << 17;

/// Law pmfs and the upper end of `J = Z + I` are cut where the remaining
/// mass drops below this; the cut mass is accounted for as tail.
const LAW_SF_CUT: f64 = 1e-20;

const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

fn gamma(n: usize) -> f64 {
    let nu = n as f64 * UNIT_ROUNDOFF;
    nu / (1.0 - nu)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedPmf {
    pub n: u64,
    pub cutoff: usize,
    /// `P[Z_n = k]` for `k = 0..=cutoff`.
    pub probs: Vec<f64>,
    /// Mass that left the window.
    pub tail: f64,
    /// Componentwise relative rounding-error bound on `probs`.
    pub rel_err: f64,
    pub tail_tol: f64,
    pub tail_exceeded: bool,
}

impl TruncatedPmf {
    fn point_mass_at_zero(cutoff: usize, tail_tol: f64) -> Self {
        let mut probs = vec![0.0; cutoff + 1];
        probs[0] = 1.0;
        TruncatedPmf {
            n: 0,
            cutoff,
            probs,
            tail: 0.0,
            rel_err: 0.0,
            tail_tol,
            tail_exceeded: false,
        }
    }

    /// Rigorous upper bound on the mass missing from the window.
    pub fn tail_upper(&self) -> f64 {
        self.tail * (1.0 + 2.0 * self.rel_err + gamma(self.cutoff + 4))
    }

    pub fn window_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `|sum(probs) + tail - 1|`.
    pub fn conservation_error(&self) -> f64 {
        (self.window_mass() + self.tail - 1.0).abs()
    }
}

/// Pmf of `law` on `0..=L`, with `L <= cutoff` chosen so that `P[X > L]` is
/// negligible or zero, and a relative error bound for its entries.
fn law_window(law: &LawInstance, cutoff: usize) -> (Vec<f64>, f64) {
    let len = match law.support_max() {
        Some(m) => (m as usize).min(cutoff),
        None => {
            let mut l = 1usize;
            while l < cutoff && law.sf(l as u64) > LAW_SF_CUT {
                l = (l * 2).min(cutoff);
            }
            // Shrink back to the first point below the cut.
            let mut lo = l / 2;
            let mut hi = l;
            while lo < hi {
                let mid = (lo + hi) / 2;
                if law.sf(mid as u64) > LAW_SF_CUT {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            hi
        }
    };
    let pmf = law.pmf_prefix(len);
    (pmf, gamma(2 * len + 4))
}

/// Support bound or exponential moment used to control moments beyond the
/// window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailModel {
    /// `Z_n <= max` almost surely.
    Support {
        max: u64,
    },
    /// `E[theta^{Z_n}] <= mgf`.
    Exponential {
        theta: f64,
        mgf: f64,
    },
    Unknown,
}

/// Tail control for `Z_n`: a support bound when both laws are bounded,
/// otherwise the best exponential moment found on a small grid of `theta`.
pub fn tail_model(model: &BpveiModel, n: u64, cutoff: usize) -> TailModel {
    let table = model.table(n.max(1));
    let mut max: Option<u64> = Some(0);
    for g in 0..n {
        max = match (
            max,
            table.offspring(g).support_max(),
            table.immigration(g).support_max(),
        ) {
            (Some(z), Some(x), Some(i)) => z.checked_add(i).and_then(|j| j.checked_mul(x)),
            _ => None,
        };
    }
    if let Some(max) = max {
        return TailModel::Support { max };
    }
    let mut best: Option<(f64, TailModel)> = None;
    for theta in [2.0, 1.5, 1.25, 1.1, 1.05, 1.02, 1.01, 1.005, 1.002, 1.001] {
        let Some(mgf) = extended_process_pgf(&table, n, theta) else {
            continue;
        };
        let score = mgf * tail_power_sup(theta, cutoff, 2);
        if score.is_finite() && best.is_none_or(|(b, _)| score < b) {
            best = Some((score, TailModel::Exponential { theta, mgf }));
        }
    }
    best.map_or(TailModel::Unknown, |(_, m)| m)
}

/// `E[theta^{Z_n}]` for `theta > 1`, inflated slightly to cover rounding.
fn extended_process_pgf(table: &LawTable, n: u64, theta: f64) -> Option<f64> {
    let mut s = theta;
    let mut log = 0.0;
    for i in (0..n).rev() {
        s = table.offspring(i).pgf_extended(s)?;
        log += table.immigration(i).pgf_extended(s)?.ln();
    }
    let v = log.exp() * (1.0 + 1e-9);
    v.is_finite().then_some(v)
}

/// `sup_{k > cutoff} k^r theta^{-k}`.
fn tail_power_sup(theta: f64, cutoff: usize, r: i32) -> f64 {
    let lt = theta.ln();
    let k0 = (cutoff + 1) as f64;
    let peak = r as f64 / lt;
    let k = if k0 >= peak { k0 } else { peak };
    (r as f64 * k.ln() - k * lt).exp()
}

/// Laws of `Z_0, ..., Z_n`, one pmf per generation, at a fixed cutoff.
pub fn propagate_path(
    model: &BpveiModel,
    n: u64,
    cutoff: usize,
    tail_tol: f64,
) -> Result<Vec<TruncatedPmf>> {
    if cutoff < 1 {
        return Err(Error::Config("cutoff must be at least 1".into()));
    }
    let table = model.table(n.max(1));
    let mut cur = TruncatedPmf::point_mass_at_zero(cutoff, tail_tol);
    let mut path = Vec::with_capacity(n as usize + 1);
    path.push(cur.clone());
    for g in 0..n {
        cur = step(&cur, table.offspring(g), table.immigration(g));
        path.push(cur.clone());
    }
    Ok(path)
}

/// Law of `Z_n` at a fixed cutoff; the result is flagged when the tail
/// exceeds `tail_tol`.
pub fn propagate(model: &BpveiModel, n: u64, cutoff: usize, tail_tol: f64) -> Result<TruncatedPmf> {
    Ok(propagate_path(model, n, cutoff, tail_tol)?
        .pop()
        .expect("path has n + 1 entries"))
}

/// As [`propagate_path`], doubling the cutoff (up to `max_cutoff`) until
/// every generation's tail is within `tail_tol`.
pub fn propagate_path_adaptive(
    model: &BpveiModel,
    n: u64,
    cutoff: usize,
    tail_tol: f64,
    max_cutoff: usize,
) -> Result<Vec<TruncatedPmf>> {
    let mut k = cutoff.max(1);
    loop {
        let path = propagate_path(model, n, k, tail_tol)?;
        let exceeded = path.iter().any(|p| p.tail_exceeded);
        if !exceeded || k >= max_cutoff {
            return Ok(path);
        }
        k = (k * 2).min(max_cutoff);
    }
}

pub fn propagate_adaptive(
    model: &BpveiModel,
    n: u64,
    cutoff: usize,
    tail_tol: f64,
    max_cutoff: usize,
) -> Result<TruncatedPmf> {
    Ok(
        propagate_path_adaptive(model, n, cutoff, tail_tol, max_cutoff)?
            .pop()
            .expect("path has n + 1 entries"),
    )
}

/// One generation: `J = Z + I`, then `Z' = X_1 + ... + X_J`.
fn step(cur: &TruncatedPmf, off: &LawInstance, imm: &LawInstance) -> TruncatedPmf {
    let k_max = cur.cutoff;
    let p = &cur.probs;
    let mut lost = 0.0;

    // Immigration convolution.
    let (h, rel_h) = law_window(imm, k_max);
    let lh = h.len() - 1;
    let mut j_pmf = vec![0.0; k_max + 1];
    for (a, &pa) in p.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        let top = lh.min(k_max - a);
        for (b, &hb) in h[..=top].iter().enumerate() {
            j_pmf[a + b] += pa * hb;
        }
        lost += pa * imm.sf(top as u64);
    }
    let rel_j = cur.rel_err + rel_h + gamma(lh + 2);

    // Drop the negligible upper end of J.
    let cut = LAW_SF_CUT;
    let mut j_max = k_max;
    let mut upper = 0.0;
    while j_max > 0 && upper + j_pmf[j_max] <= cut {
        upper += j_pmf[j_max];
        j_max -= 1;
    }
    lost += upper;

    // Compound step with incremental convolution powers X^{*j}. `spill`
    // accumulates the mass of the windowed power that lands beyond K, so
    // the lost mass is a sum of nonnegative terms rather than `1 - sum`.
    let (x, rel_x) = law_window(off, k_max);
    let lx = x.len() - 1;
    let sf_l = off.sf(lx as u64);
    let mut above = vec![0.0; lx + 1];
    for c in (0..lx).rev() {
        above[c] = above[c + 1] + x[c + 1];
    }
    let mut out = vec![0.0; k_max + 1];
    out[0] += j_pmf[0];
    let mut pow = vec![1.0];
    let mut rel_pow = 0.0;
    let mut spill = 0.0;
    for (j, &pj) in j_pmf.iter().enumerate().take(j_max + 1).skip(1) {
        let len = (pow.len() + lx).min(k_max + 1);
        let mut next = vec![0.0; len];
        for (a, &qa) in pow.iter().enumerate() {
            if qa == 0.0 {
                continue;
            }
            let room = k_max - a;
            let top = lx.min(room);
            for (b, &xb) in x[..=top].iter().enumerate() {
                next[a + b] += qa * xb;
            }
            if room < lx {
                spill += qa * above[room];
            }
        }
        pow = next;
        rel_pow += rel_x + gamma(lx + 2);
        if pj == 0.0 {
            continue;
        }
        for (k, &v) in pow.iter().enumerate() {
            out[k] += pj * v;
        }
        let cut_loss = -(j as f64 * (-sf_l).ln_1p()).exp_m1();
        lost += pj * (spill + cut_loss);
    }
    let rel_out = rel_j + rel_pow + gamma(j_max + 2);
    let tail = cur.tail + lost;
    TruncatedPmf {
        n: cur.n + 1,
        cutoff: k_max,
        probs: out,
        tail,
        rel_err: rel_out,
        tail_tol: cur.tail_tol,
        tail_exceeded: cur.tail_exceeded || tail > cur.tail_tol,
    }
}

/// Bounds on `P[Z_n > 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalBounds {
    pub lower: f64,
    pub upper: f64,
    pub tail_exceeded: bool,
}

impl SurvivalBounds {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

pub fn survival_bounds(pmf: &TruncatedPmf) -> SurvivalBounds {
    let p0 = pmf.probs[0];
    let rho = pmf.rel_err;
    SurvivalBounds {
        lower: (1.0 - p0 * (1.0 + rho) - pmf.tail_upper()).max(0.0),
        upper: (1.0 - p0 * (1.0 - rho)).min(1.0),
        tail_exceeded: pmf.tail_exceeded,
    }
}

pub fn exact_survival(
    model: &BpveiModel,
    n: u64,
    cutoff: usize,
    tail_tol: f64,
) -> Result<SurvivalBounds> {
    Ok(survival_bounds(&propagate(model, n, cutoff, tail_tol)?))
}

/// Window moments with rigorous enclosures of the true mean and variance.
/// Upper ends are infinite (one-sided) when the tail model gives no control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PmfMoments {
    pub mean: f64,
    pub variance: f64,
    pub mean_lo: f64,
    pub mean_hi: f64,
    pub var_lo: f64,
    pub var_hi: f64,
    pub one_sided: bool,
}

impl PmfMoments {
    pub fn mean_contains(&self, v: f64) -> bool {
        v >= self.mean_lo && v <= self.mean_hi
    }

    pub fn var_contains(&self, v: f64) -> bool {
        v >= self.var_lo && v <= self.var_hi
    }

    pub fn mean_width(&self) -> f64 {
        self.mean_hi - self.mean_lo
    }

    pub fn var_width(&self) -> f64 {
        self.var_hi - self.var_lo
    }
}

pub fn moments_from_pmf(pmf: &TruncatedPmf, tail: &TailModel) -> PmfMoments {
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (k, &p) in pmf.probs.iter().enumerate() {
        let kf = k as f64;
        m1 += kf * p;
        m2 += kf * kf * p;
    }
    let rho = pmf.rel_err + gamma(pmf.cutoff + 3);
    let tail_up = pmf.tail_upper();
    // Lost mass may sit anywhere: inside the window it weighs at most
    // `K^r` per unit, beyond it the tail model takes over.
    let k = pmf.cutoff as f64;
    let (t1, t2) = match *tail {
        TailModel::Support { max } => {
            let s = max as f64;
            (s * tail_up, s * s * tail_up)
        }
        TailModel::Exponential { theta, mgf } => (
            k * tail_up + mgf * tail_power_sup(theta, pmf.cutoff, 1),
            k * k * tail_up + mgf * tail_power_sup(theta, pmf.cutoff, 2),
        ),
        TailModel::Unknown => (f64::INFINITY, f64::INFINITY),
    };
    let mean_lo = m1 * (1.0 - rho);
    let mean_hi = m1 * (1.0 + rho) + t1;
    let q_lo = m2 * (1.0 - rho);
    let q_hi = m2 * (1.0 + rho) + t2;
    let slack = 4.0 * f64::EPSILON * m2;
    PmfMoments {
        mean: m1,
        variance: m2 - m1 * m1,
        mean_lo,
        mean_hi,
        var_lo: (q_lo - mean_hi * mean_hi - slack).max(0.0),
        var_hi: q_hi - mean_lo * mean_lo + slack,
        one_sided: matches!(tail, TailModel::Unknown),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{preset, GenerationSchedule};
    use crate::laws::LawSpec;
    use crate::pgf::PgfEngine;

    fn finite_model(off: Vec<f64>, imm: Vec<f64>) -> BpveiModel {
        BpveiModel::new(
            "finite",
            GenerationSchedule::homogeneous(LawSpec::finite(off)),
            GenerationSchedule::homogeneous(LawSpec::finite(imm)),
            false,
        )
        .unwrap()
    }

    // Full enumeration of the recursion for finite laws, without truncation.
    fn enumerate(off: &[f64], imm: &[f64], n: u64) -> Vec<f64> {
        let mut dist = vec![1.0];
        for _ in 0..n {
            let mut j = vec![0.0; dist.len() + imm.len() - 1];
            for (a, pa) in dist.iter().enumerate() {
                for (b, pb) in imm.iter().enumerate() {
                    j[a + b] += pa * pb;
                }
            }
            let max_z = (j.len() - 1) * (off.len() - 1);
            let mut next = vec![0.0; max_z + 1];
            for (count, pj) in j.iter().enumerate() {
                // Enumerate all offspring vectors of length `count`.
                let mut stack = vec![(0usize, 0usize, *pj)];
                while let Some((i, total, p)) = stack.pop() {
                    if i == count {
                        next[total] += p;
                        continue;
                    }
                    for (x, px) in off.iter().enumerate() {
                        stack.push((i + 1, total + x, p * px));
                    }
                }
            }
            dist = next;
        }
        dist
    }

    #[test]
    fn deterministic_chain_is_point_mass() {
        let m = preset("deterministic_chain", None).unwrap();
        let pmf = propagate(&m, 5, 16, DEFAULT_TAIL_TOL).unwrap();
        for (k, p) in pmf.probs.iter().enumerate() {
            assert_eq!(*p, if k == 5 { 1.0 } else { 0.0 });
        }
        assert_eq!(pmf.tail, 0.0);
        let b = exact_survival(&m, 3, 16, DEFAULT_TAIL_TOL).unwrap();
        assert_eq!(b.upper, 1.0);
        assert!(b.lower > 1.0 - 1e-12);
        let mo = moments_from_pmf(&pmf, &tail_model(&m, 5, 16));
        assert_eq!((mo.mean, mo.variance), (5.0, 0.0));
    }

    #[test]
    fn example_b_first_generation() {
        let m = preset("example_b", None).unwrap();
        let pmf = propagate(&m, 1, 8, DEFAULT_TAIL_TOL).unwrap();
        assert!((pmf.probs[0] - 0.75).abs() < 1e-15);
        assert!((pmf.probs[1] - 0.25).abs() < 1e-15);
        let b = survival_bounds(&pmf);
        assert!((b.lower - 0.25).abs() < 1e-14 && (b.upper - 0.25).abs() < 1e-14);
        let mo = moments_from_pmf(&pmf, &tail_model(&m, 1, 8));
        assert!(mo.var_contains(0.1875));
        assert!(mo.var_width() < 1e-13);
    }

    #[test]
    fn example_b_second_generation_mean() {
        let m = preset("example_b", None).unwrap();
        let pmf = propagate(&m, 2, 8, DEFAULT_TAIL_TOL).unwrap();
        let mo = moments_from_pmf(&pmf, &tail_model(&m, 2, 8));
        assert!(mo.mean_contains(0.375), "{mo:?}");
    }

    #[test]
    fn zero_mass_brackets_process_pgf() {
        for name in [
            "example_b",
            "example_c",
            "critical_geo_pois",
            "deterministic_chain",
        ] {
            let m = preset(name, None).unwrap();
            let e = PgfEngine::new(&m, 20);
            let path = propagate_path_adaptive(&m, 20, 256, DEFAULT_TAIL_TOL, 4096).unwrap();
            for pmf in path.iter().skip(1) {
                let f0 = e.process_pgf(pmf.n, 0.0).unwrap();
                let lo = pmf.probs[0] * (1.0 - pmf.rel_err) - 1e-15;
                let hi = pmf.probs[0] * (1.0 + pmf.rel_err) + pmf.tail_upper() + 1e-15;
                assert!(lo <= f0 && f0 <= hi, "{name} n={} {lo} {f0} {hi}", pmf.n);
                assert!(pmf.conservation_error() < 1e-12, "{name} n={}", pmf.n);
                assert!(!pmf.tail_exceeded);
            }
        }
    }

    #[test]
    fn compound_step_matches_full_enumeration() {
        let off = vec![0.3, 0.5, 0.2];
        let imm = vec![0.4, 0.6];
        let model = finite_model(off.clone(), imm.clone());
        let pmf = propagate(&model, 2, 8, DEFAULT_TAIL_TOL).unwrap();
        let brute = enumerate(&off, &imm, 2);
        for k in 0..=8 {
            let want = brute.get(k).copied().unwrap_or(0.0);
            assert!((pmf.probs[k] - want).abs() < 1e-15, "k={k}");
        }
        let beyond: f64 = brute.iter().skip(9).sum();
        assert!((pmf.tail - beyond).abs() < 1e-15);
    }

    #[test]
    fn truncation_moves_mass_to_tail() {
        let off = vec![0.2, 0.3, 0.5];
        let imm = vec![0.1, 0.4, 0.5];
        let model = finite_model(off.clone(), imm.clone());
        let pmf = propagate(&model, 3, 6, 1e-10).unwrap();
        let brute = enumerate(&off, &imm, 3);
        let beyond: f64 = brute.iter().skip(7).sum();
        assert!(pmf.tail >= beyond - 1e-14);
        assert!(pmf.tail_exceeded);
        for k in 0..=6 {
            assert!(pmf.probs[k] <= brute[k] + 1e-15);
        }
        assert!(pmf.conservation_error() < 1e-12);
    }

    #[test]
    fn critical_preset_moments_match_recursion() {
        // E[Z_{n+1}] = m (E[Z_n] + a), Var[Z_{n+1}] = m^2 (Var + b2) + s2 (E + a)
        let m = preset("critical_geo_pois", None).unwrap();
        let pmf = propagate_adaptive(&m, 3, 256, DEFAULT_TAIL_TOL, 4096).unwrap();
        let (mut e, mut v) = (0.0f64, 0.0f64);
        for _ in 0..3 {
            let (e0, v0) = (e, v);
            e = e0 + 1.0;
            v = (v0 + 1.0) + 2.0 * (e0 + 1.0);
        }
        let mo = moments_from_pmf(&pmf, &tail_model(&m, 3, pmf.cutoff));
        assert!(!mo.one_sided);
        assert!(mo.mean_contains(e), "{mo:?}");
        assert!(mo.var_contains(v), "{mo:?} {v}");
        assert!(
            mo.var_width() < 1e-8,
            "{mo:?} {pmf_tail} {pmf_rel}",
            pmf_tail = pmf.tail,
            pmf_rel = pmf.rel_err
        );
    }

    #[test]
    fn tail_models() {
        let b = preset("example_b", None).unwrap();
        assert_eq!(tail_model(&b, 7, 64), TailModel::Support { max: 7 });
        let c = preset("critical_geo_pois", None).unwrap();
        assert!(matches!(
            tail_model(&c, 12, 2048),
            TailModel::Exponential { .. }
        ));
    }
}
