//! Block simulation of the operational erasure schemes with exact bit
//! accounting.
//!
//! Every trial draws `X^n` i.i.d. uniform bits and erases each sample
//! independently. Index sets are sent with enumerative coding (weight, then
//! the index of the set among all sets of that weight) and values as raw bits.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::closed_form::{case1_r1, case2_ts_r1, case3_r1};
use crate::math::{ceil, floor, lgamma};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Lossless erasure pattern plus direct description of the samples the
    /// budget cannot cover; Node 1 needs nothing back.
    Case1,
    /// Two-segment time sharing for lossless recovery at Node 1.
    Case2Ts,
    /// Lossless at both nodes: erasures measured, the rest described or
    /// measured, erased values returned raw.
    Case3,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Case1, Scheme::Case2Ts, Scheme::Case3];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Case1 => "case1",
            Scheme::Case2Ts => "case2_ts",
            Scheme::Case3 => "case3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }

    /// Limit of the forward rate, `None` when infeasible.
    pub fn closed_form_r1(self, epsilon: f64, gamma: f64) -> Option<f64> {
        match self {
            Scheme::Case1 => Some(case1_r1(epsilon, gamma)),
            Scheme::Case2Ts => case2_ts_r1(epsilon, gamma),
            Scheme::Case3 => case3_r1(epsilon, gamma),
        }
    }
}

impl core::fmt::Display for Scheme {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n: u64,
    pub epsilon: f64,
    pub gamma: f64,
    pub scheme: Scheme,
    pub rng_seed: u64,
    pub trials: u32,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("block length must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("at least one trial is needed".into()));
        }
        for (what, v) in [("erasure probability", self.epsilon), ("cost budget", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain { what, value: v });
            }
        }
        if self.scheme.closed_form_r1(self.epsilon, self.gamma).is_none() {
            return Err(Error::Infeasible(format!(
                "{} needs epsilon <= gamma (epsilon = {}, gamma = {})",
                self.scheme, self.epsilon, self.gamma
            )));
        }
        Ok(())
    }

    fn budget(&self) -> u64 {
        floor_count(self.n as f64 * self.gamma)
    }
}

/// `⌊x⌋` for a non-negative product that should land on an integer but may
/// sit one ulp below it.
fn floor_count(x: f64) -> u64 {
    floor(x + 1e-9 * x.max(1.0)) as u64
}

/// Integer tallies of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialResult {
    pub forward_bits: u64,
    pub backward_bits: u64,
    /// Positions where Node 1's reconstruction differs from `X`.
    pub d1_errors: u64,
    /// Positions where Node 2's reconstruction differs from `Z`.
    pub d2_errors: u64,
    /// Positions with `A = 1`.
    pub actions: u64,
    pub erasures: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub config: SimConfig,
    pub r1_hat: f64,
    pub r2_hat: f64,
    pub d1_hat: f64,
    pub d2_hat: f64,
    pub cost_hat: f64,
    /// Part of the backward bits is an analytic Slepian-Wolf count rather
    /// than an operational code.
    pub semi_analytic: bool,
    pub trials: Vec<TrialResult>,
}

impl SimResult {
    fn aggregate(config: SimConfig, trials: Vec<TrialResult>) -> Self {
        let total = (config.n * u64::from(config.trials)) as f64;
        let sum = |f: fn(&TrialResult) -> u64| trials.iter().map(f).sum::<u64>() as f64 / total;
        Self {
            config,
            r1_hat: sum(|t| t.forward_bits),
            r2_hat: sum(|t| t.backward_bits),
            d1_hat: sum(|t| t.d1_errors),
            d2_hat: sum(|t| t.d2_errors),
            cost_hat: sum(|t| t.actions),
            semi_analytic: config.scheme == Scheme::Case2Ts,
            trials,
        }
    }
}

/// Bits to send the weight `k` and the index of a weight-`k` subset of
/// `n` positions: `⌈log2(n+1)⌉ + ⌈log2 C(n,k)⌉`.
pub fn enumerative_bits(n: u64, k: u64) -> Result<u64> {
    if k > n {
        return Err(Error::Config(format!("weight {k} exceeds length {n}")));
    }
    Ok(bit_length(n) + ceil_log2_binomial(n, k))
}

/// `⌈log2(n+1)⌉`, the number of binary digits of `n`.
fn bit_length(n: u64) -> u64 {
    u64::from(64 - n.leading_zeros())
}

/// `⌈log2 v⌉` for `v ≥ 1`.
fn ceil_log2(v: u128) -> u64 {
    if v <= 1 {
        0
    } else {
        u64::from(128 - (v - 1).leading_zeros())
    }
}

fn ceil_log2_binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    if k == 0 {
        return 0;
    }
    if k == 1 {
        return ceil_log2(u128::from(n));
    }
    if let Some(c) = binomial_u128(n, k) {
        return ceil_log2(c);
    }
    let lg = (lgamma(n as f64 + 1.0) - lgamma(k as f64 + 1.0) - lgamma((n - k) as f64 + 1.0))
        / core::f64::consts::LN_2;
    let r = libm::round(lg);
    if (lg - r).abs() < 1e-9 * lg.max(1.0) {
        r as u64
    } else {
        ceil(lg) as u64
    }
}

fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    let mut c: u128 = 1;
    for i in 0..k {
        // c * (n - i) / (i + 1) stays integral at each step.
        c = c.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(c)
}

/// Runs `config.trials` independent blocks; trial `t` draws from stream `t`
/// of a generator seeded with `rng_seed`.
pub fn run_scheme(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let run = |t: u32| run_trial(config, t);
    #[cfg(feature = "parallel")]
    let trials: Vec<TrialResult> = {
        use rayon::prelude::*;
        (0..config.trials).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trials: Vec<TrialResult> = (0..config.trials).map(run).collect();
    Ok(SimResult::aggregate(*config, trials))
}

fn run_trial(config: &SimConfig, t: u32) -> TrialResult {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    rng.set_stream(u64::from(t));
    let n = config.n as usize;
    let mut x = Vec::with_capacity(n);
    let mut erased = Vec::with_capacity(n);
    for _ in 0..n {
        x.push(rng.random::<bool>());
        erased.push(rng.random_bool(config.epsilon));
    }
    match config.scheme {
        Scheme::Case1 => case1_trial(config, &x, &erased),
        Scheme::Case2Ts => case2_ts_trial(config, &x, &erased),
        Scheme::Case3 => case3_trial(config, &x, &erased),
    }
}

fn count(v: &[bool]) -> u64 {
    v.iter().filter(|&&b| b).count() as u64
}

fn case1_trial(config: &SimConfig, x: &[bool], erased: &[bool]) -> TrialResult {
    let n = config.n;
    let k = count(erased);
    let m = n - k;
    let described = m.saturating_sub(config.budget());
    // Node 2 learns E^n, the first `described` non-erased values, and measures
    // the other non-erased samples; it recovers Z^n exactly. Node 1 guesses 0
    // at erasures.
    let mut d1_errors = 0;
    for (&xi, &ei) in x.iter().zip(erased) {
        if ei && xi {
            d1_errors += 1;
        }
    }
    TrialResult {
        forward_bits: enumerative_bits(n, k).expect("k <= n") + described,
        backward_bits: 0,
        d1_errors,
        d2_errors: 0,
        actions: m - described,
        erasures: k,
    }
}

fn case3_trial(config: &SimConfig, _x: &[bool], erased: &[bool]) -> TrialResult {
    let n = config.n;
    let k = count(erased);
    let m = n - k;
    // Every erasure is measured; leftover budget measures non-erased samples,
    // the rest are described. Node 2 returns the k measured values raw.
    let measured = config.budget().saturating_sub(k).min(m);
    TrialResult {
        forward_bits: enumerative_bits(n, k).expect("k <= n") + (m - measured),
        backward_bits: k,
        d1_errors: 0,
        d2_errors: 0,
        actions: k + measured,
        erasures: k,
    }
}

fn case2_ts_trial(config: &SimConfig, x: &[bool], erased: &[bool]) -> TrialResult {
    let n = config.n;
    let eta = if config.epsilon >= 1.0 {
        0.0
    } else {
        ((1.0 - config.gamma) / (1.0 - config.epsilon)).clamp(0.0, 1.0)
    };
    let n1 = floor_count(n as f64 * eta).min(n);
    let (e1, e2) = erased.split_at(n1 as usize);
    let (k1, k2) = (count(e1), count(e2));
    let n2 = n - n1;
    // Segment 1: E is sent, erasures are measured and returned raw.
    // Segment 2: every sample is measured; Node 2 returns H(X|Z) bits per
    // sample by Slepian-Wolf coding, counted analytically.
    let eps2 = if n2 == 0 { 0.0 } else { k2 as f64 / n2 as f64 };
    let sw_bits = ceil(n2 as f64 * eps2 - 1e-9) as u64;
    // Node 2 reproduces Z: in segment 1 it knows E and the erased values, so
    // it outputs `e` at erasures and guesses 0 elsewhere; in segment 2 it
    // knows X but not E and outputs X.
    let mut d2_errors = 0;
    for (i, (&xi, &ei)) in x.iter().zip(erased).enumerate() {
        let wrong = if (i as u64) < n1 { !ei && xi } else { ei };
        if wrong {
            d2_errors += 1;
        }
    }
    let forward_bits = if n1 == 0 { 0 } else { enumerative_bits(n1, k1).expect("k <= n") };
    TrialResult {
        forward_bits,
        backward_bits: k1 + sw_bits,
        d1_errors: 0,
        d2_errors,
        actions: k1 + n2,
        erasures: k1 + k2,
    }
}

/// Trial-averaged gap `|r1 - closed form|` at each block length of
/// `n_grid`, other settings taken from `base`.
pub fn convergence_table(base: &SimConfig, n_grid: &[u64]) -> Result<Vec<(u64, f64)>> {
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("block lengths must be strictly ascending".into()));
    }
    let target = base
        .scheme
        .closed_form_r1(base.epsilon, base.gamma)
        .ok_or_else(|| Error::Infeasible(format!("{} at gamma = {}", base.scheme, base.gamma)))?;
    n_grid
        .iter()
        .map(|&n| {
            let res = run_scheme(&SimConfig { n, ..*base })?;
            let gap = res
                .trials
                .iter()
                .map(|t| (t.forward_bits as f64 / n as f64 - target).abs())
                .sum::<f64>()
                / res.trials.len() as f64;
            Ok((n, gap))
        })
        .collect()
}

/// Expected forward rate of one block, summing over the binomial erasure
/// count exactly. Only the number of erasures matters for case 1 and case 3.
pub fn expected_forward_rate(config: &SimConfig) -> Result<f64> {
    config.validate()?;
    let n = config.n;
    let eps = config.epsilon;
    let mut total = 0.0;
    let lpmf = |k: u64| {
        let (kf, nf) = (k as f64, n as f64);
        let lc = lgamma(nf + 1.0) - lgamma(kf + 1.0) - lgamma(nf - kf + 1.0);
        let term = |c: f64, p: f64| if c == 0.0 { 0.0 } else { c * libm::log(p) };
        lc + term(kf, eps) + term(nf - kf, 1.0 - eps)
    };
    for k in 0..=n {
        let p = libm::exp(lpmf(k));
        if p == 0.0 {
            continue;
        }
        let m = n - k;
        let bits = match config.scheme {
            Scheme::Case1 => enumerative_bits(n, k)? + m.saturating_sub(config.budget()),
            Scheme::Case3 => {
                enumerative_bits(n, k)? + (m - config.budget().saturating_sub(k).min(m))
            }
            Scheme::Case2Ts => {
                return Err(Error::Config("exact expectation covers case1 and case3".into()))
            }
        };
        total += p * bits as f64;
    }
    Ok(total / n as f64)
}
