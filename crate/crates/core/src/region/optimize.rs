//! Penalty-method search for the smallest forward rate meeting distortion
//! and cost targets.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::evaluate::{evaluate_point, OperatingPoint};
use super::objective::{FastEval, Metrics, Weights};
use super::policy::{default_cardinalities, dirichlet_rows, Dims, Policy};
use crate::math::{exp, ln};
use crate::{Error, ProblemSpec, Result};

/// Absolute slack on distortions and cost when judging feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-7;

const SNAP_THRESHOLDS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-6, 1e-8];
const ARMIJO: f64 = 1e-4;

/// Distortion and cost targets. `d3` is required exactly in Heegard-Berger
/// mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Targets {
    pub d1: f64,
    pub d2: f64,
    pub d3: Option<f64>,
    pub gamma: f64,
}

impl Targets {
    /// Largest violation of `point` against these targets, 0 when feasible.
    pub fn residual(&self, point: &OperatingPoint) -> f64 {
        if [point.d1, point.d2, point.gamma, point.d3.unwrap_or(0.0)].iter().any(|v| v.is_nan()) {
            return f64::INFINITY;
        }
        let mut r = (point.d1 - self.d1).max(point.d2 - self.d2).max(point.gamma - self.gamma);
        if let (Some(t), Some(d)) = (self.d3, point.d3) {
            r = r.max(d - t);
        }
        r.max(0.0)
    }

    fn residual_of(&self, m: &Metrics) -> f64 {
        if [m.d1, m.d2, m.d3, m.gamma].iter().any(|v| v.is_nan()) {
            return f64::INFINITY;
        }
        let mut r = (m.d1 - self.d1).max(m.d2 - self.d2).max(m.gamma - self.gamma);
        if let Some(t) = self.d3 {
            r = r.max(m.d3 - t);
        }
        r.max(0.0)
    }

    fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..*self }
    }

    fn validate(&self, spec: &ProblemSpec) -> Result<()> {
        for (what, v) in [("D1", self.d1), ("D2", self.d2), ("gamma", self.gamma)] {
            if v.is_nan() || v < 0.0 {
                return Err(Error::Config(format!("target {what} = {v} must be non-negative")));
            }
        }
        match (spec.is_heegard_berger(), self.d3) {
            (true, None) => Err(Error::Config("Heegard-Berger mode needs a D3 target".into())),
            (false, Some(_)) => Err(Error::Config("a D3 target needs Heegard-Berger mode".into())),
            (_, Some(v)) if v.is_nan() || v < 0.0 => Err(Error::Config(format!("target D3 = {v} must be non-negative"))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Total number of descents; supplied seeds take the first slots.
    pub restarts: usize,
    /// Iteration cap per penalty weight.
    pub max_iters: usize,
    pub penalty_schedule: Vec<f64>,
    /// A stage ends once an iteration improves the penalized objective by
    /// less than this (relative).
    pub step_tolerance: f64,
    pub rng_seed: u64,
    pub cardinality_override: Option<(usize, usize)>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 300,
            penalty_schedule: vec![1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9, 1e10],
            step_tolerance: 1e-12,
            rng_seed: 0,
            cardinality_override: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.penalty_schedule.is_empty() {
            return Err(Error::Config("penalty schedule is empty".into()));
        }
        if self.penalty_schedule.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Config("penalty weights must be positive and finite".into()));
        }
        if self.penalty_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("penalty weights must be strictly increasing".into()));
        }
        if self.step_tolerance.is_nan() || self.step_tolerance < 0.0 {
            return Err(Error::Config("step tolerance must be non-negative".into()));
        }
        if let Some((nu, nv)) = self.cardinality_override {
            if nu == 0 || nv == 0 {
                return Err(Error::Config("auxiliary alphabets need at least one symbol".into()));
            }
        }
        Ok(())
    }
}

/// Best feasible policy found by [`minimize_r1`].
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub point: OperatingPoint,
    pub policy: Policy,
    /// Largest constraint violation of `point` (at most the feasibility
    /// tolerance).
    pub residual: f64,
    /// Restart that produced the policy; `None` for the built-in constant
    /// policy.
    pub restart: Option<usize>,
}

struct Candidate {
    r1: f64,
    residual: f64,
    nu: usize,
    nv: usize,
    fwd: Vec<f64>,
    bwd: Vec<f64>,
}

/// Minimizes the forward rate subject to `targets` by exterior-penalty
/// descent from each seed and from random policies, and returns the best
/// feasible policy. Seeds are always candidates themselves, so a feasible seed
/// is never beaten for the worse.
pub fn minimize_r1(spec: &ProblemSpec, targets: &Targets, config: &OptimizerConfig, seeds: &[Policy]) -> Result<Optimum> {
    targets.validate(spec)?;
    config.validate()?;
    for s in seeds {
        s.check_against(spec)?;
    }
    let (nu, nv) = config.cardinality_override.unwrap_or_else(|| default_cardinalities(spec));

    let starts: Vec<Start<'_>> = (0..config.restarts.max(seeds.len()))
        .map(|i| match seeds.get(i) {
            Some(p) => Start::Seed(p),
            None => Start::Random,
        })
        .collect();

    let run = |i: usize| -> Option<Candidate> {
        let (rnu, rnv, fwd, bwd) = match starts[i] {
            Start::Seed(p) => {
                let pd = p.dims(spec);
                let (rnu, rnv) = (pd.nu.max(nu), pd.nv.max(nv));
                let e = p.embedded(rnu, rnv).ok()?;
                (rnu, rnv, e.forward().table().to_vec(), e.backward().table().to_vec())
            }
            Start::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
                rng.set_stream(i as u64);
                let d = Dims::new(spec, nu, nv);
                let fwd = dirichlet_rows(&mut rng, d.nz, d.forward_row());
                let bwd = dirichlet_rows(&mut rng, d.backward_rows(), nv);
                (nu, nv, fwd, bwd)
            }
        };
        best_of_descent(spec, targets, config, rnu, rnv, fwd, bwd)
    };

    #[cfg(feature = "parallel")]
    let outcomes: Vec<Option<Candidate>> = {
        use rayon::prelude::*;
        (0..starts.len()).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Option<Candidate>> = (0..starts.len()).map(run).collect();

    let baseline = constant_policy(spec, targets);
    let mut least_residual = baseline.as_ref().map_or(f64::INFINITY, |c| c.residual);
    let mut best = baseline.filter(|c| c.residual <= FEASIBILITY_TOL).map(|c| (usize::MAX, c));
    for (i, out) in outcomes.into_iter().enumerate() {
        let Some(c) = out else { continue };
        least_residual = least_residual.min(c.residual);
        if c.residual > FEASIBILITY_TOL {
            continue;
        }
        let better = match &best {
            None => true,
            Some((j, b)) => (c.r1, i) < (b.r1, *j),
        };
        if better {
            best = Some((i, c));
        }
    }

    let Some((i, c)) = best else {
        return Err(Error::Infeasible(format!(
            "no policy meets the targets (smallest constraint violation {least_residual:.3e})"
        )));
    };
    let policy = Policy::from_tables(spec, c.nu, c.nv, c.fwd, c.bwd)?;
    let point = evaluate_point(spec, &policy)?;
    Ok(Optimum {
        residual: targets.residual(&point),
        point,
        policy,
        restart: (i != usize::MAX).then_some(i),
    })
}

enum Start<'a> {
    Seed(&'a Policy),
    Random,
}

/// The policy that always plays the cheapest action and sends nothing.
fn constant_policy(spec: &ProblemSpec, targets: &Targets) -> Option<Candidate> {
    let d = Dims::new(spec, 1, 1);
    let a0 = (0..d.na).min_by(|&i, &j| spec.cost()[i].total_cmp(&spec.cost()[j]))?;
    let w0 = match spec.d3() {
        None => 0,
        Some(m) => {
            let mut best = (0, f64::INFINITY);
            for w in 0..d.nw {
                let mut e = 0.0;
                for x in 0..d.nx {
                    for z in 0..d.nz {
                        for y in 0..d.ny {
                            let p = spec.source().table()[x * d.nz + z] * spec.vending_prob(a0, x, z, y);
                            if p > 0.0 {
                                e += p * m.get(x, y, z, w);
                            }
                        }
                    }
                }
                if e < best.1 {
                    best = (w, e);
                }
            }
            best.0
        }
    };
    let mut fwd = vec![0.0; d.nz * d.forward_row()];
    for z in 0..d.nz {
        fwd[z * d.forward_row() + a0 * d.nw + w0] = 1.0;
    }
    let bwd = vec![1.0; d.backward_rows()];
    let mut ev = FastEval::new(spec, 1, 1, None);
    let m = ev.evaluate(&fwd, &bwd);
    Some(Candidate {
        r1: m.r1,
        residual: targets.residual_of(&m),
        nu: 1,
        nv: 1,
        fwd,
        bwd,
    })
}

/// Descends from `(fwd, bwd)` (itself a candidate) and returns the best
/// feasible of the start, the end point and its sparsified variants; when none
/// is feasible, the least infeasible.
fn best_of_descent(
    spec: &ProblemSpec,
    targets: &Targets,
    config: &OptimizerConfig,
    nu: usize,
    nv: usize,
    fwd: Vec<f64>,
    bwd: Vec<f64>,
) -> Option<Candidate> {
    let d = Dims::new(spec, nu, nv);
    let mut exact = FastEval::new(spec, nu, nv, None);
    let mut best: Option<Candidate> = None;
    let mut consider = |fwd: Vec<f64>, bwd: Vec<f64>, best: &mut Option<Candidate>| {
        let m = exact.evaluate(&fwd, &bwd);
        if !m.r1.is_finite() {
            return;
        }
        let c = Candidate {
            r1: m.r1,
            residual: targets.residual_of(&m),
            nu,
            nv,
            fwd,
            bwd,
        };
        let key = |c: &Candidate| (c.residual > FEASIBILITY_TOL, if c.residual > FEASIBILITY_TOL { c.residual } else { c.r1 });
        let replace = match best {
            None => true,
            Some(b) => {
                let (kc, kb) = (key(&c), key(b));
                (!kc.0 && kb.0) || (kc.0 == kb.0 && kc.1 < kb.1)
            }
        };
        if replace {
            *best = Some(c);
        }
    };

    consider(fwd.clone(), bwd.clone(), &mut best);
    let (f, b) = descend(spec, targets, config, d, fwd, bwd);
    for thr in SNAP_THRESHOLDS {
        consider(snap(&f, d.forward_row(), thr), snap(&b, nv, thr), &mut best);
    }
    consider(f, b, &mut best);
    best
}

/// Zeroes entries below `thr` and renormalizes each row.
fn snap(table: &[f64], row: usize, thr: f64) -> Vec<f64> {
    let mut out = table.to_vec();
    for r in out.chunks_mut(row) {
        let max = r.iter().copied().fold(0.0, f64::max);
        r.iter_mut().for_each(|p| {
            if *p < thr && *p < max {
                *p = 0.0
            }
        });
        let s: f64 = r.iter().sum();
        r.iter_mut().for_each(|p| *p /= s);
    }
    out
}

struct Block {
    row: usize,
    theta: Vec<f64>,
    probs: Vec<f64>,
    step: f64,
}

impl Block {
    fn new(probs: Vec<f64>, row: usize) -> Self {
        let theta = probs.iter().map(|&p| if p > 0.0 { ln(p) } else { f64::NEG_INFINITY }).collect();
        Self {
            row,
            theta,
            probs,
            step: 1.0,
        }
    }

    /// Mirror direction `-(g - E_p g)` per row and the slope of the objective
    /// along it in logit space.
    fn direction(&self, grad: &[f64], dir: &mut [f64]) -> f64 {
        let mut slope = 0.0;
        for ((p, g), dv) in self.probs.chunks(self.row).zip(grad.chunks(self.row)).zip(dir.chunks_mut(self.row)) {
            let mean: f64 = p.iter().zip(g).map(|(p, g)| p * g).sum();
            for i in 0..p.len() {
                dv[i] = if p[i] > 0.0 { -(g[i] - mean) } else { 0.0 };
                slope -= p[i] * dv[i] * dv[i];
            }
        }
        slope
    }

    fn trial(&self, dir: &[f64], t: f64, out_theta: &mut [f64], out_probs: &mut [f64]) {
        for (i, th) in out_theta.iter_mut().enumerate() {
            *th = self.theta[i] + t * dir[i];
        }
        softmax_rows(out_theta, out_probs, self.row);
    }
}

fn softmax_rows(theta: &[f64], probs: &mut [f64], row: usize) {
    for (th, p) in theta.chunks(row).zip(probs.chunks_mut(row)) {
        let max = th.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for (pi, &ti) in p.iter_mut().zip(th) {
            *pi = exp(ti - max);
            s += *pi;
        }
        p.iter_mut().for_each(|pi| *pi /= s);
    }
}

fn penalized(m: &Metrics, t: &Targets, w: f64) -> f64 {
    let sq = |v: f64| {
        let v = v.max(0.0);
        v * v
    };
    let mut l = m.r1 + w * (sq(m.d1 - t.d1) + sq(m.d2 - t.d2) + sq(m.gamma - t.gamma));
    if let Some(d3) = t.d3 {
        l += w * sq(m.d3 - d3);
    }
    l
}

fn penalty_weights(m: &Metrics, t: &Targets, w: f64) -> Weights {
    let slope = |v: f64| 2.0 * w * v.max(0.0);
    Weights {
        d1: slope(m.d1 - t.d1),
        d2: slope(m.d2 - t.d2),
        d3: t.d3.map_or(0.0, |d3| slope(m.d3 - d3)),
        gamma: slope(m.gamma - t.gamma),
    }
}

/// Block-coordinate mirror descent on the penalized objective: each
/// iteration takes an Armijo step on the forward kernel, then on the backward
/// kernel, each row moving within its simplex.
fn descend(spec: &ProblemSpec, targets: &Targets, config: &OptimizerConfig, d: Dims, fwd: Vec<f64>, bwd: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut ev = FastEval::new(spec, d.nu, d.nv, Some(FastEval::surrogate_for(spec)));
    let mut blocks = [Block::new(fwd, d.forward_row()), Block::new(bwd, d.nv)];
    let mut grads = [vec![0.0; blocks[0].probs.len()], vec![0.0; blocks[1].probs.len()]];
    let mut dir = [grads[0].clone(), grads[1].clone()];
    let mut th_trial = [grads[0].clone(), grads[1].clone()];
    let mut p_trial = [grads[0].clone(), grads[1].clone()];

    for &w in &config.penalty_schedule {
        let mut m = ev.evaluate(&blocks[0].probs, &blocks[1].probs);
        let mut loss = penalized(&m, targets, w);
        for _ in 0..config.max_iters {
            let start = loss;
            for k in 0..2 {
                let [g0, g1] = &mut grads;
                ev.gradient(&blocks[1].probs, penalty_weights(&m, targets, w), g0, g1);
                let slope = blocks[k].direction(&grads[k], &mut dir[k]);
                if slope.is_nan() || slope >= 0.0 {
                    continue;
                }
                let mut t = (blocks[k].step * 2.0).min(1e8);
                let accepted = loop {
                    blocks[k].trial(&dir[k], t, &mut th_trial[k], &mut p_trial[k]);
                    let mt = if k == 0 {
                        ev.evaluate(&p_trial[0], &blocks[1].probs)
                    } else {
                        ev.evaluate(&blocks[0].probs, &p_trial[1])
                    };
                    let lt = penalized(&mt, targets, w);
                    if lt <= loss + ARMIJO * t * slope {
                        m = mt;
                        loss = lt;
                        break true;
                    }
                    t *= 0.5;
                    if t < 1e-16 {
                        break false;
                    }
                };
                if accepted {
                    blocks[k].step = t;
                    core::mem::swap(&mut blocks[k].theta, &mut th_trial[k]);
                    core::mem::swap(&mut blocks[k].probs, &mut p_trial[k]);
                } else {
                    blocks[k].step = 1.0;
                    // Leave the evaluator's decoders at the current point.
                    m = ev.evaluate(&blocks[0].probs, &blocks[1].probs);
                }
            }
            if start - loss <= config.step_tolerance * (1.0 + loss.abs()) {
                break;
            }
        }
    }
    let [f, b] = blocks;
    (f.probs, b.probs)
}

/// One [`minimize_r1`] result per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub gamma: f64,
    /// `None` when no feasible policy was found at this budget.
    pub optimum: Option<Optimum>,
    /// True when the lower-envelope pass replaced this point's own optimum by
    /// the one found at a smaller budget.
    pub carried: bool,
}

/// Minimizes `r1` along an ascending grid of budgets. Each point starts from
/// the previous point's best policy plus `seeds(gamma)`; a final
/// lower-envelope pass carries a cheaper policy forward whenever a smaller
/// budget found a lower rate.
pub fn sweep_gamma(
    spec: &ProblemSpec,
    targets: &Targets,
    grid: &[f64],
    config: &OptimizerConfig,
    seeds: &dyn Fn(f64) -> Vec<Policy>,
) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::Config("empty budget grid".into()));
    }
    if grid.iter().any(|g| !g.is_finite()) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("budget grid must be finite and ascending".into()));
    }
    let mut out: Vec<SweepPoint> = Vec::with_capacity(grid.len());
    let mut warm: Option<Policy> = None;
    for &gamma in grid {
        let mut s = seeds(gamma);
        if let Some(p) = &warm {
            s.insert(0, p.clone());
        }
        let optimum = match minimize_r1(spec, &targets.with_gamma(gamma), config, &s) {
            Ok(o) => Some(o),
            Err(Error::Infeasible(_)) => None,
            Err(e) => return Err(e),
        };
        if let Some(o) = &optimum {
            warm = Some(o.policy.clone());
        }
        out.push(SweepPoint {
            gamma,
            optimum,
            carried: false,
        });
    }
    let mut envelope: Option<Optimum> = None;
    for p in &mut out {
        match (&p.optimum, &envelope) {
            (Some(o), Some(e)) if e.point.r1 < o.point.r1 => {
                p.optimum = Some(e.clone());
                p.carried = true;
            }
            (None, Some(e)) => {
                p.optimum = Some(e.clone());
                p.carried = true;
            }
            _ => {}
        }
        if !p.carried {
            envelope = p.optimum.clone();
        }
    }
    Ok(out)
}
