//! Closed-form rate-cost curves of the binary erasure example and the
//! policies that achieve them.
//!
//! Infeasible operating points are `None`.

use alloc::string::ToString;
use alloc::vec;

use crate::model::{binary_erasure_spec, with_node3_erasure_metric};
use crate::prob::{binary_entropy, Alphabet};
use crate::{var, ErasureParams, Error, Policy, ProblemSpec, Result};

fn h2(p: f64) -> f64 {
    binary_entropy(p.clamp(0.0, 1.0)).unwrap_or(0.0)
}

fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}

/// `D1 = D1max`, `D2 = 0`: `H2(ε) + (1 - ε - Γ)⁺`, with `R2 = 0`.
pub fn case1_r1(epsilon: f64, gamma: f64) -> f64 {
    h2(epsilon) + (1.0 - epsilon - gamma).max(0.0)
}

/// `D1 = 0`, `D2 = D2max`: `H2(ε) - Γ H2(ε/Γ)` for `Γ ≥ ε`, with `R2 = ε`.
pub fn case2_r1(epsilon: f64, gamma: f64) -> Option<f64> {
    if gamma < epsilon {
        return None;
    }
    if gamma == 0.0 {
        return Some(0.0);
    }
    Some((h2(epsilon) - gamma * h2(epsilon / gamma)).max(0.0))
}

/// Rate of the two-segment time-sharing scheme for case 2:
/// `(1 - Γ) / (1 - ε) · H2(ε)` for `ε ≤ Γ ≤ 1`, `ε < 1`.
pub fn case2_ts_r1(epsilon: f64, gamma: f64) -> Option<f64> {
    if gamma < epsilon || epsilon >= 1.0 || gamma > 1.0 {
        return None;
    }
    Some((1.0 - gamma) / (1.0 - epsilon) * h2(epsilon))
}

/// `D1 = D2 = 0`: `H2(ε) + 1 - Γ` for `Γ ≥ ε`, with `R2 = ε`.
pub fn case3_r1(epsilon: f64, gamma: f64) -> Option<f64> {
    (gamma >= epsilon).then(|| h2(epsilon) + 1.0 - gamma)
}

/// The Heegard-Berger rate expression for case 2 at parameters
/// `(p1, p2, p3)`, term by term as printed. Terms weighted by a vanishing
/// mass `εp1 + (Γ-ε)p3` are 0.
pub fn hb_case2_expression(epsilon: f64, gamma: f64, p1: f64, p2: f64, p3: f64) -> f64 {
    hb_p2_part(gamma, p2) + hb_p13_part(epsilon, gamma, p1, p3)
}

fn hb_p2_part(gamma: f64, p2: f64) -> f64 {
    -(1.0 - gamma) * (1.0 - p2) - (1.0 - gamma) * p2
}

fn hb_p13_part(epsilon: f64, gamma: f64, p1: f64, p3: f64) -> f64 {
    let base = h2(epsilon) + 1.0 - epsilon - (gamma - epsilon) * (1.0 - p3);
    let s = epsilon * p1 + (gamma - epsilon) * p3;
    if s <= 0.0 {
        return base;
    }
    base - s * (h2(epsilon * p1 / s) + (gamma - epsilon) * p3 / s)
}

/// Node 3 distortion `εp1 + (1-Γ)p2 + (Γ-ε)p3` of the parameterized policy.
pub fn hb_case2_distortion(epsilon: f64, gamma: f64, p1: f64, p2: f64, p3: f64) -> f64 {
    epsilon * p1 + (1.0 - gamma) * p2 + (gamma - epsilon) * p3
}

/// Minimizer of [`hb_case2_expression`] under the Node 3 constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HbOptimum {
    pub r1: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

const HB_GRID: usize = 101;
const HB_MIN_STEP: f64 = 1e-6;

/// Minimum of [`hb_case2_r1`] together with its parameters.
pub fn hb_case2_argmin(epsilon: f64, gamma: f64, d3: f64) -> Option<HbOptimum> {
    if gamma < epsilon || !(0.0..=1.0).contains(&gamma) {
        return None;
    }
    let dist = |p: [f64; 3]| hb_case2_distortion(epsilon, gamma, p[0], p[1], p[2]);
    let value = |p: [f64; 3]| hb_case2_expression(epsilon, gamma, p[0], p[1], p[2]);
    let ok = |p: [f64; 3]| dist(p) <= d3 + 1e-15;

    let step = 1.0 / (HB_GRID - 1) as f64;
    let at = |i: usize| i as f64 * step;
    let a: vec::Vec<f64> = (0..HB_GRID).map(|i| hb_p2_part(gamma, at(i))).collect();
    let mut b = vec![0.0; HB_GRID * HB_GRID];
    for i in 0..HB_GRID {
        for k in 0..HB_GRID {
            b[i * HB_GRID + k] = hb_p13_part(epsilon, gamma, at(i), at(k));
        }
    }
    let mut best: Option<(f64, [f64; 3])> = None;
    for i in 0..HB_GRID {
        for (j, aj) in a.iter().enumerate() {
            for k in 0..HB_GRID {
                let p = [at(i), at(j), at(k)];
                if !ok(p) {
                    continue;
                }
                let v = aj + b[i * HB_GRID + k];
                if best.map_or(true, |(bv, _)| v < bv) {
                    best = Some((v, p));
                }
            }
        }
    }
    let (mut v, mut p) = best?;

    // Coordinate refinement. Besides plain moves, each coordinate may jump to
    // the constraint boundary, and a move that breaks the constraint may be
    // repaired by putting another coordinate on the boundary.
    let weights = [epsilon, 1.0 - gamma, gamma - epsilon];
    let boundary = |p: [f64; 3], j: usize| -> Option<f64> {
        if weights[j] <= 0.0 {
            return None;
        }
        let rest: f64 = (0..3).filter(|&k| k != j).map(|k| weights[k] * p[k]).sum();
        let x = (d3 - rest) / weights[j];
        (0.0..=1.0).contains(&x).then_some(x)
    };
    let mut h = step;
    while h >= HB_MIN_STEP {
        let mut improved = false;
        for i in 0..3 {
            let mut moves = vec![p[i] + h, p[i] - h];
            moves.extend(boundary(p, i));
            for x in moves {
                let mut q = p;
                q[i] = x.clamp(0.0, 1.0);
                let mut trials = vec![q];
                if !ok(q) {
                    trials.clear();
                    for j in (0..3).filter(|&j| j != i) {
                        if let Some(y) = boundary(q, j) {
                            let mut r = q;
                            r[j] = y;
                            trials.push(r);
                        }
                    }
                }
                for q in trials {
                    if ok(q) {
                        let vq = value(q);
                        if vq < v - 1e-15 * (1.0 + v.abs()) {
                            v = vq;
                            p = q;
                            improved = true;
                        }
                    }
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    Some(HbOptimum {
        r1: v.max(0.0),
        p1: p[0],
        p2: p[1],
        p3: p[2],
    })
}

/// Case 2 with Node 3 recovering the erasure pattern within `D3`: the
/// printed rate expression minimized over `(p1, p2, p3) ∈ [0, 1]³`.
pub fn hb_case2_r1(epsilon: f64, gamma: f64, d3: f64) -> Option<f64> {
    hb_case2_argmin(epsilon, gamma, d3).map(|o| o.r1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseTag {
    Case1,
    Case2,
    Case2Ts,
    Case3,
    HbCase2,
}

impl CaseTag {
    pub const ALL: [CaseTag; 5] = [
        CaseTag::Case1,
        CaseTag::Case2,
        CaseTag::Case2Ts,
        CaseTag::Case3,
        CaseTag::HbCase2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseTag::Case1 => "case1",
            CaseTag::Case2 => "case2",
            CaseTag::Case2Ts => "case2_ts",
            CaseTag::Case3 => "case3",
            CaseTag::HbCase2 => "hb_case2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl core::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One operating point of the example family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleCase {
    pub tag: CaseTag,
    pub epsilon: f64,
    pub gamma: f64,
    /// Node 3 target, required for [`CaseTag::HbCase2`] only.
    pub d3: Option<f64>,
}

impl ExampleCase {
    pub fn new(tag: CaseTag, epsilon: f64, gamma: f64, d3: Option<f64>) -> Result<Self> {
        check_unit("erasure probability", epsilon)?;
        check_unit("cost budget", gamma)?;
        match (tag, d3) {
            (CaseTag::HbCase2, None) => {
                return Err(Error::Config("hb_case2 needs a D3 value".to_string()));
            }
            (CaseTag::HbCase2, Some(d)) => check_unit("D3", d)?,
            (_, Some(_)) => {
                return Err(Error::Config("only hb_case2 takes a D3 value".to_string()));
            }
            _ => {}
        }
        Ok(Self { tag, epsilon, gamma, d3 })
    }

    /// Minimum forward rate, `None` when infeasible.
    pub fn r1(&self) -> Option<f64> {
        let (e, g) = (self.epsilon, self.gamma);
        match self.tag {
            CaseTag::Case1 => Some(case1_r1(e, g)),
            CaseTag::Case2 => case2_r1(e, g),
            CaseTag::Case2Ts => case2_ts_r1(e, g),
            CaseTag::Case3 => case3_r1(e, g),
            CaseTag::HbCase2 => hb_case2_r1(e, g, self.d3.unwrap_or(1.0)),
        }
    }

    /// Backward rate paired with [`Self::r1`].
    pub fn r2(&self) -> Option<f64> {
        self.r1().map(|_| match self.tag {
            CaseTag::Case1 => 0.0,
            _ => self.epsilon,
        })
    }

    pub fn is_feasible(&self) -> bool {
        self.r1().is_some()
    }

    /// The problem instance this case lives in; Heegard-Berger cases carry
    /// Node 3.
    pub fn spec(&self) -> Result<ProblemSpec> {
        let base = binary_erasure_spec(ErasureParams::new(self.epsilon)?);
        match self.tag {
            CaseTag::HbCase2 => with_node3_erasure_metric(&base),
            _ => Ok(base),
        }
    }
}

const Z_ERASED: usize = 2;

/// Pr(A = 1 | Z = 0) = Pr(A = 1 | Z = 1) when every erasure is measured.
fn case2_action(epsilon: f64, gamma: f64) -> f64 {
    if epsilon >= 1.0 {
        0.0
    } else {
        ((gamma - epsilon) / (1.0 - epsilon)).clamp(0.0, 1.0)
    }
}

/// The achievability policy of each case:
///
/// - case 1: `U = Z`, `V` constant, `Pr(A=1|Z=0) = Pr(A=1|Z=1) = min(Γ/(1-ε), 1)`
///   and no measurement at erasures;
/// - case 2: `U` constant, `V = Y`, `Pr(A=1|Z=e) = 1` and
///   `Pr(A=1|Z=0) = Pr(A=1|Z=1) = (Γ-ε)/(1-ε)`;
/// - case 3: as case 2 with `U = Z`;
/// - hb_case2: [`hb_policy`] at the minimizing parameters.
///
/// The time-sharing scheme has no single-letter policy.
pub fn appendix_b_policy(case: &ExampleCase) -> Result<Policy> {
    if !case.is_feasible() {
        return Err(Error::Infeasible(alloc::format!(
            "{} at epsilon = {}, gamma = {}",
            case.tag, case.epsilon, case.gamma
        )));
    }
    let spec = case.spec()?;
    let (e, g) = (case.epsilon, case.gamma);
    let one = |name| Alphabet::indexed(name, "", 1);
    let bern = |q: f64, a: usize| if a == 1 { q } else { 1.0 - q };
    match case.tag {
        CaseTag::Case1 => {
            let q = if e >= 1.0 { 0.0 } else { (g / (1.0 - e)).min(1.0) };
            Policy::from_fn(
                &spec,
                spec.z().renamed(var::U),
                one(var::V)?,
                |z, a, u, _| {
                    if u != z {
                        0.0
                    } else if z == Z_ERASED {
                        bern(0.0, a)
                    } else {
                        bern(q, a)
                    }
                },
                |_, _, _, _, _| 1.0,
            )
        }
        CaseTag::Case2 | CaseTag::Case3 => {
            let q = case2_action(e, g);
            let u_is_z = case.tag == CaseTag::Case3;
            let u = if u_is_z { spec.z().renamed(var::U) } else { one(var::U)? };
            Policy::from_fn(
                &spec,
                u,
                spec.y().renamed(var::V),
                |z, a, u, _| {
                    if u_is_z && u != z {
                        0.0
                    } else if z == Z_ERASED {
                        bern(1.0, a)
                    } else {
                        bern(q, a)
                    }
                },
                |_, _, y, _, v| f64::from(u8::from(y == v)),
            )
        }
        CaseTag::HbCase2 => {
            let o = hb_case2_argmin(e, g, case.d3.unwrap_or(1.0))
                .ok_or_else(|| Error::Infeasible("hb_case2".to_string()))?;
            hb_policy(e, g, o.p1, o.p2, o.p3)
        }
        CaseTag::Case2Ts => Err(Error::InvalidSpec(
            "the time-sharing scheme has no single-letter policy".to_string(),
        )),
    }
}

/// Case-2 policy with Node 3: actions and `V = Y` as in case 2, `U`
/// constant, and Node 3 reproduces the erasure indicator except that it
/// outputs `*` with probability `p1` at erasures, `p2` at unmeasured
/// non-erasures and `p3` at measured non-erasures.
pub fn hb_policy(epsilon: f64, gamma: f64, p1: f64, p2: f64, p3: f64) -> Result<Policy> {
    check_unit("erasure probability", epsilon)?;
    check_unit("cost budget", gamma)?;
    for (what, p) in [("p1", p1), ("p2", p2), ("p3", p3)] {
        check_unit(what, p)?;
    }
    if gamma < epsilon {
        return Err(Error::Infeasible(alloc::format!(
            "cost budget {gamma} below erasure probability {epsilon}"
        )));
    }
    let spec = with_node3_erasure_metric(&binary_erasure_spec(ErasureParams::new(epsilon)?))?;
    let q = case2_action(epsilon, gamma);
    const STAR: usize = 2;
    Policy::from_fn(
        &spec,
        Alphabet::indexed(var::U, "", 1)?,
        spec.y().renamed(var::V),
        |z, a, _, w| {
            let erased = z == Z_ERASED;
            let pa = if erased { f64::from(u8::from(a == 1)) } else if a == 1 { q } else { 1.0 - q };
            let star = match (erased, a) {
                (true, _) => p1,
                (false, 0) => p2,
                (false, _) => p3,
            };
            let indicator = usize::from(erased);
            let pw = if w == STAR {
                star
            } else if w == indicator {
                1.0 - star
            } else {
                0.0
            };
            pa * pw
        },
        |_, _, y, _, v| f64::from(u8::from(y == v)),
    )
}
