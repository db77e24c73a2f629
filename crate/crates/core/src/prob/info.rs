//! Shannon entropy, (conditional) mutual information and Markov-chain checks,
//! all by exact summation over the joint table.

use alloc::vec::Vec;

use super::JointPmf;
use crate::math::{log2, plogp};
use crate::{Error, Result};

/// Conditioning events lighter than this are skipped by [`check_markov`].
pub const MARKOV_NULL_EVENT: f64 = 1e-14;

/// Clears the negative rounding residue of an information quantity; NaN
/// passes through.
pub(crate) fn clamp_rounding(v: f64) -> f64 {
    if v < 0.0 {
        0.0
    } else {
        v
    }
}

/// `H2(p) = -p log2 p - (1-p) log2 (1-p)`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain {
            what: "binary entropy argument",
            value: p,
        });
    }
    Ok(plogp(p) + plogp(1.0 - p))
}

/// Entropy in bits of the marginal on `vars`.
pub fn entropy(joint: &JointPmf, vars: &[&str]) -> Result<f64> {
    if vars.is_empty() {
        return Err(Error::EmptySet("entropy"));
    }
    let pos = joint.positions(vars)?;
    Ok(joint.marginal_table(&pos).iter().map(|&p| plogp(p)).sum())
}

/// `I(left; right)`.
pub fn mutual_information(joint: &JointPmf, left: &[&str], right: &[&str]) -> Result<f64> {
    conditional_mutual_information(joint, left, right, &[])
}

/// `I(left; right | given)` in bits.
pub fn conditional_mutual_information(
    joint: &JointPmf,
    left: &[&str],
    right: &[&str],
    given: &[&str],
) -> Result<f64> {
    let (t, nl, nr, ng) = three_way(joint, left, right, given)?;
    let (plg, prg, pg) = three_way_marginals(&t, nl, nr, ng);
    let mut acc = 0.0;
    for l in 0..nl {
        for r in 0..nr {
            for g in 0..ng {
                let p = t[(l * nr + r) * ng + g];
                if p > 0.0 {
                    acc += p * (log2(p) + log2(pg[g]) - log2(plg[l * ng + g]) - log2(prg[r * ng + g]));
                }
            }
        }
    }
    Ok(clamp_rounding(acc))
}

/// Outcome of a conditional-independence check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovCheck {
    pub holds: bool,
    /// `max |p(l,r|m) - p(l|m) p(r|m)| * p(m)` over all cells.
    pub max_violation: f64,
}

/// Checks the Markov chain `left -- mid -- right`, i.e. that `left` and
/// `right` are conditionally independent given `mid`. An empty `mid` tests
/// plain independence.
pub fn check_markov(
    joint: &JointPmf,
    left: &[&str],
    mid: &[&str],
    right: &[&str],
    tol: f64,
) -> Result<MarkovCheck> {
    let (t, nl, nr, nm) = three_way(joint, left, right, mid)?;
    let (plm, prm, pm) = three_way_marginals(&t, nl, nr, nm);
    let mut worst: f64 = 0.0;
    for m in 0..nm {
        if pm[m] < MARKOV_NULL_EVENT {
            continue;
        }
        for l in 0..nl {
            for r in 0..nr {
                let p = t[(l * nr + r) * nm + m];
                let v = (p - plm[l * nm + m] * prm[r * nm + m] / pm[m]).abs();
                worst = worst.max(v);
            }
        }
    }
    Ok(MarkovCheck {
        holds: worst <= tol,
        max_violation: worst,
    })
}

/// Marginal over (left, right, given) flattened to three axes.
fn three_way(
    joint: &JointPmf,
    left: &[&str],
    right: &[&str],
    given: &[&str],
) -> Result<(Vec<f64>, usize, usize, usize)> {
    if left.is_empty() {
        return Err(Error::EmptySet("left variables"));
    }
    if right.is_empty() {
        return Err(Error::EmptySet("right variables"));
    }
    for (a, b) in [(left, right), (left, given), (right, given)] {
        if let Some(v) = a.iter().find(|v| b.contains(v)) {
            return Err(Error::OverlappingSets((*v).into()));
        }
    }
    let names: Vec<&str> = left.iter().chain(right).chain(given).copied().collect();
    let pos = joint.positions(&names)?;
    let size = |r: core::ops::Range<usize>| pos[r].iter().map(|&p| joint.dims()[p]).product();
    let nl = size(0..left.len());
    let nr = size(left.len()..left.len() + right.len());
    let ng = size(left.len() + right.len()..pos.len());
    Ok((joint.marginal_table(&pos), nl, nr, ng))
}

fn three_way_marginals(
    t: &[f64],
    nl: usize,
    nr: usize,
    ng: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut plg = alloc::vec![0.0; nl * ng];
    let mut prg = alloc::vec![0.0; nr * ng];
    let mut pg = alloc::vec![0.0; ng];
    for l in 0..nl {
        for r in 0..nr {
            for g in 0..ng {
                let p = t[(l * nr + r) * ng + g];
                plg[l * ng + g] += p;
                prg[r * ng + g] += p;
                pg[g] += p;
            }
        }
    }
    (plg, prg, pg)
}
