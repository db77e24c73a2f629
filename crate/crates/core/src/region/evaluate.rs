//! Single-letter evaluation of a policy through the generic joint-table path.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::Policy;
use crate::model::DistortionTable;
use crate::prob::{conditional_mutual_information as cmi, JointPmf};
use crate::{var, Error, ProblemSpec, Result};

/// Coordinates of one point of the rate-distortion-cost trade-off.
///
/// Distortions are `+inf` when the policy puts positive probability on a
/// forbidden reconstruction with no finite alternative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub r1: f64,
    pub r2: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: Option<f64>,
    pub gamma: f64,
}

impl OperatingPoint {
    /// True unless some distortion is infinite.
    pub fn is_finite(&self) -> bool {
        self.d1.is_finite() && self.d2.is_finite() && self.d3.map_or(true, f64::is_finite)
    }
}

/// Joint over `(X, Z, A, U, [X3,] Y, V)` following
/// `p(x,z) p(a,u[,x3]|z) p(y|a,x,z) p(v|a,u,y[,x3])`.
pub fn assemble_joint(spec: &ProblemSpec, policy: &Policy) -> Result<JointPmf> {
    policy.check_against(spec)?;
    let d = policy.dims(spec);
    let src = spec.source().table();
    let fwd = policy.forward().table();
    let bwd = policy.backward().table();
    let mut table = Vec::with_capacity(d.nx * d.nz * d.na * d.nu * d.nw * d.ny * d.nv);
    for x in 0..d.nx {
        for z in 0..d.nz {
            let pxz = src[x * d.nz + z];
            for a in 0..d.na {
                for u in 0..d.nu {
                    for w in 0..d.nw {
                        let pf = pxz * fwd[((z * d.na + a) * d.nu + u) * d.nw + w];
                        for y in 0..d.ny {
                            let py = pf * spec.vending_prob(a, x, z, y);
                            let row = ((a * d.nu + u) * d.ny + y) * d.nw + w;
                            for v in 0..d.nv {
                                table.push(py * bwd[row * d.nv + v]);
                            }
                        }
                    }
                }
            }
        }
    }
    let mut vars = vec![
        spec.x().clone(),
        spec.z().clone(),
        spec.a().clone(),
        policy.u().clone(),
    ];
    if let Some(w) = policy.xhat3() {
        vars.push(w.clone());
    }
    vars.push(spec.y().clone());
    vars.push(policy.v().clone());
    JointPmf::from_parts(vars, table)
}

/// A deterministic reconstruction map and the distortion it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub observed: Vec<String>,
    /// Reconstruction index per observed tuple (mixed radix, first observed
    /// variable most significant). Zero-probability tuples map to symbol 0.
    pub map: Vec<usize>,
    pub distortion: f64,
}

/// Bayes-optimal reconstruction from `observed`: for each observed tuple the
/// symbol minimizing the conditional expected metric, ties going to the
/// earlier symbol. The joint must contain `X`, `Y` and `Z`.
pub fn bayes_decoder(joint: &JointPmf, observed: &[&str], metric: &DistortionTable) -> Result<Decoder> {
    let nk = metric.reconstruction().len();
    if nk == 0 {
        return Err(Error::EmptyAlphabet(metric.reconstruction().name().into()));
    }
    let mut names: Vec<&str> = observed.to_vec();
    for v in [var::X, var::Y, var::Z] {
        if !names.contains(&v) {
            names.push(v);
        }
    }
    let pos = joint.positions(&names)?;
    let dims: Vec<usize> = pos.iter().map(|&p| joint.dims()[p]).collect();
    let slot = |name: &str| names.iter().position(|n| *n == name).unwrap();
    let (sx, sy, sz) = (slot(var::X), slot(var::Y), slot(var::Z));
    let n_obs: usize = dims[..observed.len()].iter().product();
    let table = joint.marginal_table(&pos);

    // expected[obs][k] = sum p(obs, x, y, z) d(x, y, z, k)
    let mut expected = vec![0.0; n_obs * nk];
    let mut mass = vec![0.0; n_obs];
    let mut coord = vec![0usize; dims.len()];
    for &p in &table {
        if p > 0.0 {
            let obs = coord[..observed.len()]
                .iter()
                .zip(&dims)
                .fold(0, |acc, (&c, &d)| acc * d + c);
            mass[obs] += p;
            for k in 0..nk {
                expected[obs * nk + k] += p * metric.get(coord[sx], coord[sy], coord[sz], k);
            }
        }
        crate::prob::kernel_advance(&mut coord, &dims);
    }
    let mut map = vec![0usize; n_obs];
    let mut distortion = 0.0;
    for obs in 0..n_obs {
        if mass[obs] <= 0.0 {
            continue;
        }
        let row = &expected[obs * nk..(obs + 1) * nk];
        let best = argmin_first(row);
        map[obs] = best;
        distortion += row[best];
    }
    Ok(Decoder {
        observed: observed.iter().map(|s| (*s).into()).collect(),
        map,
        distortion,
    })
}

pub(crate) fn argmin_first(row: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..row.len() {
        if row[k] < row[best] {
            best = k;
        }
    }
    best
}

/// Rates, distortions and cost of `policy`:
/// `R1 = I(Z;A) + I(Z;U|A,Y)`, `R2 = I(Y;V|A,Z,U)`, or in Heegard-Berger mode
/// `R1 = I(Z;A) + I(Z;X3|A) + I(Z;U|A,Y,X3)`, `R2 = I(Y;V|A,Z,U,X3)`.
/// `D1` and `D2` use Bayes decoders from `(V, Z)` and `(U, Y)`; `D3` is the
/// expected metric of `X3` itself.
pub fn evaluate_point(spec: &ProblemSpec, policy: &Policy) -> Result<OperatingPoint> {
    let joint = assemble_joint(spec, policy)?;
    evaluate_joint(spec, &joint)
}

pub(crate) fn evaluate_joint(spec: &ProblemSpec, joint: &JointPmf) -> Result<OperatingPoint> {
    use var::*;
    let (r1, r2) = if spec.is_heegard_berger() {
        (
            cmi(joint, &[Z], &[A], &[])?
                + cmi(joint, &[Z], &[XHAT3], &[A])?
                + cmi(joint, &[Z], &[U], &[A, Y, XHAT3])?,
            cmi(joint, &[Y], &[V], &[A, Z, U, XHAT3])?,
        )
    } else {
        (
            cmi(joint, &[Z], &[A], &[])? + cmi(joint, &[Z], &[U], &[A, Y])?,
            cmi(joint, &[Y], &[V], &[A, Z, U])?,
        )
    };
    let d1 = bayes_decoder(joint, &[V, Z], spec.d1())?.distortion;
    let d2 = bayes_decoder(joint, &[U, Y], spec.d2())?.distortion;
    let d3 = match spec.d3() {
        Some(metric) => {
            let pos = joint.positions(&[X, Y, Z, XHAT3])?;
            let m = joint.marginalize(&[X, Y, Z, XHAT3])?;
            debug_assert_eq!(pos.len(), 4);
            Some(m.expectation(|c| metric.get(c[0], c[1], c[2], c[3])))
        }
        None => None,
    };
    let cost = spec.cost();
    let gamma = joint.marginalize(&[A])?.expectation(|c| cost[c[0]]);
    Ok(OperatingPoint {
        r1,
        r2,
        d1,
        d2,
        d3,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{appendix_b_policy, CaseTag, ExampleCase};
    use crate::prob::{check_markov, Alphabet};
    use crate::{Mode, SpecParts};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn case(tag: CaseTag, gamma: f64) -> (ProblemSpec, Policy) {
        let c = ExampleCase::new(tag, 0.2, gamma, None).unwrap();
        (c.spec().unwrap(), appendix_b_policy(&c).unwrap())
    }

    #[test]
    fn case1_policy_point() {
        let (spec, p) = case(CaseTag::Case1, 0.4);
        let pt = evaluate_point(&spec, &p).unwrap();
        assert!((pt.r1 - 1.1219280948873624).abs() < 1e-10);
        assert_eq!(pt.r2, 0.0);
        assert_eq!(pt.d2, 0.0);
        assert!((pt.gamma - 0.4).abs() < 1e-15);
    }

    #[test]
    fn case2_policy_point() {
        let (spec, p) = case(CaseTag::Case2, 0.6);
        let pt = evaluate_point(&spec, &p).unwrap();
        assert!((pt.r1 - 0.17095059445466865).abs() < 1e-10);
        assert!((pt.r2 - 0.2).abs() < 1e-12);
        assert_eq!(pt.d1, 0.0);
    }

    #[test]
    fn case3_policy_point() {
        let (spec, p) = case(CaseTag::Case3, 0.6);
        let pt = evaluate_point(&spec, &p).unwrap();
        assert!((pt.r1 - 1.1219280948873624).abs() < 1e-10);
        assert!((pt.r2 - 0.2).abs() < 1e-12);
        assert_eq!((pt.d1, pt.d2), (0.0, 0.0));
    }

    #[test]
    fn case2_node1_decoder_reads_v_at_erasures() {
        let (spec, p) = case(CaseTag::Case2, 0.6);
        let joint = assemble_joint(&spec, &p).unwrap();
        let dec = bayes_decoder(&joint, &[var::V, var::Z], spec.d1()).unwrap();
        assert_eq!(dec.distortion, 0.0);
        // map is indexed [v][z]; v ranges over Y = {0, 1, phi}
        let nz = spec.z().len();
        for v in 0..2 {
            assert_eq!(dec.map[v * nz + 2], v);
        }
        for z in 0..2 {
            assert_eq!(dec.map[2 * nz + z], z);
        }
    }

    #[test]
    fn decoder_observing_the_source_is_the_identity() {
        let (spec, p) = case(CaseTag::Case1, 0.4);
        let joint = assemble_joint(&spec, &p).unwrap();
        let dec = bayes_decoder(&joint, &[var::X], spec.d1()).unwrap();
        assert_eq!(dec.map, vec![0, 1]);
        assert_eq!(dec.distortion, 0.0);
    }

    #[test]
    fn decoder_ties_go_to_the_first_symbol() {
        let (spec, p) = case(CaseTag::Case1, 0.0);
        let joint = assemble_joint(&spec, &p).unwrap();
        // with V constant and Z = e, X is a fair coin
        let dec = bayes_decoder(&joint, &[var::V, var::Z], spec.d1()).unwrap();
        assert_eq!(dec.map[2], 0);
    }

    #[test]
    fn markov_chains_of_the_construction() {
        let spec = crate::model::binary_erasure_spec(crate::ErasureParams::new(0.3).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let p = Policy::random(&spec, 3, 4, &mut rng).unwrap();
            let j = assemble_joint(&spec, &p).unwrap();
            assert!(check_markov(&j, &[var::U], &[var::Z, var::A], &[var::Y], 1e-10).unwrap().holds);
            assert!(check_markov(&j, &[var::V], &[var::A, var::U, var::Y], &[var::X, var::Z], 1e-10).unwrap().holds);
        }
    }

    #[test]
    fn relabeling_auxiliaries_changes_nothing() {
        let spec = crate::model::binary_erasure_spec(crate::ErasureParams::new(0.2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = Policy::random(&spec, 3, 4, &mut rng).unwrap();
        let q = p.permuted(&[2, 0, 1], &[3, 1, 0, 2]).unwrap();
        let (a, b) = (evaluate_point(&spec, &p).unwrap(), evaluate_point(&spec, &q).unwrap());
        for (x, y) in [(a.r1, b.r1), (a.r2, b.r2), (a.d1, b.d1), (a.d2, b.d2), (a.gamma, b.gamma)] {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn point_mass_spec_has_zero_rates() {
        let bit = Alphabet::new("", ["0"]).unwrap();
        let spec = ProblemSpec::new(SpecParts {
            mode: Mode::Direct,
            x: bit.clone(),
            z: bit.clone(),
            y: bit.clone(),
            a: bit.clone(),
            xhat1: bit.clone(),
            xhat2: bit.clone(),
            xhat3: None,
            source: vec![1.0],
            vending: vec![1.0],
            cost: vec![0.0],
            d1: vec![0.0],
            d2: vec![0.0],
            d3: None,
        })
        .unwrap();
        let p = Policy::random(&spec, 1, 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let pt = evaluate_point(&spec, &p).unwrap();
        assert_eq!((pt.r1, pt.r2, pt.d1, pt.d2, pt.gamma), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn forbidden_reconstruction_gives_infinite_d3() {
        let spec = ExampleCase::new(CaseTag::HbCase2, 0.2, 0.5, Some(1.0)).unwrap().spec().unwrap();
        // always claim "not erased"
        let p = Policy::from_fn(
            &spec,
            Alphabet::indexed(var::U, "", 1).unwrap(),
            Alphabet::indexed(var::V, "", 1).unwrap(),
            |_, a, _, w| if a == 1 && w == 0 { 1.0 } else { 0.0 },
            |_, _, _, _, _| 1.0,
        )
        .unwrap();
        let pt = evaluate_point(&spec, &p).unwrap();
        assert_eq!(pt.d3, Some(f64::INFINITY));
        assert!(!pt.is_finite());
    }

    #[test]
    fn mismatched_policy_is_rejected() {
        let (_, p) = case(CaseTag::Case1, 0.4);
        let hb = ExampleCase::new(CaseTag::HbCase2, 0.2, 0.5, Some(1.0)).unwrap().spec().unwrap();
        assert!(matches!(evaluate_point(&hb, &p), Err(Error::AlphabetMismatch { .. })));
    }
}
