use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::kernel::advance;
use super::{product, Alphabet, NORMALIZATION_TOL};
use crate::{Error, Result};

/// Dense joint pmf over an ordered tuple of named variables.
///
/// Each variable is identified by the name of its alphabet. The table is
/// row-major with the last variable fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    vars: Vec<Alphabet>,
    dims: Vec<usize>,
    table: Vec<f64>,
}

impl JointPmf {
    pub fn new(vars: Vec<Alphabet>, table: Vec<f64>) -> Result<Self> {
        let joint = Self::from_parts(vars, table)?;
        let total: f64 = joint.table.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized {
                what: joint.describe(),
                row: String::from("()"),
                sum: total,
            });
        }
        Ok(joint)
    }

    /// Product of independent marginals, in the given order.
    pub fn independent(marginals: &[super::Pmf]) -> Result<Self> {
        let vars: Vec<Alphabet> = marginals.iter().map(|m| m.alphabet().clone()).collect();
        let mut table = vec![1.0];
        for m in marginals {
            table = table
                .iter()
                .flat_map(|&p| m.probs().iter().map(move |&q| p * q))
                .collect();
        }
        Self::new(vars, table)
    }

    /// Like [`JointPmf::new`] but without the mass check; used by assemblers
    /// whose factors are already validated.
    pub(crate) fn from_parts(vars: Vec<Alphabet>, table: Vec<f64>) -> Result<Self> {
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].iter().any(|w| w.name() == v.name()) {
                return Err(Error::DuplicateVariable(v.name().into()));
            }
        }
        let dims: Vec<usize> = vars.iter().map(Alphabet::len).collect();
        let expected = product(&dims);
        let joint = Self { vars, dims, table };
        if joint.table.len() != expected {
            return Err(Error::Shape {
                what: joint.describe(),
                expected,
                found: joint.table.len(),
            });
        }
        if let Some((index, &value)) = joint
            .table
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(Error::InvalidProbability {
                what: joint.describe(),
                index,
                value,
            });
        }
        Ok(joint)
    }

    pub fn variables(&self) -> &[Alphabet] {
        &self.vars
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn variable(&self, name: &str) -> Result<&Alphabet> {
        Ok(&self.vars[self.position(name)?])
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name() == name)
            .ok_or_else(|| Error::UnknownVariable(name.into()))
    }

    pub(crate) fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        let pos = names
            .iter()
            .map(|n| self.position(n))
            .collect::<Result<Vec<_>>>()?;
        for (i, p) in pos.iter().enumerate() {
            if pos[..i].contains(p) {
                return Err(Error::DuplicateVariable(names[i].into()));
            }
        }
        Ok(pos)
    }

    /// Marginal table over `positions`, in that order.
    pub(crate) fn marginal_table(&self, positions: &[usize]) -> Vec<f64> {
        let mut stride = vec![0usize; self.dims.len()];
        let mut s = 1;
        for &p in positions.iter().rev() {
            stride[p] = s;
            s *= self.dims[p];
        }
        let mut out = vec![0.0; s];
        let mut coord = vec![0usize; self.dims.len()];
        let mut dest = 0usize;
        for &p in &self.table {
            out[dest] += p;
            for k in (0..coord.len()).rev() {
                coord[k] += 1;
                dest += stride[k];
                if coord[k] < self.dims[k] {
                    break;
                }
                dest -= stride[k] * self.dims[k];
                coord[k] = 0;
            }
        }
        out
    }

    /// Marginal over the named variables, in the order given.
    pub fn marginalize(&self, names: &[&str]) -> Result<JointPmf> {
        let pos = self.positions(names)?;
        let vars = pos.iter().map(|&p| self.vars[p].clone()).collect();
        let table = self.marginal_table(&pos);
        Ok(JointPmf {
            dims: pos.iter().map(|&p| self.dims[p]).collect(),
            vars,
            table,
        })
    }

    /// Conditional pmf of the remaining variables given `evidence`
    /// (variable name, symbol index) pairs. Errors if the evidence has zero
    /// probability.
    pub fn condition(&self, evidence: &[(&str, usize)]) -> Result<JointPmf> {
        let names: Vec<&str> = evidence.iter().map(|e| e.0).collect();
        let pos = self.positions(&names)?;
        for (&p, &(name, idx)) in pos.iter().zip(evidence) {
            if idx >= self.dims[p] {
                return Err(Error::Shape {
                    what: format!("evidence on `{name}`"),
                    expected: self.dims[p],
                    found: idx,
                });
            }
        }
        let keep: Vec<usize> = (0..self.vars.len()).filter(|p| !pos.contains(p)).collect();
        let mut out = vec![0.0; keep.iter().map(|&p| self.dims[p]).product()];
        let mut coord = vec![0usize; self.dims.len()];
        for &p in &self.table {
            if pos.iter().zip(evidence).all(|(&q, e)| coord[q] == e.1) {
                let dest = keep.iter().fold(0, |acc, &q| acc * self.dims[q] + coord[q]);
                out[dest] += p;
            }
            advance(&mut coord, &self.dims);
        }
        let mass: f64 = out.iter().sum();
        if mass <= 0.0 {
            return Err(Error::Infeasible(String::from(
                "conditioning on a zero-probability event",
            )));
        }
        out.iter_mut().for_each(|p| *p /= mass);
        Ok(JointPmf {
            vars: keep.iter().map(|&p| self.vars[p].clone()).collect(),
            dims: keep.iter().map(|&p| self.dims[p]).collect(),
            table: out,
        })
    }

    /// `E[f(cell)]` where `f` receives the symbol indices of every variable.
    /// Cells with zero probability are skipped, so `f` may be infinite there.
    pub fn expectation<F: FnMut(&[usize]) -> f64>(&self, mut f: F) -> f64 {
        let mut coord = vec![0usize; self.dims.len()];
        let mut acc = 0.0;
        for &p in &self.table {
            if p > 0.0 {
                acc += p * f(&coord);
            }
            advance(&mut coord, &self.dims);
        }
        acc
    }

    fn describe(&self) -> String {
        let names: Vec<&str> = self.vars.iter().map(Alphabet::name).collect();
        format!("joint pmf over ({})", names.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bit(name: &str) -> Alphabet {
        Alphabet::new(name, ["0", "1"]).unwrap()
    }

    fn sample() -> JointPmf {
        // p(x, y) with x fastest-varying second
        JointPmf::new(vec![bit("X"), bit("Y")], vec![0.1, 0.2, 0.3, 0.4]).unwrap()
    }

    #[test]
    fn marginal_in_requested_order() {
        let j = sample();
        let m = j.marginalize(&["Y"]).unwrap();
        assert!((m.table()[0] - 0.4).abs() < 1e-15 && (m.table()[1] - 0.6).abs() < 1e-15);
        let swapped = j.marginalize(&["Y", "X"]).unwrap();
        assert_eq!(swapped.table(), &[0.1, 0.3, 0.2, 0.4]);
    }

    #[test]
    fn condition_renormalizes() {
        let c = sample().condition(&[("X", 1)]).unwrap();
        assert!((c.table()[0] - 3.0 / 7.0).abs() < 1e-15);
        assert_eq!(c.variables()[0].name(), "Y");
    }

    #[test]
    fn expectation_skips_null_cells() {
        let j = JointPmf::new(vec![bit("X")], vec![1.0, 0.0]).unwrap();
        let e = j.expectation(|c| if c[0] == 1 { f64::INFINITY } else { 2.0 });
        assert_eq!(e, 2.0);
    }

    #[test]
    fn rejects_duplicates_and_unknowns() {
        assert!(matches!(
            JointPmf::new(vec![bit("X"), bit("X")], vec![0.25; 4]),
            Err(Error::DuplicateVariable(_))
        ));
        assert!(matches!(
            sample().marginalize(&["Q"]),
            Err(Error::UnknownVariable(_))
        ));
        assert!(matches!(
            JointPmf::new(vec![bit("X")], vec![0.2, 0.7]),
            Err(Error::NotNormalized { .. })
        ));
    }
}
