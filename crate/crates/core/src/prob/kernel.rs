use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{product, Alphabet, NORMALIZATION_TOL};
use crate::{Error, Result};

/// A probability mass function over one alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    alphabet: Alphabet,
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(alphabet: Alphabet, probs: Vec<f64>) -> Result<Self> {
        let what = format!("pmf over `{}`", alphabet.name());
        check_row(&what, "0", &probs, alphabet.len(), 0)?;
        Ok(Self { alphabet, probs })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// A stochastic kernel from a tuple of input alphabets to a tuple of output
/// alphabets, stored as one row per input tuple.
///
/// Both the row index and the position within a row are mixed-radix over the
/// respective alphabets, first alphabet most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    inputs: Vec<Alphabet>,
    outputs: Vec<Alphabet>,
    table: Vec<f64>,
}

impl Kernel {
    pub fn new(inputs: Vec<Alphabet>, outputs: Vec<Alphabet>, table: Vec<f64>) -> Result<Self> {
        if outputs.is_empty() {
            return Err(Error::EmptySet("kernel outputs"));
        }
        let what = kernel_name(&inputs, &outputs);
        let rows = product(&inputs.iter().map(Alphabet::len).collect::<Vec<_>>());
        let row_len = product(&outputs.iter().map(Alphabet::len).collect::<Vec<_>>());
        if table.len() != rows * row_len {
            return Err(Error::Shape {
                what,
                expected: rows * row_len,
                found: table.len(),
            });
        }
        for r in 0..rows {
            let row = &table[r * row_len..(r + 1) * row_len];
            check_row(&what, &row_label(&inputs, r), row, row_len, r * row_len)?;
        }
        Ok(Self {
            inputs,
            outputs,
            table,
        })
    }

    /// Builds the table from `f(input indices, output indices)`.
    pub fn from_fn<F>(inputs: Vec<Alphabet>, outputs: Vec<Alphabet>, mut f: F) -> Result<Self>
    where
        F: FnMut(&[usize], &[usize]) -> f64,
    {
        let in_dims: Vec<usize> = inputs.iter().map(Alphabet::len).collect();
        let out_dims: Vec<usize> = outputs.iter().map(Alphabet::len).collect();
        let mut table = Vec::with_capacity(product(&in_dims) * product(&out_dims));
        let mut ic = alloc::vec![0usize; in_dims.len()];
        for _ in 0..product(&in_dims) {
            let mut oc = alloc::vec![0usize; out_dims.len()];
            for _ in 0..product(&out_dims) {
                table.push(f(&ic, &oc));
                advance(&mut oc, &out_dims);
            }
            advance(&mut ic, &in_dims);
        }
        Self::new(inputs, outputs, table)
    }

    pub fn inputs(&self) -> &[Alphabet] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Alphabet] {
        &self.outputs
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn row_len(&self) -> usize {
        self.outputs.iter().map(Alphabet::len).product()
    }

    pub fn num_rows(&self) -> usize {
        self.inputs.iter().map(Alphabet::len).product()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        let n = self.row_len();
        &self.table[index * n..(index + 1) * n]
    }

    /// Row index of an input tuple.
    pub fn row_index(&self, input: &[usize]) -> usize {
        input
            .iter()
            .zip(&self.inputs)
            .fold(0, |acc, (&i, a)| acc * a.len() + i)
    }
}

/// Mixed-radix increment, last digit fastest. Wraps to all zeros.
pub(crate) fn advance(coord: &mut [usize], dims: &[usize]) {
    for k in (0..coord.len()).rev() {
        coord[k] += 1;
        if coord[k] < dims[k] {
            return;
        }
        coord[k] = 0;
    }
}

pub(crate) fn check_row(
    what: &str,
    row: &str,
    probs: &[f64],
    expected_len: usize,
    offset: usize,
) -> Result<()> {
    if probs.len() != expected_len {
        return Err(Error::Shape {
            what: what.into(),
            expected: expected_len,
            found: probs.len(),
        });
    }
    let mut sum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::InvalidProbability {
                what: what.into(),
                index: offset + i,
                value: p,
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized {
            what: what.into(),
            row: row.into(),
            sum,
        });
    }
    Ok(())
}

fn kernel_name(inputs: &[Alphabet], outputs: &[Alphabet]) -> String {
    let join = |v: &[Alphabet]| {
        v.iter()
            .map(Alphabet::name)
            .collect::<Vec<_>>()
            .join(",")
    };
    format!("kernel p({} | {})", join(outputs), join(inputs))
}

fn row_label(inputs: &[Alphabet], mut row: usize) -> String {
    if inputs.is_empty() {
        return String::from("()");
    }
    let mut parts = alloc::vec![""; inputs.len()];
    for (k, a) in inputs.iter().enumerate().rev() {
        parts[k] = a.symbol(row % a.len());
        row /= a.len();
    }
    parts.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bit(name: &str) -> Alphabet {
        Alphabet::new(name, ["0", "1"]).unwrap()
    }

    #[test]
    fn pmf_rejects_bad_mass() {
        assert!(Pmf::new(bit("X"), alloc::vec![0.5, 0.5]).is_ok());
        assert!(matches!(
            Pmf::new(bit("X"), alloc::vec![0.5, 0.4]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            Pmf::new(bit("X"), alloc::vec![1.5, -0.5]),
            Err(Error::InvalidProbability { .. })
        ));
    }

    #[test]
    fn kernel_names_the_failing_row() {
        let err = Kernel::new(
            alloc::vec![bit("A"), bit("X")],
            alloc::vec![bit("Y")],
            alloc::vec![1.0, 0.0, 0.5, 0.5, 0.0, 1.0, 0.9, 0.0],
        )
        .unwrap_err();
        match err {
            Error::NotNormalized { row, .. } => assert_eq!(row, "1,1"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn from_fn_and_row_index_agree() {
        let k = Kernel::from_fn(
            alloc::vec![bit("A"), bit("X")],
            alloc::vec![bit("Y")],
            |i, o| if (i[0] & i[1]) == o[0] { 1.0 } else { 0.0 },
        )
        .unwrap();
        assert_eq!(k.row(k.row_index(&[1, 1])), &[0.0, 1.0]);
        assert_eq!(k.row(k.row_index(&[1, 0])), &[1.0, 0.0]);
    }
}
