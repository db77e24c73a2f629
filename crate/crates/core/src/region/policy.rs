use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::math::ln;
use crate::prob::{Alphabet, Kernel};
use crate::{var, Error, ProblemSpec, Result};

/// Largest `|V|` used by default; the Carathéodory bound is far larger than
/// any policy the erasure family needs.
pub const DEFAULT_MAX_V: usize = 16;

/// Auxiliary kernels of an achievable scheme: `p(a, u | z)` forward and
/// `p(v | a, u, y)` backward. In Heegard-Berger mode the forward kernel also
/// draws the Node 3 reconstruction, `p(a, u, xhat3 | z)`, and the backward
/// kernel sees it, `p(v | a, u, y, xhat3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    forward: Kernel,
    backward: Kernel,
}

/// Alphabet sizes of an assembled problem; `nw` is the Node 3 alphabet size,
/// 1 outside Heegard-Berger mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Dims {
    pub nx: usize,
    pub nz: usize,
    pub na: usize,
    pub nu: usize,
    pub nw: usize,
    pub ny: usize,
    pub nv: usize,
}

impl Dims {
    pub fn new(spec: &ProblemSpec, nu: usize, nv: usize) -> Self {
        Self {
            nx: spec.x().len(),
            nz: spec.z().len(),
            na: spec.a().len(),
            nu,
            nw: spec.xhat3().map_or(1, Alphabet::len),
            ny: spec.y().len(),
            nv,
        }
    }

    pub fn forward_row(&self) -> usize {
        self.na * self.nu * self.nw
    }

    pub fn backward_rows(&self) -> usize {
        self.na * self.nu * self.ny * self.nw
    }
}

/// `(|U|, |V|)` with `|U| = |Z||A| + 3` and `|V| = min(|U||Y||A| + 1, 16)`.
pub fn default_cardinalities(spec: &ProblemSpec) -> (usize, usize) {
    let nu = spec.z().len() * spec.a().len() + 3;
    let nv = (nu * spec.y().len() * spec.a().len() + 1).min(DEFAULT_MAX_V);
    (nu, nv)
}

/// The cardinality bounds `|U| <= |Z||A| + 3`, `|V| <= |U||Y||A| + 1`.
pub fn cardinality_bounds(spec: &ProblemSpec, nu: usize) -> (usize, usize) {
    (
        spec.z().len() * spec.a().len() + 3,
        nu * spec.y().len() * spec.a().len() + 1,
    )
}

impl Policy {
    pub fn new(forward: Kernel, backward: Kernel) -> Result<Self> {
        let names = |v: &[Alphabet]| v.iter().map(|a| a.name().into()).collect::<Vec<alloc::string::String>>();
        let fin = names(forward.inputs());
        let fout = names(forward.outputs());
        let bin = names(backward.inputs());
        let bout = names(backward.outputs());
        let hb = fout.len() == 3;
        let ok = fin == [var::Z]
            && (fout == [var::A, var::U] || fout == [var::A, var::U, var::XHAT3])
            && bout == [var::V]
            && if hb {
                bin == [var::A, var::U, var::Y, var::XHAT3]
            } else {
                bin == [var::A, var::U, var::Y]
            };
        if !ok {
            return Err(Error::AlphabetMismatch {
                what: "policy".into(),
                detail: format!(
                    "expected p(A,U[,X3]|Z) and p(V|A,U,Y[,X3]), got p({}|{}) and p({}|{})",
                    fout.join(","),
                    fin.join(","),
                    bout.join(","),
                    bin.join(",")
                ),
            });
        }
        let same = |a: &Alphabet, b: &Alphabet, what: &str| {
            if a.same_symbols(b) {
                Ok(())
            } else {
                Err(Error::AlphabetMismatch {
                    what: "policy".into(),
                    detail: format!("forward and backward kernels disagree on {what}"),
                })
            }
        };
        same(&forward.outputs()[0], &backward.inputs()[0], "A")?;
        same(&forward.outputs()[1], &backward.inputs()[1], "U")?;
        if hb {
            same(&forward.outputs()[2], &backward.inputs()[3], "X3")?;
        }
        Ok(Self { forward, backward })
    }

    /// Builds a policy from `fwd(z, a, u, xhat3)` and `bwd(a, u, y, xhat3, v)`;
    /// `xhat3` is always 0 outside Heegard-Berger mode.
    pub fn from_fn<F, B>(spec: &ProblemSpec, u: Alphabet, v: Alphabet, fwd: F, bwd: B) -> Result<Self>
    where
        F: Fn(usize, usize, usize, usize) -> f64,
        B: Fn(usize, usize, usize, usize, usize) -> f64,
    {
        let u = u.renamed(var::U);
        let v = v.renamed(var::V);
        let mut fout = vec![spec.a().clone(), u.clone()];
        let mut bin = vec![spec.a().clone(), u, spec.y().clone()];
        if let Some(w) = spec.xhat3() {
            fout.push(w.clone());
            bin.push(w.clone());
        }
        let hb = spec.xhat3().is_some();
        let forward = Kernel::from_fn(vec![spec.z().clone()], fout, |i, o| {
            fwd(i[0], o[0], o[1], if hb { o[2] } else { 0 })
        })?;
        let backward = Kernel::from_fn(bin, vec![v], |i, o| {
            bwd(i[0], i[1], i[2], if hb { i[3] } else { 0 }, o[0])
        })?;
        Self::new(forward, backward)
    }

    /// Both kernels drawn row by row from a flat Dirichlet distribution.
    pub fn random<R: Rng + ?Sized>(spec: &ProblemSpec, nu: usize, nv: usize, rng: &mut R) -> Result<Self> {
        let dims = Dims::new(spec, nu, nv);
        let forward = dirichlet_rows(rng, dims.nz, dims.forward_row());
        let backward = dirichlet_rows(rng, dims.backward_rows(), nv);
        Self::from_tables(spec, nu, nv, forward, backward)
    }

    /// Wraps flat tables laid out as `[z][a][u][xhat3]` and
    /// `[a][u][y][xhat3][v]`.
    pub fn from_tables(spec: &ProblemSpec, nu: usize, nv: usize, forward: Vec<f64>, backward: Vec<f64>) -> Result<Self> {
        let u = Alphabet::indexed(var::U, "u", nu)?;
        let v = Alphabet::indexed(var::V, "v", nv)?;
        let mut fout = vec![spec.a().clone(), u.clone()];
        let mut bin = vec![spec.a().clone(), u, spec.y().clone()];
        if let Some(w) = spec.xhat3() {
            fout.push(w.clone());
            bin.push(w.clone());
        }
        Self::new(
            Kernel::new(vec![spec.z().clone()], fout, forward)?,
            Kernel::new(bin, vec![v], backward)?,
        )
    }

    pub fn forward(&self) -> &Kernel {
        &self.forward
    }

    pub fn backward(&self) -> &Kernel {
        &self.backward
    }

    pub fn u(&self) -> &Alphabet {
        &self.forward.outputs()[1]
    }

    pub fn v(&self) -> &Alphabet {
        &self.backward.outputs()[0]
    }

    pub fn xhat3(&self) -> Option<&Alphabet> {
        self.forward.outputs().get(2)
    }

    pub(crate) fn dims(&self, spec: &ProblemSpec) -> Dims {
        Dims::new(spec, self.u().len(), self.v().len())
    }

    /// Checks that the kernels are built over the spec's alphabets.
    pub fn check_against(&self, spec: &ProblemSpec) -> Result<()> {
        let mismatch = |detail: &str| Error::AlphabetMismatch {
            what: "policy vs spec".into(),
            detail: detail.into(),
        };
        if self.xhat3().is_some() != spec.xhat3().is_some() {
            return Err(mismatch(if spec.xhat3().is_some() {
                "heegard-berger spec needs a policy drawing X3"
            } else {
                "policy draws X3 but the spec has no Node 3"
            }));
        }
        if !self.forward.inputs()[0].same_symbols(spec.z()) {
            return Err(mismatch("forward kernel input differs from Z"));
        }
        if !self.forward.outputs()[0].same_symbols(spec.a()) {
            return Err(mismatch("forward kernel action alphabet differs from A"));
        }
        if !self.backward.inputs()[2].same_symbols(spec.y()) {
            return Err(mismatch("backward kernel input differs from Y"));
        }
        if let (Some(p), Some(s)) = (self.xhat3(), spec.xhat3()) {
            if !p.same_symbols(s) {
                return Err(mismatch("X3 alphabet differs from the Node 3 reconstruction"));
            }
        }
        Ok(())
    }

    /// Enforces `|U| <= |Z||A| + 3` and `|V| <= |U||Y||A| + 1`.
    pub fn check_cardinality(&self, spec: &ProblemSpec) -> Result<()> {
        let (max_u, max_v) = cardinality_bounds(spec, self.u().len());
        if self.u().len() > max_u || self.v().len() > max_v {
            return Err(Error::Config(format!(
                "|U| = {}, |V| = {} exceed the bounds {max_u}, {max_v}",
                self.u().len(),
                self.v().len()
            )));
        }
        Ok(())
    }

    /// Relabels auxiliary symbols: new symbol `u_perm[u]` carries what `u`
    /// carried, likewise for `v`.
    pub fn permuted(&self, u_perm: &[usize], v_perm: &[usize]) -> Result<Self> {
        self.remapped(u_perm, self.u().len(), v_perm, self.v().len())
    }

    /// Embeds the policy into larger auxiliary alphabets; the new symbols get
    /// zero probability.
    pub fn embedded(&self, nu: usize, nv: usize) -> Result<Self> {
        if nu < self.u().len() || nv < self.v().len() {
            return Err(Error::Config("embedding cannot shrink alphabets".into()));
        }
        let u: Vec<usize> = (0..self.u().len()).collect();
        let v: Vec<usize> = (0..self.v().len()).collect();
        self.remapped(&u, nu, &v, nv)
    }

    fn remapped(&self, u_map: &[usize], nu_new: usize, v_map: &[usize], nv_new: usize) -> Result<Self> {
        let (na, nu, nv) = (self.forward.outputs()[0].len(), self.u().len(), self.v().len());
        let nw = self.xhat3().map_or(1, Alphabet::len);
        let nz = self.forward.inputs()[0].len();
        let ny = self.backward.inputs()[2].len();
        if u_map.len() != nu || v_map.len() != nv {
            return Err(Error::Config("relabeling must cover every symbol".into()));
        }
        let mut fwd = vec![0.0; nz * na * nu_new * nw];
        for z in 0..nz {
            for a in 0..na {
                for u in 0..nu {
                    for w in 0..nw {
                        fwd[((z * na + a) * nu_new + u_map[u]) * nw + w] =
                            self.forward.table()[((z * na + a) * nu + u) * nw + w];
                    }
                }
            }
        }
        // Rows for unused u symbols are never reached; give them a point mass.
        let mut bwd = vec![0.0; na * nu_new * ny * nw * nv_new];
        for a in 0..na {
            for un in 0..nu_new {
                for y in 0..ny {
                    for w in 0..nw {
                        let dst = ((a * nu_new + un) * ny + y) * nw + w;
                        match u_map.iter().position(|&m| m == un) {
                            Some(u) => {
                                let src = ((a * nu + u) * ny + y) * nw + w;
                                for v in 0..nv {
                                    bwd[dst * nv_new + v_map[v]] = self.backward.table()[src * nv + v];
                                }
                            }
                            None => bwd[dst * nv_new] = 1.0,
                        }
                    }
                }
            }
        }
        let u_alpha = if nu_new == nu {
            let mut s = vec![""; nu];
            for (u, &m) in u_map.iter().enumerate() {
                s[m] = self.u().symbol(u);
            }
            Alphabet::new(var::U, s)?
        } else {
            Alphabet::indexed(var::U, "u", nu_new)?
        };
        let v_alpha = if nv_new == nv {
            let mut s = vec![""; nv];
            for (v, &m) in v_map.iter().enumerate() {
                s[m] = self.v().symbol(v);
            }
            Alphabet::new(var::V, s)?
        } else {
            Alphabet::indexed(var::V, "v", nv_new)?
        };
        let mut fout = vec![self.forward.outputs()[0].clone(), u_alpha.clone()];
        let mut bin = vec![self.forward.outputs()[0].clone(), u_alpha, self.backward.inputs()[2].clone()];
        if let Some(w) = self.xhat3() {
            fout.push(w.clone());
            bin.push(w.clone());
        }
        Self::new(
            Kernel::new(self.forward.inputs().to_vec(), fout, fwd)?,
            Kernel::new(bin, vec![v_alpha], bwd)?,
        )
    }
}

/// Rows drawn from Dirichlet(1, ..., 1) via normalized exponentials.
pub(crate) fn dirichlet_rows<R: Rng + ?Sized>(rng: &mut R, rows: usize, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * len);
    for _ in 0..rows {
        let start = out.len();
        for _ in 0..len {
            let u: f64 = rng.random();
            out.push(-ln(1.0 - u));
        }
        let s: f64 = out[start..].iter().sum();
        out[start..].iter_mut().for_each(|p| *p /= s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::binary_erasure_spec;
    use crate::region::evaluate_point;
    use crate::ErasureParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec() -> ProblemSpec {
        binary_erasure_spec(ErasureParams::new(0.2).unwrap())
    }

    #[test]
    fn default_cardinalities_of_the_example() {
        assert_eq!(default_cardinalities(&spec()), (9, 16));
        assert_eq!(cardinality_bounds(&spec(), 9), (9, 55));
    }

    #[test]
    fn embedding_preserves_the_operating_point() {
        let s = spec();
        let p = Policy::random(&s, 2, 3, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let e = p.embedded(5, 7).unwrap();
        assert_eq!((e.u().len(), e.v().len()), (5, 7));
        let (a, b) = (evaluate_point(&s, &p).unwrap(), evaluate_point(&s, &e).unwrap());
        assert!((a.r1 - b.r1).abs() < 1e-12 && (a.r2 - b.r2).abs() < 1e-12);
        assert!((a.d1 - b.d1).abs() < 1e-12 && (a.d2 - b.d2).abs() < 1e-12);
        assert!(p.embedded(1, 3).is_err());
    }

    #[test]
    fn cardinality_check() {
        let s = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(Policy::random(&s, 9, 55, &mut rng).unwrap().check_cardinality(&s).is_ok());
        assert!(Policy::random(&s, 10, 2, &mut rng).unwrap().check_cardinality(&s).is_err());
    }

    #[test]
    fn tables_must_have_the_right_shape() {
        let s = spec();
        let err = Policy::from_tables(&s, 2, 2, vec![0.25; 11], vec![0.5; 24]).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }), "{err:?}");
    }

    #[test]
    fn random_rows_are_stochastic() {
        let rows = dirichlet_rows(&mut ChaCha8Rng::seed_from_u64(1), 4, 5);
        for r in rows.chunks(5) {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(r.iter().all(|&p| p > 0.0));
        }
    }
}
