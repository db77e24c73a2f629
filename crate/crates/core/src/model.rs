//! Problem instances: source statistics, the vending machine `p(y|a,x,z)`,
//! action costs and distortion metrics.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::prob::{Alphabet, JointPmf, Kernel};
use crate::{var, Error, Result};

/// Which single-letter characterization applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Node 1 observes the source itself (`Z = X`).
    Direct,
    /// Node 1 observes a noisy version `Z` of `X`.
    Indirect,
    /// Indirect, plus a Node 3 that decodes the forward message without side
    /// information.
    HeegardBerger,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Direct => "direct",
            Mode::Indirect => "indirect",
            Mode::HeegardBerger => "heegard-berger",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "direct" => Some(Mode::Direct),
            "indirect" => Some(Mode::Indirect),
            "heegard-berger" => Some(Mode::HeegardBerger),
            _ => None,
        }
    }
}

/// Distortion metric `d(x, y, z, xhat)` with values in `[0, inf]`.
///
/// `f64::INFINITY` marks a forbidden reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionTable {
    reconstruction: Alphabet,
    dims: [usize; 4],
    values: Vec<f64>,
}

impl DistortionTable {
    /// `values` is indexed `[x][y][z][xhat]`.
    pub fn new(
        reconstruction: Alphabet,
        nx: usize,
        ny: usize,
        nz: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let dims = [nx, ny, nz, reconstruction.len()];
        let expected = dims.iter().product();
        if values.len() != expected {
            return Err(Error::Shape {
                what: format!("distortion over `{}`", reconstruction.name()),
                expected,
                found: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::InvalidSpec(format!(
                "distortion over `{}` has invalid entry {v}",
                reconstruction.name()
            )));
        }
        Ok(Self {
            reconstruction,
            dims,
            values,
        })
    }

    pub fn from_fn<F>(reconstruction: Alphabet, nx: usize, ny: usize, nz: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, usize, usize, usize) -> f64,
    {
        let nk = reconstruction.len();
        let mut values = Vec::with_capacity(nx * ny * nz * nk);
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    for k in 0..nk {
                        values.push(f(x, y, z, k));
                    }
                }
            }
        }
        Self::new(reconstruction, nx, ny, nz, values)
    }

    pub fn reconstruction(&self) -> &Alphabet {
        &self.reconstruction
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize, xhat: usize) -> f64 {
        let [_, ny, nz, nk] = self.dims;
        self.values[((x * ny + y) * nz + z) * nk + xhat]
    }

    /// Largest finite entry (0 if none).
    pub fn max_finite(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max)
    }
}

/// Raw parts of a [`ProblemSpec`]; validated by [`ProblemSpec::new`].
#[derive(Debug, Clone)]
pub struct SpecParts {
    pub mode: Mode,
    pub x: Alphabet,
    pub z: Alphabet,
    pub y: Alphabet,
    pub a: Alphabet,
    pub xhat1: Alphabet,
    pub xhat2: Alphabet,
    pub xhat3: Option<Alphabet>,
    /// `p(x, z)`, indexed `[x][z]`.
    pub source: Vec<f64>,
    /// `p(y | a, x, z)`, rows indexed `[a][x][z]`.
    pub vending: Vec<f64>,
    /// `Λ(a)`.
    pub cost: Vec<f64>,
    /// `d_j` tables indexed `[x][y][z][xhat_j]`.
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Option<Vec<f64>>,
}

/// One instance of the two-way problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    mode: Mode,
    x: Alphabet,
    z: Alphabet,
    y: Alphabet,
    a: Alphabet,
    source: JointPmf,
    vending: Kernel,
    cost: Vec<f64>,
    d1: DistortionTable,
    d2: DistortionTable,
    d3: Option<DistortionTable>,
}

impl ProblemSpec {
    pub fn new(parts: SpecParts) -> Result<Self> {
        let x = parts.x.renamed(var::X);
        let z = parts.z.renamed(var::Z);
        let y = parts.y.renamed(var::Y);
        let a = parts.a.renamed(var::A);
        let (nx, ny, nz) = (x.len(), y.len(), z.len());

        let source = JointPmf::new(vec![x.clone(), z.clone()], parts.source)?;
        let vending = Kernel::new(
            vec![a.clone(), x.clone(), z.clone()],
            vec![y.clone()],
            parts.vending,
        )?;

        if parts.cost.len() != a.len() {
            return Err(Error::Shape {
                what: "action cost".into(),
                expected: a.len(),
                found: parts.cost.len(),
            });
        }
        if let Some(c) = parts.cost.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::InvalidSpec(format!(
                "action costs must be finite and nonnegative, found {c}"
            )));
        }

        let d1 = DistortionTable::new(parts.xhat1.renamed("Xhat1"), nx, ny, nz, parts.d1)?;
        let d2 = DistortionTable::new(parts.xhat2.renamed("Xhat2"), nx, ny, nz, parts.d2)?;
        let d3 = match (parts.mode, parts.xhat3, parts.d3) {
            (Mode::HeegardBerger, Some(alpha), Some(values)) => Some(DistortionTable::new(
                alpha.renamed(var::XHAT3),
                nx,
                ny,
                nz,
                values,
            )?),
            (Mode::HeegardBerger, _, _) => {
                return Err(Error::InvalidSpec(
                    "heegard-berger mode needs a Node 3 alphabet and metric".into(),
                ))
            }
            (_, None, None) => None,
            (_, _, _) => {
                return Err(Error::InvalidSpec(
                    "a Node 3 alphabet or metric is only meaningful in heegard-berger mode".into(),
                ))
            }
        };

        let spec = Self {
            mode: parts.mode,
            x,
            z,
            y,
            a,
            source,
            vending,
            cost: parts.cost,
            d1,
            d2,
            d3,
        };
        if spec.mode == Mode::Direct {
            spec.check_direct()?;
        }
        spec.check_metrics()?;
        Ok(spec)
    }

    fn check_direct(&self) -> Result<()> {
        if !self.x.same_symbols(&self.z) {
            return Err(Error::InvalidSpec(
                "direct mode requires identical X and Z alphabets".into(),
            ));
        }
        let n = self.x.len();
        for xi in 0..n {
            for zi in 0..n {
                if xi != zi && self.source.table()[xi * n + zi] > 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "direct mode requires Z = X, but p({}, {}) > 0",
                        self.x.symbol(xi),
                        self.z.symbol(zi)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Every reachable `(x, y, z)` must admit a finite reconstruction.
    fn check_metrics(&self) -> Result<()> {
        let (nx, ny, nz, na) = (self.x.len(), self.y.len(), self.z.len(), self.a.len());
        for (name, d) in self.metrics() {
            for x in 0..nx {
                for z in 0..nz {
                    if self.source.table()[x * nz + z] <= 0.0 {
                        continue;
                    }
                    for y in 0..ny {
                        let reachable = (0..na).any(|a| self.vending_prob(a, x, z, y) > 0.0);
                        let finite = (0..d.reconstruction.len()).any(|k| d.get(x, y, z, k).is_finite());
                        if reachable && !finite {
                            return Err(Error::InvalidSpec(format!(
                                "metric {name} has no finite reconstruction for (x={}, y={}, z={})",
                                self.x.symbol(x),
                                self.y.symbol(y),
                                self.z.symbol(z)
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn x(&self) -> &Alphabet {
        &self.x
    }

    pub fn z(&self) -> &Alphabet {
        &self.z
    }

    pub fn y(&self) -> &Alphabet {
        &self.y
    }

    pub fn a(&self) -> &Alphabet {
        &self.a
    }

    pub fn xhat1(&self) -> &Alphabet {
        self.d1.reconstruction()
    }

    pub fn xhat2(&self) -> &Alphabet {
        self.d2.reconstruction()
    }

    pub fn xhat3(&self) -> Option<&Alphabet> {
        self.d3.as_ref().map(DistortionTable::reconstruction)
    }

    /// `p(x, z)` as a joint over `(X, Z)`.
    pub fn source(&self) -> &JointPmf {
        &self.source
    }

    /// `p(y | a, x, z)`.
    pub fn vending(&self) -> &Kernel {
        &self.vending
    }

    #[inline]
    pub fn vending_prob(&self, a: usize, x: usize, z: usize, y: usize) -> f64 {
        let (nx, nz, ny) = (self.x.len(), self.z.len(), self.y.len());
        self.vending.table()[((a * nx + x) * nz + z) * ny + y]
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    /// `Λ_max`.
    pub fn max_cost(&self) -> f64 {
        self.cost.iter().copied().fold(0.0, f64::max)
    }

    pub fn d1(&self) -> &DistortionTable {
        &self.d1
    }

    pub fn d2(&self) -> &DistortionTable {
        &self.d2
    }

    pub fn d3(&self) -> Option<&DistortionTable> {
        self.d3.as_ref()
    }

    pub fn is_heegard_berger(&self) -> bool {
        self.mode == Mode::HeegardBerger
    }

    fn metrics(&self) -> impl Iterator<Item = (&'static str, &DistortionTable)> {
        [("d1", &self.d1), ("d2", &self.d2)]
            .into_iter()
            .chain(self.d3.as_ref().map(|d| ("d3", d)))
    }

    /// A distortion level every policy meets: the best constant
    /// reconstruction under the worst deterministic action,
    /// `min_xhat max_a E[d(X, Y, Z, xhat) | A = a]`.
    pub fn max_distortion(&self, metric: &DistortionTable) -> f64 {
        let (nx, ny, nz) = (self.x.len(), self.y.len(), self.z.len());
        let mut best = f64::INFINITY;
        for k in 0..metric.reconstruction.len() {
            let mut worst: f64 = 0.0;
            for a in 0..self.a.len() {
                let mut e = 0.0;
                for x in 0..nx {
                    for z in 0..nz {
                        let pxz = self.source.table()[x * nz + z];
                        for y in 0..ny {
                            let p = pxz * self.vending_prob(a, x, z, y);
                            if p > 0.0 {
                                e += p * metric.get(x, y, z, k);
                            }
                        }
                    }
                }
                worst = worst.max(e);
            }
            best = best.min(worst);
        }
        best
    }

    pub fn describe(&self) -> String {
        format!(
            "{} spec: |X|={} |Z|={} |Y|={} |A|={}",
            self.mode.as_str(),
            self.x.len(),
            self.z.len(),
            self.y.len(),
            self.a.len()
        )
    }
}

/// Erasure probability of the binary example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErasureParams {
    epsilon: f64,
}

impl ErasureParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Domain {
                what: "erasure probability",
                value: epsilon,
            });
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(self) -> f64 {
        self.epsilon
    }
}

/// Symbol of an erased source sample.
pub const ERASURE: &str = "e";
/// Side-information symbol when nothing is acquired.
pub const NOTHING: &str = "phi";
/// Node 3 "don't care" reproduction.
pub const DONT_CARE: &str = "*";

/// The binary erasure example: `X ~ Bern(1/2)`, `Z` an erased copy of `X`,
/// `Y = X` if `A = 1` and `Y = phi` otherwise, `Λ(a) = a`, Hamming metrics
/// `d1(x, xhat1)` and `d2(z, xhat2)`.
pub fn binary_erasure_spec(params: ErasureParams) -> ProblemSpec {
    let eps = params.epsilon;
    let bits = || Alphabet::new("", ["0", "1"]).unwrap();
    let z = Alphabet::new(var::Z, ["0", "1", ERASURE]).unwrap();
    let y = Alphabet::new(var::Y, ["0", "1", NOTHING]).unwrap();
    // p(x, z): z = x w.p. 1-eps, z = e w.p. eps
    let mut source = vec![0.0; 6];
    for x in 0..2 {
        source[x * 3 + x] = 0.5 * (1.0 - eps);
        source[x * 3 + 2] = 0.5 * eps;
    }
    let mut vending = vec![0.0; 2 * 2 * 3 * 3];
    for a in 0..2 {
        for x in 0..2 {
            for zi in 0..3 {
                let y = if a == 1 { x } else { 2 };
                vending[((a * 2 + x) * 3 + zi) * 3 + y] = 1.0;
            }
        }
    }
    let hamming = |n: usize, f: &dyn Fn(usize, usize, usize) -> usize| {
        let mut v = Vec::with_capacity(2 * 3 * 3 * n);
        for x in 0..2 {
            for yi in 0..3 {
                for zi in 0..3 {
                    for k in 0..n {
                        v.push(if f(x, yi, zi) == k { 0.0 } else { 1.0 });
                    }
                }
            }
        }
        v
    };
    ProblemSpec::new(SpecParts {
        mode: Mode::Indirect,
        x: bits(),
        z: z.clone(),
        y,
        a: bits(),
        xhat1: bits(),
        xhat2: z,
        xhat3: None,
        source,
        vending,
        cost: vec![0.0, 1.0],
        d1: hamming(2, &|x, _, _| x),
        d2: hamming(3, &|_, _, z| z),
        d3: None,
    })
    .expect("erasure example is a valid spec")
}

/// Adds Node 3 with reproduction alphabet `{0, 1, *}` and the erasure
/// distortion on the indicator `1{z = e}`: 0 for the correct indicator, 1 for
/// `*`, infinite for the wrong indicator.
pub fn with_node3_erasure_metric(spec: &ProblemSpec) -> Result<ProblemSpec> {
    let erased = spec.z.index_of(ERASURE);
    let ok = spec.mode == Mode::Indirect
        && spec.d3.is_none()
        && spec.x.len() == 2
        && spec.z.len() == 3
        && erased == Some(2);
    if !ok {
        return Err(Error::InvalidSpec(
            "the Node 3 erasure metric extends the binary erasure example only".into(),
        ));
    }
    let (nx, ny, nz) = (spec.x.len(), spec.y.len(), spec.z.len());
    let xhat3 = Alphabet::new(var::XHAT3, ["0", "1", DONT_CARE])?;
    let d3 = DistortionTable::from_fn(xhat3.clone(), nx, ny, nz, |_, _, z, k| {
        let indicator = usize::from(z == 2);
        if k == 2 {
            1.0
        } else if k == indicator {
            0.0
        } else {
            f64::INFINITY
        }
    })?;
    ProblemSpec::new(SpecParts {
        mode: Mode::HeegardBerger,
        x: spec.x.clone(),
        z: spec.z.clone(),
        y: spec.y.clone(),
        a: spec.a.clone(),
        xhat1: spec.xhat1().clone(),
        xhat2: spec.xhat2().clone(),
        xhat3: Some(xhat3),
        source: spec.source.table().to_vec(),
        vending: spec.vending.table().to_vec(),
        cost: spec.cost.clone(),
        d1: spec.d1.values.clone(),
        d2: spec.d2.values.clone(),
        d3: Some(d3.values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::entropy;

    #[test]
    fn erasure_source_marginal() {
        let spec = binary_erasure_spec(ErasureParams::new(0.2).unwrap());
        let z = spec.source().marginalize(&[var::Z]).unwrap();
        let t = z.table();
        assert!((t[2] - 0.2).abs() < 1e-15);
        assert!((t[0] - 0.4).abs() < 1e-15 && (t[1] - 0.4).abs() < 1e-15);
        let h = entropy(spec.source(), &[var::Z]).unwrap();
        assert!((h - 1.5219280949).abs() < 1e-10);
    }

    #[test]
    fn zero_erasure_copies_the_source() {
        let spec = binary_erasure_spec(ErasureParams::new(0.0).unwrap());
        let t = spec.source().table();
        assert_eq!(t, &[0.5, 0.0, 0.0, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn vending_rows_are_point_masses() {
        let spec = binary_erasure_spec(ErasureParams::new(0.3).unwrap());
        let k = spec.vending();
        for r in 0..k.num_rows() {
            let row = k.row(r);
            assert_eq!(row.iter().filter(|&&p| p == 1.0).count(), 1);
            assert_eq!(row.iter().filter(|&&p| p == 0.0).count(), row.len() - 1);
        }
    }

    #[test]
    fn erasure_params_domain() {
        assert!(ErasureParams::new(1.2).is_err());
        assert!(ErasureParams::new(-0.01).is_err());
    }

    #[test]
    fn max_distortions_of_the_example() {
        let spec = binary_erasure_spec(ErasureParams::new(0.2).unwrap());
        assert!((spec.max_distortion(spec.d1()) - 0.5).abs() < 1e-15);
        assert!((spec.max_distortion(spec.d2()) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn node3_metric_cells() {
        let base = binary_erasure_spec(ErasureParams::new(0.2).unwrap());
        let hb = with_node3_erasure_metric(&base).unwrap();
        assert_eq!(hb.mode(), Mode::HeegardBerger);
        let d3 = hb.d3().unwrap();
        // (z = e, xhat3 = 1) is the correct indicator
        assert_eq!(d3.get(0, 0, 2, 1), 0.0);
        // (z = 0, xhat3 = *)
        assert_eq!(d3.get(0, 0, 0, 2), 1.0);
        // (z = 0, xhat3 = 1) is forbidden
        assert!(d3.get(0, 0, 0, 1).is_infinite());
        assert_eq!(d3.get(1, 2, 1, 0), 0.0);
        assert!(with_node3_erasure_metric(&hb).is_err());
    }

    #[test]
    fn direct_mode_requires_diagonal_source() {
        let bit = || Alphabet::new("", ["0", "1"]).unwrap();
        let parts = |source: Vec<f64>| SpecParts {
            mode: Mode::Direct,
            x: bit(),
            z: bit(),
            y: bit(),
            a: bit(),
            xhat1: bit(),
            xhat2: bit(),
            xhat3: None,
            source,
            vending: vec![0.5; 16],
            cost: vec![0.0, 1.0],
            d1: vec![0.0; 16],
            d2: vec![0.0; 16],
            d3: None,
        };
        assert!(ProblemSpec::new(parts(vec![0.5, 0.0, 0.0, 0.5])).is_ok());
        assert!(matches!(
            ProblemSpec::new(parts(vec![0.4, 0.1, 0.0, 0.5])),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    #[allow(clippy::identity_op, clippy::erasing_op)]
    fn metric_without_finite_column_is_rejected() {
        let bit = || Alphabet::new("", ["0", "1"]).unwrap();
        let mut d1 = vec![0.0; 16];
        // (x=1, y=0, z=1): both reconstructions forbidden
        d1[((1 * 2 + 0) * 2 + 1) * 2] = f64::INFINITY;
        d1[((1 * 2 + 0) * 2 + 1) * 2 + 1] = f64::INFINITY;
        let err = ProblemSpec::new(SpecParts {
            mode: Mode::Direct,
            x: bit(),
            z: bit(),
            y: bit(),
            a: bit(),
            xhat1: bit(),
            xhat2: bit(),
            xhat3: None,
            source: vec![0.5, 0.0, 0.0, 0.5],
            vending: vec![0.5; 16],
            cost: vec![0.0, 1.0],
            d1,
            d2: vec![0.0; 16],
            d3: None,
        })
        .unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)));
    }
}
