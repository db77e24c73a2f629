//! JSON documents for problem specs and policies.
//!
//! Kernel rows are keyed by their input tuple, symbols joined with commas.
//! Distortion tables are sparse: cells not listed take `default`, omitted
//! coordinates match every symbol, and `"inf"` marks a forbidden cell.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use vendingrd_core::model::DistortionTable;
use vendingrd_core::{var, Alphabet, Kernel, Mode, Policy, ProblemSpec, SpecParts};

use crate::CliError;

/// A real number written as a JSON number or a decimal string; `"inf"` is
/// accepted and written back for infinite values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() && self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        let v = match Raw::deserialize(d)? {
            Raw::Number(v) => v,
            Raw::Text(t) if t.trim() == "inf" => f64::INFINITY,
            Raw::Text(t) => t
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| serde::de::Error::custom(format!("`{t}` is not a decimal number")))?,
        };
        Ok(Num(v))
    }
}

fn nums(v: &[Num]) -> Vec<f64> {
    v.iter().map(|n| n.0).collect()
}

fn to_nums(v: &[f64]) -> Vec<Num> {
    v.iter().copied().map(Num).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpecDoc {
    pub mode: String,
    pub alphabets: AlphabetsDoc,
    pub source: SourceDoc,
    /// `"a,x,z"` -> `p(y | a, x, z)` over the `Y` alphabet.
    pub vending: BTreeMap<String, Vec<Num>>,
    /// Action symbol -> cost.
    pub cost: BTreeMap<String, Num>,
    pub metrics: MetricsDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AlphabetsDoc {
    #[serde(rename = "X")]
    pub x: Vec<String>,
    #[serde(rename = "Z")]
    pub z: Vec<String>,
    #[serde(rename = "Y")]
    pub y: Vec<String>,
    #[serde(rename = "A")]
    pub a: Vec<String>,
    #[serde(rename = "Xhat1")]
    pub xhat1: Vec<String>,
    #[serde(rename = "Xhat2")]
    pub xhat2: Vec<String>,
    #[serde(rename = "Xhat3", default, skip_serializing_if = "Option::is_none")]
    pub xhat3: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SourceDoc {
    /// `["X", "Z"]` or `["Z", "X"]`; the last variable runs fastest in
    /// `table`.
    pub variables: Vec<String>,
    pub table: Vec<Num>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MetricsDoc {
    pub d1: MetricDoc,
    pub d2: MetricDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d3: Option<MetricDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MetricDoc {
    #[serde(default = "zero")]
    pub default: Num,
    #[serde(default)]
    pub cells: Vec<CellDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CellDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<String>,
    pub xhat: String,
    pub value: Num,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PolicyDoc {
    pub u: Vec<String>,
    pub v: Vec<String>,
    /// `"z"` -> `p(a, u[, xhat3] | z)` flattened with the last variable
    /// fastest.
    pub forward: BTreeMap<String, Vec<Num>>,
    /// `"a,u,y[,xhat3]"` -> `p(v | ...)`.
    pub backward: BTreeMap<String, Vec<Num>>,
}

fn zero() -> Num {
    Num(0.0)
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn index_of(alpha: &[String], sym: &str, field: &str) -> Result<usize, CliError> {
    alpha
        .iter()
        .position(|s| s == sym)
        .ok_or_else(|| input(format!("{field}: unknown symbol `{sym}` (expected one of {alpha:?})")))
}

fn key_parts<'a>(key: &'a str, n: usize, field: &str) -> Result<Vec<&'a str>, CliError> {
    let parts: Vec<&str> = key.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(input(format!("{field}: key `{key}` needs {n} comma-separated symbols")));
    }
    Ok(parts)
}

fn alphabet(name: &str, symbols: &[String], field: &str) -> Result<Alphabet, CliError> {
    Alphabet::new(name, symbols.iter().cloned()).map_err(|e| input(format!("{field}: {e}")))
}

/// Fills a dense table from rows keyed by input tuples; every row must be
/// present exactly once.
fn dense_rows(
    rows: &BTreeMap<String, Vec<Num>>,
    inputs: &[&[String]],
    row_len: usize,
    field: &str,
) -> Result<Vec<f64>, CliError> {
    let n_rows: usize = inputs.iter().map(|a| a.len()).product();
    let mut table = vec![f64::NAN; n_rows * row_len];
    for (key, row) in rows {
        let parts = key_parts(key, inputs.len(), field)?;
        let mut idx = 0;
        for (p, alpha) in parts.iter().zip(inputs) {
            idx = idx * alpha.len() + index_of(alpha, p, &format!("{field}[\"{key}\"]"))?;
        }
        if row.len() != row_len {
            return Err(input(format!(
                "{field}[\"{key}\"]: expected {row_len} entries, found {}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.0.is_finite()) {
            return Err(input(format!("{field}[\"{key}\"][{j}]: probabilities must be finite")));
        }
        table[idx * row_len..(idx + 1) * row_len].copy_from_slice(&nums(row));
    }
    if let Some(missing) = table.chunks(row_len).position(|r| r[0].is_nan()) {
        let mut rest = missing;
        let mut syms = Vec::new();
        for alpha in inputs.iter().rev() {
            syms.push(alpha[rest % alpha.len()].clone());
            rest /= alpha.len();
        }
        syms.reverse();
        return Err(input(format!("{field}: missing row `{}`", syms.join(","))));
    }
    Ok(table)
}

fn metric_table(doc: &MetricDoc, al: &AlphabetsDoc, recon: &[String], field: &str) -> Result<Vec<f64>, CliError> {
    let (nx, ny, nz, nk) = (al.x.len(), al.y.len(), al.z.len(), recon.len());
    if !(doc.default.0.is_finite() && doc.default.0 >= 0.0) {
        return Err(input(format!("{field}.default must be finite and non-negative")));
    }
    let mut t = vec![doc.default.0; nx * ny * nz * nk];
    for (i, c) in doc.cells.iter().enumerate() {
        let at = format!("{field}.cells[{i}]");
        let value = c.value.0;
        if value < 0.0 {
            return Err(input(format!("{at}.value must be non-negative")));
        }
        let pick = |sym: &Option<String>, alpha: &[String], name: &str| -> Result<Vec<usize>, CliError> {
            match sym {
                None => Ok((0..alpha.len()).collect()),
                Some(s) => Ok(vec![index_of(alpha, s, &format!("{at}.{name}"))?]),
            }
        };
        let k = index_of(recon, &c.xhat, &format!("{at}.xhat"))?;
        for x in pick(&c.x, &al.x, "x")? {
            for y in pick(&c.y, &al.y, "y")? {
                for z in pick(&c.z, &al.z, "z")? {
                    t[((x * ny + y) * nz + z) * nk + k] = value;
                }
            }
        }
    }
    Ok(t)
}

impl SpecDoc {
    pub fn to_spec(&self) -> Result<ProblemSpec, CliError> {
        let mode = Mode::parse(&self.mode)
            .ok_or_else(|| input(format!("mode: unknown mode `{}` (direct, indirect, heegard-berger)", self.mode)))?;
        let al = &self.alphabets;
        let (nx, nz, ny) = (al.x.len(), al.z.len(), al.y.len());

        let source = match self.source.variables.iter().map(String::as_str).collect::<Vec<_>>()[..] {
            ["X", "Z"] | ["Z", "X"] => {
                let x_first = self.source.variables[0] == "X";
                if self.source.table.len() != nx * nz {
                    return Err(input(format!(
                        "source.table: expected {} entries, found {}",
                        nx * nz,
                        self.source.table.len()
                    )));
                }
                let mut t = vec![0.0; nx * nz];
                for (i, p) in self.source.table.iter().enumerate() {
                    let (x, z) = if x_first { (i / nz, i % nz) } else { (i % nx, i / nx) };
                    t[x * nz + z] = p.0;
                }
                t
            }
            _ => return Err(input("source.variables must be [\"X\", \"Z\"] or [\"Z\", \"X\"]")),
        };

        let vending = dense_rows(&self.vending, &[&al.a, &al.x, &al.z], ny, "vending")?;
        let mut cost = vec![f64::NAN; al.a.len()];
        for (sym, c) in &self.cost {
            cost[index_of(&al.a, sym, "cost")?] = c.0;
        }
        if let Some(i) = cost.iter().position(|c| c.is_nan()) {
            return Err(input(format!("cost: missing action `{}`", al.a[i])));
        }

        let d3 = match (&self.metrics.d3, &al.xhat3) {
            (Some(m), Some(recon)) => Some(metric_table(m, al, recon, "metrics.d3")?),
            (None, None) => None,
            (Some(_), None) => return Err(input("metrics.d3 needs alphabets.Xhat3")),
            (None, Some(_)) => return Err(input("alphabets.Xhat3 needs metrics.d3")),
        };
        let parts = SpecParts {
            mode,
            x: alphabet(var::X, &al.x, "alphabets.X")?,
            z: alphabet(var::Z, &al.z, "alphabets.Z")?,
            y: alphabet(var::Y, &al.y, "alphabets.Y")?,
            a: alphabet(var::A, &al.a, "alphabets.A")?,
            xhat1: alphabet("Xhat1", &al.xhat1, "alphabets.Xhat1")?,
            xhat2: alphabet("Xhat2", &al.xhat2, "alphabets.Xhat2")?,
            xhat3: al.xhat3.as_ref().map(|s| alphabet(var::XHAT3, s, "alphabets.Xhat3")).transpose()?,
            source,
            vending,
            cost,
            d1: metric_table(&self.metrics.d1, al, &al.xhat1, "metrics.d1")?,
            d2: metric_table(&self.metrics.d2, al, &al.xhat2, "metrics.d2")?,
            d3,
        };
        ProblemSpec::new(parts).map_err(|e| input(format!("spec: {e}")))
    }

    pub fn from_spec(spec: &ProblemSpec) -> Self {
        let syms = |a: &Alphabet| a.symbols().to_vec();
        let al = AlphabetsDoc {
            x: syms(spec.x()),
            z: syms(spec.z()),
            y: syms(spec.y()),
            a: syms(spec.a()),
            xhat1: syms(spec.xhat1()),
            xhat2: syms(spec.xhat2()),
            xhat3: spec.xhat3().map(syms),
        };
        let ny = al.y.len();
        let table = to_nums(spec.source().table());
        let mut vending = BTreeMap::new();
        for (a, sa) in al.a.iter().enumerate() {
            for (x, sx) in al.x.iter().enumerate() {
                for (z, sz) in al.z.iter().enumerate() {
                    let row = (0..ny).map(|y| Num(spec.vending_prob(a, x, z, y))).collect();
                    vending.insert(format!("{sa},{sx},{sz}"), row);
                }
            }
        }
        let cost = al.a.iter().cloned().zip(spec.cost().iter().copied().map(Num)).collect();
        let metric = |m: &DistortionTable| {
            let mut cells = Vec::new();
            for (x, sx) in al.x.iter().enumerate() {
                for (y, sy) in al.y.iter().enumerate() {
                    for (z, sz) in al.z.iter().enumerate() {
                        for (k, sk) in m.reconstruction().symbols().iter().enumerate() {
                            let v = m.get(x, y, z, k);
                            if v != 0.0 {
                                cells.push(CellDoc {
                                    x: Some(sx.clone()),
                                    y: Some(sy.clone()),
                                    z: Some(sz.clone()),
                                    xhat: sk.clone(),
                                    value: Num(v),
                                });
                            }
                        }
                    }
                }
            }
            MetricDoc { default: Num(0.0), cells }
        };
        let metrics = MetricsDoc {
            d1: metric(spec.d1()),
            d2: metric(spec.d2()),
            d3: spec.d3().map(metric),
        };
        Self {
            mode: spec.mode().as_str().into(),
            alphabets: al,
            source: SourceDoc {
                variables: vec!["X".into(), "Z".into()],
                table,
            },
            vending,
            cost,
            metrics,
        }
    }
}

impl PolicyDoc {
    pub fn to_policy(&self, spec: &ProblemSpec) -> Result<Policy, CliError> {
        let u = alphabet(var::U, &self.u, "u")?;
        let v = alphabet(var::V, &self.v, "v")?;
        let syms = |a: &Alphabet| a.symbols().to_vec();
        let (a, y, z) = (syms(spec.a()), syms(spec.y()), syms(spec.z()));
        let w = spec.xhat3().map(syms);
        let nw = w.as_ref().map_or(1, Vec::len);
        let fwd = dense_rows(&self.forward, &[&z], a.len() * self.u.len() * nw, "forward")?;
        let mut bin: Vec<&[String]> = vec![&a, &self.u, &y];
        if let Some(w) = &w {
            bin.push(w);
        }
        let bwd = dense_rows(&self.backward, &bin, self.v.len(), "backward")?;
        let mut fout = vec![spec.a().clone(), u.clone()];
        let mut bins = vec![spec.a().clone(), u, spec.y().clone()];
        if let Some(x3) = spec.xhat3() {
            fout.push(x3.clone());
            bins.push(x3.clone());
        }
        let forward = Kernel::new(vec![spec.z().clone()], fout, fwd).map_err(|e| input(format!("forward: {e}")))?;
        let backward = Kernel::new(bins, vec![v], bwd).map_err(|e| input(format!("backward: {e}")))?;
        Policy::new(forward, backward).map_err(|e| input(format!("policy: {e}")))
    }

    pub fn from_policy(policy: &Policy) -> Self {
        let rows = |k: &Kernel| {
            let mut out = BTreeMap::new();
            let ins = k.inputs();
            for r in 0..k.num_rows() {
                let mut rest = r;
                let mut syms = Vec::with_capacity(ins.len());
                for a in ins.iter().rev() {
                    syms.push(a.symbols()[rest % a.len()].clone());
                    rest /= a.len();
                }
                syms.reverse();
                out.insert(syms.join(","), to_nums(k.row(r)));
            }
            out
        };
        Self {
            u: policy.u().symbols().to_vec(),
            v: policy.v().symbols().to_vec(),
            forward: rows(policy.forward()),
            backward: rows(policy.backward()),
        }
    }
}

/// Parses JSON, reporting the line and column of syntax and schema errors.
pub fn parse<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| input(format!("{what}: {e}")))
}

pub fn load_spec(path: &std::path::Path) -> Result<ProblemSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: SpecDoc = parse(&text, &path.display().to_string())?;
    doc.to_spec().map_err(|e| e.context(&path.display().to_string()))
}

pub fn load_policy(path: &std::path::Path, spec: &ProblemSpec) -> Result<Policy, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: PolicyDoc = parse(&text, &path.display().to_string())?;
    doc.to_policy(spec).map_err(|e| e.context(&path.display().to_string()))
}

pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use vendingrd_core::closed_form::{appendix_b_policy, CaseTag, ExampleCase};
    use vendingrd_core::model::{binary_erasure_spec, with_node3_erasure_metric};
    use vendingrd_core::ErasureParams;

    fn erasure() -> ProblemSpec {
        binary_erasure_spec(ErasureParams::new(0.2).unwrap())
    }

    #[test]
    fn spec_round_trip() {
        for spec in [erasure(), with_node3_erasure_metric(&erasure()).unwrap()] {
            let doc = SpecDoc::from_spec(&spec);
            let back: SpecDoc = parse(&to_json(&doc), "spec").unwrap();
            assert_eq!(back, doc);
            assert_eq!(back.to_spec().unwrap(), spec);
        }
    }

    #[test]
    fn policy_round_trip() {
        let spec = erasure();
        let c = ExampleCase::new(CaseTag::Case3, 0.2, 0.6, None).unwrap();
        let p = appendix_b_policy(&c).unwrap();
        let doc = PolicyDoc::from_policy(&p);
        let back: PolicyDoc = parse(&to_json(&doc), "policy").unwrap();
        assert_eq!(back.to_policy(&spec).unwrap(), p);
    }

    #[test]
    fn wildcard_cells_and_inf() {
        let mut doc = SpecDoc::from_spec(&erasure());
        doc.metrics.d1 = MetricDoc {
            default: Num(1.0),
            cells: vec![
                CellDoc { x: Some("0".into()), y: None, z: None, xhat: "0".into(), value: Num(0.0) },
                CellDoc { x: Some("1".into()), y: None, z: None, xhat: "1".into(), value: Num(0.0) },
            ],
        };
        let spec = doc.to_spec().unwrap();
        assert_eq!(spec.d1(), erasure().d1());
        doc.metrics.d2.cells[0].value = Num(f64::INFINITY);
        assert!(doc.to_spec().is_ok());
        doc.metrics.d2.cells[0].value = Num(-1.0);
        let err = doc.to_spec().unwrap_err().to_string();
        assert!(err.contains("metrics.d2.cells[0].value"), "{err}");
        let text = to_json(&doc).replace("-1.0", "\"big\"");
        let err = parse::<SpecDoc>(&text, "spec.json").unwrap_err().to_string();
        assert!(err.contains("spec.json"), "{err}");
    }

    #[test]
    fn errors_name_the_field() {
        let mut doc = SpecDoc::from_spec(&erasure());
        doc.vending.remove("1,0,e");
        let err = doc.to_spec().unwrap_err().to_string();
        assert!(err.contains("vending") && err.contains("1,0,e"), "{err}");

        let mut doc = SpecDoc::from_spec(&erasure());
        doc.cost.insert("2".into(), Num(3.0));
        assert!(doc.to_spec().unwrap_err().to_string().contains("cost"));

        let mut pol = PolicyDoc::from_policy(
            &appendix_b_policy(&ExampleCase::new(CaseTag::Case1, 0.2, 0.4, None).unwrap()).unwrap(),
        );
        let row = pol.forward.remove("e").unwrap();
        pol.forward.insert("E".into(), row);
        let err = pol.to_policy(&erasure()).unwrap_err().to_string();
        assert!(err.contains("forward") && err.contains("`E`"), "{err}");
    }

    #[test]
    fn decimal_strings_and_transposed_source() {
        let mut doc = SpecDoc::from_spec(&erasure());
        let text = to_json(&doc).replace("0.4", "\"0.4\"");
        let back: SpecDoc = parse(&text, "spec").unwrap();
        assert_eq!(back.to_spec().unwrap(), erasure());

        // [x][z] = [[0.4, 0, 0.1], [0, 0.4, 0.1]] read column-major
        let t = nums(&doc.source.table);
        doc.source.variables = vec!["Z".into(), "X".into()];
        doc.source.table = to_nums(&[t[0], t[3], t[1], t[4], t[2], t[5]]);
        assert_eq!(doc.to_spec().unwrap(), erasure());
    }

    #[test]
    fn unnormalized_row_is_named() {
        let mut doc = SpecDoc::from_spec(&erasure());
        doc.vending.get_mut("0,0,0").unwrap()[0] = Num(0.9);
        let err = doc.to_spec().unwrap_err().to_string();
        assert!(err.contains("0,0,0"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse::<SpecDoc>("{\n  \"mode\": 3\n}", "spec.json").unwrap_err().to_string();
        assert!(err.contains("spec.json") && err.contains("line 2"), "{err}");
    }
}
