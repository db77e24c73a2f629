//! Subcommands. Each returns the text it produced so `run` decides where it
//! goes; files and manifests are written here.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use vendingrd_core::closed_form::{appendix_b_policy, CaseTag, ExampleCase};
use vendingrd_core::model::{binary_erasure_spec, with_node3_erasure_metric};
use vendingrd_core::prob::check_markov;
use vendingrd_core::region::{assemble_joint, evaluate_point, sweep_gamma};
use vendingrd_core::sim::{run_scheme, Scheme, SimConfig};
use vendingrd_core::{var, ErasureParams, OptimizerConfig, Policy, ProblemSpec, Targets};

use crate::format::{self, PolicyDoc, SpecDoc};
use crate::output::{self, num, opt, RunManifest};
use crate::CliError;

const MARKOV_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "vendingrd", version, about = "Two-way source coding with a side-information vending machine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate closed-form rate-cost curves of the erasure example.
    ClosedForm(ClosedFormArgs),
    /// Evaluate a policy on a spec.
    Evaluate(EvaluateArgs),
    /// Minimize the forward rate over a grid of cost budgets.
    Sweep(SweepArgs),
    /// Simulate an operational erasure scheme at finite block length.
    Simulate(SimulateArgs),
    /// Write the binary erasure spec as JSON.
    ExportSpec(ExportSpecArgs),
    /// Write the known-optimal policy of an erasure case as JSON.
    ExportPolicy(ExportPolicyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Fig4,
    Fig6,
}

/// Budget grid: an explicit list, or `min..=max` in steps of `step`.
#[derive(Debug, Args)]
pub struct GammaGrid {
    /// Explicit budgets, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub gamma: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    pub gamma_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub gamma_step: f64,
}

impl GammaGrid {
    pub fn resolve(&self) -> Result<Vec<f64>, CliError> {
        let grid = match &self.gamma {
            Some(g) => g.clone(),
            None => {
                let (lo, hi, step) = (self.gamma_min, self.gamma_max, self.gamma_step);
                if !(lo.is_finite() && hi.is_finite() && step.is_finite() && step > 0.0 && lo <= hi) {
                    return Err(CliError::Input(format!(
                        "bad budget range: min {lo}, max {hi}, step {step}"
                    )));
                }
                let n = ((hi - lo) / step + 1e-9).floor() as usize;
                if n > 1_000_000 {
                    return Err(CliError::Input(format!("budget range has {} points", n + 1)));
                }
                // rounding keeps 0.01 * k on the decimal grid
                (0..=n).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect()
            }
        };
        if grid.is_empty() {
            return Err(CliError::Input("empty budget grid".into()));
        }
        if let Some(g) = grid.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(CliError::Input(format!("budget {g} must be finite and non-negative")));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Input("budgets must be strictly ascending".into()));
        }
        Ok(grid)
    }
}

#[derive(Debug, Args)]
pub struct ClosedFormArgs {
    #[arg(long, conflicts_with = "case")]
    pub preset: Option<Preset>,
    /// case1, case2, case2_ts, case3 or hb_case2.
    #[arg(long, value_delimiter = ',')]
    pub case: Vec<String>,
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
    #[command(flatten)]
    pub grid: GammaGrid,
    /// Node 3 distortion levels for hb_case2.
    #[arg(long, value_delimiter = ',')]
    pub d3: Vec<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub policy: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Target D1: a number or `max`.
    #[arg(long, default_value = "max")]
    pub d1: String,
    #[arg(long, default_value = "max")]
    pub d2: String,
    /// Required in heegard-berger mode.
    #[arg(long)]
    pub d3: Option<String>,
    #[command(flatten)]
    pub grid: GammaGrid,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 300)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Auxiliary alphabet sizes as `U,V`.
    #[arg(long)]
    pub cardinality: Option<String>,
    /// Policy file used as a starting point at every budget.
    #[arg(long = "seed-policy")]
    pub seed_policy: Vec<PathBuf>,
    /// Start every budget from the known-optimal policy of this erasure case.
    #[arg(long)]
    pub seed_case: Option<String>,
    /// Directory receiving one policy file per feasible budget.
    #[arg(long)]
    pub dump_policies: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// case1, case2_ts or case3.
    #[arg(long)]
    pub scheme: String,
    #[arg(long, default_value_t = 100_000)]
    pub n: u64,
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: u32,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportSpecArgs {
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
    /// Add Node 3 with the erasure-indicator metric.
    #[arg(long)]
    pub node3: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportPolicyArgs {
    #[arg(long)]
    pub case: String,
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub d3: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_case(s: &str) -> Result<CaseTag, CliError> {
    CaseTag::parse(s).ok_or_else(|| {
        let all: Vec<_> = CaseTag::ALL.iter().map(|c| c.as_str()).collect();
        CliError::Input(format!("--case: unknown case `{s}` (one of {})", all.join(", ")))
    })
}

/// Writes `text` to `output` with a manifest next to it, or to stdout.
fn deliver(output: Option<&Path>, text: &str, manifest: RunManifest, start: Instant) -> Result<(), CliError> {
    output::emit(output, text)?;
    if let Some(p) = output {
        let mut m = manifest;
        m.outputs.push(p.to_path_buf());
        m.finish(start.elapsed(), p)?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::ClosedForm(a) => closed_form(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Simulate(a) => simulate(&a),
        Command::ExportSpec(a) => export_spec(&a),
        Command::ExportPolicy(a) => export_policy(&a),
    }
}

pub const CLOSED_FORM_HEADER: [&str; 6] = ["curve", "d3", "gamma", "r1", "r2", "feasible"];

pub fn closed_form(a: &ClosedFormArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let (cases, d3s) = match (a.preset, a.case.is_empty()) {
        (Some(Preset::Fig4), _) => (
            vec![CaseTag::Case1, CaseTag::Case2, CaseTag::Case2Ts, CaseTag::Case3],
            a.d3.clone(),
        ),
        (Some(Preset::Fig6), _) => (
            vec![CaseTag::HbCase2],
            if a.d3.is_empty() { vec![0.4, 0.6, 0.8, 1.0] } else { a.d3.clone() },
        ),
        (None, false) => (a.case.iter().map(|c| parse_case(c)).collect::<Result<_, _>>()?, a.d3.clone()),
        (None, true) => return Err(CliError::Input("give --preset or --case".into())),
    };
    let grid = a.grid.resolve()?;
    let mut rows = Vec::new();
    for &tag in &cases {
        let levels: Vec<Option<f64>> = if tag == CaseTag::HbCase2 {
            if d3s.is_empty() {
                return Err(CliError::Input("hb_case2 needs --d3".into()));
            }
            d3s.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        for d3 in levels {
            for &g in &grid {
                let case = ExampleCase::new(tag, a.epsilon, g, d3)?;
                let (r1, r2) = (case.r1(), case.r2());
                rows.push(vec![
                    tag.as_str().to_string(),
                    opt(d3),
                    num(g),
                    opt(r1),
                    opt(r2),
                    if r1.is_some() { "1" } else { "0" }.to_string(),
                ]);
            }
        }
    }
    let text = output::csv(&CLOSED_FORM_HEADER, &rows)?;
    let params = json!({
        "preset": a.preset.map(|p| format!("{p:?}").to_lowercase()),
        "cases": cases.iter().map(|c| c.as_str()).collect::<Vec<_>>(),
        "epsilon": a.epsilon,
        "gamma": grid,
        "d3": d3s,
    });
    deliver(a.output.as_deref(), &text, RunManifest::new("closed-form", params, vec![]), start)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let spec = format::load_spec(&a.spec)?;
    let policy = format::load_policy(&a.policy, &spec)?;
    policy
        .check_against(&spec)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.policy.display())))?;
    let point = evaluate_point(&spec, &policy)?;
    let joint = assemble_joint(&spec, &policy)?;
    let fwd = check_markov(&joint, &[var::U], &[var::Z, var::A], &[var::Y], MARKOV_TOL)?;
    let bwd = check_markov(&joint, &[var::V], &[var::A, var::U, var::Y], &[var::X, var::Z], MARKOV_TOL)?;
    let show = |v: f64| if v.is_finite() { num(v) } else { "inf".into() };
    let mut text = String::new();
    for (k, v) in [
        ("R1", show(point.r1)),
        ("R2", show(point.r2)),
        ("D1", show(point.d1)),
        ("D2", show(point.d2)),
        ("D3", point.d3.map(show).unwrap_or_else(|| "-".into())),
        ("Gamma", show(point.gamma)),
        ("markov U-(Z,A)-Y", format!("{} ({})", num(fwd.max_violation), if fwd.holds { "ok" } else { "violated" })),
        ("markov V-(A,U,Y)-(X,Z)", format!("{} ({})", num(bwd.max_violation), if bwd.holds { "ok" } else { "violated" })),
    ] {
        text.push_str(&format!("{k} = {v}\n"));
    }
    let params = json!({ "spec": a.spec, "policy": a.policy });
    deliver(a.output.as_deref(), &text, RunManifest::new("evaluate", params, vec![]), start)
}

fn target(spec: &ProblemSpec, flag: &str, raw: &str, metric: &vendingrd_core::DistortionTable) -> Result<f64, CliError> {
    if raw == "max" {
        return Ok(spec.max_distortion(metric));
    }
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && *v >= 0.0)
        .ok_or_else(|| CliError::Input(format!("--{flag}: expected a non-negative number or `max`, found `{raw}`")))
}

/// The erasure probability of `spec` when it is the binary erasure example
/// (with or without Node 3).
fn erasure_epsilon(spec: &ProblemSpec) -> Option<f64> {
    let z = spec.z().index_of(vendingrd_core::model::ERASURE)?;
    let nz = spec.z().len();
    let eps: f64 = (0..spec.x().len()).map(|x| spec.source().table()[x * nz + z]).sum();
    let base = binary_erasure_spec(ErasureParams::new(eps).ok()?);
    let expected = if spec.is_heegard_berger() { with_node3_erasure_metric(&base).ok()? } else { base };
    (expected == *spec).then_some(eps)
}

pub const SWEEP_HEADER: [&str; 7] = ["gamma", "r1", "r2", "d1", "d2", "d3", "residual"];

pub fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let spec = format::load_spec(&a.spec)?;
    let targets = Targets {
        d1: target(&spec, "d1", &a.d1, spec.d1())?,
        d2: target(&spec, "d2", &a.d2, spec.d2())?,
        d3: match (&a.d3, spec.d3()) {
            (Some(raw), Some(m)) => Some(target(&spec, "d3", raw, m)?),
            (None, None) => None,
            (None, Some(_)) => return Err(CliError::Input("--d3 is required in heegard-berger mode".into())),
            (Some(_), None) => return Err(CliError::Input("--d3 needs a heegard-berger spec".into())),
        },
        gamma: 0.0,
    };
    let cardinality = a
        .cardinality
        .as_deref()
        .map(|s| {
            let parts: Vec<_> = s.split(',').map(|p| p.trim().parse::<usize>()).collect();
            match parts[..] {
                [Ok(u), Ok(v)] if u > 0 && v > 0 => Ok((u, v)),
                _ => Err(CliError::Input(format!("--cardinality: expected `U,V`, found `{s}`"))),
            }
        })
        .transpose()?;
    let config = OptimizerConfig {
        restarts: a.restarts,
        max_iters: a.max_iters,
        rng_seed: a.seed,
        cardinality_override: cardinality,
        ..OptimizerConfig::default()
    };
    let fixed: Vec<Policy> = a
        .seed_policy
        .iter()
        .map(|p| format::load_policy(p, &spec))
        .collect::<Result<_, _>>()?;
    let seed_case = match &a.seed_case {
        Some(c) => {
            let tag = parse_case(c)?;
            let eps = erasure_epsilon(&spec).ok_or_else(|| {
                CliError::Input("--seed-case needs the binary erasure spec".into())
            })?;
            Some((tag, eps))
        }
        None => None,
    };
    let seeds = |gamma: f64| -> Vec<Policy> {
        let mut s = fixed.clone();
        if let Some((tag, eps)) = seed_case {
            let case = ExampleCase::new(tag, eps, gamma.min(1.0), targets.d3);
            if let Some(p) = case.ok().and_then(|c| appendix_b_policy(&c).ok()) {
                s.push(p);
            }
        }
        s
    };
    let grid = a.grid.resolve()?;
    let points = sweep_gamma(&spec, &targets, &grid, &config, &seeds)?;
    if points.iter().all(|p| p.optimum.is_none()) {
        return Err(CliError::Infeasible(format!(
            "no budget in [{}, {}] meets the targets",
            num(grid[0]),
            num(grid[grid.len() - 1])
        )));
    }
    if let Some(dir) = &a.dump_policies {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut rows = Vec::new();
    let mut dumped = Vec::new();
    for p in &points {
        let mut row = vec![num(p.gamma)];
        match &p.optimum {
            Some(o) => {
                let q = &o.point;
                row.extend([num(q.r1), num(q.r2), num(q.d1), num(q.d2), opt(q.d3), num(o.residual)]);
                if let Some(dir) = &a.dump_policies {
                    let path = dir.join(format!("policy_gamma_{}.json", num(p.gamma)));
                    output::write_file(&path, &format::to_json(&PolicyDoc::from_policy(&o.policy)))?;
                    dumped.push(path);
                }
            }
            None => row.extend(std::iter::repeat(String::new()).take(6)),
        }
        rows.push(row);
    }
    let text = output::csv(&SWEEP_HEADER, &rows)?;
    let params = json!({
        "spec": a.spec,
        "targets": { "d1": targets.d1, "d2": targets.d2, "d3": targets.d3 },
        "gamma": grid,
        "restarts": config.restarts,
        "max_iters": config.max_iters,
        "penalty_schedule": config.penalty_schedule,
        "step_tolerance": config.step_tolerance,
        "cardinality": cardinality,
        "seed_policy": a.seed_policy,
        "seed_case": a.seed_case,
    });
    let mut manifest = RunManifest::new("sweep", params, vec![a.seed]);
    manifest.outputs.extend(dumped);
    deliver(a.output.as_deref(), &text, manifest, start)
}

pub const SIMULATE_HEADER: [&str; 11] = [
    "scheme",
    "n",
    "epsilon",
    "gamma",
    "trials",
    "r1_hat",
    "r2_hat",
    "d1_hat",
    "d2_hat",
    "cost_hat",
    "semi_analytic",
];

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let scheme = Scheme::parse(&a.scheme).ok_or_else(|| {
        let all: Vec<_> = Scheme::ALL.iter().map(|s| s.as_str()).collect();
        CliError::Input(format!("--scheme: unknown scheme `{}` (one of {})", a.scheme, all.join(", ")))
    })?;
    let config = SimConfig {
        n: a.n,
        epsilon: a.epsilon,
        gamma: a.gamma,
        scheme,
        rng_seed: a.seed,
        trials: a.trials,
    };
    let r = run_scheme(&config)?;
    let row = vec![
        scheme.as_str().to_string(),
        a.n.to_string(),
        num(a.epsilon),
        num(a.gamma),
        a.trials.to_string(),
        num(r.r1_hat),
        num(r.r2_hat),
        num(r.d1_hat),
        num(r.d2_hat),
        num(r.cost_hat),
        u8::from(r.semi_analytic).to_string(),
    ];
    let text = output::csv(&SIMULATE_HEADER, &[row])?;
    let params = json!({
        "scheme": scheme.as_str(),
        "n": a.n,
        "epsilon": a.epsilon,
        "gamma": a.gamma,
        "trials": a.trials,
    });
    deliver(a.output.as_deref(), &text, RunManifest::new("simulate", params, vec![a.seed]), start)
}

pub fn export_spec(a: &ExportSpecArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let base = binary_erasure_spec(ErasureParams::new(a.epsilon)?);
    let spec = if a.node3 { with_node3_erasure_metric(&base)? } else { base };
    let text = format::to_json(&SpecDoc::from_spec(&spec));
    let params = json!({ "epsilon": a.epsilon, "node3": a.node3 });
    deliver(a.output.as_deref(), &text, RunManifest::new("export-spec", params, vec![]), start)
}

pub fn export_policy(a: &ExportPolicyArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let case = ExampleCase::new(parse_case(&a.case)?, a.epsilon, a.gamma, a.d3)?;
    let policy = appendix_b_policy(&case)?;
    let text = format::to_json(&PolicyDoc::from_policy(&policy));
    let params = json!({ "case": a.case, "epsilon": a.epsilon, "gamma": a.gamma, "d3": a.d3 });
    deliver(a.output.as_deref(), &text, RunManifest::new("export-policy", params, vec![]), start)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(list: Option<Vec<f64>>, lo: f64, hi: f64, step: f64) -> GammaGrid {
        GammaGrid { gamma: list, gamma_min: lo, gamma_max: hi, gamma_step: step }
    }

    #[test]
    fn default_grid_has_101_decimal_points() {
        let g = grid(None, 0.0, 1.0, 0.01).resolve().unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g[20], 0.2);
        assert_eq!(g[30], 0.3);
        assert_eq!(g[100], 1.0);
    }

    #[test]
    fn bad_grids_are_input_errors() {
        for g in [
            grid(None, 0.5, 0.1, 0.01),
            grid(None, 0.0, 1.0, 0.0),
            grid(Some(vec![0.3, 0.2]), 0.0, 1.0, 0.01),
            grid(Some(vec![-0.1]), 0.0, 1.0, 0.01),
        ] {
            assert_eq!(g.resolve().unwrap_err().exit_code(), 2);
        }
    }

    #[test]
    fn erasure_epsilon_recognizes_the_example() {
        let spec = binary_erasure_spec(ErasureParams::new(0.2).unwrap());
        assert_eq!(erasure_epsilon(&spec), Some(0.2));
        assert_eq!(erasure_epsilon(&with_node3_erasure_metric(&spec).unwrap()), Some(0.2));
    }

    #[test]
    fn cli_parses() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
