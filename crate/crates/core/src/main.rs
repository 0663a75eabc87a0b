//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a verification or experiment failed (or an I/O
//! or simulation error), 2 invalid configuration or arguments, 3 the
//! objective is unbounded above.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use opportunity_core::config::{load_scenarios, Scenario};
use opportunity_core::experiment::{curve_rows, optimal_paths, run_dual, run_experiment, run_solve, run_verify, ExperimentTag, SolveSummary, VerifyTest};
use opportunity_core::market::write_paths_csv;
use opportunity_core::montecarlo::McConfig;
use opportunity_core::objective::GFunction;
use opportunity_core::Error;

#[derive(Parser)]
#[command(name = "opportunity", version, about = "Optimal consumption and investment via the opportunity process")]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files; overrides `run.out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed; overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Format of standard output.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Maximize the objective and build the opportunity curve.
    Solve {
        /// Also evaluate the objective on this many points (one asset only).
        #[arg(long)]
        scan: Option<usize>,
        /// Scan range; defaults to the feasible interval clipped to [-10, 10].
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
        scan_range: Option<Vec<f64>>,
    },
    /// Opportunity process, dual opportunity process, propensity and bounds.
    Opportunity,
    /// Primal and dual values; with `--paths` also the simulated dual value.
    Dual {
        /// Number of simulated paths; overrides `run.n_paths`.
        #[arg(long)]
        paths: Option<usize>,
        /// Write optimal paths (path_id, t, R, X, c, Y) to this CSV file.
        #[arg(long)]
        export_paths: Option<PathBuf>,
    },
    /// Simulation checks of optimality and of reverse Hölder inequalities.
    Verify {
        #[arg(long, value_enum)]
        test: TestArg,
        /// Number of simulated paths; overrides `run.n_paths`.
        #[arg(long)]
        paths: Option<usize>,
        /// Reverse Hölder exponent for `rhq`; defaults to p/(p-1).
        #[arg(long, allow_negative_numbers = true)]
        q: Option<f64>,
    },
    /// Run an experiment suite.
    Experiment {
        /// constraint_monotonicity, threshold, tax_window, rhq_dichotomy or kappa_lower_bound.
        #[arg(long)]
        tag: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    Primal,
    Dual,
    Rhq,
    Phi,
    Dichotomy,
}

impl From<TestArg> for VerifyTest {
    fn from(t: TestArg) -> Self {
        match t {
            TestArg::Primal => VerifyTest::Primal,
            TestArg::Dual => VerifyTest::Dual,
            TestArg::Rhq => VerifyTest::Rhq,
            TestArg::Phi => VerifyTest::Phi,
            TestArg::Dichotomy => VerifyTest::Dichotomy,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::UnboundedAbove { .. } => 3,
        Error::Io(_) | Error::AllPathsRejected { .. } | Error::StepPositivityLoss { .. } | Error::DomainBoundary { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

struct Output {
    dir: Option<PathBuf>,
    multi: bool,
    json: Vec<serde_json::Value>,
    csv: Vec<u8>,
}

impl Output {
    fn file(&self, name: &str, bytes: &[u8]) -> opportunity_core::Result<()> {
        if let Some(dir) = &self.dir {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }

    fn json_value<T: Serialize>(&mut self, id: &str, name: &str, value: &T) -> opportunity_core::Result<()> {
        let v = serde_json::to_value(value).map_err(|e| Error::Io(e.to_string()))?;
        self.file(name, to_pretty(&v).as_bytes())?;
        self.push(id, v);
        Ok(())
    }

    // one header for all scenarios
    fn csv_rows(&mut self, bytes: Vec<u8>) {
        let skip = if self.csv.is_empty() { 0 } else { bytes.iter().position(|&b| b == b'\n').map_or(bytes.len(), |i| i + 1) };
        self.csv.extend_from_slice(&bytes[skip..]);
    }

    // sweeps print one array; tag each entry with its scenario id
    fn push(&mut self, id: &str, mut v: serde_json::Value) {
        if self.multi {
            v = match v {
                serde_json::Value::Object(mut m) => {
                    m.entry("scenario").or_insert_with(|| id.into());
                    serde_json::Value::Object(m)
                }
                other => serde_json::json!({ "scenario": id, "rows": other }),
            };
        }
        self.json.push(v);
    }

    fn flush(self, format: Format) -> opportunity_core::Result<()> {
        let mut stdout = io::stdout().lock();
        match format {
            Format::Json if self.multi => writeln!(stdout, "{}", to_pretty(&serde_json::Value::Array(self.json)))?,
            Format::Json => {
                for v in &self.json {
                    writeln!(stdout, "{}", to_pretty(v))?;
                }
            }
            Format::Csv => stdout.write_all(&self.csv)?,
        }
        Ok(())
    }
}

fn to_pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>, scenario: Option<&str>) -> opportunity_core::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let plain = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    let Some(id) = scenario else { return Ok(plain) };
    // the scenario column keeps rows of a sweep apart
    let mut rdr = csv::Reader::from_reader(plain.as_slice());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = csv::StringRecord::from(vec!["scenario"]);
    header.extend(rdr.headers()?.iter());
    w.write_record(&header)?;
    for rec in rdr.records() {
        let mut row = csv::StringRecord::from(vec![id]);
        row.extend(rec?.iter());
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn mc_for(s: &Scenario, cli: &Cli, paths: Option<usize>) -> opportunity_core::Result<McConfig> {
    let mut cfg = s.config.clone();
    if let Some(seed) = cli.seed {
        cfg.run.seed = Some(seed);
    }
    if let Some(n) = paths {
        cfg.run.n_paths = n;
    }
    if cfg.run.n_paths == 0 {
        return Err(Error::Config("need at least one path".into()));
    }
    cfg.mc()
}

fn run(cli: &Cli) -> opportunity_core::Result<bool> {
    let path = cli.config.as_deref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let scenarios = load_scenarios(path)?;
    let dir = cli.out.clone().or_else(|| scenarios[0].config.run.out_dir.clone());
    let multi = scenarios.len() > 1;
    let mut out = Output { dir, multi, json: Vec::new(), csv: Vec::new() };
    let label = |s: &Scenario| multi.then(|| s.id.clone());
    let mut all_passed = true;
    let default_format = match cli.command {
        Command::Opportunity => Format::Csv,
        _ => Format::Json,
    };
    for s in &scenarios {
        let id = s.id.as_str();
        let cfg = &s.config;
        match &cli.command {
            Command::Solve { scan, scan_range } => {
                let solved = run_solve(cfg)?;
                out.json_value(id, &format!("{id}.solve.json"), &SolveSummary::from(&solved))?;
                let curve = csv_bytes(curve_rows(&solved), None)?;
                out.file(&format!("{id}.opportunity.csv"), &curve)?;
                out.csv_rows(csv_bytes(curve_rows(&solved), label(s).as_deref())?);
                if let Some(n) = scan {
                    let rows = scan_rows(&solved, *n, scan_range.as_deref())?;
                    out.file(&format!("{id}.g_scan.csv"), &csv_bytes(rows, None)?)?;
                }
            }
            Command::Opportunity => {
                let solved = run_solve(cfg)?;
                let rows = curve_rows(&solved);
                out.file(&format!("{id}.opportunity.csv"), &csv_bytes(rows.iter(), None)?)?;
                out.csv_rows(csv_bytes(rows.iter(), label(s).as_deref())?);
                let v = serde_json::to_value(&rows).map_err(|e| Error::Io(e.to_string()))?;
                out.push(id, v);
            }
            Command::Dual { paths, export_paths } => {
                let mc = match (paths, export_paths) {
                    (None, None) => None,
                    _ => Some(mc_for(s, cli, *paths)?),
                };
                let summary = run_dual(cfg, if paths.is_some() { mc.as_ref() } else { None })?;
                out.json_value(id, &format!("{id}.dual.json"), &summary)?;
                out.csv_rows(csv_bytes([&summary.conjugacy], label(s).as_deref())?);
                if let (Some(file), Some(mc)) = (export_paths, mc) {
                    let bundle = optimal_paths(cfg, mc.n_paths, mc.seed)?;
                    let file = if out.multi { suffixed(file, id) } else { file.clone() };
                    write_paths_csv(&bundle, fs::File::create(&file)?)?;
                }
            }
            Command::Verify { test, paths, q } => {
                let mc = mc_for(s, cli, *paths)?;
                let v = run_verify(cfg, (*test).into(), &mc, *q)?;
                all_passed &= v.passed;
                let test_name = serde_json::to_value(v.test).ok().and_then(|t| t.as_str().map(String::from)).unwrap_or_default();
                let rows: Vec<CheckpointRow> = v.checkpoint_rows().into_iter().map(|(t, mean, se)| CheckpointRow { t, mean, se }).collect();
                if !rows.is_empty() {
                    out.file(&format!("{id}.{test_name}.checkpoints.csv"), &csv_bytes(rows.iter(), None)?)?;
                }
                out.csv_rows(csv_bytes(rows.iter(), label(s).as_deref())?);
                out.json_value(id, &format!("{id}.{test_name}.json"), &v)?;
            }
            Command::Experiment { tag } => {
                let tag: ExperimentTag = tag.parse()?;
                let mut cfg = cfg.clone();
                if let Some(seed) = cli.seed {
                    cfg.run.seed = Some(seed);
                }
                let r = run_experiment(id, &cfg, tag)?;
                all_passed &= r.passed;
                let rows: Vec<MetricRow> = r.metrics.iter().map(|(k, &v)| MetricRow { tag: tag.as_str(), metric: k, value: v }).collect();
                out.csv_rows(csv_bytes(rows.iter(), label(s).as_deref())?);
                out.json_value(id, &format!("{id}.{tag}.json"), &r)?;
            }
        }
    }
    out.flush(cli.format.unwrap_or(default_format))?;
    Ok(all_passed)
}

fn suffixed(file: &Path, id: &str) -> PathBuf {
    let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("paths");
    let ext = file.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    file.with_file_name(format!("{stem}.{id}.{ext}"))
}

#[derive(Serialize)]
struct CheckpointRow {
    t: f64,
    mean: f64,
    se: f64,
}

#[derive(Serialize)]
struct MetricRow<'a> {
    tag: &'a str,
    metric: &'a str,
    value: f64,
}

#[derive(Serialize)]
struct ScanRow {
    y: f64,
    g: f64,
}

fn scan_rows(s: &opportunity_core::experiment::Solved, n: usize, range: Option<&[f64]>) -> opportunity_core::Result<Vec<ScanRow>> {
    if s.market.dim() != 1 {
        return Err(Error::Config("objective scans need a one-asset market".into()));
    }
    if n < 2 {
        return Err(Error::Config("a scan needs at least two points".into()));
    }
    let (lo, hi) = match range {
        Some([lo, hi]) if lo < hi => (*lo, *hi),
        Some(_) => return Err(Error::Config("scan range must satisfy LO < HI".into())),
        None => {
            let (lo, hi) = s.domain.interval_bounds();
            (lo.max(-10.0), hi.min(10.0))
        }
    };
    let g = GFunction::with_domain(&s.market, &s.prefs, s.domain.clone());
    Ok(g.scan(lo, hi, n).into_iter().map(|(y, g)| ScanRow { y, g }).collect())
}
