//! Command-line front end.
//!
//! [`run`] parses arguments, executes one subcommand and returns the process
//! exit code: 0 on success, 1 on a usage or input error, 2 when `stability`
//! finds the policy unstable. JSON goes to stdout; floats in every output
//! are rounded to 9 significant digits.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ini::{Ini, Properties};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::conjunction::{collision_probability, is_high_risk, pc_monte_carlo, ConjunctionGeometry};
use crate::error::{Error, Result};
use crate::ingest::pipeline::{add_rate_noise, synthesize_ephemeris};
use crate::ingest::{
    detect_external_maneuvers, extract_cascade_chains, format_utc, infer_policy, parse_cdm, parse_ephemeris,
    parse_utc, write_ephemeris, ChainOptions, DetectOptions,
};
use crate::orbital::{equilibrium, EquilibriumState, ShellConfig};
use crate::simulator::{run_cascade, PolicyKind, SimConfig, SimResult};
use crate::stability::{
    blowup_horizon, capacity_bound, capacity_ratio, maneuver_count, max_real_part, safe_distance_bound,
    stability_verdict, sup_gain_imag_axis, time_of_nth_maneuver, PolicyParams,
};

/// Seed used whenever a command needs randomness and none is given.
pub const DEFAULT_SEED: u64 = 20_240_601;
/// Epoch of the first sample in simulator-generated ephemerides.
pub const DEFAULT_EPOCH: &str = "2024-01-01T00:00:00Z";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "megacon", version, about = "Stability, cascade and collision-risk analysis for LEO mega-constellations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stability verdict of a pairwise policy (exit 2 when unstable).
    Stability(StabilityArgs),
    /// Collision probability from conjunction-plane geometry or a report file.
    Pc(PcArgs),
    /// Cascade simulation on a single ring.
    Simulate(SimulateArgs),
    /// Stability, safe distance, capacity and lifetime over an (alpha1, alpha3) grid.
    Sweep(SweepArgs),
    /// Infer policy parameters from an ephemeris.
    Infer(InferArgs),
    /// Detect external maneuvers and extract cascade chains.
    Chains(ChainsArgs),
    /// Time of the N-th cascaded maneuver and the blow-up horizon.
    Lifetime(LifetimeArgs),
    /// Satellite-count and throughput ceiling for a safe spacing.
    Capacity(CapacityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha1: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha2: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha3: f64,
    /// Ring sizes for the finite-ring eigenvalue check (repeat or comma-separate).
    #[arg(long = "n", value_delimiter = ',')]
    pub ring_sizes: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct PcArgs {
    #[arg(long, required_unless_present = "cdm", allow_hyphen_values = true)]
    pub miss_x: Option<f64>,
    #[arg(long, required_unless_present = "cdm", allow_hyphen_values = true)]
    pub miss_y: Option<f64>,
    #[arg(long, required_unless_present = "cdm", allow_hyphen_values = true)]
    pub sigma_x: Option<f64>,
    #[arg(long, required_unless_present = "cdm", allow_hyphen_values = true)]
    pub sigma_y: Option<f64>,
    /// Combined hard-body radius, km.
    #[arg(long, required_unless_present = "cdm", allow_hyphen_values = true)]
    pub radius: Option<f64>,
    /// Conjunction report CSV; rows with geometry are re-scored.
    #[arg(long, conflicts_with_all = ["miss_x", "miss_y", "sigma_x", "sigma_y", "radius"])]
    pub cdm: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-9)]
    pub rel_tol: f64,
    /// High-risk threshold on Pc.
    #[arg(long, default_value_t = 1e-5)]
    pub threshold: f64,
    /// Also estimate Pc by Monte Carlo with this many samples.
    #[arg(long)]
    pub mc_samples: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Default, Args)]
pub struct SimulateArgs {
    /// INI file; keys in a `[simulate]` section or at top level.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub policy: Option<PolicyKind>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha3: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub dt_s: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub duration_s: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub trigger_threshold_rad: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub decouple_altitude_km: Option<f64>,
    #[arg(long, conflicts_with = "decouple_altitude_km")]
    pub no_decouple: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub altitude_km: Option<f64>,
    #[arg(long)]
    pub perturb_sat: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub impulse_rad_s: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub perturb_start_s: Option<f64>,
    #[arg(long)]
    pub record_stride: Option<usize>,
    /// Relative Gaussian noise on recorded rate deviations.
    #[arg(long, allow_hyphen_values = true)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Epoch of the first ephemeris sample (ISO-8601).
    #[arg(long)]
    pub epoch: Option<String>,
    /// Trajectory CSV.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
    /// Ephemeris CSV of the recorded samples on the stride grid.
    #[arg(long)]
    pub ephemeris_out: Option<PathBuf>,
    /// Run pairwise and bilateral on the same configuration and compare.
    #[arg(long)]
    pub paired: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `lo:hi:count`, `lo:hi:count:log` or a single value.
    #[arg(long)]
    pub alpha1: Grid,
    #[arg(long)]
    pub alpha2: f64,
    #[arg(long)]
    pub alpha3: Grid,
    /// Ring size for the safe-distance bound.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Worst-case external maneuver amplitude, rad/s.
    #[arg(long, default_value_t = 1e-7)]
    pub c_max: f64,
    #[arg(long, default_value_t = 1)]
    pub phase_factor: u32,
    #[arg(long, default_value_t = 20.0)]
    pub per_sat_gbps: f64,
    /// First-hop time for the lifetime horizon, s.
    #[arg(long, default_value_t = 1.0)]
    pub t0: f64,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct ShellArgs {
    /// INI file with a `[shell]` section.
    #[arg(long)]
    pub shell: Option<PathBuf>,
    #[arg(long)]
    pub num_orbits: Option<u32>,
    #[arg(long)]
    pub sats_per_orbit: Option<u32>,
    #[arg(long)]
    pub altitude_km: Option<f64>,
    #[arg(long)]
    pub inclination_deg: Option<f64>,
    #[arg(long)]
    pub phase_factor_f: Option<u32>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub ephemeris: PathBuf,
    #[command(flatten)]
    pub shell: ShellArgs,
}

#[derive(Debug, Args)]
pub struct ChainsArgs {
    #[arg(long)]
    pub ephemeris: PathBuf,
    #[arg(long)]
    pub cdm: PathBuf,
    #[command(flatten)]
    pub shell: ShellArgs,
    /// Spacing deviation that triggers a follower, rad (10% of the spacing by default).
    #[arg(long)]
    pub trigger_threshold_rad: Option<f64>,
    #[arg(long, default_value_t = 86_400.0)]
    pub window_s: f64,
    /// Accept followers without a turning point after the crossing.
    #[arg(long)]
    pub no_recovery: bool,
    #[arg(long, default_value_t = 1e-5)]
    pub pc_threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sma_dev_km: f64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct LifetimeArgs {
    /// Hop gain.
    #[arg(long)]
    pub h: f64,
    /// Time of the first cascaded maneuver.
    #[arg(long)]
    pub t0: f64,
    /// Maneuver index.
    #[arg(long = "n")]
    pub n_maneuvers: u32,
    /// Also report the real-valued maneuver count at this time.
    #[arg(long)]
    pub at_time: Option<f64>,
    /// Return N * t0 at unit gain instead of failing.
    #[arg(long)]
    pub unity_limit: bool,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[arg(long)]
    pub delta_theta_safe: f64,
    #[arg(long, default_value_t = 1)]
    pub phase_factor: u32,
    #[arg(long, default_value_t = 20.0)]
    pub per_sat_gbps: f64,
}

/// Linear or logarithmic parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub log: bool,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                let t = k as f64 / last;
                if self.log {
                    (self.lo.ln() + t * (self.hi.ln() - self.lo.ln())).exp()
                } else {
                    self.lo + t * (self.hi - self.lo)
                }
            })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?} in grid {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let grid = match parts.as_slice() {
            [v] => {
                let v = num(v)?;
                Grid { lo: v, hi: v, count: 1, log: false }
            }
            [lo, hi, count] | [lo, hi, count, _] => Grid {
                lo: num(lo)?,
                hi: num(hi)?,
                count: count.trim().parse().map_err(|_| format!("bad count {count:?} in grid {s:?}"))?,
                log: match parts.get(3).map(|t| t.trim()) {
                    None | Some("lin") => false,
                    Some("log") => true,
                    Some(other) => return Err(format!("grid spacing must be lin or log, got {other:?}")),
                },
            },
            _ => return Err(format!("grid {s:?} is not lo:hi:count[:log] or a single value")),
        };
        if grid.count == 0 || !grid.lo.is_finite() || !grid.hi.is_finite() {
            return Err(format!("grid {s:?} needs finite bounds and a positive count"));
        }
        if grid.log && !(grid.lo > 0.0 && grid.hi > 0.0) {
            return Err(format!("log grid {s:?} needs positive bounds"));
        }
        Ok(grid)
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code. Diagnostics go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_INPUT
                }
            };
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}

pub fn execute(cmd: &Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Stability(a) => cmd_stability(a, out),
        Command::Pc(a) => cmd_pc(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Infer(a) => cmd_infer(a, out),
        Command::Chains(a) => cmd_chains(a, out),
        Command::Lifetime(a) => cmd_lifetime(a, out),
        Command::Capacity(a) => cmd_capacity(a, out),
    }
}

/// `v` rounded to 9 significant digits.
pub fn sig9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

/// CSV cell for a float: 9 significant digits, `inf`/`nan` spelled out.
pub fn fmt9(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        serde_json::to_string(&sig9(v)).unwrap_or_default()
    }
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *v = json!(sig9(x));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn emit_json(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Data(e.to_string()))?;
    round_floats(&mut v);
    serde_json::to_writer_pretty(&mut *out, &v).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_ini(path: &Path) -> Result<Ini> {
    Ini::load_from_file(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Named section, falling back to the keys before any section header.
fn ini_section<'a>(ini: &'a Ini, name: &str) -> &'a Properties {
    ini.section(Some(name)).unwrap_or_else(|| ini.general_section())
}

/// Flag value if given, else the config key, else `None`.
fn pick<T: FromStr>(flag: Option<T>, props: Option<&Properties>, key: &str) -> Result<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match props.and_then(|p| p.get(key)) {
        None => Ok(None),
        Some(raw) => raw
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Data(format!("config key {key}: cannot parse {raw:?}"))),
    }
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::Data(format!("missing {key} (flag --{} or config key {key})", key.replace('_', "-"))))
}

// ---------------------------------------------------------------- stability

#[derive(Serialize)]
struct RingCheck {
    n: usize,
    max_real_part: f64,
}

pub fn cmd_stability(a: &StabilityArgs, out: &mut dyn Write) -> Result<i32> {
    let p = PolicyParams::new(a.alpha1, a.alpha2, a.alpha3);
    let verdict = stability_verdict(&p)?;
    let peak = sup_gain_imag_axis(&p)?;
    let rings = a
        .ring_sizes
        .iter()
        .map(|&n| max_real_part(&p, n).map(|m| RingCheck { n, max_real_part: m }))
        .collect::<Result<Vec<_>>>()?;
    emit_json(
        out,
        &json!({
            "params": p,
            "stable": verdict.stable,
            "margin": verdict.margin,
            "sup_gain": peak.gain,
            "peak_mu": peak.mu,
            "rings": rings,
        }),
    )?;
    Ok(if verdict.stable { EXIT_OK } else { EXIT_NEGATIVE })
}

// ---------------------------------------------------------------------- pc

#[derive(Serialize)]
struct PcRow {
    row: usize,
    object_a_id: u32,
    object_b_id: u32,
    tca_iso8601: String,
    stated_pc: f64,
    recomputed_pc: Option<f64>,
    abs_diff: Option<f64>,
    high_risk: bool,
}

pub fn cmd_pc(a: &PcArgs, out: &mut dyn Write) -> Result<i32> {
    let Some(path) = &a.cdm else {
        let geom = ConjunctionGeometry {
            miss_x_km: required(a.miss_x, "miss_x")?,
            miss_y_km: required(a.miss_y, "miss_y")?,
            sigma_x_km: required(a.sigma_x, "sigma_x")?,
            sigma_y_km: required(a.sigma_y, "sigma_y")?,
            combined_radius_km: required(a.radius, "radius")?,
        };
        let pc = collision_probability(&geom, a.rel_tol)?;
        let mc = a.mc_samples.map(|s| pc_monte_carlo(&geom, s, a.seed)).transpose()?;
        emit_json(
            out,
            &json!({
                "geometry": geom,
                "pc": pc,
                "rel_tol": a.rel_tol,
                "threshold": a.threshold,
                "high_risk": is_high_risk(pc, a.threshold)?,
                "monte_carlo": mc.map(|m| json!({
                    "pc": m.pc,
                    "std_error": m.std_error,
                    "samples": m.samples,
                    "hits": m.hits,
                    "seed": a.seed,
                })),
            }),
        )?;
        return Ok(EXIT_OK);
    };

    let batch = parse_cdm(open(path)?)?;
    let rows = batch
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let row = i + 1;
            let recomputed = r
                .geometry
                .as_ref()
                .map(|g| collision_probability(g, a.rel_tol))
                .transpose()
                .map_err(|e| Error::Row {
                    row,
                    message: e.to_string(),
                })?;
            Ok(PcRow {
                row,
                object_a_id: r.object_a_id,
                object_b_id: r.object_b_id,
                tca_iso8601: format_utc(r.tca),
                stated_pc: r.pc,
                recomputed_pc: recomputed,
                abs_diff: recomputed.map(|p| (p - r.pc).abs()),
                high_risk: is_high_risk(recomputed.unwrap_or(r.pc), a.threshold)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    match a.format {
        OutputFormat::Json => emit_json(
            out,
            &json!({
                "threshold": a.threshold,
                "out_of_order_rows": batch.out_of_order_rows,
                "rows": rows,
            }),
        )?,
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record([
                "row",
                "object_a_id",
                "object_b_id",
                "tca_iso8601",
                "stated_pc",
                "recomputed_pc",
                "abs_diff",
                "high_risk",
            ])?;
            let opt = |v: Option<f64>| v.map(fmt9).unwrap_or_default();
            for r in &rows {
                w.write_record([
                    r.row.to_string(),
                    r.object_a_id.to_string(),
                    r.object_b_id.to_string(),
                    r.tca_iso8601.clone(),
                    fmt9(r.stated_pc),
                    opt(r.recomputed_pc),
                    opt(r.abs_diff),
                    r.high_risk.to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------- simulate

/// Output options of `simulate` after merging flags and config.
struct SimOutputs {
    noise: Option<f64>,
    seed: u64,
    epoch0_s: f64,
}

fn simulation_setup(a: &SimulateArgs) -> Result<(SimConfig, SimOutputs)> {
    let ini = a.config.as_deref().map(load_ini).transpose()?;
    let props = ini.as_ref().map(|i| ini_section(i, "simulate"));

    let n = required(pick(a.n, props, "n")?, "n")?;
    let policy = pick(a.policy, props, "policy")?.unwrap_or(PolicyKind::Pairwise);
    let params = PolicyParams::new(
        required(pick(a.alpha1, props, "alpha1")?, "alpha1")?,
        pick(a.alpha2, props, "alpha2")?.unwrap_or(0.0),
        required(pick(a.alpha3, props, "alpha3")?, "alpha3")?,
    );
    let mut c = SimConfig::new(n, policy, params);
    if policy == PolicyKind::Pairwise || a.paired {
        c.params.alpha2 = required(pick(a.alpha2, props, "alpha2")?, "alpha2")?;
    }
    if let Some(v) = pick(a.dt_s, props, "dt_s")? {
        c.dt_s = v;
    }
    if let Some(v) = pick(a.duration_s, props, "duration_s")? {
        c.duration_s = v;
    }
    if let Some(v) = pick(a.trigger_threshold_rad, props, "trigger_threshold_rad")? {
        c.trigger_threshold_rad = v;
    }
    if let Some(v) = pick(a.altitude_km, props, "altitude_km")? {
        c.altitude_km = v;
    }
    if a.no_decouple {
        c.decouple_altitude_km = None;
    } else if a.decouple_altitude_km.is_some() {
        c.decouple_altitude_km = a.decouple_altitude_km;
    } else if let Some(raw) = props.and_then(|p| p.get("decouple_altitude_km")) {
        c.decouple_altitude_km = match raw.trim() {
            "none" | "off" => None,
            _ => Some(pick(None, props, "decouple_altitude_km")?.unwrap_or_default()),
        };
    }
    if let Some(v) = pick(a.perturb_sat, props, "perturb_sat")? {
        c.perturbation.sat_index = v;
    }
    if let Some(v) = pick(a.impulse_rad_s, props, "impulse_rad_s")? {
        c.perturbation.impulse_rad_s = v;
    }
    if let Some(v) = pick(a.perturb_start_s, props, "perturb_start_s")? {
        c.perturbation.start_s = v;
    }
    if let Some(v) = pick(a.record_stride, props, "record_stride")? {
        c.record_stride = v;
    }

    let noise = pick(a.noise, props, "noise")?;
    if let Some(s) = noise {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::Data(format!("noise must be non-negative, got {s}")));
        }
    }
    let epoch = pick(a.epoch.clone(), props, "epoch")?.unwrap_or_else(|| DEFAULT_EPOCH.to_string());
    let outputs = SimOutputs {
        noise,
        seed: pick(a.seed, props, "seed")?.unwrap_or(DEFAULT_SEED),
        epoch0_s: parse_utc(&epoch).map_err(Error::Data)?,
    };
    c.validate()?;
    Ok((c, outputs))
}

/// `run.csv` becomes `run.bilateral.csv`.
fn tagged_path(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

fn write_trajectory(result: &SimResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let n = result.samples.first().map_or(0, |s| s.len());
    let mut header = vec!["time_s".to_string()];
    header.extend((0..n).map(|i| format!("dtheta_{i}")));
    header.extend((0..n).map(|i| format!("omega_{i}")));
    w.write_record(&header)?;
    for s in &result.samples {
        let row = std::iter::once(s.time_s)
            .chain(s.dtheta_dev.iter().copied())
            .chain(s.omega_dev.iter().copied())
            .map(fmt9);
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_sim_ephemeris(result: &SimResult, c: &SimConfig, o: &SimOutputs, path: &Path) -> Result<()> {
    let grid = c.dt_s * c.record_stride as f64;
    let mut samples: Vec<_> = result
        .samples
        .iter()
        .filter(|s| {
            let k = s.time_s / grid;
            (k - k.round()).abs() < 1e-9
        })
        .cloned()
        .collect();
    if let Some(sigma) = o.noise {
        add_rate_noise(&mut samples, sigma, o.seed);
    }
    let eq = EquilibriumState {
        spacing_rad: std::f64::consts::TAU / c.n as f64,
        mean_motion_rad_s: crate::orbital::mean_motion(c.altitude_km)?,
    };
    let ids: Vec<u32> = (1..=c.n as u32).collect();
    let records = synthesize_ephemeris(&samples, &eq, c.altitude_km, o.epoch0_s, &ids)?;
    write_ephemeris(&records, create(path)?)
}

fn simulate_one(c: &SimConfig, o: &SimOutputs, a: &SimulateArgs, tag: Option<&str>) -> Result<Value> {
    let result = run_cascade(c)?;
    let path_for = |p: &PathBuf| tag.map_or_else(|| p.clone(), |t| tagged_path(p, t));
    if let Some(p) = &a.csv_out {
        write_trajectory(&result, &path_for(p))?;
    }
    if let Some(p) = &a.ephemeris_out {
        write_sim_ephemeris(&result, c, o, &path_for(p))?;
    }
    Ok(json!({ "config": c, "summary": result.summary(c) }))
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<i32> {
    let (c, o) = simulation_setup(a)?;
    if !a.paired {
        emit_json(out, &simulate_one(&c, &o, a, None)?)?;
        return Ok(EXIT_OK);
    }
    let mut pw = c.clone();
    pw.policy_kind = PolicyKind::Pairwise;
    let mut bi = c;
    bi.policy_kind = PolicyKind::Bilateral;
    let pairwise = simulate_one(&pw, &o, a, Some("pairwise"))?;
    let bilateral = simulate_one(&bi, &o, a, Some("bilateral"))?;
    let af = |v: &Value| v["summary"]["amplification_factor"].as_f64().unwrap_or(f64::NAN);
    let (af_p, af_b) = (af(&pairwise), af(&bilateral));
    let ratio = (af_p > 0.0).then(|| af_b / af_p);
    emit_json(
        out,
        &json!({
            "pairwise": pairwise,
            "bilateral": bilateral,
            "comparison": {
                "pairwise_amplification_factor": af_p,
                "bilateral_amplification_factor": af_b,
                "amplification_ratio": ratio,
            },
        }),
    )?;
    Ok(EXIT_OK)
}

// ------------------------------------------------------------------- sweep

pub const SWEEP_HEADER: [&str; 10] = [
    "alpha1",
    "alpha2",
    "alpha3",
    "margin",
    "stable",
    "sup_gain",
    "delta_theta_safe_rad",
    "max_sats",
    "capacity_gbps",
    "lifetime_horizon_s",
];

/// One sweep cell. Safe distance and capacity are empty for unstable
/// policies; the horizon is `inf` for stable ones.
pub fn sweep_row(p: &PolicyParams, a: &SweepArgs) -> Result<Vec<String>> {
    let verdict = stability_verdict(p)?;
    let peak = sup_gain_imag_axis(p)?;
    let (dtheta, sats, cap, horizon) = if verdict.stable {
        let d = safe_distance_bound(p, a.c_max, a.n)?.ring_bound_rad;
        let (sats, cap) = match capacity_bound(d, a.phase_factor, a.per_sat_gbps) {
            Ok(b) => (b.max_sats.to_string(), fmt9(b.max_capacity_gbps)),
            Err(_) => (String::new(), String::new()),
        };
        (fmt9(d), sats, cap, fmt9(f64::INFINITY))
    } else {
        let h = blowup_horizon(peak.gain, a.t0).map(fmt9).unwrap_or_default();
        (String::new(), String::new(), String::new(), h)
    };
    Ok(vec![
        fmt9(p.alpha1),
        fmt9(p.alpha2),
        fmt9(p.alpha3),
        fmt9(verdict.margin),
        verdict.stable.to_string(),
        fmt9(peak.gain),
        dtheta,
        sats,
        cap,
        horizon,
    ])
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<i32> {
    if !(a.c_max > 0.0) || !(a.t0 > 0.0) {
        return Err(Error::Data("c_max and t0 must be positive".into()));
    }
    let cells: Vec<PolicyParams> = a
        .alpha1
        .values()
        .into_iter()
        .flat_map(|a1| a.alpha3.values().into_iter().map(move |a3| (a1, a3)))
        .map(|(a1, a3)| PolicyParams::new(a1, a.alpha2, a3))
        .collect();
    let rows: Vec<Vec<String>> = cells.par_iter().map(|p| sweep_row(p, a)).collect::<Result<_>>()?;

    let sink: Box<dyn Write + '_> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(out),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(SWEEP_HEADER)?;
    for r in &rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(EXIT_OK)
}

// ------------------------------------------------------------ infer/chains

fn shell_config(a: &ShellArgs) -> Result<ShellConfig> {
    let ini = a.shell.as_deref().map(load_ini).transpose()?;
    let props = ini.as_ref().map(|i| ini_section(i, "shell"));
    let cfg = ShellConfig {
        num_orbits: pick(a.num_orbits, props, "num_orbits")?.unwrap_or(1),
        sats_per_orbit: required(pick(a.sats_per_orbit, props, "sats_per_orbit")?, "sats_per_orbit")?,
        altitude_km: required(pick(a.altitude_km, props, "altitude_km")?, "altitude_km")?,
        inclination_deg: pick(a.inclination_deg, props, "inclination_deg")?.unwrap_or(53.0),
        phase_factor_f: pick(a.phase_factor_f, props, "phase_factor_f")?.unwrap_or(0),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_infer(a: &InferArgs, out: &mut dyn Write) -> Result<i32> {
    let shell = shell_config(&a.shell)?;
    let eq = equilibrium(&shell)?;
    let records = parse_ephemeris(open(&a.ephemeris)?)?;
    let est = infer_policy(&records, &eq)?;
    let verdict = stability_verdict(&est.params).ok();
    emit_json(
        out,
        &json!({
            "params": est.params,
            "residual_rms": est.residual_rms,
            "sample_count": est.sample_count,
            "trimmed_rows": est.trimmed_rows,
            "stable": verdict.map(|v| v.stable),
            "margin": verdict.map(|v| v.margin),
        }),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_chains(a: &ChainsArgs, out: &mut dyn Write) -> Result<i32> {
    let shell = shell_config(&a.shell)?;
    let eq = equilibrium(&shell)?;
    let records = parse_ephemeris(open(&a.ephemeris)?)?;
    let cdms = parse_cdm(open(&a.cdm)?)?.records;
    let detect = DetectOptions {
        pc_threshold: a.pc_threshold,
        sma_dev_km: a.sma_dev_km,
        ..DetectOptions::default()
    };
    let seeds = detect_external_maneuvers(&records, &cdms, &detect)?;
    let opts = ChainOptions {
        trigger_threshold_rad: a.trigger_threshold_rad.unwrap_or(0.1 * eq.spacing_rad),
        window_s: a.window_s,
        require_recovery: !a.no_recovery,
    };
    let chains = extract_cascade_chains(&records, &eq, &seeds, &opts)?;

    match a.format {
        OutputFormat::Json => emit_json(out, &chains)?,
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record([
                "seed_sat_id",
                "seed_epoch_iso8601",
                "hop",
                "sat_id",
                "epoch_iso8601",
                "dtheta_before_rad",
                "dtheta_after_rad",
            ])?;
            for c in &chains {
                for (k, h) in c.hops.iter().enumerate() {
                    w.write_record([
                        c.seed.sat_id.to_string(),
                        format_utc(c.seed.epoch_s),
                        (k + 1).to_string(),
                        h.sat_id.to_string(),
                        format_utc(h.epoch_s),
                        fmt9(h.dtheta_before_rad),
                        fmt9(h.dtheta_after_rad),
                    ])?;
                }
            }
            w.flush()?;
        }
    }
    Ok(EXIT_OK)
}

// -------------------------------------------------------- lifetime/capacity

pub fn cmd_lifetime(a: &LifetimeArgs, out: &mut dyn Write) -> Result<i32> {
    let t_n = time_of_nth_maneuver(a.h, a.t0, a.n_maneuvers, a.unity_limit)?;
    let horizon = (a.h > 1.0).then(|| blowup_horizon(a.h, a.t0)).transpose()?;
    let count = a.at_time.map(|t| maneuver_count(a.h, a.t0, t)).transpose()?;
    emit_json(
        out,
        &json!({
            "h": a.h,
            "t0": a.t0,
            "n": a.n_maneuvers,
            "time_of_nth_s": t_n,
            "horizon_s": horizon,
            "at_time_s": a.at_time,
            "maneuvers_at_time": count,
        }),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_capacity(a: &CapacityArgs, out: &mut dyn Write) -> Result<i32> {
    let bound = capacity_bound(a.delta_theta_safe, a.phase_factor, a.per_sat_gbps)?;
    emit_json(
        out,
        &json!({
            "delta_theta_safe_rad": a.delta_theta_safe,
            "phase_factor_f": a.phase_factor,
            "per_sat_gbps": a.per_sat_gbps,
            "ratio": capacity_ratio(a.delta_theta_safe, a.phase_factor)?,
            "max_sats": bound.max_sats,
            "max_capacity_gbps": bound.max_capacity_gbps,
        }),
    )?;
    Ok(EXIT_OK)
}
