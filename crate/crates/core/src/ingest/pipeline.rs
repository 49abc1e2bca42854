//! From raw tracking data to maneuver events, policy parameters and
//! cascade chains.
//!
//! Satellites of one ring are ordered by argument of latitude; satellite `i`
//! follows `i-1`. Spacing deviations are taken against the equilibrium
//! spacing and rate deviations against the equilibrium mean motion.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ephemeris::{norm, EphemerisRecord};
use crate::conjunction::CdmRecord;
use crate::error::{domain, Error, Result};
use crate::orbital::{EquilibriumState, RingState, EARTH_RADIUS_KM, MU_EARTH_KM3_S2};
use crate::stability::PolicyParams;

/// Vis-viva semi-major axis `1 / (2/r - v^2/mu)`.
pub fn semi_major_axis(rec: &EphemerisRecord) -> f64 {
    let r = rec.radius_km();
    let v = rec.speed_km_s();
    if v == 0.0 {
        log::warn!("satellite {} has zero velocity at {}", rec.sat_id, rec.epoch_s);
    }
    1.0 / (2.0 / r - v * v / MU_EARTH_KM3_S2)
}

/// Records grouped per satellite, each series checked for strictly
/// increasing epochs.
fn series_by_sat(records: &[EphemerisRecord]) -> Result<BTreeMap<u32, Vec<&EphemerisRecord>>> {
    let mut map: BTreeMap<u32, Vec<&EphemerisRecord>> = BTreeMap::new();
    for r in records {
        map.entry(r.sat_id).or_default().push(r);
    }
    for (id, s) in &map {
        if let Some(w) = s.windows(2).find(|w| !(w[1].epoch_s > w[0].epoch_s)) {
            return Err(Error::Data(format!(
                "series for satellite {id} is not time-sorted at epoch {}",
                w[1].epoch_s
            )));
        }
    }
    Ok(map)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    pub pc_threshold: f64,
    pub sma_dev_km: f64,
    /// How long before the epoch a qualifying report may fall.
    pub cdm_window_s: f64,
    /// Length of the trailing median baseline.
    pub baseline_samples: usize,
    pub min_baseline_samples: usize,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            pc_threshold: 1e-5,
            sma_dev_km: 1.0,
            cdm_window_s: 86_400.0,
            baseline_samples: 24,
            min_baseline_samples: 3,
        }
    }
}

/// A maneuver attributed to collision avoidance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExternalManeuver {
    pub sat_id: u32,
    pub epoch_s: f64,
    pub sma_deviation_km: f64,
    /// The triggering report.
    pub pc: f64,
    pub counterpart_id: u32,
}

/// Flags epochs where the semi-major axis departs from its trailing median
/// by at least `sma_dev_km` and a report with `pc >= pc_threshold` involving
/// the satellite has a TCA within `cdm_window_s` before the epoch. A run of
/// consecutive flagged epochs yields one event at its first epoch.
pub fn detect_external_maneuvers(
    records: &[EphemerisRecord],
    cdms: &[CdmRecord],
    opts: &DetectOptions,
) -> Result<Vec<ExternalManeuver>> {
    if !(opts.sma_dev_km > 0.0) || !(0.0..=1.0).contains(&opts.pc_threshold) || opts.baseline_samples == 0 {
        return domain("detection thresholds out of range");
    }
    let mut out = Vec::new();
    for (id, series) in series_by_sat(records)? {
        let sma: Vec<f64> = series.iter().map(|r| semi_major_axis(r)).collect();
        let mut in_run = false;
        for k in opts.min_baseline_samples.max(1)..series.len() {
            let lo = k.saturating_sub(opts.baseline_samples);
            let mut window = sma[lo..k].to_vec();
            let dev = sma[k] - median(&mut window);
            let t = series[k].epoch_s;
            let report = cdms
                .iter()
                .filter(|c| c.involves(id) && c.pc >= opts.pc_threshold)
                .filter(|c| c.tca <= t && c.tca >= t - opts.cdm_window_s)
                .max_by(|a, b| a.pc.total_cmp(&b.pc));
            let flagged = dev.abs() >= opts.sma_dev_km && report.is_some();
            if flagged && !in_run {
                let c = report.expect("flagged implies a report");
                out.push(ExternalManeuver {
                    sat_id: id,
                    epoch_s: t,
                    sma_deviation_km: dev,
                    pc: c.pc,
                    counterpart_id: if c.object_a_id == id { c.object_b_id } else { c.object_a_id },
                });
            }
            in_run = flagged;
        }
    }
    out.sort_by(|a, b| a.epoch_s.total_cmp(&b.epoch_s).then(a.sat_id.cmp(&b.sat_id)));
    Ok(out)
}

/// In-plane angle from the ascending node, in `[0, 2*pi)`.
fn argument_of_latitude(r: &[f64; 3], v: &[f64; 3]) -> f64 {
    let h = cross(r, v);
    let hn = norm(&h);
    let h_hat = [h[0] / hn, h[1] / hn, h[2] / hn];
    let node = [-h[1], h[0], 0.0];
    let nn = norm(&node);
    let n_hat = if nn <= 1e-12 * hn {
        [1.0, 0.0, 0.0]
    } else {
        [node[0] / nn, node[1] / nn, 0.0]
    };
    let m = cross(&h_hat, &n_hat);
    dot(r, &m).atan2(dot(r, &n_hat)).rem_euclid(std::f64::consts::TAU)
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Angular rate `|r x v| / |r|^2`.
fn angular_rate(r: &[f64; 3], v: &[f64; 3]) -> f64 {
    let rr = dot(r, r);
    norm(&cross(r, v)) / rr
}

/// Spacing and rate deviations of a ring, reconstructed from ephemerides
/// sampled on a common time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingTrace {
    /// Satellites in ring order; entry `i` follows entry `i-1`.
    pub sat_ids: Vec<u32>,
    pub epochs_s: Vec<f64>,
    /// `[epoch][ring position]`.
    pub dtheta_dev: Vec<Vec<f64>>,
    pub omega_dev: Vec<Vec<f64>>,
}

impl RingTrace {
    pub fn from_records(records: &[EphemerisRecord], eq: &EquilibriumState) -> Result<Self> {
        let series = series_by_sat(records)?;
        if series.len() < 2 {
            return Err(Error::Data(format!("need at least 2 satellites, got {}", series.len())));
        }
        let closure = series.len() as f64 * eq.spacing_rad - std::f64::consts::TAU;
        if closure.abs() > 1e-9 {
            return Err(Error::Data(format!(
                "{} satellites at spacing {} rad do not close the ring",
                series.len(),
                eq.spacing_rad
            )));
        }
        let first = series.values().next().expect("non-empty");
        let epochs: Vec<f64> = first.iter().map(|r| r.epoch_s).collect();
        for (id, s) in &series {
            let same = s.len() == epochs.len()
                && s.iter().zip(&epochs).all(|(r, t)| (r.epoch_s - t).abs() <= 1e-6);
            if !same {
                return Err(Error::Data(format!("satellite {id} is not sampled on the common time grid")));
            }
        }

        let mut ring: Vec<(u32, &Vec<&EphemerisRecord>)> = series.iter().map(|(id, s)| (*id, s)).collect();
        let u0 = |s: &Vec<&EphemerisRecord>| argument_of_latitude(&s[0].position_km, &s[0].velocity_km_s);
        ring.sort_by(|a, b| u0(b.1).total_cmp(&u0(a.1)));

        let n = ring.len();
        let mut dtheta_dev = Vec::with_capacity(epochs.len());
        let mut omega_dev = Vec::with_capacity(epochs.len());
        for k in 0..epochs.len() {
            let u: Vec<f64> = ring
                .iter()
                .map(|(_, s)| argument_of_latitude(&s[k].position_km, &s[k].velocity_km_s))
                .collect();
            dtheta_dev.push(
                (0..n)
                    .map(|i| (u[(i + n - 1) % n] - u[i]).rem_euclid(std::f64::consts::TAU) - eq.spacing_rad)
                    .collect(),
            );
            omega_dev.push(
                ring.iter()
                    .map(|(_, s)| angular_rate(&s[k].position_km, &s[k].velocity_km_s) - eq.mean_motion_rad_s)
                    .collect(),
            );
        }
        Ok(Self {
            sat_ids: ring.iter().map(|(id, _)| *id).collect(),
            epochs_s: epochs,
            dtheta_dev,
            omega_dev,
        })
    }

    pub fn len(&self) -> usize {
        self.sat_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sat_ids.is_empty()
    }

    pub fn position(&self, sat_id: u32) -> Option<usize> {
        self.sat_ids.iter().position(|&s| s == sat_id)
    }

    /// Uniform sampling step, or a data error.
    fn step_s(&self) -> Result<f64> {
        let e = &self.epochs_s;
        if e.len() < 5 {
            return Err(Error::Inference(format!("need at least 5 epochs, got {}", e.len())));
        }
        let h = (e[e.len() - 1] - e[0]) / (e.len() - 1) as f64;
        if e.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-6 * h) {
            return Err(Error::Data("epochs are not uniformly spaced".into()));
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyEstimate {
    pub params: PolicyParams,
    /// RMS of the fit residual, rad/s².
    pub residual_rms: f64,
    pub sample_count: usize,
    /// Rows dropped as outliers before the final fit.
    pub trimmed_rows: usize,
}

const MIN_ROWS: usize = 10;
const TRIM_SIGMAS: f64 = 8.0;
const TRIM_ROUNDS: usize = 3;

/// Column-scaled SVD least squares; errors when the design is rank deficient.
fn least_squares(x: &[[f64; 3]], y: &[f64]) -> Result<[f64; 3]> {
    let m = x.len();
    let mut scale = [0.0f64; 3];
    for row in x {
        for j in 0..3 {
            scale[j] += row[j] * row[j];
        }
    }
    for s in &mut scale {
        *s = (*s / m as f64).sqrt();
        if !(*s > 0.0) || !s.is_finite() {
            return Err(Error::Inference("design matrix has an all-zero column".into()));
        }
    }
    let a = DMatrix::from_fn(m, 3, |i, j| x[i][j] / scale[j]);
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let (lo, hi) = (sv.min(), sv.max());
    if !(lo > 1e-10 * hi) {
        return Err(Error::Inference(format!("design matrix is rank deficient (condition {:e})", hi / lo)));
    }
    let sol = svd.solve(&b, 0.0).map_err(|e| Error::Inference(e.to_string()))?;
    Ok([sol[0] / scale[0], sol[1] / scale[1], sol[2] / scale[2]])
}

fn residuals(x: &[[f64; 3]], y: &[f64], c: &[f64; 3]) -> Vec<f64> {
    x.iter()
        .zip(y)
        .map(|(r, yi)| yi - (c[0] * r[0] + c[1] * r[1] + c[2] * r[2]))
        .collect()
}

/// Fits `d/dt omega_i = a1*dtheta_i - a2*omega_i + a3*omega_{i-1}` to a
/// shell-wide trace by least squares.
///
/// Rate derivatives come from a five-point central stencil. Samples where
/// neither the satellite nor its leader deviates are skipped. Rows whose
/// residual, relative to the local rate magnitude, exceeds eight robust
/// standard deviations (e.g. next to an impulsive burn) are dropped and the
/// fit repeated, at most three times.
pub fn infer_policy(records: &[EphemerisRecord], eq: &EquilibriumState) -> Result<PolicyEstimate> {
    let trace = RingTrace::from_records(records, eq)?;
    infer_policy_from_trace(&trace, eq)
}

pub fn infer_policy_from_trace(trace: &RingTrace, eq: &EquilibriumState) -> Result<PolicyEstimate> {
    let h = trace.step_s()?;
    let n = trace.len();
    let w = &trace.omega_dev;
    let floor = 1e-9 * eq.mean_motion_rad_s;
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut scale = Vec::new();
    let mut active_sats = vec![false; n];
    for k in 2..trace.epochs_s.len() - 2 {
        for i in 0..n {
            let prev = (i + n - 1) % n;
            if w[k][i].abs() <= floor && w[k][prev].abs() <= floor {
                continue;
            }
            let wdot = (-w[k + 2][i] + 8.0 * w[k + 1][i] - 8.0 * w[k - 1][i] + w[k - 2][i]) / (12.0 * h);
            x.push([trace.dtheta_dev[k][i], -w[k][i], w[k][prev]]);
            y.push(wdot);
            let local = (k - 2..=k + 2).map(|j| w[j][i].abs()).fold(w[k][prev].abs(), f64::max);
            scale.push(local / h);
            active_sats[i] = true;
        }
    }
    let sats = active_sats.iter().filter(|&&a| a).count();
    if x.len() < MIN_ROWS || sats < 2 {
        return Err(Error::Inference(format!(
            "need at least {MIN_ROWS} maneuver-active samples on 2 satellites, got {} on {sats}",
            x.len()
        )));
    }

    let total = x.len();
    let mut coef = least_squares(&x, &y)?;
    for _ in 0..TRIM_ROUNDS {
        let res: Vec<f64> = residuals(&x, &y, &coef)
            .iter()
            .zip(&scale)
            .map(|(r, s)| r / s)
            .collect();
        let med = median(&mut res.clone());
        let mut dev: Vec<f64> = res.iter().map(|r| (r - med).abs()).collect();
        let sigma = 1.4826 * median(&mut dev);
        if !(sigma > 0.0) {
            break;
        }
        let keep: Vec<bool> = res.iter().map(|r| (r - med).abs() <= TRIM_SIGMAS * sigma).collect();
        let kept = keep.iter().filter(|&&k| k).count();
        if kept == x.len() || kept < MIN_ROWS {
            break;
        }
        let mut it = keep.iter();
        x.retain(|_| *it.next().expect("same length"));
        let mut it = keep.iter();
        y.retain(|_| *it.next().expect("same length"));
        let mut it = keep.iter();
        scale.retain(|_| *it.next().expect("same length"));
        coef = least_squares(&x, &y)?;
    }
    let res = residuals(&x, &y, &coef);
    let residual_rms = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();
    Ok(PolicyEstimate {
        params: PolicyParams::new(coef[0], coef[1], coef[2]),
        residual_rms,
        sample_count: x.len(),
        trimmed_rows: total - x.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainOptions {
    pub trigger_threshold_rad: f64,
    /// Longest wait for the next neighbor to react.
    pub window_s: f64,
    /// Also require the neighbor's spacing deviation to turn back after the
    /// crossing, i.e. evidence that it maneuvered.
    pub require_recovery: bool,
}

impl ChainOptions {
    pub fn new(trigger_threshold_rad: f64) -> Self {
        Self {
            trigger_threshold_rad,
            window_s: 86_400.0,
            require_recovery: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainHop {
    pub sat_id: u32,
    pub epoch_s: f64,
    /// Spacing deviation to its leader at the previous hop's epoch.
    pub dtheta_before_rad: f64,
    /// Spacing deviation to its leader at this hop's epoch.
    pub dtheta_after_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeChain {
    pub seed: ExternalManeuver,
    pub hops: Vec<ChainHop>,
    pub hop_count: usize,
}

/// Walks each seed's followers along the ring. A follower joins the chain
/// at the first later epoch where its spacing deviation reaches the trigger
/// threshold, within `window_s` of the previous hop; the walk stops at the
/// first follower that does not react or when it would wrap to the seed.
pub fn extract_cascade_chains(
    records: &[EphemerisRecord],
    eq: &EquilibriumState,
    seeds: &[ExternalManeuver],
    opts: &ChainOptions,
) -> Result<Vec<CascadeChain>> {
    let trace = RingTrace::from_records(records, eq)?;
    extract_chains_from_trace(&trace, seeds, opts)
}

pub fn extract_chains_from_trace(
    trace: &RingTrace,
    seeds: &[ExternalManeuver],
    opts: &ChainOptions,
) -> Result<Vec<CascadeChain>> {
    if !(opts.trigger_threshold_rad > 0.0) || !(opts.window_s > 0.0) {
        return domain("chain threshold and window must be positive");
    }
    let n = trace.len();
    let t = &trace.epochs_s;
    let thr = opts.trigger_threshold_rad;
    let chains = seeds
        .iter()
        .map(|seed| {
            let mut hops = Vec::new();
            let start = trace.position(seed.sat_id).zip(t.iter().position(|&e| e >= seed.epoch_s - 1e-6));
            if let Some((seed_pos, k0)) = start {
                let (mut cur, mut k_cur) = (seed_pos, k0);
                loop {
                    let nx = (cur + 1) % n;
                    if nx == seed_pos {
                        break;
                    }
                    let gap = |k: usize| trace.dtheta_dev[k][nx];
                    let limit = t[k_cur] + opts.window_s;
                    let hit = (k_cur + 1..t.len())
                        .take_while(|&k| t[k] <= limit)
                        .find(|&k| gap(k).abs() >= thr);
                    let Some(k) = hit else { break };
                    if opts.require_recovery {
                        let turns = (k + 1..t.len())
                            .take_while(|&j| t[j] <= t[k] + opts.window_s)
                            .any(|j| gap(j).abs() < gap(j - 1).abs());
                        if !turns {
                            break;
                        }
                    }
                    hops.push(ChainHop {
                        sat_id: trace.sat_ids[nx],
                        epoch_s: t[k],
                        dtheta_before_rad: gap(k_cur),
                        dtheta_after_rad: gap(k),
                    });
                    cur = nx;
                    k_cur = k;
                }
            } else {
                log::warn!("seed satellite {} at {} not found in the trace", seed.sat_id, seed.epoch_s);
            }
            CascadeChain {
                seed: *seed,
                hop_count: hops.len(),
                hops,
            }
        })
        .collect();
    Ok(chains)
}

/// Inclination of the synthetic plane.
pub const SYNTHETIC_INCLINATION_DEG: f64 = 53.0;

/// Turns simulated ring states into ephemeris records of one circular
/// plane, so the pipeline can be checked against known ground truth.
///
/// `sat_ids[i]` names simulator satellite `i`; the equilibrium spacing must
/// be `2*pi/n`.
pub fn synthesize_ephemeris(
    samples: &[RingState],
    eq: &EquilibriumState,
    altitude_km: f64,
    epoch0_s: f64,
    sat_ids: &[u32],
) -> Result<Vec<EphemerisRecord>> {
    let Some(first) = samples.first() else {
        return Ok(Vec::new());
    };
    let n = first.len();
    if sat_ids.len() != n {
        return domain(format!("{} ids for {n} satellites", sat_ids.len()));
    }
    if ((n as f64) * eq.spacing_rad - std::f64::consts::TAU).abs() > 1e-9 {
        return domain("equilibrium spacing must close the ring");
    }
    let a = EARTH_RADIUS_KM + altitude_km;
    let inc = SYNTHETIC_INCLINATION_DEG.to_radians();
    let p_hat = [1.0, 0.0, 0.0];
    let q_hat = [0.0, inc.cos(), inc.sin()];

    let mut theta0 = 0.0;
    let mut out = Vec::with_capacity(samples.len() * n);
    for (k, s) in samples.iter().enumerate() {
        if k > 0 {
            let prev = &samples[k - 1];
            let dt = s.time_s - prev.time_s;
            theta0 += 0.5 * dt * (2.0 * eq.mean_motion_rad_s + s.omega_dev[0] + prev.omega_dev[0]);
        }
        let mut theta = theta0;
        for i in 0..n {
            if i > 0 {
                theta -= eq.spacing_rad + s.dtheta_dev[i];
            }
            let w = eq.mean_motion_rad_s + s.omega_dev[i];
            let (sn, cs) = theta.sin_cos();
            let pos = std::array::from_fn(|j| a * (cs * p_hat[j] + sn * q_hat[j]));
            let vel = std::array::from_fn(|j| a * w * (-sn * p_hat[j] + cs * q_hat[j]));
            out.push(EphemerisRecord {
                sat_id: sat_ids[i],
                epoch_s: epoch0_s + s.time_s,
                position_km: pos,
                velocity_km_s: vel,
                covariance_diag_km2: None,
            });
        }
    }
    Ok(out)
}

/// Multiplies every rate deviation by `1 + rel_sigma * N(0, 1)`.
pub fn add_rate_noise(samples: &mut [RingState], rel_sigma: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in samples {
        for w in &mut s.omega_dev {
            let z: f64 = StandardNormal.sample(&mut rng);
            *w *= 1.0 + rel_sigma * z;
        }
    }
}
