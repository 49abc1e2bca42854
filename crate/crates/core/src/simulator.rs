//! Time-domain simulation of the linearized ring.
//!
//! The continuous dynamics are integrated with fixed-step RK4. On top of
//! them sits a discrete event layer: the injected perturbation is the
//! external maneuver, and each follower whose spacing deviation reaches the
//! trigger threshold after its leader's event counts as one cascaded
//! maneuver.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::orbital::{self, RingState, EARTH_RADIUS_KM};
use crate::stability::PolicyParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Pairwise,
    Bilateral,
}

impl std::str::FromStr for PolicyKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pairwise" => Ok(Self::Pairwise),
            "bilateral" => Ok(Self::Bilateral),
            other => domain(format!("unknown policy kind {other:?}")),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Pairwise => "pairwise",
            Self::Bilateral => "bilateral",
        })
    }
}

/// The external kick that starts a cascade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub sat_index: usize,
    pub impulse_rad_s: f64,
    pub start_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub policy_kind: PolicyKind,
    pub params: PolicyParams,
    pub dt_s: f64,
    pub duration_s: f64,
    pub trigger_threshold_rad: f64,
    /// Altitude offset at which a cascaded satellite leaves the cascade.
    /// `None` disables decoupling.
    pub decouple_altitude_km: Option<f64>,
    /// Shell altitude, used only for the rate-to-altitude conversion.
    pub altitude_km: f64,
    pub perturbation: Perturbation,
    /// Keep one sample every `record_stride` steps.
    pub record_stride: usize,
}

pub const DEFAULT_ALTITUDE_KM: f64 = 550.0;
pub const DEFAULT_DECOUPLE_ALTITUDE_KM: f64 = 1.0;
pub const DEFAULT_DT_S: f64 = 1.0;

impl SimConfig {
    /// Defaults: 1 s step, one day, threshold at 10% of `2*pi/n`, 1 km
    /// decoupling, perturbation of 1e-7 rad/s on satellite 0 at t = 0.
    pub fn new(n: usize, policy_kind: PolicyKind, params: PolicyParams) -> Self {
        Self {
            n,
            policy_kind,
            params,
            dt_s: DEFAULT_DT_S,
            duration_s: 86_400.0,
            trigger_threshold_rad: default_trigger_threshold(n),
            decouple_altitude_km: Some(DEFAULT_DECOUPLE_ALTITUDE_KM),
            altitude_km: DEFAULT_ALTITUDE_KM,
            perturbation: Perturbation {
                sat_index: 0,
                impulse_rad_s: 1e-7,
                start_s: 0.0,
            },
            record_stride: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return domain(format!("ring needs at least 3 satellites, got {}", self.n));
        }
        match self.policy_kind {
            PolicyKind::Pairwise => self.params.validate_pairwise()?,
            PolicyKind::Bilateral => self.params.validate_bilateral()?,
        }
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return domain(format!("dt_s must be positive, got {}", self.dt_s));
        }
        if !(self.duration_s >= self.dt_s && self.duration_s.is_finite()) {
            return domain(format!("duration_s {} shorter than dt_s {}", self.duration_s, self.dt_s));
        }
        if !(self.trigger_threshold_rad > 0.0) {
            return domain(format!("trigger threshold must be positive, got {}", self.trigger_threshold_rad));
        }
        if let Some(d) = self.decouple_altitude_km {
            if !(d > 0.0) {
                return domain(format!("decoupling altitude must be positive, got {d}"));
            }
        }
        orbital::mean_motion(self.altitude_km)?;
        let p = &self.perturbation;
        if p.sat_index >= self.n {
            return domain(format!("perturbed satellite {} not on a ring of {}", p.sat_index, self.n));
        }
        if !p.impulse_rad_s.is_finite() || !(0.0..=self.duration_s).contains(&p.start_s) {
            return domain("perturbation impulse must be finite and start within the run");
        }
        if self.record_stride == 0 {
            return domain("record_stride must be at least 1");
        }
        Ok(())
    }

    /// Rate deviation whose altitude equivalent equals the decoupling offset.
    fn decouple_rate(&self) -> Option<f64> {
        let a = EARTH_RADIUS_KM + self.altitude_km;
        let w = orbital::mean_motion_at_radius(a);
        self.decouple_altitude_km.map(|d| d * 3.0 * w / (2.0 * a))
    }
}

/// 10% of the equilibrium spacing `2*pi/n`.
pub fn default_trigger_threshold(n: usize) -> f64 {
    0.1 * std::f64::consts::TAU / n.max(1) as f64
}

/// Altitude offset equivalent of a mean-motion deviation,
/// `da = -(2a / (3w)) * dw`.
pub fn altitude_offset_km(altitude_km: f64, omega_dev: f64) -> f64 {
    let a = EARTH_RADIUS_KM + altitude_km;
    -2.0 * a / (3.0 * orbital::mean_motion_at_radius(a)) * omega_dev
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventCause {
    External,
    Cascaded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManeuverEvent {
    pub sat_index: usize,
    pub time_s: f64,
    /// Injected impulse for external events; the satellite's rate deviation
    /// at trigger time for cascaded ones.
    pub impulse_rad_s: f64,
    pub cause: EventCause,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminatedBy {
    Duration,
    Decoupling,
    Quiescence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub samples: Vec<RingState>,
    pub events: Vec<ManeuverEvent>,
    pub amplification_factor: f64,
    pub chain_hops: usize,
    pub terminated_by: TerminatedBy,
    pub blow_up: bool,
    /// Largest `|omega_dev|` seen per satellite over the run.
    pub peak_abs_omega: Vec<f64>,
    /// Largest `|dtheta_dev|` seen per satellite over the run.
    pub peak_abs_dtheta: Vec<f64>,
}

/// Pairwise law for one satellite written in terms of what it observes.
#[inline]
fn pairwise_accel(p: &PolicyParams, gap: f64, own: f64, leader: f64) -> f64 {
    p.alpha1 * gap - p.alpha2 * own + p.alpha3 * leader
}

/// Writes the time derivative of `(dtheta, omega)` into `(d_dtheta, d_omega)`.
pub fn derivative_into(
    dtheta: &[f64],
    omega: &[f64],
    p: &PolicyParams,
    kind: PolicyKind,
    d_dtheta: &mut [f64],
    d_omega: &mut [f64],
) {
    let n = omega.len();
    for i in 0..n {
        let prev = if i == 0 { n - 1 } else { i - 1 };
        let next = if i + 1 == n { 0 } else { i + 1 };
        d_dtheta[i] = omega[prev] - omega[i];
        d_omega[i] = match kind {
            PolicyKind::Pairwise => pairwise_accel(p, dtheta[i], omega[i], omega[prev]),
            PolicyKind::Bilateral => {
                // the leader-side and follower-side rules, differenced
                let ahead = omega[prev] - omega[i];
                let behind = omega[i] - omega[next];
                p.alpha1 * (dtheta[i] - dtheta[next]) + p.alpha3 * (ahead - behind)
            }
        };
    }
}

/// Time derivative of a ring state. The returned state carries `time_s = 1`
/// so that it reads as a rate.
pub fn derivative(state: &RingState, p: &PolicyParams, kind: PolicyKind) -> RingState {
    let n = state.len();
    let mut out = RingState::zeros(n);
    out.time_s = 1.0;
    derivative_into(
        &state.dtheta_dev,
        &state.omega_dev,
        p,
        kind,
        &mut out.dtheta_dev,
        &mut out.omega_dev,
    );
    out
}

/// Scratch buffers for RK4 so long runs don't allocate per step.
struct Rk4 {
    k: [(Vec<f64>, Vec<f64>); 4],
    tmp: (Vec<f64>, Vec<f64>),
}

impl Rk4 {
    fn new(n: usize) -> Self {
        let z = || (vec![0.0; n], vec![0.0; n]);
        Self {
            k: [z(), z(), z(), z()],
            tmp: z(),
        }
    }

    fn advance(&mut self, s: &mut RingState, p: &PolicyParams, kind: PolicyKind, dt: f64) {
        let n = s.len();
        let stage_scale = [0.0, 0.5 * dt, 0.5 * dt, dt];
        for stage in 0..4 {
            let (kt, kw) = if stage == 0 {
                (s.dtheta_dev.as_slice(), s.omega_dev.as_slice())
            } else {
                let (pt, pw) = &self.k[stage - 1];
                let h = stage_scale[stage];
                for i in 0..n {
                    self.tmp.0[i] = s.dtheta_dev[i] + h * pt[i];
                    self.tmp.1[i] = s.omega_dev[i] + h * pw[i];
                }
                (self.tmp.0.as_slice(), self.tmp.1.as_slice())
            };
            let (out_t, out_w) = &mut self.k[stage];
            derivative_into(kt, kw, p, kind, out_t, out_w);
        }
        let c = dt / 6.0;
        let [k1, k2, k3, k4] = &self.k;
        for i in 0..n {
            s.dtheta_dev[i] += c * (k1.0[i] + 2.0 * (k2.0[i] + k3.0[i]) + k4.0[i]);
            s.omega_dev[i] += c * (k1.1[i] + 2.0 * (k2.1[i] + k3.1[i]) + k4.1[i]);
        }
        s.time_s += dt;
    }
}

/// One classical RK4 step.
pub fn step(state: &RingState, p: &PolicyParams, kind: PolicyKind, dt_s: f64) -> Result<RingState> {
    if !(dt_s > 0.0) {
        return domain(format!("dt_s must be positive, got {dt_s}"));
    }
    let mut next = state.clone();
    Rk4::new(state.len()).advance(&mut next, p, kind, dt_s);
    if !next.is_finite() {
        return Err(crate::error::Error::BlowUp { time_s: next.time_s });
    }
    Ok(next)
}

/// Adds `impulse_rad_s` to satellite `sat_index`'s rate deviation and
/// returns the corresponding external event.
pub fn inject_perturbation(state: &mut RingState, sat_index: usize, impulse_rad_s: f64) -> Result<ManeuverEvent> {
    if sat_index >= state.len() {
        return domain(format!("satellite {sat_index} not on a ring of {}", state.len()));
    }
    state.omega_dev[sat_index] += impulse_rad_s;
    Ok(ManeuverEvent {
        sat_index,
        time_s: state.time_s,
        impulse_rad_s,
        cause: EventCause::External,
    })
}

/// Cascaded events divided by external events.
pub fn amplification_factor(events: &[ManeuverEvent]) -> Result<f64> {
    let ext = events.iter().filter(|e| e.cause == EventCause::External).count();
    if ext == 0 {
        return domain("amplification factor needs at least one external event");
    }
    let casc = events.len() - ext;
    Ok(casc as f64 / ext as f64)
}

/// Follows the cascade front along the ring.
struct Cascade {
    seed: usize,
    front: Option<usize>,
    hops: usize,
    open: bool,
}

impl Cascade {
    fn next(&self, n: usize) -> Option<usize> {
        let f = self.front?;
        let nx = (f + 1) % n;
        (self.open && nx != self.seed).then_some(nx)
    }
}

/// Integrates the configured ring from equilibrium, injects the
/// perturbation and records maneuver events until the run ends.
pub fn run_cascade(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let n = config.n;
    let dt = config.dt_s;
    let steps = ((config.duration_s / dt).round() as u64).max(1);
    let inject_step = (config.perturbation.start_s / dt).round() as u64;
    let threshold = config.trigger_threshold_rad;
    let decouple = config.decouple_rate();

    let mut state = RingState::zeros(n);
    let mut rk = Rk4::new(n);
    let mut samples = vec![state.clone()];
    let mut events = Vec::new();
    let mut peak_w = vec![0.0f64; n];
    let mut peak_t = vec![0.0f64; n];
    let mut cascade = Cascade {
        seed: config.perturbation.sat_index,
        front: None,
        hops: 0,
        open: true,
    };
    let mut terminated_by = TerminatedBy::Duration;
    let mut blow_up = false;
    let mut peak_max_dtheta = 0.0f64;
    let mut prev_norm = f64::INFINITY;

    let track_peaks = |s: &RingState, pw: &mut [f64], pt: &mut [f64]| {
        for i in 0..n {
            pw[i] = pw[i].max(s.omega_dev[i].abs());
            pt[i] = pt[i].max(s.dtheta_dev[i].abs());
        }
    };

    for k in 0..steps {
        if k == inject_step {
            let ev = inject_perturbation(&mut state, config.perturbation.sat_index, config.perturbation.impulse_rad_s)?;
            events.push(ev);
            cascade.front = Some(ev.sat_index);
            track_peaks(&state, &mut peak_w, &mut peak_t);
        }

        rk.advance(&mut state, &config.params, config.policy_kind, dt);
        state.time_s = (k + 1) as f64 * dt;
        if !state.is_finite() {
            log::warn!("ring state diverged at t = {} s", state.time_s);
            blow_up = true;
            samples.push(state.clone());
            break;
        }
        track_peaks(&state, &mut peak_w, &mut peak_t);

        // at most one hop per step, so event times strictly increase
        if let Some(nx) = cascade.next(n) {
            let front = cascade.front.expect("front set while open");
            let separated = |i: usize| decouple.is_some_and(|rate| state.omega_dev[i].abs() >= rate);
            if (front != cascade.seed && separated(front)) || separated(nx) {
                cascade.open = false;
                terminated_by = TerminatedBy::Decoupling;
            } else if state.dtheta_dev[nx].abs() >= threshold {
                events.push(ManeuverEvent {
                    sat_index: nx,
                    time_s: state.time_s,
                    impulse_rad_s: state.omega_dev[nx],
                    cause: EventCause::Cascaded,
                });
                cascade.front = Some(nx);
                cascade.hops += 1;
            }
        }

        let last = k + 1 == steps;
        if (k + 1) % config.record_stride as u64 == 0 || last || !cascade.open {
            samples.push(state.clone());
        }
        if !cascade.open {
            break;
        }

        if cascade.front.is_some() {
            let max_dtheta = state.dtheta_dev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            peak_max_dtheta = peak_max_dtheta.max(max_dtheta);
            let norm = state.norm();
            if max_dtheta < threshold / 10.0 && max_dtheta < 0.5 * peak_max_dtheta && norm < prev_norm {
                if (k + 1) % config.record_stride as u64 != 0 && !last {
                    samples.push(state.clone());
                }
                terminated_by = TerminatedBy::Quiescence;
                break;
            }
            prev_norm = norm;
        }
    }

    let amplification_factor = if events.is_empty() { 0.0 } else { amplification_factor(&events)? };
    Ok(SimResult {
        samples,
        amplification_factor,
        chain_hops: cascade.hops,
        events,
        terminated_by,
        blow_up,
        peak_abs_omega: peak_w,
        peak_abs_dtheta: peak_t,
    })
}

/// Runs independent configurations in parallel, preserving input order.
pub fn run_sweep(configs: &[SimConfig]) -> Vec<Result<SimResult>> {
    configs.par_iter().map(run_cascade).collect()
}

/// JSON-friendly run summary without the sample series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub n: usize,
    pub policy_kind: PolicyKind,
    pub params: PolicyParams,
    pub events: Vec<ManeuverEvent>,
    pub amplification_factor: f64,
    pub chain_hops: usize,
    pub terminated_by: TerminatedBy,
    pub blow_up: bool,
    pub final_time_s: f64,
}

impl SimResult {
    pub fn summary(&self, config: &SimConfig) -> SimSummary {
        SimSummary {
            n: config.n,
            policy_kind: config.policy_kind,
            params: config.params,
            events: self.events.clone(),
            amplification_factor: self.amplification_factor,
            chain_hops: self.chain_hops,
            terminated_by: self.terminated_by,
            blow_up: self.blow_up,
            final_time_s: self.samples.last().map_or(0.0, |s| s.time_s),
        }
    }

    pub fn cascaded_count(&self) -> usize {
        self.events.iter().filter(|e| e.cause == EventCause::Cascaded).count()
    }

    /// One row per sample: `time_s`, every `dtheta_i`, every `omega_i`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.samples.first().map_or(0, RingState::len);
        let mut header = vec!["time_s".to_string()];
        header.extend((0..n).map(|i| format!("dtheta_{i}")));
        header.extend((0..n).map(|i| format!("omega_{i}")));
        w.write_record(&header)?;
        for s in &self.samples {
            let row = std::iter::once(s.time_s)
                .chain(s.dtheta_dev.iter().copied())
                .chain(s.omega_dev.iter().copied())
                .map(|v| format!("{v:e}"));
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const STABLE: PolicyParams = PolicyParams::new(0.1, 1.0, 0.5);
    const UNSTABLE: PolicyParams = PolicyParams::new(1.0, 1.0, 0.5);

    fn ring(dtheta: &[f64], omega: &[f64]) -> RingState {
        RingState {
            time_s: 0.0,
            dtheta_dev: dtheta.to_vec(),
            omega_dev: omega.to_vec(),
        }
    }

    #[test]
    fn zero_state_is_fixed_point() {
        for kind in [PolicyKind::Pairwise, PolicyKind::Bilateral] {
            let d = derivative(&RingState::zeros(5), &STABLE, kind);
            assert!(d.dtheta_dev.iter().chain(&d.omega_dev).all(|&v| v == 0.0));
            let s = step(&RingState::zeros(5), &STABLE, kind, 0.1).unwrap();
            assert!(s.dtheta_dev.iter().chain(&s.omega_dev).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn pairwise_hand_evaluation() {
        let p = PolicyParams::new(0.3, 0.7, 0.2);
        let d = derivative(&ring(&[0.0; 3], &[1.0, 0.0, 0.0]), &p, PolicyKind::Pairwise);
        assert_eq!(d.omega_dev, vec![-0.7, 0.2, 0.0]);
        assert_eq!(d.dtheta_dev, vec![-1.0, 1.0, 0.0]);
    }

    #[test]
    fn bilateral_rates_telescope() {
        let s = ring(&[0.3, -0.1, -0.5, 0.3], &[0.2, -1.0, 0.7, 0.05]);
        let d = derivative(&s, &STABLE, PolicyKind::Bilateral);
        assert!(d.omega_dev.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn rk4_fourth_order() {
        let init = ring(&[0.01, -0.02, 0.005, 0.005], &[0.001, 0.0, -0.002, 0.0005]);
        let run = |dt: f64| {
            let mut s = init.clone();
            let steps = (4.0 / dt).round() as usize;
            for _ in 0..steps {
                s = step(&s, &STABLE, PolicyKind::Pairwise, dt).unwrap();
            }
            s
        };
        let reference = run(0.4 / 64.0);
        let err = |s: &RingState| {
            s.dtheta_dev
                .iter()
                .zip(&reference.dtheta_dev)
                .chain(s.omega_dev.iter().zip(&reference.omega_dev))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let e1 = err(&run(0.4));
        let e2 = err(&run(0.2));
        let ratio = e1 / e2;
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn injection_is_local_and_additive() {
        let mut s = RingState::zeros(4);
        let ev = inject_perturbation(&mut s, 0, 1e-6).unwrap();
        assert_eq!(ev.cause, EventCause::External);
        assert_eq!(s.omega_dev, vec![1e-6, 0.0, 0.0, 0.0]);
        inject_perturbation(&mut s, 0, -1e-6).unwrap();
        assert_eq!(s, RingState::zeros(4));
        inject_perturbation(&mut s, 2, 0.0).unwrap();
        assert_eq!(s, RingState::zeros(4));
        assert!(inject_perturbation(&mut s, 4, 1.0).is_err());
    }

    fn ev(cause: EventCause) -> ManeuverEvent {
        ManeuverEvent {
            sat_index: 0,
            time_s: 0.0,
            impulse_rad_s: 0.0,
            cause,
        }
    }

    #[test]
    fn amplification_ratios() {
        use EventCause::*;
        assert_eq!(amplification_factor(&[ev(External)]).unwrap(), 0.0);
        let mut v = vec![ev(External)];
        v.extend(std::iter::repeat_n(ev(Cascaded), 22));
        assert_eq!(amplification_factor(&v).unwrap(), 22.0);
        let mut v = vec![ev(External), ev(External)];
        v.extend(std::iter::repeat_n(ev(Cascaded), 10));
        assert_eq!(amplification_factor(&v).unwrap(), 5.0);
        assert!(amplification_factor(&[ev(Cascaded)]).is_err());
    }

    fn base(kind: PolicyKind, p: PolicyParams) -> SimConfig {
        let mut c = SimConfig::new(16, kind, p);
        c.dt_s = 0.05;
        c.duration_s = 200.0;
        c.decouple_altitude_km = None;
        c.perturbation.impulse_rad_s = 1e-2;
        c.trigger_threshold_rad = 1e-3;
        c
    }

    #[test]
    fn sub_threshold_run_has_no_cascade() {
        let mut c = base(PolicyKind::Pairwise, STABLE);
        c.trigger_threshold_rad = 10.0;
        let r = run_cascade(&c).unwrap();
        assert_eq!(r.amplification_factor, 0.0);
        assert_eq!(r.events.len(), 1);
        assert_eq!(r.terminated_by, TerminatedBy::Quiescence);
    }

    #[test]
    fn cascade_proceeds_in_ring_order() {
        let r = run_cascade(&base(PolicyKind::Pairwise, UNSTABLE)).unwrap();
        assert!(r.chain_hops > 0);
        assert_eq!(r.cascaded_count(), r.chain_hops);
        assert!(r.chain_hops < 16);
        for (k, e) in r.events.iter().enumerate() {
            assert_eq!(e.sat_index, k);
        }
        assert!(r.events.windows(2).all(|w| w[0].time_s < w[1].time_s));
        assert_relative_eq!(r.amplification_factor, r.chain_hops as f64);
    }

    #[test]
    fn telescoping_holds_on_every_sample() {
        for kind in [PolicyKind::Pairwise, PolicyKind::Bilateral] {
            let r = run_cascade(&base(kind, STABLE)).unwrap();
            for s in &r.samples {
                let scale = s.dtheta_dev.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                assert!(s.telescoping_residual().abs() <= 1e-12 * 16.0 * scale);
            }
        }
    }

    #[test]
    fn decoupling_stops_cascade() {
        let mut c = SimConfig::new(32, PolicyKind::Pairwise, UNSTABLE.time_scaled(1e-2));
        c.perturbation.impulse_rad_s = 2.3e-7;
        c.trigger_threshold_rad = 1e-5;
        c.duration_s = 20_000.0;
        c.decouple_altitude_km = Some(1.0);
        let r = run_cascade(&c).unwrap();
        assert_eq!(r.terminated_by, TerminatedBy::Decoupling);
        let free = run_cascade(&SimConfig {
            decouple_altitude_km: None,
            ..c
        })
        .unwrap();
        assert!(free.chain_hops > r.chain_hops, "{} vs {}", free.chain_hops, r.chain_hops);
    }

    #[test]
    fn altitude_conversion_sign() {
        // speeding up means dropping
        assert!(altitude_offset_km(550.0, 1e-7) < 0.0);
        let rate = SimConfig::new(5, PolicyKind::Pairwise, STABLE).decouple_rate().unwrap();
        assert_relative_eq!(altitude_offset_km(550.0, -rate), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn config_validation() {
        let ok = SimConfig::new(5, PolicyKind::Pairwise, STABLE);
        assert!(ok.validate().is_ok());
        assert!(SimConfig { n: 2, ..ok.clone() }.validate().is_err());
        assert!(SimConfig { dt_s: 0.0, ..ok.clone() }.validate().is_err());
        assert!(SimConfig { duration_s: 0.5, ..ok.clone() }.validate().is_err());
        assert!(SimConfig { trigger_threshold_rad: 0.0, ..ok.clone() }.validate().is_err());
        assert!(SimConfig { record_stride: 0, ..ok.clone() }.validate().is_err());
        let mut bad = ok.clone();
        bad.perturbation.sat_index = 5;
        assert!(bad.validate().is_err());
        let bil = SimConfig::new(5, PolicyKind::Bilateral, PolicyParams::new(0.1, 0.0, 0.5));
        assert!(bil.validate().is_ok());
    }

    #[test]
    fn csv_layout() {
        let mut c = base(PolicyKind::Pairwise, STABLE);
        c.n = 3;
        c.duration_s = 1.0;
        c.record_stride = 5;
        let r = run_cascade(&c).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "time_s,dtheta_0,dtheta_1,dtheta_2,omega_0,omega_1,omega_2"
        );
        assert_eq!(lines.count(), r.samples.len());
    }

    #[test]
    fn sweep_is_deterministic_and_ordered() {
        let cfgs = vec![base(PolicyKind::Pairwise, UNSTABLE), base(PolicyKind::Bilateral, UNSTABLE)];
        let a = run_sweep(&cfgs);
        let b: Vec<_> = cfgs.iter().map(run_cascade).collect();
        assert_eq!(a, b);
    }
}
