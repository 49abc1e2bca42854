//! Closed-form analysis of the linearized ring: stability condition,
//! collision transfer functions, circulant eigenvalues, lifetime and
//! capacity bounds.
//!
//! The linearized pairwise law for satellite `i` following `i-1` is
//!
//! ```text
//! d/dt dtheta_i = omega_{i-1} - omega_i
//! d/dt omega_i  = a1 * dtheta_i - a2 * omega_i + a3 * omega_{i-1}
//! ```
//!
//! and its transfer function from leader to follower is
//! `H(s) = (a1 + a3 s) / (a1 + a2 s + s^2)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// A complex transfer-function value.
pub type ComplexGain = Complex64;

/// Linearized sensitivities of a satellite's maneuver policy.
///
/// `alpha1` [1/s²] weighs the spacing deviation, `alpha2` [1/s] the own
/// velocity deviation and `alpha3` [1/s] the leader's velocity deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl PolicyParams {
    pub const fn new(alpha1: f64, alpha2: f64, alpha3: f64) -> Self {
        Self {
            alpha1,
            alpha2,
            alpha3,
        }
    }

    /// Sign assumptions of the pairwise model: `a1 > 0`, `a2 > a3 > 0`.
    pub fn validate_pairwise(&self) -> Result<()> {
        self.check_finite()?;
        if !(self.alpha1 > 0.0) {
            return domain(format!("alpha1 must be positive, got {}", self.alpha1));
        }
        if !(self.alpha3 > 0.0 && self.alpha2 > self.alpha3) {
            return domain(format!(
                "pairwise policy needs alpha2 > alpha3 > 0, got alpha2 = {}, alpha3 = {}",
                self.alpha2, self.alpha3
            ));
        }
        Ok(())
    }

    /// Bilateral control only needs `a1 > 0` and `a3 > 0`.
    pub fn validate_bilateral(&self) -> Result<()> {
        self.check_finite()?;
        if !(self.alpha1 > 0.0 && self.alpha3 > 0.0) {
            return domain(format!(
                "bilateral policy needs alpha1 > 0 and alpha3 > 0, got {} and {}",
                self.alpha1, self.alpha3
            ));
        }
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        if self.alpha1.is_finite() && self.alpha2.is_finite() && self.alpha3.is_finite() {
            Ok(())
        } else {
            domain("policy parameters must be finite")
        }
    }

    /// `alpha2^2 - alpha3^2 - 2*alpha1`; non-negative exactly when every ring
    /// size is asymptotically stable.
    pub fn stability_margin(&self) -> f64 {
        self.alpha2 * self.alpha2 - self.alpha3 * self.alpha3 - 2.0 * self.alpha1
    }

    /// The same policy with every rate rescaled by `s` (time runs `1/s`
    /// times faster). Gains along the imaginary axis are invariant.
    pub fn time_scaled(&self, s: f64) -> Self {
        Self::new(self.alpha1 * s * s, self.alpha2 * s, self.alpha3 * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub margin: f64,
    /// Largest real part over the non-structural ring eigenvalues, when a
    /// ring size was supplied.
    pub max_real_eig: Option<f64>,
}

pub fn stability_verdict(p: &PolicyParams) -> Result<StabilityVerdict> {
    p.validate_pairwise()?;
    let margin = p.stability_margin();
    Ok(StabilityVerdict {
        stable: margin >= 0.0,
        margin,
        max_real_eig: None,
    })
}

/// Verdict plus the finite-ring eigenvalue check for `n` satellites.
pub fn stability_verdict_for_ring(p: &PolicyParams, n: usize) -> Result<StabilityVerdict> {
    let mut v = stability_verdict(p)?;
    v.max_real_eig = Some(max_real_part(p, n)?);
    Ok(v)
}

fn pole_guard(den: Complex64, lambda: Complex64, scale: f64) -> Result<()> {
    if den.norm() <= f64::EPSILON * scale || !den.is_finite() {
        return Err(Error::Pole {
            re: lambda.re,
            im: lambda.im,
        });
    }
    Ok(())
}

/// Pairwise collision transfer function `H(s) = (a1 + a3 s)/(a1 + a2 s + s^2)`.
pub fn transfer_gain(p: &PolicyParams, lambda: Complex64) -> Result<ComplexGain> {
    let num = lambda * p.alpha3 + p.alpha1;
    let den = lambda * (lambda + p.alpha2) + p.alpha1;
    let scale = p.alpha1.abs() + (p.alpha2 * lambda).norm() + lambda.norm_sqr();
    pole_guard(den, lambda, scale)?;
    Ok(num / den)
}

/// Bilateral collision transfer function `(a1 + a3 s)/(2 a1 + 2 a3 s + s^2)`.
pub fn bilateral_transfer_gain(p: &PolicyParams, lambda: Complex64) -> Result<ComplexGain> {
    let num = lambda * p.alpha3 + p.alpha1;
    let den = lambda * (lambda + 2.0 * p.alpha3) + 2.0 * p.alpha1;
    let scale = 2.0 * p.alpha1.abs() + (2.0 * p.alpha3 * lambda).norm() + lambda.norm_sqr();
    pole_guard(den, lambda, scale)?;
    Ok(num / den)
}

/// `|H(i mu)|` without going through complex division.
fn gain_on_imag_axis(p: &PolicyParams, mu: f64) -> f64 {
    let x = mu * mu;
    let num = p.alpha1 * p.alpha1 + p.alpha3 * p.alpha3 * x;
    let re = p.alpha1 - x;
    let den = re * re + p.alpha2 * p.alpha2 * x;
    (num / den).sqrt()
}

/// Peak of `|H(i mu)|` over `mu >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagAxisPeak {
    pub mu: f64,
    pub gain: f64,
}

const SWEEP_POINTS: usize = 10_000;

/// Supremum of `|H(i mu)|` by a dense log-spaced sweep refined with a
/// golden-section search around the best grid point.
///
/// `|H(0)| = 1` for every policy, so the result is never below one.
pub fn sup_gain_imag_axis(p: &PolicyParams) -> Result<ImagAxisPeak> {
    p.validate_pairwise()?;
    Ok(sweep_peak(|mu| gain_on_imag_axis(p, mu), characteristic_rate(p)))
}

/// Rate scale of the policy: the larger of `alpha2` and `sqrt(alpha1)`.
pub(crate) fn characteristic_rate(p: &PolicyParams) -> f64 {
    p.alpha2.abs().max(p.alpha1.abs().sqrt())
}

/// Sweep `f` over `mu in [1e-7, 1e3] * scale` (log-spaced) plus `mu = 0`,
/// then polish the best bracket by golden section.
pub(crate) fn sweep_peak(f: impl Fn(f64) -> f64, scale: f64) -> ImagAxisPeak {
    let lo = (1e-7 * scale).ln();
    let hi = (1e3 * scale).ln();
    let step = (hi - lo) / (SWEEP_POINTS - 1) as f64;
    let mus: Vec<f64> = std::iter::once(0.0)
        .chain((0..SWEEP_POINTS).map(|k| (lo + step * k as f64).exp()))
        .collect();

    let (best, best_val) = mus
        .iter()
        .enumerate()
        .map(|(k, &mu)| (k, f(mu)))
        .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });

    let a = mus[best.saturating_sub(1)];
    let b = mus[(best + 1).min(mus.len() - 1)];
    let (mu, val) = golden_max(&f, a, b, 200);
    if val > best_val {
        ImagAxisPeak { mu, gain: val }
    } else {
        ImagAxisPeak {
            mu: mus[best],
            gain: best_val,
        }
    }
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if (b - a).abs() <= 1e-15 * b.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// The two eigenvalues contributed by one circulant block of the ring
/// system matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingMode {
    /// Block index `i` in `1..=n`.
    pub block: usize,
    /// `z^k` with `z = exp(2 pi j / n)`, `k = (n-1)(i-1) mod n`; every root in
    /// this block satisfies `H(lambda) = 1 / root_of_unity`.
    pub root_of_unity: Complex64,
    /// Roots ordered by ascending real part.
    pub roots: [Complex64; 2],
}

/// Roots of `s^2 + b s + c = 0` with the cancellation-free form of the
/// quadratic formula (principal square root).
fn quadratic_roots(b: Complex64, c: Complex64) -> [Complex64; 2] {
    let disc = (b * b - c * 4.0).sqrt();
    // pick the sign that avoids subtracting nearly equal numbers
    let q = if (b.conj() * disc).re >= 0.0 {
        -(b + disc) * 0.5
    } else {
        -(b - disc) * 0.5
    };
    let r1 = q;
    let r2 = if q == Complex64::new(0.0, 0.0) {
        Complex64::new(0.0, 0.0)
    } else {
        c / q
    };
    order_by_real(r1, r2)
}

fn order_by_real(a: Complex64, b: Complex64) -> [Complex64; 2] {
    if cmp_complex(&a, &b).is_le() {
        [a, b]
    } else {
        [b, a]
    }
}

fn cmp_complex(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

fn unit_root(k: usize, n: usize) -> Complex64 {
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    Complex64::from_polar(1.0, TAU * k as f64 / n as f64)
}

/// Per-block eigenvalues of the `2n x 2n` ring system matrix.
///
/// Block `i` solves `s^2 + (a2 - a3 w) s + a1 (1 - w) = 0` with
/// `w = z^((n-1)(i-1) mod n)`. Block 1 (`w = 1`) always yields the pair
/// `{-(a2 - a3), 0}`; the zero is the structural uniform-rotation mode.
pub fn ring_modes(p: &PolicyParams, n: usize) -> Result<Vec<RingMode>> {
    p.validate_pairwise()?;
    if n < 2 {
        return domain(format!("ring needs at least two satellites, got {n}"));
    }
    Ok((1..=n)
        .map(|block| {
            let k = ((n - 1) * (block - 1)) % n;
            let w = unit_root(k, n);
            let b = Complex64::new(p.alpha2, 0.0) - w * p.alpha3;
            let c = (Complex64::new(1.0, 0.0) - w) * p.alpha1;
            let roots = if k == 0 {
                order_by_real(Complex64::new(-(p.alpha2 - p.alpha3), 0.0), Complex64::new(0.0, 0.0))
            } else {
                quadratic_roots(b, c)
            };
            RingMode {
                block,
                root_of_unity: w,
                roots,
            }
        })
        .collect())
}

/// All `2n` eigenvalues of the ring system matrix, ascending by real part
/// (ties broken by imaginary part).
pub fn ring_eigenvalues(p: &PolicyParams, n: usize) -> Result<Vec<Complex64>> {
    let mut all: Vec<Complex64> = ring_modes(p, n)?
        .into_iter()
        .flat_map(|m| m.roots)
        .collect();
    all.sort_by(cmp_complex);
    Ok(all)
}

/// Non-structural eigenvalues: everything except the block-1 zero.
fn non_structural(modes: &[RingMode]) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
    modes.iter().flat_map(|m| {
        m.roots
            .iter()
            .filter(move |r| !(m.block == 1 && r.re == 0.0 && r.im == 0.0))
            .map(move |&r| (r, m.root_of_unity))
    })
}

/// Largest real part over all eigenvalues except the single structural zero.
pub fn max_real_part(p: &PolicyParams, n: usize) -> Result<f64> {
    let modes = ring_modes(p, n)?;
    Ok(non_structural(&modes)
        .map(|(r, _)| r.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Minimum safe spacing under worst-case external maneuver amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeDistance {
    /// `c_max * max |(1 - H(s)) / s|` over the stable non-structural
    /// eigenvalues of an `n`-satellite ring.
    pub ring_bound_rad: f64,
    pub ring_size: usize,
    /// Same expression maximized over the imaginary axis; independent of `n`.
    pub imag_axis_bound_rad: f64,
}

/// `|(1 - H(s)) / s|`; tends to `(a2 - a3) / a1` as `s -> 0`.
fn spacing_sensitivity(p: &PolicyParams, s: Complex64, h: Complex64) -> f64 {
    if s.norm() == 0.0 {
        return (p.alpha2 - p.alpha3) / p.alpha1;
    }
    ((Complex64::new(1.0, 0.0) - h) / s).norm()
}

pub fn safe_distance_bound(p: &PolicyParams, c_max: f64, n: usize) -> Result<SafeDistance> {
    let verdict = stability_verdict(p)?;
    if !verdict.stable {
        return domain(format!(
            "safe distance is only defined for stable policies (margin {:e})",
            verdict.margin
        ));
    }
    if !(c_max > 0.0 && c_max.is_finite()) {
        return domain(format!("c_max must be positive, got {c_max}"));
    }
    let modes = ring_modes(p, n)?;
    // on the ring H(s) = 1/w exactly, so no transfer-function evaluation is needed
    let ring = non_structural(&modes)
        .filter(|(r, _)| r.re < 0.0)
        .map(|(r, w)| spacing_sensitivity(p, r, w.inv()))
        .fold(0.0, f64::max);

    let axis = sweep_peak(
        |mu| {
            let s = Complex64::new(0.0, mu);
            let h = transfer_gain(p, s).unwrap_or(Complex64::new(f64::NAN, 0.0));
            let v = spacing_sensitivity(p, s, h);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        characteristic_rate(p),
    );

    Ok(SafeDistance {
        ring_bound_rad: c_max * ring,
        ring_size: n,
        imag_axis_bound_rad: c_max * axis.gain,
    })
}

/// Time at which the `n_maneuvers`-th cascaded maneuver is triggered, given
/// hop gain `h_gain` and first-hop time `t0`:
/// `t0 * (1 - h^-N) / (1 - h^-1)`.
///
/// At `h_gain == 1` the formula is singular; with `unity_limit` set the
/// limit `N * t0` is returned instead of an error.
pub fn time_of_nth_maneuver(h_gain: f64, t0: f64, n_maneuvers: u32, unity_limit: bool) -> Result<f64> {
    if !(h_gain > 0.0 && h_gain.is_finite()) {
        return domain(format!("gain must be positive, got {h_gain}"));
    }
    if !(t0 > 0.0 && t0.is_finite()) {
        return domain(format!("t0 must be positive, got {t0}"));
    }
    if n_maneuvers < 1 {
        return domain("maneuver index starts at 1");
    }
    if h_gain == 1.0 {
        return if unity_limit {
            Ok(f64::from(n_maneuvers) * t0)
        } else {
            Err(Error::UnitGain)
        };
    }
    let inv = h_gain.recip();
    Ok(t0 * (1.0 - inv.powi(n_maneuvers as i32)) / (1.0 - inv))
}

/// Finite time `t0 / (1 - 1/h)` at which the maneuver count diverges.
pub fn blowup_horizon(h_gain: f64, t0: f64) -> Result<f64> {
    if !(h_gain > 1.0 && h_gain.is_finite()) {
        return domain(format!("blow-up horizon needs gain > 1, got {h_gain}"));
    }
    if !(t0 > 0.0 && t0.is_finite()) {
        return domain(format!("t0 must be positive, got {t0}"));
    }
    Ok(t0 / (1.0 - h_gain.recip()))
}

/// Real-valued number of maneuvers triggered by time `t`:
/// `ln(t0 / (t0 - t (1 - 1/h))) / ln h`.
pub fn maneuver_count(h_gain: f64, t0: f64, t: f64) -> Result<f64> {
    let horizon = blowup_horizon(h_gain, t0)?;
    if !(t >= 0.0) {
        return domain(format!("time must be non-negative, got {t}"));
    }
    if t >= horizon {
        return Err(Error::Horizon { t, horizon });
    }
    let shrink = 1.0 - h_gain.recip();
    Ok((t0 / (t0 - t * shrink)).ln() / h_gain.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityBound {
    pub max_sats: u64,
    pub max_capacity_gbps: f64,
}

/// `2 pi F / dtheta_safe`, the (real-valued) satellite-count ceiling.
pub fn capacity_ratio(delta_theta_safe: f64, phase_factor_f: u32) -> Result<f64> {
    if !(delta_theta_safe > 0.0 && delta_theta_safe.is_finite()) {
        return domain(format!("safe distance must be positive, got {delta_theta_safe}"));
    }
    if phase_factor_f < 1 {
        return domain("capacity bound needs phase factor F >= 1");
    }
    Ok(TAU * f64::from(phase_factor_f) / delta_theta_safe)
}

/// Largest satellite count strictly below `2 pi F / dtheta_safe`.
pub fn capacity_bound(delta_theta_safe: f64, phase_factor_f: u32, per_sat_gbps: f64) -> Result<CapacityBound> {
    if !(per_sat_gbps >= 0.0 && per_sat_gbps.is_finite()) {
        return domain(format!("per-satellite capacity must be non-negative, got {per_sat_gbps}"));
    }
    let ratio = capacity_ratio(delta_theta_safe, phase_factor_f)?;
    let floor = ratio.floor();
    let max_sats = if floor == ratio { floor - 1.0 } else { floor }.max(0.0) as u64;
    Ok(CapacityBound {
        max_sats,
        max_capacity_gbps: max_sats as f64 * per_sat_gbps,
    })
}
