//! Pairwise collision probability on the conjunction plane.
//!
//! [`project_to_conjunction_plane`] reduces two object states at closest
//! approach to a 2-D Gaussian miss problem; [`collision_probability`]
//! integrates that Gaussian over the combined hard-body disk with adaptive
//! polar Gauss-Legendre quadrature. [`pc_monte_carlo`] is an independent
//! sampling estimate of the same quantity.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::TAU;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use nalgebra::{Matrix2, Matrix3, Matrix3x2, SymmetricEigen, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Sigmas below this are floored (km).
pub const SIGMA_FLOOR_KM: f64 = 1e-9;

/// Position/velocity of one object at time of closest approach, with its
/// 3x3 position covariance (km²) and hard-body radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    pub position_km: Vector3<f64>,
    pub velocity_km_s: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    pub radius_km: f64,
}

impl StateVector {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_km > 0.0) {
            return Err(Error::Data(format!("hard-body radius must be positive, got {}", self.radius_km)));
        }
        if !(self.velocity_km_s.norm() > 0.0) {
            return Err(Error::Data("velocity must be non-zero".into()));
        }
        if !self.position_km.iter().chain(self.velocity_km_s.iter()).all(|v| v.is_finite()) {
            return Err(Error::Data("state vector has non-finite components".into()));
        }
        check_psd(&self.covariance, "object covariance")
    }
}

fn check_psd(c: &Matrix3<f64>, what: &str) -> Result<()> {
    if !c.iter().all(|v| v.is_finite()) {
        return Err(Error::Data(format!("{what} has non-finite entries")));
    }
    let asym = (c - c.transpose()).abs().max();
    let scale = c.abs().max().max(f64::MIN_POSITIVE);
    if asym > 1e-12 * scale {
        return Err(Error::Data(format!("{what} is not symmetric")));
    }
    let eig = SymmetricEigen::new(*c).eigenvalues;
    let floor = -1e-12 * c.trace().abs();
    if eig.iter().any(|&l| l < floor) {
        return Err(Error::Data(format!(
            "{what} is not positive semi-definite (min eigenvalue {:e})",
            eig.min()
        )));
    }
    Ok(())
}

/// Miss vector and combined uncertainty expressed in the principal axes of
/// the projected covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjunctionGeometry {
    pub miss_x_km: f64,
    pub miss_y_km: f64,
    pub sigma_x_km: f64,
    pub sigma_y_km: f64,
    pub combined_radius_km: f64,
}

impl ConjunctionGeometry {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma_x_km > 0.0
            && self.sigma_y_km > 0.0
            && self.combined_radius_km > 0.0
            && self.miss_x_km.is_finite()
            && self.miss_y_km.is_finite()
            && self.sigma_x_km.is_finite()
            && self.sigma_y_km.is_finite()
            && self.combined_radius_km.is_finite();
        if ok {
            Ok(())
        } else {
            domain(format!("invalid conjunction geometry {self:?}"))
        }
    }

    pub fn miss_distance_km(&self) -> f64 {
        self.miss_x_km.hypot(self.miss_y_km)
    }
}

/// One conjunction report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdmRecord {
    pub object_a_id: u32,
    pub object_b_id: u32,
    /// Time of closest approach, UTC seconds since the Unix epoch.
    pub tca: f64,
    pub pc: f64,
    pub miss_distance_km: f64,
    /// Conjunction-plane geometry, when the report carries it.
    pub geometry: Option<ConjunctionGeometry>,
}

impl CdmRecord {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pc) {
            return Err(Error::Data(format!("pc {} outside [0, 1]", self.pc)));
        }
        if !(self.miss_distance_km >= 0.0) {
            return Err(Error::Data(format!("negative miss distance {}", self.miss_distance_km)));
        }
        if !self.tca.is_finite() {
            return Err(Error::Data("non-finite TCA".into()));
        }
        if let Some(g) = &self.geometry {
            g.validate()?;
        }
        Ok(())
    }

    pub fn involves(&self, sat_id: u32) -> bool {
        self.object_a_id == sat_id || self.object_b_id == sat_id
    }
}

/// Eigen-decomposition of a symmetric 2x2 matrix by a single Jacobi
/// rotation. Returns `(l1, l2, u, v)` with `u`, `v` orthonormal.
fn sym2_eigen(c: &Matrix2<f64>) -> (f64, f64, Vector2<f64>, Vector2<f64>) {
    let (a, b, d) = (c[(0, 0)], 0.5 * (c[(0, 1)] + c[(1, 0)]), c[(1, 1)]);
    let theta = 0.5 * (2.0 * b).atan2(a - d);
    let (s, co) = theta.sin_cos();
    let l1 = a * co * co + 2.0 * b * s * co + d * s * s;
    let l2 = a * s * s - 2.0 * b * s * co + d * co * co;
    (l1, l2, Vector2::new(co, s), Vector2::new(-s, co))
}

/// Project a pair of states onto the conjunction plane.
///
/// The plane is spanned by `e2 = (vB x vA)/|vB x vA|` and `e3 = e1 x e2`
/// with `e1` along the relative velocity; the joint position covariance is
/// projected there and diagonalized, and the miss vector is expressed in
/// the eigenvector basis.
pub fn project_to_conjunction_plane(a: &StateVector, b: &StateVector) -> Result<ConjunctionGeometry> {
    a.validate()?;
    b.validate()?;
    let v_rel = b.velocity_km_s - a.velocity_km_s;
    let cross = b.velocity_km_s.cross(&a.velocity_km_s);
    let vel_scale = a.velocity_km_s.norm() * b.velocity_km_s.norm();
    if v_rel.norm() <= 1e-12 * vel_scale.sqrt() {
        return Err(Error::DegenerateGeometry("relative velocity is zero".into()));
    }
    if cross.norm() <= 1e-12 * vel_scale {
        return Err(Error::DegenerateGeometry("velocities are parallel".into()));
    }
    let e1 = v_rel.normalize();
    let e2 = cross.normalize();
    let e3 = e1.cross(&e2);
    let q = Matrix3x2::from_columns(&[e2, e3]);

    let joint = a.covariance + b.covariance;
    check_psd(&joint, "combined covariance")?;
    let c = q.transpose() * joint * q;
    let (l1, l2, u, v) = sym2_eigen(&c);
    let floor = |var: f64, axis: &str| {
        let sigma = var.max(0.0).sqrt();
        if sigma < SIGMA_FLOOR_KM {
            log::warn!("sigma_{axis} = {sigma:e} km floored to {SIGMA_FLOOR_KM:e} km");
            SIGMA_FLOOR_KM
        } else {
            sigma
        }
    };

    let miss_plane = q.transpose() * (b.position_km - a.position_km);
    Ok(ConjunctionGeometry {
        miss_x_km: u.dot(&miss_plane),
        miss_y_km: v.dot(&miss_plane),
        sigma_x_km: floor(l1, "x"),
        sigma_y_km: floor(l2, "y"),
        combined_radius_km: a.radius_km + b.radius_km,
    })
}

const GL_ORDER: usize = 8;
const MAX_CELLS: usize = 400_000;

fn gl_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(NonZeroUsize::new(GL_ORDER).expect("non-zero order"))
            .as_node_weight_pairs()
            .to_vec()
    })
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    r0: f64,
    r1: f64,
    p0: f64,
    p1: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates the unnormalized Gaussian over the disk in polar coordinates.
struct PolarIntegrand<'a> {
    g: &'a ConjunctionGeometry,
    inv_sx2: f64,
    inv_sy2: f64,
}

impl<'a> PolarIntegrand<'a> {
    fn new(g: &'a ConjunctionGeometry) -> Self {
        Self {
            g,
            inv_sx2: 1.0 / (g.sigma_x_km * g.sigma_x_km),
            inv_sy2: 1.0 / (g.sigma_y_km * g.sigma_y_km),
        }
    }

    fn eval(&self, r: f64, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        let dx = r * c - self.g.miss_x_km;
        let dy = r * s - self.g.miss_y_km;
        (-0.5 * (dx * dx * self.inv_sx2 + dy * dy * self.inv_sy2)).exp() * r
    }

    fn rule(&self, r0: f64, r1: f64, p0: f64, p1: f64) -> f64 {
        let (rm, rh) = (0.5 * (r0 + r1), 0.5 * (r1 - r0));
        let (pm, ph) = (0.5 * (p0 + p1), 0.5 * (p1 - p0));
        let nodes = gl_rule();
        let mut acc = 0.0;
        for &(xr, wr) in nodes {
            let r = rm + rh * xr;
            let mut inner = 0.0;
            for &(xp, wp) in nodes {
                inner += wp * self.eval(r, pm + ph * xp);
            }
            acc += wr * inner;
        }
        acc * rh * ph
    }

    /// Cell estimate from its four children, with the coarse-vs-fine
    /// difference as error.
    fn cell(&self, r0: f64, r1: f64, p0: f64, p1: f64) -> Cell {
        let coarse = self.rule(r0, r1, p0, p1);
        let (rm, pm) = (0.5 * (r0 + r1), 0.5 * (p0 + p1));
        let fine = self.rule(r0, rm, p0, pm)
            + self.rule(rm, r1, p0, pm)
            + self.rule(r0, rm, pm, p1)
            + self.rule(rm, r1, pm, p1);
        Cell {
            r0,
            r1,
            p0,
            p1,
            value: fine,
            error: (fine - coarse).abs(),
        }
    }
}

/// Starting cells: a coarse uniform polar grid, refined around the miss
/// point at multiples of both sigmas so a narrow peak cannot fall between
/// quadrature nodes.
fn initial_grid(g: &ConjunctionGeometry) -> (Vec<f64>, Vec<f64>) {
    let radius = g.combined_radius_km;
    let rho = g.miss_distance_km();
    let phi = g.miss_y_km.atan2(g.miss_x_km).rem_euclid(TAU);
    let s_min = g.sigma_x_km.min(g.sigma_y_km);
    let s_max = g.sigma_x_km.max(g.sigma_y_km);
    let offsets: Vec<f64> = [s_min, s_max]
        .iter()
        .flat_map(|&s| [0.0, 1.0, 2.0, 4.0, 8.0].map(|k| k * s))
        .collect();

    let mut r: Vec<f64> = vec![0.0, 0.5 * radius, radius];
    for &d in &offsets {
        r.extend([rho - d, rho + d]);
    }
    let mut p: Vec<f64> = (0..=8).map(|j| TAU * j as f64 / 8.0).collect();
    if rho > 0.0 {
        for &d in &offsets {
            let w = d / rho;
            if w < std::f64::consts::PI {
                p.extend([(phi - w).rem_euclid(TAU), (phi + w).rem_euclid(TAU)]);
            }
        }
    }
    let tidy = |v: &mut Vec<f64>, hi: f64| {
        v.retain(|x| (0.0..=hi).contains(x));
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * hi);
    };
    tidy(&mut r, radius);
    tidy(&mut p, TAU);
    (r, p)
}

/// Probability that the relative position falls inside the combined
/// hard-body disk:
/// `1/(2 pi sx sy) * integral_{x^2+y^2<=R^2} exp(-((x-xm)^2/sx^2 + (y-ym)^2/sy^2)/2)`.
///
/// Uses globally adaptive tensor-product Gauss-Legendre over `(r, phi)` and
/// stops once the summed error estimate is below `rel_tol` times the
/// estimate. The result is clamped to `[0, 1]`.
pub fn collision_probability(geom: &ConjunctionGeometry, rel_tol: f64) -> Result<f64> {
    geom.validate()?;
    if !(rel_tol > 0.0 && rel_tol <= 1e-3) {
        return domain(format!("rel_tol must lie in (0, 1e-3], got {rel_tol}"));
    }
    let f = PolarIntegrand::new(geom);
    let norm = 1.0 / (TAU * geom.sigma_x_km * geom.sigma_y_km);

    let (r_breaks, p_breaks) = initial_grid(geom);
    let mut heap = BinaryHeap::with_capacity(1024);
    for r in r_breaks.windows(2) {
        for p in p_breaks.windows(2) {
            heap.push(f.cell(r[0], r[1], p[0], p[1]));
        }
    }

    let mut value: f64 = heap.iter().map(|c| c.value).sum();
    let mut error: f64 = heap.iter().map(|c| c.error).sum();
    loop {
        // absolute floor keeps far-miss cases (value underflows to 0) finite
        if error <= rel_tol * value.abs() || error * norm <= 1e-300 {
            break;
        }
        if heap.len() >= MAX_CELLS {
            return Err(Error::Quadrature {
                estimate: (value * norm).clamp(0.0, 1.0),
                achieved_error: error * norm,
                requested: rel_tol,
            });
        }
        let worst = heap.pop().expect("heap never empties");
        value -= worst.value;
        error -= worst.error;
        let rm = 0.5 * (worst.r0 + worst.r1);
        let pm = 0.5 * (worst.p0 + worst.p1);
        for (r0, r1, p0, p1) in [
            (worst.r0, rm, worst.p0, pm),
            (rm, worst.r1, worst.p0, pm),
            (worst.r0, rm, pm, worst.p1),
            (rm, worst.r1, pm, worst.p1),
        ] {
            let c = f.cell(r0, r1, p0, p1);
            value += c.value;
            error += c.error;
            heap.push(c);
        }
        // re-sum occasionally so running totals don't drift
        if heap.len() % 4096 == 0 {
            value = heap.iter().map(|c| c.value).sum();
            error = heap.iter().map(|c| c.error).sum();
        }
    }
    Ok((value * norm).clamp(0.0, 1.0))
}

/// Monte-Carlo estimate of the collision probability with its binomial
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub pc: f64,
    pub std_error: f64,
    pub samples: u64,
    pub hits: u64,
}

/// Draws `samples` relative positions from the miss distribution and counts
/// those inside the disk. Deterministic for a given seed.
pub fn pc_monte_carlo(geom: &ConjunctionGeometry, samples: u64, seed: u64) -> Result<McEstimate> {
    geom.validate()?;
    if samples < 1000 {
        return domain(format!("Monte-Carlo needs at least 1000 samples, got {samples}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r2 = geom.combined_radius_km * geom.combined_radius_km;
    let mut hits = 0u64;
    for _ in 0..samples {
        let zx: f64 = rng.sample(StandardNormal);
        let zy: f64 = rng.sample(StandardNormal);
        let x = geom.miss_x_km + geom.sigma_x_km * zx;
        let y = geom.miss_y_km + geom.sigma_y_km * zy;
        if x * x + y * y <= r2 {
            hits += 1;
        }
    }
    let n = samples as f64;
    let pc = hits as f64 / n;
    Ok(McEstimate {
        pc,
        std_error: (pc * (1.0 - pc) / n).sqrt(),
        samples,
        hits,
    })
}

/// Operator decision rule: maneuver when `pc >= threshold`.
pub fn is_high_risk(pc: f64, threshold: f64) -> Result<bool> {
    if !(0.0..=1.0).contains(&pc) || !(0.0..=1.0).contains(&threshold) {
        return domain(format!("probabilities must lie in [0, 1], got {pc} and {threshold}"));
    }
    Ok(pc >= threshold)
}
