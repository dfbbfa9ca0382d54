//! The two geodesic methods and their shared fixed-step integrator.
//!
//! Costate method: integrate the coupled system
//!   ġ = g · embed(u),   u = (ψ_1, ..., ψ_r, 0, ..., 0),
//!   ψ̇_j = Σ_{k=1..n} Σ_{i=1..r} c_ij^k ψ_i ψ_k,
//! from g(0) = I.
//!
//! Field method: integrate ġ = g · embed(u(g)) where u(g) is the rank-r
//! truncation of the coadjoint pullback (Ad g)*(ψ_0); ψ along the curve is
//! reconstructed as the pullback rather than integrated.
//!
//! Both conserve |u(t)| and ψ(t)·u(t); the integrator reports the drift.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::algebra::{AlgebraVector, StructureConstants};
use crate::error::Error;
use crate::group::{ensure_group_element, exp_matrix, Representation};

/// A complete group description: structure constants, matrix representation,
/// distribution rank r (the first r basis vectors are orthonormal in the
/// metric), and named scalar parameters.
#[derive(Debug, Clone)]
pub struct LieModel {
    pub name: String,
    pub sc: StructureConstants,
    pub rep: Representation,
    pub rank: usize,
    pub params: BTreeMap<String, f64>,
}

impl LieModel {
    /// Validates and assembles a model. Fails unless the structure constants
    /// pass antisymmetry + Jacobi, the representation reproduces them, and
    /// e_1..e_r is bracket-generating.
    pub fn new(
        name: impl Into<String>,
        sc: StructureConstants,
        rep: Representation,
        rank: usize,
        params: BTreeMap<String, f64>,
    ) -> Result<Self, Error> {
        if rep.dim() != sc.dim() {
            return Err(Error::DimensionMismatch {
                expected: sc.dim(),
                got: rep.dim(),
            });
        }
        let report = sc.validate();
        if !report.is_valid() {
            return Err(Error::InvalidStructureConstants(report.to_string()));
        }
        rep.check_consistency(&sc)?;
        sc.generation_filtration(rank)?;
        Ok(Self {
            name: name.into(),
            sc,
            rep,
            rank,
            params,
        })
    }

    /// Algebra dimension n.
    pub fn dim(&self) -> usize {
        self.sc.dim()
    }

    /// Representation dimension d.
    pub fn rep_dim(&self) -> usize {
        self.rep.rep_dim()
    }

    /// Same model with a different distribution rank (e.g. the Riemannian
    /// variant r = n used for the bi-invariant 1-parameter-subgroup check).
    pub fn with_rank(mut self, rank: usize) -> Result<Self, Error> {
        self.sc.generation_filtration(rank)?;
        self.rank = rank;
        Ok(self)
    }
}

/// How to treat an initial costate with |u(0)| != 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnnormalizedPolicy {
    /// Fail with [`Error::UnnormalizedCostate`] (default).
    #[default]
    Reject,
    /// Integrate as-is; the constant speed |u(0)| is recorded on the
    /// trajectory (constant-speed reparametrization).
    AcceptReportSpeed,
    /// Rescale the whole covector so that |u(0)| = 1.
    Rescale,
}

/// Fixed-step integration window. The method is the classical explicit
/// 4th-order one-step scheme on the ambient matrix space.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    /// Target step in arclength units. The actual step is T/N with
    /// N = floor(T/h) so that the grid ends exactly at the horizon.
    pub step: f64,
    /// Horizon T.
    pub horizon: f64,
    pub unnormalized: UnnormalizedPolicy,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            horizon: 10.0,
            unnormalized: UnnormalizedPolicy::Reject,
        }
    }
}

impl IntegratorConfig {
    pub fn new(step: f64, horizon: f64) -> Self {
        Self {
            step,
            horizon,
            ..Self::default()
        }
    }
}

/// Which geodesic method produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Costate,
    Field,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Costate => "costate",
            Method::Field => "field",
        }
    }
}

/// One record (t, g, ψ, u) along a geodesic.
///
/// The integrator carries its state in compensated (double-double) form;
/// `g_comp` and `psi_comp` hold the sub-ulp remainders so that g + g_comp
/// and ψ + ψ_comp recover the state to roughly twice f64 precision (used by
/// convergence measurements; file formats store only the rounded values).
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    pub g: DMatrix<f64>,
    pub g_comp: DMatrix<f64>,
    pub psi: DVector<f64>,
    pub psi_comp: DVector<f64>,
    pub u: DVector<f64>,
}

/// Conservation diagnostics relative to the initial speed s0 = |u(0)|:
/// max |‖u(t)‖ - s0| and max |ψ(t)·u(t) - s0²|. For arclength geodesics
/// s0 = 1 and these are the drifts of Eq-level invariants |u| ≡ 1 and
/// ψ(u) ≡ 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConservationReport {
    pub speed: f64,
    pub max_speed_drift: f64,
    pub max_hamiltonian_drift: f64,
}

/// Time-sampled record of a geodesic with conservation diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub method: Method,
    /// Constant speed |u(0)| of the parametrization.
    pub speed: f64,
    pub samples: Vec<Sample>,
    pub diagnostics: ConservationReport,
    /// Largest least-squares residual seen when projecting conjugated basis
    /// matrices back into the algebra (field method only); measures drift
    /// from the group manifold.
    pub max_span_residual: f64,
    /// Set when integration stopped early on a non-finite state.
    pub aborted_at: Option<f64>,
}

/// Costate equation ψ̇_j = Σ_{k=1..n} Σ_{i=1..r} c_ij^k ψ_i ψ_k.
pub fn costate_rhs(psi: &DVector<f64>, model: &LieModel) -> Result<DVector<f64>, Error> {
    let n = model.dim();
    if psi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: psi.len(),
        });
    }
    Ok(costate_rhs_unchecked(psi, &model.sc, model.rank))
}

fn costate_rhs_unchecked(psi: &DVector<f64>, sc: &StructureConstants, rank: usize) -> DVector<f64> {
    let n = sc.dim();
    let mut out = DVector::zeros(n);
    for j in 0..n {
        let mut s = 0.0;
        for i in 0..rank {
            if psi[i] == 0.0 {
                continue;
            }
            for k in 0..n {
                let c = sc.get(i, j, k);
                if c != 0.0 {
                    s += c * psi[i] * psi[k];
                }
            }
        }
        out[j] = s;
    }
    out
}

/// Control u = Σ_{i=1..r} ψ_i e_i: first r components of ψ, rest zero.
pub fn control_of(psi: &DVector<f64>, rank: usize) -> AlgebraVector {
    let mut u = DVector::zeros(psi.len());
    for i in 0..rank.min(psi.len()) {
        u[i] = psi[i];
    }
    u
}

fn control_speed(psi: &DVector<f64>, rank: usize) -> f64 {
    psi.rows(0, rank.min(psi.len())).norm()
}

/// Geodesic vector field v(g) = g · embed(u(g)) with u(g) the rank-r
/// truncation of the coadjoint pullback (Ad g)*(ψ_0).
pub fn field_rhs(
    g: &DMatrix<f64>,
    psi0: &DVector<f64>,
    model: &LieModel,
) -> Result<DMatrix<f64>, Error> {
    let pullback = model.rep.coadjoint_pullback(g, psi0)?;
    let u = control_of(&pullback, model.rank);
    Ok(g * model.rep.embed(&u)?)
}

/// Integrates the coupled (g, ψ) system of the costate method from g(0) = I.
pub fn integrate_costate(
    model: &LieModel,
    psi0: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, Error> {
    let n = model.dim();
    let d = model.rep_dim();
    if psi0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: psi0.len(),
        });
    }
    let mut psi0 = psi0.clone();
    let speed = apply_normalization_policy(&mut psi0, model.rank, cfg.unnormalized)?;
    let grid = Grid::from_config(cfg)?;

    let dd = d * d;
    let mut y0 = DVector::zeros(dd + n);
    y0.rows_mut(0, dd)
        .copy_from_slice(DMatrix::<f64>::identity(d, d).as_slice());
    y0.rows_mut(dd, n).copy_from(&psi0);

    let sc = model.sc.clone();
    let rep = model.rep.clone();
    let rank = model.rank;
    let rhs = move |y: &DVector<f64>| -> Result<DVector<f64>, Error> {
        let g = DMatrix::from_column_slice(d, d, &y.as_slice()[..dd]);
        let psi = DVector::from_column_slice(&y.as_slice()[dd..]);
        let u = control_of(&psi, rank);
        let gdot = &g * rep.embed(&u)?;
        let psidot = costate_rhs_unchecked(&psi, &sc, rank);
        let mut out = DVector::zeros(dd + n);
        out.rows_mut(0, dd).copy_from_slice(gdot.as_slice());
        out.rows_mut(dd, n).copy_from(&psidot);
        Ok(out)
    };

    let mut samples = Vec::with_capacity(grid.n_steps + 1);
    let aborted_at = rk4_drive(y0, &grid, rhs, |t, y, y_comp| {
        let g = DMatrix::from_column_slice(d, d, &y.as_slice()[..dd]);
        let g_comp = DMatrix::from_column_slice(d, d, &y_comp.as_slice()[..dd]);
        let psi = DVector::from_column_slice(&y.as_slice()[dd..]);
        let psi_comp = DVector::from_column_slice(&y_comp.as_slice()[dd..]);
        let u = control_of(&psi, model.rank);
        samples.push(Sample {
            t,
            g,
            g_comp,
            psi,
            psi_comp,
            u,
        });
    });

    Ok(finish_trajectory(Method::Costate, speed, samples, 0.0, aborted_at))
}

/// Integrates the geodesic vector field from an arbitrary start point g0.
/// ψ samples are reconstructed as the coadjoint pullback of ψ_0, not
/// integrated. The trajectory speed is the proportionality factor |u(g0)|.
pub fn integrate_field(
    model: &LieModel,
    psi0: &DVector<f64>,
    g0: &DMatrix<f64>,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, Error> {
    let n = model.dim();
    let d = model.rep_dim();
    if psi0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: psi0.len(),
        });
    }
    ensure_group_element(g0)?;
    if g0.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: g0.nrows() * g0.ncols(),
        });
    }
    let (ad0, _) = model.rep.ad_group_matrix(g0)?;
    let speed = control_speed(&(ad0.transpose() * psi0), model.rank);
    if speed <= 1e-12 {
        return Err(Error::ZeroField { norm: speed });
    }
    let grid = Grid::from_config(cfg)?;

    let dd = d * d;
    let mut y0 = DVector::zeros(dd);
    y0.copy_from_slice(g0.as_slice());

    let rep = model.rep.clone();
    let rank = model.rank;
    let psi0_c = psi0.clone();
    let rhs = move |y: &DVector<f64>| -> Result<DVector<f64>, Error> {
        let g = DMatrix::from_column_slice(d, d, y.as_slice());
        let (ad, _) = rep.ad_group_matrix(&g)?;
        let u = control_of(&(ad.transpose() * &psi0_c), rank);
        let gdot = &g * rep.embed(&u)?;
        let mut out = DVector::zeros(dd);
        out.copy_from_slice(gdot.as_slice());
        Ok(out)
    };

    let mut samples = Vec::with_capacity(grid.n_steps + 1);
    let mut max_span_residual = 0.0_f64;
    let mut sample_err = None;
    let aborted_at = rk4_drive(y0, &grid, rhs, |t, y, y_comp| {
        let g = DMatrix::from_column_slice(d, d, y.as_slice());
        match model.rep.ad_group_matrix(&g) {
            Ok((ad, residual)) => {
                max_span_residual = max_span_residual.max(residual);
                let g_comp = DMatrix::from_column_slice(d, d, y_comp.as_slice());
                let psi = ad.transpose() * psi0;
                let u = control_of(&psi, model.rank);
                samples.push(Sample {
                    t,
                    g,
                    g_comp,
                    psi,
                    psi_comp: DVector::zeros(n),
                    u,
                });
            }
            Err(e) => sample_err = Some((t, e)),
        }
    });
    let aborted_at = aborted_at.or(sample_err.map(|(t, _)| t));

    Ok(finish_trajectory(
        Method::Field,
        speed,
        samples,
        max_span_residual,
        aborted_at,
    ))
}

fn apply_normalization_policy(
    psi0: &mut DVector<f64>,
    rank: usize,
    policy: UnnormalizedPolicy,
) -> Result<f64, Error> {
    let speed = control_speed(psi0, rank);
    if (speed - 1.0).abs() <= 1e-9 {
        return Ok(speed);
    }
    match policy {
        UnnormalizedPolicy::Reject => Err(Error::UnnormalizedCostate { speed }),
        UnnormalizedPolicy::AcceptReportSpeed => {
            if speed <= 1e-12 {
                Err(Error::ZeroField { norm: speed })
            } else {
                Ok(speed)
            }
        }
        UnnormalizedPolicy::Rescale => {
            if speed <= 1e-12 {
                return Err(Error::UnnormalizedCostate { speed });
            }
            *psi0 /= speed;
            Ok(1.0)
        }
    }
}

fn finish_trajectory(
    method: Method,
    speed: f64,
    samples: Vec<Sample>,
    max_span_residual: f64,
    aborted_at: Option<f64>,
) -> Trajectory {
    let mut traj = Trajectory {
        method,
        speed,
        samples,
        diagnostics: ConservationReport::default(),
        max_span_residual,
        aborted_at,
    };
    traj.diagnostics = conservation_report(&traj);
    traj
}

/// Maximum drift of the conserved quantities over a trajectory, relative to
/// the initial speed: max |‖u(t)‖ - s0| and max |ψ(t)·u(t) - s0²|.
pub fn conservation_report(traj: &Trajectory) -> ConservationReport {
    let Some(first) = traj.samples.first() else {
        return ConservationReport::default();
    };
    let s0 = first.u.norm();
    let mut report = ConservationReport {
        speed: s0,
        max_speed_drift: 0.0,
        max_hamiltonian_drift: 0.0,
    };
    for s in &traj.samples {
        report.max_speed_drift = report.max_speed_drift.max((s.u.norm() - s0).abs());
        report.max_hamiltonian_drift = report
            .max_hamiltonian_drift
            .max((s.psi.dot(&s.u) - s0 * s0).abs());
    }
    report
}

/// Maximum elementwise deviation of g between two trajectories on the same
/// time grid.
pub fn compare_methods(t1: &Trajectory, t2: &Trajectory) -> Result<f64, Error> {
    if t1.samples.len() != t2.samples.len() {
        return Err(Error::GridMismatch);
    }
    let mut max_dev = 0.0_f64;
    for (a, b) in t1.samples.iter().zip(&t2.samples) {
        if (a.t - b.t).abs() > 1e-12 {
            return Err(Error::GridMismatch);
        }
        max_dev = max_dev.max((&a.g - &b.g).amax());
    }
    Ok(max_dev)
}

/// Maximum deviation of the costate-method geodesic from the 1-parameter
/// subgroup exp(t · embed(ψ_0)). Small only for bi-invariant metrics (or
/// other cases where the geodesic is a subgroup); this is a measurement, not
/// a checked precondition.
pub fn one_parameter_check(
    model: &LieModel,
    psi0: &DVector<f64>,
    horizon: f64,
    step: f64,
) -> Result<f64, Error> {
    let cfg = IntegratorConfig {
        step,
        horizon,
        unnormalized: UnnormalizedPolicy::AcceptReportSpeed,
    };
    let traj = integrate_costate(model, psi0, &cfg)?;
    let generator = model.rep.embed(psi0)?;
    let mut max_dev = 0.0_f64;
    for s in &traj.samples {
        let expected = exp_matrix(&(&generator * s.t))?;
        max_dev = max_dev.max((&s.g - expected).amax());
    }
    Ok(max_dev)
}

// ---------------------------------------------------------------------------
// fixed-step RK4 driver with compensated (double-double) state accumulation
// ---------------------------------------------------------------------------

pub(crate) struct Grid {
    pub n_steps: usize,
    pub h_eff: f64,
}

impl Grid {
    pub fn from_config(cfg: &IntegratorConfig) -> Result<Self, Error> {
        Self::new(cfg.step, cfg.horizon)
    }

    pub fn new(step: f64, horizon: f64) -> Result<Self, Error> {
        if !(step > 0.0) || !step.is_finite() || !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParams(format!(
                "need positive finite step and horizon, got h = {step}, T = {horizon}"
            )));
        }
        let ratio = horizon / step;
        if ratio > 1e8 {
            return Err(Error::InvalidParams(format!(
                "T/h = {ratio:e} exceeds the 1e8 step budget"
            )));
        }
        let n_steps = ((ratio + 1e-9).floor() as usize).max(1);
        Ok(Self {
            n_steps,
            h_eff: horizon / n_steps as f64,
        })
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// One classical RK4 step per grid interval. The state is carried as a
/// double-double (value + compensation) so that summation roundoff stays far
/// below the O(h^4) truncation error; without this the h-halving order test
/// drowns in accumulated rounding noise at h = 1e-3.
///
/// `on_sample` receives every grid point including t = 0. Returns the abort
/// time if the state stopped being finite (the offending state is dropped).
fn rk4_drive(
    y0: DVector<f64>,
    grid: &Grid,
    mut rhs: impl FnMut(&DVector<f64>) -> Result<DVector<f64>, Error>,
    mut on_sample: impl FnMut(f64, &DVector<f64>, &DVector<f64>),
) -> Option<f64> {
    let h = grid.h_eff;
    let m = y0.len();
    let mut hi = y0;
    let mut lo = DVector::<f64>::zeros(m);
    on_sample(0.0, &hi, &lo);
    for i in 0..grid.n_steps {
        let t_next = (i + 1) as f64 * h;
        let step = (|| -> Result<(), Error> {
            let k1 = rhs(&hi)?;
            let k2 = rhs(&(&hi + &k1 * (h / 2.0)))?;
            let k3 = rhs(&(&hi + &k2 * (h / 2.0)))?;
            let k4 = rhs(&(&hi + &k3 * h))?;
            let (w1, w2) = (h / 6.0, h / 3.0);
            for c in 0..m {
                let mut dh = 0.0;
                let mut dl = 0.0;
                for (w, k) in [(w1, &k1), (w2, &k2), (w2, &k3), (w1, &k4)] {
                    let p = w * k[c];
                    let pe = f64::mul_add(w, k[c], -p);
                    let (s, se) = two_sum(dh, p);
                    dh = s;
                    dl += pe + se;
                }
                let (s, e) = two_sum(hi[c], dh);
                let (new_hi, new_lo) = two_sum(s, lo[c] + dl + e);
                hi[c] = new_hi;
                lo[c] = new_lo;
            }
            Ok(())
        })();
        if step.is_err() || hi.iter().any(|x| !x.is_finite()) {
            return Some(t_next);
        }
        on_sample(t_next, &hi, &lo);
    }
    None
}
