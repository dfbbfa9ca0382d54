//! The five built-in group models with their closed-form oracles, structured
//! coordinate accessors, conserved-quantity checks, and the pendulum
//! reductions of the control angle on SO(3), SH(2), and SE(2).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::algebra::StructureConstants;
use crate::error::Error;
use crate::geodesics::{integrate_costate, IntegratorConfig, LieModel, Trajectory};
use crate::group::Representation;

/// Structured accessors reject matrices this far from the model template.
pub const TEMPLATE_TOL: f64 = 1e-9;

/// Per-step limit for nearest-branch angle unwrapping.
pub const UNWRAP_JUMP_LIMIT: f64 = std::f64::consts::FRAC_PI_2;

/// Parameters selecting a built-in model.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Heisenberg,
    /// Group of homotheties and translations of E^{n-1}; Riemannian, r = n.
    Hyperbolic {
        n: usize,
    },
    /// Sub-Riemannian SO(3) with metric parameters 0 < a <= b.
    So3 {
        a: f64,
        b: f64,
    },
    Sh2,
    Se2,
}

/// Model names accepted by the CLI.
pub const BUILTIN_NAMES: [&str; 5] = ["heisenberg", "hyperbolic", "so3", "sh2", "se2"];

impl ModelParams {
    pub fn name(&self) -> &'static str {
        match self {
            ModelParams::Heisenberg => "heisenberg",
            ModelParams::Hyperbolic { .. } => "hyperbolic",
            ModelParams::So3 { .. } => "so3",
            ModelParams::Sh2 => "sh2",
            ModelParams::Se2 => "se2",
        }
    }
}

fn unit_entry(d: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    m[(i, j)] = 1.0;
    m
}

/// Builds a validated [`LieModel`] for the given built-in parameters.
pub fn build_model(params: &ModelParams) -> Result<LieModel, Error> {
    match params {
        ModelParams::Heisenberg => {
            let sc = StructureConstants::from_brackets(3, &[(1, 2, 3, 1.0)])?;
            let rep = Representation::new(
                3,
                vec![unit_entry(3, 0, 1), unit_entry(3, 1, 2), unit_entry(3, 0, 2)],
            )?;
            LieModel::new("heisenberg", sc, rep, 2, BTreeMap::new())
        }
        ModelParams::Hyperbolic { n } => {
            let n = *n;
            if !(2..=6).contains(&n) {
                return Err(Error::InvalidParams(format!(
                    "hyperbolic dimension must be in 2..=6, got {n}"
                )));
            }
            let mut entries = Vec::new();
            for i in 1..n {
                // [e_i, e_n] = -e_i
                entries.push((i, n, i, -1.0));
            }
            let sc = StructureConstants::from_brackets(n, &entries)?;
            let mut mats: Vec<DMatrix<f64>> =
                (0..n - 1).map(|i| unit_entry(n, i, n - 1)).collect();
            let mut en = DMatrix::zeros(n, n);
            for k in 0..n - 1 {
                en[(k, k)] = 1.0;
            }
            mats.push(en);
            let rep = Representation::new(n, mats)?;
            let params = BTreeMap::from([("n".to_string(), n as f64)]);
            LieModel::new("hyperbolic", sc, rep, n, params)
        }
        ModelParams::So3 { a, b } => {
            let (a, b) = (*a, *b);
            if !(a > 0.0 && a <= b && a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "so3 requires 0 < a <= b, got a = {a}, b = {b}"
                )));
            }
            let sc = StructureConstants::from_brackets(
                3,
                &[(1, 2, 3, a * b), (1, 3, 2, -b / a), (2, 3, 1, a / b)],
            )?;
            // scaled rotation generators: e_1 = b L_x, e_2 = a L_y, e_3 = L_z
            let lx = DMatrix::from_row_slice(3, 3, &[0., 0., 0., 0., 0., -1., 0., 1., 0.]);
            let ly = DMatrix::from_row_slice(3, 3, &[0., 0., 1., 0., 0., 0., -1., 0., 0.]);
            let lz = DMatrix::from_row_slice(3, 3, &[0., -1., 0., 1., 0., 0., 0., 0., 0.]);
            let rep = Representation::new(3, vec![lx * b, ly * a, lz])?;
            let params = BTreeMap::from([("a".to_string(), a), ("b".to_string(), b)]);
            LieModel::new("so3", sc, rep, 2, params)
        }
        ModelParams::Sh2 => {
            let sc = StructureConstants::from_brackets(3, &[(1, 2, 3, 1.0), (1, 3, 2, 1.0)])?;
            let e1 = DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 0., 0., 0., 0.]);
            let rep = Representation::new(3, vec![e1, unit_entry(3, 0, 2), unit_entry(3, 1, 2)])?;
            LieModel::new("sh2", sc, rep, 2, BTreeMap::new())
        }
        ModelParams::Se2 => {
            let sc = StructureConstants::from_brackets(3, &[(1, 2, 3, 1.0), (1, 3, 2, -1.0)])?;
            let e1 = DMatrix::from_row_slice(3, 3, &[0., -1., 0., 1., 0., 0., 0., 0., 0.]);
            let rep = Representation::new(3, vec![e1, unit_entry(3, 0, 2), unit_entry(3, 1, 2)])?;
            LieModel::new("se2", sc, rep, 2, BTreeMap::new())
        }
    }
}

/// Resolves a built-in model by CLI name and optional parameter flags.
pub fn builtin_by_name(
    name: &str,
    a: Option<f64>,
    b: Option<f64>,
    n: Option<usize>,
) -> Result<LieModel, Error> {
    let params = match name {
        "heisenberg" => ModelParams::Heisenberg,
        "hyperbolic" => ModelParams::Hyperbolic { n: n.unwrap_or(3) },
        "so3" => ModelParams::So3 {
            a: a.unwrap_or(1.0),
            b: b.unwrap_or(1.0),
        },
        "sh2" => ModelParams::Sh2,
        "se2" => ModelParams::Se2,
        other => {
            return Err(Error::InvalidParams(format!(
                "unknown model '{other}' (built-ins: {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    build_model(&params)
}

// ---------------------------------------------------------------------------
// Heisenberg
// ---------------------------------------------------------------------------

/// Raw upper-triangular coordinates (x, y, z) of a Heisenberg element.
pub fn heisenberg_coords(g: &DMatrix<f64>) -> Result<(f64, f64, f64), Error> {
    if g.nrows() != 3 || g.ncols() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 9,
            got: g.nrows() * g.ncols(),
        });
    }
    let residual = [
        g[(0, 0)] - 1.0,
        g[(1, 1)] - 1.0,
        g[(2, 2)] - 1.0,
        g[(1, 0)],
        g[(2, 0)],
        g[(2, 1)],
    ]
    .iter()
    .fold(0.0_f64, |acc, r| acc.max(r.abs()));
    if residual > TEMPLATE_TOL {
        return Err(Error::StructuralResidual { residual });
    }
    Ok((g[(0, 1)], g[(1, 2)], g[(0, 2)]))
}

/// First-kind coordinates (x, y, z̃) with z̃ = z - xy/2.
pub fn heisenberg_tilde(g: &DMatrix<f64>) -> Result<(f64, f64, f64), Error> {
    let (x, y, z) = heisenberg_coords(g)?;
    Ok((x, y, z - x * y / 2.0))
}

/// Closed-form Heisenberg geodesic in first-kind coordinates.
///
/// For β ≠ 0: x = (sin(ξ+βt) - sin ξ)/β, y = (-cos(ξ+βt) + cos ξ)/β,
/// z̃ = (t - sin(βt)/β)/(2β). For β = 0 the geodesic is the straight line
/// ((cos ξ)t, (sin ξ)t, 0). |β| < 1e-12 is treated as zero (with a warning);
/// there is no limit evaluation between the branches.
pub fn heisenberg_closed_form(xi: f64, beta: f64, t: f64) -> (f64, f64, f64) {
    if beta.abs() < 1e-12 {
        if beta != 0.0 {
            log::warn!("|beta| = {:e} < 1e-12 treated as beta = 0", beta.abs());
        }
        return (xi.cos() * t, xi.sin() * t, 0.0);
    }
    let x = ((xi + beta * t).sin() - xi.sin()) / beta;
    let y = (-(xi + beta * t).cos() + xi.cos()) / beta;
    let zt = (t - (beta * t).sin() / beta) / (2.0 * beta);
    (x, y, zt)
}

/// Endpoint comparison at the circulation period T = 2π/|β|: for fixed β all
/// ξ produce the same endpoint, with (x, y) back at the origin.
#[derive(Debug, Clone)]
pub struct PeriodClosure {
    /// Endpoints (x, y, z̃) per ξ value.
    pub endpoints: Vec<(f64, f64, f64)>,
    /// Largest pairwise endpoint deviation, componentwise.
    pub max_pairwise: f64,
    /// Largest |x| or |y| at the period.
    pub max_xy_return: f64,
}

pub fn heisenberg_period_closure(
    model: &LieModel,
    xis: &[f64],
    beta: f64,
    step: f64,
) -> Result<PeriodClosure, Error> {
    if beta.abs() < 1e-12 {
        return Err(Error::InvalidParams(
            "period closure needs beta != 0".into(),
        ));
    }
    let horizon = 2.0 * std::f64::consts::PI / beta.abs();
    let cfg = IntegratorConfig::new(step, horizon);
    let mut endpoints = Vec::with_capacity(xis.len());
    for &xi in xis {
        let psi0 = DVector::from_vec(vec![xi.cos(), xi.sin(), beta]);
        let traj = integrate_costate(model, &psi0, &cfg)?;
        let last = traj.samples.last().ok_or(Error::NonFiniteState { t: 0.0 })?;
        endpoints.push(heisenberg_tilde(&last.g)?);
    }
    let mut max_pairwise = 0.0_f64;
    for i in 0..endpoints.len() {
        for j in (i + 1)..endpoints.len() {
            let (a, b) = (endpoints[i], endpoints[j]);
            max_pairwise = max_pairwise
                .max((a.0 - b.0).abs())
                .max((a.1 - b.1).abs())
                .max((a.2 - b.2).abs());
        }
    }
    let max_xy_return = endpoints
        .iter()
        .fold(0.0_f64, |acc, e| acc.max(e.0.abs()).max(e.1.abs()));
    Ok(PeriodClosure {
        endpoints,
        max_pairwise,
        max_xy_return,
    })
}

// ---------------------------------------------------------------------------
// hyperbolic G_n
// ---------------------------------------------------------------------------

/// Coordinates (y_1..y_{n-1}, x) of a G_n element [[x·I, y'], [0, 1]].
pub fn hyperbolic_coords(g: &DMatrix<f64>) -> Result<(DVector<f64>, f64), Error> {
    let n = g.nrows();
    if g.ncols() != n || n < 2 {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: n * g.ncols(),
        });
    }
    let x = g[(0, 0)];
    let mut residual = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let expected = if i == n - 1 {
                if j == n - 1 {
                    1.0
                } else {
                    0.0
                }
            } else if i == j {
                x
            } else if j == n - 1 {
                continue; // y entries are free
            } else {
                0.0
            };
            residual = residual.max((g[(i, j)] - expected).abs());
        }
    }
    if residual > TEMPLATE_TOL || x <= 0.0 {
        return Err(Error::StructuralResidual { residual });
    }
    let y = DVector::from_fn(n - 1, |i, _| g[(i, n - 1)]);
    Ok((y, x))
}

/// Closed-form G_n geodesic from the identity: for φ_n² < 1,
/// x = 1/(ch t - φ_n sh t) and y_i = φ_i sh t / (ch t - φ_n sh t);
/// for φ_n = ±1, x = e^{±t} and y ≡ 0.
pub fn hyperbolic_closed_form(phi: &DVector<f64>, t: f64) -> Result<(DVector<f64>, f64), Error> {
    let n = phi.len();
    if n < 2 {
        return Err(Error::InvalidParams("need phi of length >= 2".into()));
    }
    if (phi.norm_squared() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParams(format!(
            "phi must be a unit vector, |phi|^2 = {}",
            phi.norm_squared()
        )));
    }
    let phin = phi[n - 1];
    if phin * phin >= 1.0 {
        let x = (phin.signum() * t).exp();
        return Ok((DVector::zeros(n - 1), x));
    }
    let denom = t.cosh() - phin * t.sinh();
    let x = 1.0 / denom;
    let y = DVector::from_fn(n - 1, |i, _| phi[i] * t.sinh() / denom);
    Ok((y, x))
}

/// Drift of the circle invariant f(t) = Σ(y_i(t) - a_i)² + x(t)² with
/// centers a_i = φ_i φ_n / (1 - φ_n²).
#[derive(Debug, Clone)]
pub struct CircleInvariant {
    pub centers: DVector<f64>,
    pub f0: f64,
    /// 1/(1 - φ_n²), which f(0) must equal for a trajectory from the identity.
    pub expected_f0: f64,
    pub drift: f64,
}

pub fn hyperbolic_circle_invariant(
    traj: &Trajectory,
    phi: &DVector<f64>,
) -> Result<CircleInvariant, Error> {
    let n = phi.len();
    let phin = phi[n - 1];
    if phin * phin >= 1.0 {
        return Err(Error::InvalidParams(
            "circle invariant degenerates at phi_n = ±1".into(),
        ));
    }
    let centers = DVector::from_fn(n - 1, |i, _| phi[i] * phin / (1.0 - phin * phin));
    let expected_f0 = 1.0 / (1.0 - phin * phin);
    let f = |g: &DMatrix<f64>| -> Result<f64, Error> {
        let (y, x) = hyperbolic_coords(g)?;
        Ok((&y - &centers).norm_squared() + x * x)
    };
    let first = traj
        .samples
        .first()
        .ok_or_else(|| Error::InvalidParams("empty trajectory".into()))?;
    let f0 = f(&first.g)?;
    if (f0 - expected_f0).abs() > 1e-9 {
        return Err(Error::InvalidParams(format!(
            "trajectory does not start at the identity: f(0) = {f0}, expected {expected_f0}"
        )));
    }
    let mut drift = 0.0_f64;
    for s in &traj.samples {
        drift = drift.max((f(&s.g)? - f0).abs());
    }
    Ok(CircleInvariant {
        centers,
        f0,
        expected_f0,
        drift,
    })
}

/// Distance in G_n between points given as (y_1..y_{n-1}, x) slices with
/// x > 0: arch[(x1² + x2² + Σ(y2_i - y1_i)²) / (2 x1 x2)].
pub fn hyperbolic_distance(p: &[f64], q: &[f64]) -> Result<f64, Error> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    if p.len() < 2 {
        return Err(Error::InvalidParams(
            "points need at least 2 components (y.., x)".into(),
        ));
    }
    let x1 = p[p.len() - 1];
    let x2 = q[q.len() - 1];
    if !(x1 > 0.0 && x2 > 0.0) {
        return Err(Error::InvalidParams(format!(
            "x components must be positive, got {x1} and {x2}"
        )));
    }
    let mut ysq = 0.0;
    for i in 0..p.len() - 1 {
        ysq += (q[i] - p[i]) * (q[i] - p[i]);
    }
    let arg = (x1 * x1 + x2 * x2 + ysq) / (2.0 * x1 * x2);
    Ok(arg.max(1.0).acosh())
}

// ---------------------------------------------------------------------------
// SH(2) / SE(2) coordinates
// ---------------------------------------------------------------------------

/// Coordinates (φ, x, y) of an SH(2) element; φ from the hyperbolic rotation
/// block, with the template residual checked.
pub fn sh2_coords(g: &DMatrix<f64>) -> Result<(f64, f64, f64), Error> {
    check_affine_shape(g)?;
    let phi = g[(1, 0)].asinh();
    let residual = [
        g[(0, 0)] - phi.cosh(),
        g[(1, 1)] - phi.cosh(),
        g[(0, 1)] - phi.sinh(),
    ]
    .iter()
    .fold(0.0_f64, |acc, r| acc.max(r.abs()));
    if residual > TEMPLATE_TOL {
        return Err(Error::StructuralResidual { residual });
    }
    Ok((phi, g[(0, 2)], g[(1, 2)]))
}

/// Coordinates (φ, x, y) of an SE(2) element; φ is the principal rotation
/// angle in (-π, π].
pub fn se2_coords(g: &DMatrix<f64>) -> Result<(f64, f64, f64), Error> {
    check_affine_shape(g)?;
    let (c, s) = (g[(0, 0)], g[(1, 0)]);
    let residual = [
        g[(0, 0)] - g[(1, 1)],
        g[(0, 1)] + g[(1, 0)],
        c * c + s * s - 1.0,
    ]
    .iter()
    .fold(0.0_f64, |acc, r| acc.max(r.abs()));
    if residual > TEMPLATE_TOL {
        return Err(Error::StructuralResidual { residual });
    }
    Ok((s.atan2(c), g[(0, 2)], g[(1, 2)]))
}

fn check_affine_shape(g: &DMatrix<f64>) -> Result<(), Error> {
    if g.nrows() != 3 || g.ncols() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 9,
            got: g.nrows() * g.ncols(),
        });
    }
    let residual = [g[(2, 0)], g[(2, 1)], g[(2, 2)] - 1.0]
        .iter()
        .fold(0.0_f64, |acc, r| acc.max(r.abs()));
    if residual > TEMPLATE_TOL {
        return Err(Error::StructuralResidual { residual });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// pendulum reductions
// ---------------------------------------------------------------------------

/// One sample of a reduced pendulum angle.
#[derive(Debug, Clone, Copy)]
pub struct PendulumSample {
    pub t: f64,
    pub angle: f64,
    pub rate: f64,
}

/// Result of the SH(2)/SE(2) reduction to the mathematical pendulum.
#[derive(Debug, Clone)]
pub struct PendulumReduction {
    pub samples: Vec<PendulumSample>,
    /// max |θ̈ + sin θ| over interior grid points (central differences).
    pub max_pendulum_residual: f64,
    /// |θ(0) - expected initial angle|.
    pub initial_angle_err: f64,
    /// |θ̇(0) - expected initial rate| (second-order one-sided difference).
    pub initial_rate_err: f64,
    /// max deviation of finite-difference (φ̇, ẋ, ẏ) from the reduced system.
    pub max_system_residual: f64,
}

/// Result of the SO(3) reduction ξ″ = ((a² - b²)/2) sin 2ξ.
#[derive(Debug, Clone)]
pub struct So3Reduction {
    pub samples: Vec<PendulumSample>,
    pub max_pendulum_residual: f64,
    /// max |ψ_3 - ξ′/(ab)|.
    pub max_psi3_err: f64,
}

/// Nearest-branch continuation of principal angles. When `anchor` is given
/// the first angle is shifted to the 2π-branch closest to it. Fails when a
/// step jumps by more than [`UNWRAP_JUMP_LIMIT`].
fn unwrap_angles(principal: &[f64], anchor: Option<f64>) -> Result<Vec<f64>, Error> {
    use std::f64::consts::TAU;
    let mut out = Vec::with_capacity(principal.len());
    let mut prev = match (principal.first(), anchor) {
        (Some(&p), Some(a)) => p + TAU * ((a - p) / TAU).round(),
        (Some(&p), None) => p,
        (None, _) => return Ok(out),
    };
    out.push(prev);
    for &p in &principal[1..] {
        let theta = p + TAU * ((prev - p) / TAU).round();
        let jump = (theta - prev).abs();
        if jump > UNWRAP_JUMP_LIMIT {
            return Err(Error::UnwrapJump {
                jump,
                limit: UNWRAP_JUMP_LIMIT,
            });
        }
        out.push(theta);
        prev = theta;
    }
    Ok(out)
}

fn grid_step(traj: &Trajectory) -> Result<f64, Error> {
    if traj.samples.len() < 3 {
        return Err(Error::InvalidParams(
            "reduction needs at least 3 samples".into(),
        ));
    }
    Ok(traj.samples[1].t - traj.samples[0].t)
}

fn rates_and_samples(ts: &[f64], angles: &[f64], h: f64) -> Vec<PendulumSample> {
    let n = angles.len();
    (0..n)
        .map(|i| {
            let rate = if i == 0 {
                (-3.0 * angles[0] + 4.0 * angles[1] - angles[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * angles[n - 1] - 4.0 * angles[n - 2] + angles[n - 3]) / (2.0 * h)
            } else {
                (angles[i + 1] - angles[i - 1]) / (2.0 * h)
            };
            PendulumSample {
                t: ts[i],
                angle: angles[i],
                rate,
            }
        })
        .collect()
}

/// Checks Eq-level reduction of an SO(3) trajectory: with
/// ψ_1 = cos ξ, ψ_2 = sin ξ, the angle obeys ξ″ = ((a² - b²)/2) sin 2ξ and
/// ψ_3 = ξ′/(ab). Residuals use central differences on the interior grid.
pub fn so3_pendulum_residual(traj: &Trajectory, a: f64, b: f64) -> Result<So3Reduction, Error> {
    let h = grid_step(traj)?;
    let principal: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| {
            let norm = (s.psi[0] * s.psi[0] + s.psi[1] * s.psi[1]).sqrt();
            if norm < 1e-12 {
                Err(Error::InvalidParams(
                    "(psi_1, psi_2) vanishes; control angle undefined".into(),
                ))
            } else {
                Ok(s.psi[1].atan2(s.psi[0]))
            }
        })
        .collect::<Result<_, _>>()?;
    let xi = unwrap_angles(&principal, None)?;
    let ts: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let mut max_pendulum_residual = 0.0_f64;
    let mut max_psi3_err = 0.0_f64;
    for i in 1..xi.len() - 1 {
        let dd = (xi[i + 1] - 2.0 * xi[i] + xi[i - 1]) / (h * h);
        let rhs = (a * a - b * b) / 2.0 * (2.0 * xi[i]).sin();
        max_pendulum_residual = max_pendulum_residual.max((dd - rhs).abs());
        let rate = (xi[i + 1] - xi[i - 1]) / (2.0 * h);
        max_psi3_err = max_psi3_err.max((traj.samples[i].psi[2] - rate / (a * b)).abs());
    }
    Ok(So3Reduction {
        samples: rates_and_samples(&ts, &xi, h),
        max_pendulum_residual,
        max_psi3_err,
    })
}

/// Reduction of an SH(2) trajectory from the identity to the pendulum angle
/// γ with cos(γ/2) = sin α ch φ + β sh φ, sin(γ/2) = cos α - y sin α - βx,
/// γ(0) = π - 2α, γ̇(0) = -2β, and γ̈ = -sin γ.
pub fn sh2_reduction(traj: &Trajectory, alpha: f64, beta: f64) -> Result<PendulumReduction, Error> {
    let h = grid_step(traj)?;
    let coords: Vec<(f64, f64, f64)> = traj
        .samples
        .iter()
        .map(|s| sh2_coords(&s.g))
        .collect::<Result<_, _>>()?;
    let principal: Vec<f64> = coords
        .iter()
        .map(|&(phi, x, y)| {
            let cos_half = alpha.sin() * phi.cosh() + beta * phi.sinh();
            let sin_half = alpha.cos() - y * alpha.sin() - beta * x;
            sin_half.atan2(cos_half)
        })
        .collect();
    let half = unwrap_angles(&principal, Some(std::f64::consts::FRAC_PI_2 - alpha))?;
    let gamma: Vec<f64> = half.iter().map(|&x| 2.0 * x).collect();
    let ts: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();

    let mut max_pendulum_residual = 0.0_f64;
    let mut max_system_residual = 0.0_f64;
    for i in 1..gamma.len() - 1 {
        let dd = (gamma[i + 1] - 2.0 * gamma[i] + gamma[i - 1]) / (h * h);
        max_pendulum_residual = max_pendulum_residual.max((dd + gamma[i].sin()).abs());
        // Eq-level system: (φ̇, ẋ, ẏ) = (sin(γ/2), cos(γ/2) ch φ, cos(γ/2) sh φ)
        let (phi, _, _) = coords[i];
        let dphi = (coords[i + 1].0 - coords[i - 1].0) / (2.0 * h);
        let dx = (coords[i + 1].1 - coords[i - 1].1) / (2.0 * h);
        let dy = (coords[i + 1].2 - coords[i - 1].2) / (2.0 * h);
        let hg = gamma[i] / 2.0;
        max_system_residual = max_system_residual
            .max((dphi - hg.sin()).abs())
            .max((dx - hg.cos() * phi.cosh()).abs())
            .max((dy - hg.cos() * phi.sinh()).abs());
    }
    let samples = rates_and_samples(&ts, &gamma, h);
    let initial_angle_err = (samples[0].angle - (std::f64::consts::PI - 2.0 * alpha)).abs();
    let initial_rate_err = (samples[0].rate - (-2.0 * beta)).abs();
    Ok(PendulumReduction {
        samples,
        max_pendulum_residual,
        initial_angle_err,
        initial_rate_err,
        max_system_residual,
    })
}

/// Reduction of an SE(2) trajectory from the identity to the pendulum angle
/// ω with sin(ω/2) = sin α cos φ + β sin φ, cos(ω/2) = cos α + y sin α - βx,
/// ω(0) = 2α, ω̇(0) = 2β, and ω̈ = -sin ω.
pub fn se2_reduction(traj: &Trajectory, alpha: f64, beta: f64) -> Result<PendulumReduction, Error> {
    let h = grid_step(traj)?;
    let mut phis_principal = Vec::with_capacity(traj.samples.len());
    let mut xs = Vec::with_capacity(traj.samples.len());
    let mut ys = Vec::with_capacity(traj.samples.len());
    for s in &traj.samples {
        let (phi, x, y) = se2_coords(&s.g)?;
        phis_principal.push(phi);
        xs.push(x);
        ys.push(y);
    }
    let phis = unwrap_angles(&phis_principal, Some(0.0))?;
    let principal: Vec<f64> = (0..traj.samples.len())
        .map(|i| {
            let sin_half = alpha.sin() * phis[i].cos() + beta * phis[i].sin();
            let cos_half = alpha.cos() + ys[i] * alpha.sin() - beta * xs[i];
            sin_half.atan2(cos_half)
        })
        .collect();
    let half = unwrap_angles(&principal, Some(alpha))?;
    let omega: Vec<f64> = half.iter().map(|&x| 2.0 * x).collect();
    let ts: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();

    let mut max_pendulum_residual = 0.0_f64;
    let mut max_system_residual = 0.0_f64;
    for i in 1..omega.len() - 1 {
        let dd = (omega[i + 1] - 2.0 * omega[i] + omega[i - 1]) / (h * h);
        max_pendulum_residual = max_pendulum_residual.max((dd + omega[i].sin()).abs());
        // Eq-level system: (φ̇, ẋ, ẏ) = (cos(ω/2), sin(ω/2) cos φ, sin(ω/2) sin φ)
        let dphi = (phis[i + 1] - phis[i - 1]) / (2.0 * h);
        let dx = (xs[i + 1] - xs[i - 1]) / (2.0 * h);
        let dy = (ys[i + 1] - ys[i - 1]) / (2.0 * h);
        let ho = omega[i] / 2.0;
        max_system_residual = max_system_residual
            .max((dphi - ho.cos()).abs())
            .max((dx - ho.sin() * phis[i].cos()).abs())
            .max((dy - ho.sin() * phis[i].sin()).abs());
    }
    let samples = rates_and_samples(&ts, &omega, h);
    let initial_angle_err = (samples[0].angle - 2.0 * alpha).abs();
    let initial_rate_err = (samples[0].rate - 2.0 * beta).abs();
    Ok(PendulumReduction {
        samples,
        max_pendulum_residual,
        initial_angle_err,
        initial_rate_err,
        max_system_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesics::integrate_costate;
    use crate::group::exp_matrix;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn builtin_structure_constants() {
        let h = build_model(&ModelParams::Heisenberg).unwrap();
        assert_eq!(h.sc.get(0, 1, 2), 1.0);
        assert_eq!(h.sc.get(1, 0, 2), -1.0);
        assert_eq!(h.dim(), 3);
        assert_eq!(h.rank, 2);

        let g3 = build_model(&ModelParams::Hyperbolic { n: 3 }).unwrap();
        for i in 0..2 {
            assert_eq!(g3.sc.get(2, i, i), 1.0);
            assert_eq!(g3.sc.get(i, 2, i), -1.0);
        }
        assert_eq!(g3.rank, 3);

        let so3 = build_model(&ModelParams::So3 { a: 1.0, b: 1.0 }).unwrap();
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            assert_eq!(so3.sc.get(i, j, k), 1.0);
            assert_eq!(so3.sc.get(j, i, k), -1.0);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(build_model(&ModelParams::So3 { a: 2.0, b: 1.0 }).is_err());
        assert!(build_model(&ModelParams::So3 { a: 0.0, b: 1.0 }).is_err());
        assert!(build_model(&ModelParams::Hyperbolic { n: 1 }).is_err());
        assert!(build_model(&ModelParams::Hyperbolic { n: 7 }).is_err());
        assert!(builtin_by_name("nosuch", None, None, None).is_err());
    }

    #[test]
    fn heisenberg_closed_form_values() {
        let (x, y, zt) = heisenberg_closed_form(0.0, 1.0, PI);
        assert!(x.abs() < 1e-15);
        assert!((y - 2.0).abs() < 1e-15);
        assert!((zt - FRAC_PI_2).abs() < 1e-15);

        let (x, y, zt) = heisenberg_closed_form(0.7, 0.0, 2.5);
        assert!((x - 0.7f64.cos() * 2.5).abs() < 1e-15);
        assert!((y - 0.7f64.sin() * 2.5).abs() < 1e-15);
        assert_eq!(zt, 0.0);

        assert_eq!(heisenberg_closed_form(1.2, 0.5, 0.0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn heisenberg_half_period_is_diametric() {
        // at t = T/2 the (x, y) point is diametrically opposite the origin on
        // the circle with center (-sin ξ, cos ξ)/β
        let (xi, beta): (f64, f64) = (0.9, 1.7);
        let t_half = PI / beta.abs();
        let (x, y, _) = heisenberg_closed_form(xi, beta, t_half);
        let center = (-xi.sin() / beta, xi.cos() / beta);
        assert!((x - 2.0 * center.0).abs() < 1e-12);
        assert!((y - 2.0 * center.1).abs() < 1e-12);
    }

    #[test]
    fn heisenberg_tilde_values() {
        let model = build_model(&ModelParams::Heisenberg).unwrap();
        let id = model.rep.identity();
        assert_eq!(heisenberg_tilde(&id).unwrap(), (0.0, 0.0, 0.0));

        let g = DMatrix::from_row_slice(3, 3, &[1., 2., 4., 0., 1., 3., 0., 0., 1.]);
        let (x, y, zt) = heisenberg_tilde(&g).unwrap();
        assert_eq!((x, y, zt), (2.0, 3.0, 1.0));

        let v = DVector::from_vec(vec![1.3, -0.8, 0.0]);
        let g = exp_matrix(&model.rep.embed(&v).unwrap()).unwrap();
        let (_, _, zt) = heisenberg_tilde(&g).unwrap();
        assert!(zt.abs() < 1e-15);
    }

    #[test]
    fn heisenberg_tilde_rejects_off_template() {
        let mut g = DMatrix::identity(3, 3);
        g[(1, 0)] = 1e-6;
        assert!(matches!(
            heisenberg_tilde(&g),
            Err(Error::StructuralResidual { .. })
        ));
    }

    #[test]
    fn hyperbolic_closed_form_values() {
        let phi = DVector::from_vec(vec![1.0, 0.0]);
        for t in [0.3, 1.0, 2.4] {
            let (y, x) = hyperbolic_closed_form(&phi, t).unwrap();
            assert!((x - 1.0 / t.cosh()).abs() < 1e-15);
            assert!((y[0] - t.tanh()).abs() < 1e-15);
        }
        let phi = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let (y, x) = hyperbolic_closed_form(&phi, 1.5).unwrap();
        assert_eq!(y.amax(), 0.0);
        assert!((x - 1.5f64.exp()).abs() < 1e-15);

        let phi = DVector::from_vec(vec![0.6, 0.8]);
        let (y, x) = hyperbolic_closed_form(&phi, 0.0).unwrap();
        assert_eq!(y.amax(), 0.0);
        assert_eq!(x, 1.0);

        assert!(hyperbolic_closed_form(&DVector::from_vec(vec![2.0, 0.0]), 1.0).is_err());
    }

    #[test]
    fn circle_invariant_on_closed_form_samples() {
        let phi: DVector<f64> = DVector::from_vec(vec![0.48, 0.6, 0.64]);
        assert!((phi.norm() - 1.0).abs() < 1e-12);
        let mut samples = Vec::new();
        for k in 0..=100 {
            let t = 0.04 * k as f64;
            let (y, x) = hyperbolic_closed_form(&phi, t).unwrap();
            let mut g = DMatrix::zeros(3, 3);
            g[(0, 0)] = x;
            g[(1, 1)] = x;
            g[(2, 2)] = 1.0;
            g[(0, 2)] = y[0];
            g[(1, 2)] = y[1];
            samples.push(crate::geodesics::Sample {
                t,
                g,
                g_comp: DMatrix::zeros(3, 3),
                psi: DVector::zeros(3),
                psi_comp: DVector::zeros(3),
                u: DVector::zeros(3),
            });
        }
        let traj = Trajectory {
            method: crate::geodesics::Method::Costate,
            speed: 1.0,
            samples,
            diagnostics: Default::default(),
            max_span_residual: 0.0,
            aborted_at: None,
        };
        let inv = hyperbolic_circle_invariant(&traj, &phi).unwrap();
        assert!(inv.drift < 1e-12, "drift {}", inv.drift);
        assert!((inv.f0 - inv.expected_f0).abs() < 1e-12);

        // phi_n = 0: center at the origin, radius 1
        let phi0 = DVector::from_vec(vec![0.6, 0.8, 0.0]);
        let centers = DVector::from_fn(2, |i, _| phi0[i] * 0.0);
        assert_eq!(centers.amax(), 0.0);
        assert!(hyperbolic_circle_invariant(&traj, &DVector::from_vec(vec![0.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn hyperbolic_distance_values() {
        assert_eq!(hyperbolic_distance(&[0.3, 2.0], &[0.3, 2.0]).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((hyperbolic_distance(&[0.0, 1.0], &[0.0, e]).unwrap() - 1.0).abs() < 1e-12);
        // arclength parametrization: d(e, g(t)) = t on a unit-speed geodesic
        let phi3 = (1.0f64 - 0.28 * 0.28 - 0.7 * 0.7).sqrt();
        let phi: DVector<f64> = DVector::from_vec(vec![0.28, -0.7, phi3]);
        assert!((phi.norm() - 1.0).abs() < 1e-9);
        for t in [0.5, 1.0, 2.0] {
            let (y, x) = hyperbolic_closed_form(&phi, t).unwrap();
            let p: Vec<f64> = y.iter().copied().chain([x]).collect();
            let d = hyperbolic_distance(&[0.0, 0.0, 1.0], &p).unwrap();
            assert!((d - t).abs() < 1e-12, "t = {t}, d = {d}");
        }
        assert!(hyperbolic_distance(&[0.0, -1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn so3_reduction_equal_parameters_is_linear() {
        let model = build_model(&ModelParams::So3 { a: 1.0, b: 1.0 }).unwrap();
        let psi0 = DVector::from_vec(vec![FRAC_PI_4.cos(), FRAC_PI_4.sin(), 0.6]);
        let traj = integrate_costate(&model, &psi0, &IntegratorConfig::new(1e-3, 5.0)).unwrap();
        let red = so3_pendulum_residual(&traj, 1.0, 1.0).unwrap();
        assert!(red.max_pendulum_residual < 1e-5, "{}", red.max_pendulum_residual);
        assert!(red.max_psi3_err < 1e-5, "{}", red.max_psi3_err);
    }

    #[test]
    fn so3_reduction_equilibrium() {
        // psi_1 psi_2 = 0 with psi_3 = 0: xi stays constant
        let model = build_model(&ModelParams::So3 { a: 1.0, b: 1.5 }).unwrap();
        let psi0 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let traj = integrate_costate(&model, &psi0, &IntegratorConfig::new(1e-3, 3.0)).unwrap();
        let red = so3_pendulum_residual(&traj, 1.0, 1.5).unwrap();
        for s in red.samples.iter().step_by(400) {
            assert!(s.angle.abs() < 1e-10);
        }
    }

    #[test]
    fn sh2_reduction_rest_equilibrium() {
        // alpha = π/2, beta = 0: gamma(0) = 0, rate 0, pendulum at rest
        let model = build_model(&ModelParams::Sh2).unwrap();
        let alpha = FRAC_PI_2;
        let psi0 = DVector::from_vec(vec![alpha.cos(), alpha.sin(), 0.0]);
        let traj = integrate_costate(&model, &psi0, &IntegratorConfig::new(1e-3, 5.0)).unwrap();
        let red = sh2_reduction(&traj, alpha, 0.0).unwrap();
        assert!(red.max_pendulum_residual < 1e-6, "{}", red.max_pendulum_residual);
        assert!(red.initial_angle_err < 1e-12);
        assert!(red.initial_rate_err < 1e-9);
    }

    #[test]
    fn sh2_reduction_generic_parameters() {
        let model = build_model(&ModelParams::Sh2).unwrap();
        let (alpha, beta): (f64, f64) = (0.3, 0.7);
        let psi0 = DVector::from_vec(vec![alpha.cos(), alpha.sin(), beta]);
        let traj = integrate_costate(&model, &psi0, &IntegratorConfig::new(1e-3, 5.0)).unwrap();
        let red = sh2_reduction(&traj, alpha, beta).unwrap();
        assert!(red.max_pendulum_residual < 1e-4, "{}", red.max_pendulum_residual);
        assert!(red.initial_angle_err < 1e-5);
        assert!(red.initial_rate_err < 1e-5);
        assert!(red.max_system_residual < 1e-5, "{}", red.max_system_residual);
    }

    #[test]
    fn se2_reduction_zero_parameters_zero_angle() {
        let model = build_model(&ModelParams::Se2).unwrap();
        let psi0 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let traj = integrate_costate(&model, &psi0, &IntegratorConfig::new(1e-3, 3.0)).unwrap();
        let red = se2_reduction(&traj, 0.0, 0.0).unwrap();
        for s in red.samples.iter().step_by(300) {
            assert!(s.angle.abs() < 1e-10);
        }
    }

    #[test]
    fn se2_reduction_generic_parameters() {
        let model = build_model(&ModelParams::Se2).unwrap();
        let (alpha, beta): (f64, f64) = (0.4, 0.5);
        let psi0 = DVector::from_vec(vec![alpha.cos(), alpha.sin(), beta]);
        let traj = integrate_costate(&model, &psi0, &IntegratorConfig::new(1e-3, 5.0)).unwrap();
        let red = se2_reduction(&traj, alpha, beta).unwrap();
        assert!(red.max_pendulum_residual < 1e-4, "{}", red.max_pendulum_residual);
        assert!(red.initial_angle_err < 1e-5);
        assert!(red.initial_rate_err < 1e-5);
        assert!(red.max_system_residual < 1e-5, "{}", red.max_system_residual);
    }

    #[test]
    fn pendulum_energy_drift_bounded() {
        // E = rate²/2 - cos(angle) is conserved by the pendulum equation
        let model = build_model(&ModelParams::Se2).unwrap();
        let (alpha, beta): (f64, f64) = (0.8, -0.4);
        let psi0 = DVector::from_vec(vec![alpha.cos(), alpha.sin(), beta]);
        let traj = integrate_costate(&model, &psi0, &IntegratorConfig::new(1e-3, 10.0)).unwrap();
        let red = se2_reduction(&traj, alpha, beta).unwrap();
        let energy =
            |s: &PendulumSample| s.rate * s.rate / 2.0 - s.angle.cos();
        let e0 = energy(&red.samples[1]);
        let drift = red.samples[1..red.samples.len() - 1]
            .iter()
            .fold(0.0_f64, |acc, s| acc.max((energy(s) - e0).abs()));
        assert!(drift < 1e-4, "energy drift {drift}");
    }

    #[test]
    fn period_closure_endpoints_coincide() {
        let model = build_model(&ModelParams::Heisenberg).unwrap();
        let closure =
            heisenberg_period_closure(&model, &[0.0, FRAC_PI_4, FRAC_PI_2], 1.0, 1e-3).unwrap();
        assert!(closure.max_pairwise < 1e-6, "{}", closure.max_pairwise);
        assert!(closure.max_xy_return < 1e-6, "{}", closure.max_xy_return);
        for &(_, _, zt) in &closure.endpoints {
            assert!((zt - PI).abs() < 1e-6);
        }
        assert!(heisenberg_period_closure(&model, &[0.0], 0.0, 1e-3).is_err());
    }

    #[test]
    fn unwrap_detects_jumps() {
        let principal = vec![0.0, 0.1, 2.0];
        assert!(matches!(
            unwrap_angles(&principal, None),
            Err(Error::UnwrapJump { .. })
        ));
        let ok = unwrap_angles(&[3.1, -3.1, 3.05], None).unwrap();
        assert!((ok[1] - (2.0 * PI - 3.1)).abs() < 1e-12);
        assert!((ok[2] - 3.05 - 2.0 * PI).abs() < 1e-12 || (ok[2] - 3.05).abs() < 1e-12);
    }
}
