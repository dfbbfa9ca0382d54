//! Constructive controllability: bang control schedules built from adapted
//! bracket words, coordinates of the second kind, and a steering routine
//! verified by simulation.
//!
//! A word (i_m, ..., i_1) is realized by the three-phase schedule
//!   forward  |t_m|..|t_2| on e_{i_m}..e_{i_2},
//!   middle   |s| on e_{i_1},
//!   backward |t_2|..|t_m| with flipped signs,
//! whose endpoint is exactly exp(s e'_j) for the conjugation-perturbed
//! direction e'_j = Ad(exp(t_m e_{i_m})) ... Ad(exp(t_2 e_{i_2}))(e_{i_1}).
//! Steering solves the product chart built from these perturbed directions
//! and refines on the simulated residual.

use nalgebra::{DMatrix, DVector};

use crate::algebra::BracketWord;
use crate::error::Error;
use crate::geodesics::LieModel;
use crate::group::{ensure_group_element, exp_matrix, invert, log_matrix};

/// Chart inversions stop at this residual (matrix max-norm).
pub const CHART_RESIDUAL_TOL: f64 = 1e-10;

/// One constant-control segment: u = sign * e_index for the given duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub duration: f64,
    /// Distribution basis index, 1-based, always <= r.
    pub index: usize,
    /// +1 or -1.
    pub sign: i8,
}

/// Ordered list of bang segments for the control system ġ = g · embed(u).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControlSchedule {
    pub segments: Vec<Segment>,
}

impl ControlSchedule {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Single bang moving by exp(s e_index); no segment when s = 0.
    pub fn push_move(&mut self, s: f64, index: usize) {
        if s != 0.0 {
            self.segments.push(Segment {
                duration: s.abs(),
                index,
                sign: if s >= 0.0 { 1 } else { -1 },
            });
        }
    }

    pub fn extend(&mut self, other: ControlSchedule) {
        self.segments.extend(other.segments);
    }

    /// Schedule undoing this one: segments reversed with flipped signs.
    pub fn inverse(&self) -> Self {
        Self {
            segments: self
                .segments
                .iter()
                .rev()
                .map(|s| Segment {
                    duration: s.duration,
                    index: s.index,
                    sign: -s.sign,
                })
                .collect(),
        }
    }
}

/// Flows a schedule from `g0`. Constant left-invariant flows are
/// 1-parameter subgroups, so every segment is the exact exponential
/// g <- g · exp(duration · sign · E_index); the only error source is
/// `exp_matrix` truncation.
pub fn simulate_schedule(
    g0: &DMatrix<f64>,
    schedule: &ControlSchedule,
    model: &LieModel,
) -> Result<DMatrix<f64>, Error> {
    let d = model.rep_dim();
    if g0.nrows() != d || g0.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: g0.nrows() * g0.ncols(),
        });
    }
    let mut g = g0.clone();
    for seg in &schedule.segments {
        if !(seg.duration >= 0.0) || !seg.duration.is_finite() {
            return Err(Error::InvalidParams(format!(
                "segment duration must be finite and nonnegative, got {}",
                seg.duration
            )));
        }
        if seg.index == 0 || seg.index > model.rank {
            return Err(Error::InvalidParams(format!(
                "segment index {} outside distribution 1..={}",
                seg.index, model.rank
            )));
        }
        if seg.sign != 1 && seg.sign != -1 {
            return Err(Error::InvalidParams(format!(
                "segment sign must be ±1, got {}",
                seg.sign
            )));
        }
        let arg = model.rep.basis_matrix(seg.index - 1) * (seg.duration * seg.sign as f64);
        g *= exp_matrix(&arg)?;
    }
    Ok(g)
}

/// Second-kind chart Φ(s) = exp(s_1 e_1) ... exp(s_n e_n).
pub fn phi(s: &DVector<f64>, model: &LieModel) -> Result<DMatrix<f64>, Error> {
    let n = model.dim();
    if s.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: s.len(),
        });
    }
    let dirs: Vec<DMatrix<f64>> = (0..n).map(|i| model.rep.basis_matrix(i).clone()).collect();
    product_of_exponentials(&dirs, s)
}

/// Numerical inverse of [`phi`] near the identity: damped root finding on
/// s ↦ Φ(s) - g with a finite-difference Jacobian, from s = 0. Fails with
/// "outside chart" semantics when 100 iterations do not reach
/// [`CHART_RESIDUAL_TOL`].
pub fn phi_inverse_local(g: &DMatrix<f64>, model: &LieModel) -> Result<DVector<f64>, Error> {
    ensure_group_element(g)?;
    let n = model.dim();
    let dirs: Vec<DMatrix<f64>> = (0..n).map(|i| model.rep.basis_matrix(i).clone()).collect();
    invert_product_chart(&dirs, g, CHART_RESIDUAL_TOL, 100)
}

/// The three-phase bang schedule realizing exp(s e'_j) for a bracket word.
///
/// `t_params` are the conjugation durations (t_2, ..., t_m), one fewer than
/// the word letters; a length-1 word needs none and yields a single segment.
/// The total duration is |s| + 2 Σ |t_k|.
pub fn schedule_for_basis_direction(
    word: &BracketWord,
    s: f64,
    t_params: &[f64],
    model: &LieModel,
) -> Result<ControlSchedule, Error> {
    let m = word.letters.len();
    if m == 0 {
        return Err(Error::InvalidParams("empty bracket word".into()));
    }
    for &l in &word.letters {
        if l == 0 || l > model.rank {
            return Err(Error::InvalidParams(format!(
                "word letter {l} outside distribution 1..={}",
                model.rank
            )));
        }
    }
    if t_params.len() != m - 1 {
        return Err(Error::InvalidParams(format!(
            "word of length {m} needs {} conjugation durations, got {}",
            m - 1,
            t_params.len()
        )));
    }
    if t_params.iter().any(|t| *t == 0.0 || !t.is_finite()) {
        return Err(Error::InvalidParams(
            "conjugation durations must be nonzero and finite".into(),
        ));
    }
    let mut schedule = ControlSchedule::empty();
    // letters[idx] carries subscript l = m - idx; t_params[l - 2] is t_l
    for idx in 0..m - 1 {
        let l = m - idx;
        schedule.push_move(t_params[l - 2], word.letters[idx]);
    }
    schedule.segments.push(Segment {
        duration: s.abs(),
        index: word.letters[m - 1],
        sign: if s >= 0.0 { 1 } else { -1 },
    });
    for l in 2..=m {
        let idx = m - l;
        schedule.push_move(-t_params[l - 2], word.letters[idx]);
    }
    Ok(schedule)
}

/// The conjugation-perturbed direction e'_j realized by
/// [`schedule_for_basis_direction`], as an embedded matrix:
/// C E_{i_1} C^{-1} with C = exp(t_m E_{i_m}) ... exp(t_2 E_{i_2}).
pub fn perturbed_direction(
    word: &BracketWord,
    t_params: &[f64],
    model: &LieModel,
) -> Result<DMatrix<f64>, Error> {
    let m = word.letters.len();
    if t_params.len() != m - 1 {
        return Err(Error::InvalidParams(format!(
            "word of length {m} needs {} conjugation durations, got {}",
            m - 1,
            t_params.len()
        )));
    }
    let d = model.rep_dim();
    let mut c = DMatrix::<f64>::identity(d, d);
    for idx in 0..m - 1 {
        let l = m - idx;
        let e = model.rep.basis_matrix(word.letters[idx] - 1);
        c *= exp_matrix(&(e * t_params[l - 2]))?;
    }
    let base = model.rep.basis_matrix(word.letters[m - 1] - 1);
    Ok(&c * base * invert(&c)?)
}

/// Options for [`steer`].
#[derive(Debug, Clone, Copy)]
pub struct SteerOptions {
    /// Acceptable endpoint error in matrix max-norm.
    pub tol: f64,
    /// Uniform conjugation duration t_k for bracket-word schedules.
    pub t_param: f64,
    /// Chart chaining splits the target until each factor has log-norm at
    /// most this value.
    pub chart_norm: f64,
    /// Outer refinement iterations on the simulated residual.
    pub max_outer: usize,
}

impl Default for SteerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            t_param: 0.1,
            chart_norm: 0.3,
            max_outer: 20,
        }
    }
}

/// A steering result: the schedule, its simulated endpoint error against the
/// target, and the total bang time.
#[derive(Debug, Clone)]
pub struct SteerResult {
    pub schedule: ControlSchedule,
    pub achieved_error: f64,
    pub total_duration: f64,
}

/// Builds a bang schedule from the identity to `g_target`.
///
/// The target is factored as (exp(log(g)/K))^K with chart-sized factors,
/// each factor is solved in the perturbed product chart
/// exp(s_1 E_1)..exp(s_r E_r) exp(s_{r+1} E'_{r+1})..exp(s_n E'_n)
/// (every factor of which a bang schedule realizes exactly), and the
/// remaining simulated residual is refined by further chart solves. Failure
/// to decompose or a stalled refinement is reported with the best residual.
pub fn steer(
    g_target: &DMatrix<f64>,
    model: &LieModel,
    opts: &SteerOptions,
) -> Result<SteerResult, Error> {
    ensure_group_element(g_target)?;
    let d = model.rep_dim();
    if g_target.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: g_target.nrows() * g_target.ncols(),
        });
    }
    let identity = DMatrix::<f64>::identity(d, d);
    let direct_err = (g_target - &identity).amax();
    if direct_err <= 1e-12 {
        return Ok(SteerResult {
            schedule: ControlSchedule::empty(),
            achieved_error: direct_err,
            total_duration: 0.0,
        });
    }

    let words = model.sc.adapted_words(model.rank)?;
    let mut dirs: Vec<DMatrix<f64>> = (0..model.rank)
        .map(|i| model.rep.basis_matrix(i).clone())
        .collect();
    let t_params: Vec<Vec<f64>> = words
        .iter()
        .map(|w| vec![opts.t_param; w.letters.len() - 1])
        .collect();
    for (w, t) in words.iter().zip(&t_params) {
        dirs.push(perturbed_direction(w, t, model)?);
    }

    let log = log_matrix(g_target).map_err(|_| Error::SteeringFailed {
        best_residual: direct_err,
    })?;
    let mut k = ((inf_norm(&log) / opts.chart_norm).ceil() as usize).max(1);

    // solve one chart-sized factor; retry with a finer split if Newton stalls
    let mut schedule = ControlSchedule::empty();
    let mut attempts = 0;
    loop {
        let factor = exp_matrix(&(&log / k as f64))?;
        match invert_product_chart(&dirs, &factor, 1e-12, 100) {
            Ok(s) => {
                let per_factor = schedule_from_chart_coords(&s, model, &words, &t_params)?;
                for _ in 0..k {
                    schedule.extend(per_factor.clone());
                }
                break;
            }
            Err(Error::ChartInversionFailed { residual, .. }) if attempts < 5 => {
                attempts += 1;
                k *= 2;
                if k > 4096 {
                    return Err(Error::SteeringFailed {
                        best_residual: residual,
                    });
                }
            }
            Err(_) => {
                return Err(Error::SteeringFailed {
                    best_residual: direct_err,
                })
            }
        }
    }

    let mut endpoint = simulate_schedule(&identity, &schedule, model)?;
    let mut err = (&endpoint - g_target).amax();

    // fixed-point refinement on the simulated residual
    for _ in 0..opts.max_outer {
        if err <= opts.tol {
            break;
        }
        let residual_target = invert(&endpoint)? * g_target;
        let s = match invert_product_chart(&dirs, &residual_target, 1e-12, 100) {
            Ok(s) => s,
            Err(_) => break,
        };
        let correction = schedule_from_chart_coords(&s, model, &words, &t_params)?;
        let mut refined = schedule.clone();
        refined.extend(correction);
        let refined_endpoint = simulate_schedule(&identity, &refined, model)?;
        let refined_err = (&refined_endpoint - g_target).amax();
        if refined_err >= err {
            break; // stalled
        }
        schedule = refined;
        endpoint = refined_endpoint;
        err = refined_err;
    }

    if err <= opts.tol {
        Ok(SteerResult {
            total_duration: schedule.total_duration(),
            schedule,
            achieved_error: err,
        })
    } else {
        Err(Error::SteeringFailed { best_residual: err })
    }
}

fn schedule_from_chart_coords(
    s: &DVector<f64>,
    model: &LieModel,
    words: &[BracketWord],
    t_params: &[Vec<f64>],
) -> Result<ControlSchedule, Error> {
    let mut schedule = ControlSchedule::empty();
    for j in 0..model.rank {
        schedule.push_move(s[j], j + 1);
    }
    for (wi, word) in words.iter().enumerate() {
        let coord = s[model.rank + wi];
        if coord != 0.0 {
            schedule.extend(schedule_for_basis_direction(
                word,
                coord,
                &t_params[wi],
                model,
            )?);
        }
    }
    Ok(schedule)
}

fn product_of_exponentials(dirs: &[DMatrix<f64>], s: &DVector<f64>) -> Result<DMatrix<f64>, Error> {
    let d = dirs[0].nrows();
    let mut g = DMatrix::<f64>::identity(d, d);
    for (dir, &coord) in dirs.iter().zip(s.iter()) {
        if coord != 0.0 {
            g *= exp_matrix(&(dir * coord))?;
        }
    }
    Ok(g)
}

/// Damped root finding on s ↦ Π exp(s_j D_j) - target with a
/// finite-difference Jacobian and least-squares steps.
fn invert_product_chart(
    dirs: &[DMatrix<f64>],
    target: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>, Error> {
    let n = dirs.len();
    let residual = |s: &DVector<f64>| -> Result<DVector<f64>, Error> {
        let diff = product_of_exponentials(dirs, s)? - target;
        Ok(DVector::from_column_slice(diff.as_slice()))
    };
    let mut s = DVector::zeros(n);
    let mut r = residual(&s)?;
    let mut rnorm = r.amax();
    for iter in 0..max_iter {
        if rnorm <= tol {
            return Ok(s);
        }
        let mut jac = DMatrix::zeros(r.len(), n);
        for j in 0..n {
            let delta = 1e-7 * (1.0 + s[j].abs());
            let mut sp = s.clone();
            sp[j] += delta;
            jac.set_column(j, &((residual(&sp)? - &r) / delta));
        }
        let svd = jac.svd(true, true);
        let step = svd
            .solve(&(-&r), 1e-12)
            .map_err(|_| Error::ChartInversionFailed {
                iterations: iter,
                residual: rnorm,
            })?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let s_try = &s + &step * alpha;
            let r_try = residual(&s_try)?;
            let rnorm_try = r_try.amax();
            if rnorm_try < rnorm || rnorm_try <= tol {
                s = s_try;
                r = r_try;
                rnorm = rnorm_try;
                accepted = true;
                break;
            }
            alpha /= 2.0;
        }
        if !accepted {
            return Err(Error::ChartInversionFailed {
                iterations: iter,
                residual: rnorm,
            });
        }
    }
    if rnorm <= tol {
        Ok(s)
    } else {
        Err(Error::ChartInversionFailed {
            iterations: max_iter,
            residual: rnorm,
        })
    }
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        let mut row = 0.0;
        for j in 0..m.ncols() {
            row += m[(i, j)].abs();
        }
        worst = worst.max(row);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model, heisenberg_coords, ModelParams};

    fn heisenberg() -> LieModel {
        build_model(&ModelParams::Heisenberg).unwrap()
    }

    #[test]
    fn phi_at_zero_is_identity() {
        let model = heisenberg();
        let g = phi(&DVector::zeros(3), &model).unwrap();
        assert_eq!(g, model.rep.identity());
    }

    #[test]
    fn phi_heisenberg_product_formula() {
        let model = heisenberg();
        let (x, y, z) = (0.7, -0.4, 1.2);
        let g = phi(&DVector::from_vec(vec![x, y, z]), &model).unwrap();
        let coords = heisenberg_coords(&g).unwrap();
        assert!((coords.0 - x).abs() < 1e-14);
        assert!((coords.1 - y).abs() < 1e-14);
        assert!((coords.2 - (z + x * y)).abs() < 1e-14);
    }

    #[test]
    fn phi_single_component_is_exponential() {
        let model = build_model(&ModelParams::Se2).unwrap();
        let mut s = DVector::zeros(3);
        s[1] = 0.83;
        let g = phi(&s, &model).unwrap();
        let expected = exp_matrix(&(model.rep.basis_matrix(1) * 0.83)).unwrap();
        assert!((g - expected).amax() < 1e-15);
    }

    #[test]
    fn phi_inverse_identity_is_zero() {
        let model = heisenberg();
        let s = phi_inverse_local(&model.rep.identity(), &model).unwrap();
        assert!(s.amax() < 1e-12);
    }

    #[test]
    fn phi_inverse_round_trip() {
        let model = build_model(&ModelParams::Sh2).unwrap();
        let s = DVector::from_vec(vec![0.31, -0.42, 0.17]);
        let g = phi(&s, &model).unwrap();
        let back = phi_inverse_local(&g, &model).unwrap();
        assert!((back - s).amax() < 1e-8);
    }

    #[test]
    fn phi_inverse_heisenberg_formula() {
        let model = heisenberg();
        let (x, y, z) = (0.4, 0.3, 0.25);
        let g = DMatrix::from_row_slice(3, 3, &[1.0, x, z, 0.0, 1.0, y, 0.0, 0.0, 1.0]);
        let s = phi_inverse_local(&g, &model).unwrap();
        let expected = DVector::from_vec(vec![x, y, z - x * y]);
        assert!((s - expected).amax() < 1e-10);
    }

    #[test]
    fn single_letter_schedule_is_one_bang() {
        let model = heisenberg();
        let word = BracketWord {
            target_index: 1,
            letters: vec![1],
        };
        let schedule = schedule_for_basis_direction(&word, 0.7, &[], &model).unwrap();
        assert_eq!(schedule.segments.len(), 1);
        assert_eq!(schedule.total_duration(), 0.7);
        let endpoint = simulate_schedule(&model.rep.identity(), &schedule, &model).unwrap();
        let expected = exp_matrix(&(model.rep.basis_matrix(0) * 0.7)).unwrap();
        assert!((endpoint - expected).amax() < 1e-15);
    }

    #[test]
    fn conjugated_schedule_matches_group_product() {
        let model = heisenberg();
        let word = &model.sc.adapted_words(2).unwrap()[0];
        let (t2, s) = (0.1, 0.3);
        let schedule = schedule_for_basis_direction(word, s, &[t2], &model).unwrap();
        assert_eq!(schedule.segments.len(), 3);
        let endpoint = simulate_schedule(&model.rep.identity(), &schedule, &model).unwrap();
        // independent product: I(exp(t2 e_1))(exp(s e_2))
        let c = exp_matrix(&(model.rep.basis_matrix(0) * t2)).unwrap();
        let mid = exp_matrix(&(model.rep.basis_matrix(1) * s)).unwrap();
        let expected = &c * mid * invert(&c).unwrap();
        assert!((&endpoint - expected).amax() < 1e-12);
        // and the endpoint equals exp(s e'_j)
        let eprime = perturbed_direction(word, &[t2], &model).unwrap();
        let viaexp = exp_matrix(&(eprime * s)).unwrap();
        assert!((endpoint - viaexp).amax() < 1e-12);
    }

    #[test]
    fn zero_middle_segment_cancels() {
        let model = build_model(&ModelParams::Se2).unwrap();
        let word = &model.sc.adapted_words(2).unwrap()[0];
        let schedule = schedule_for_basis_direction(word, 0.0, &[0.2], &model).unwrap();
        let endpoint = simulate_schedule(&model.rep.identity(), &schedule, &model).unwrap();
        assert!((endpoint - model.rep.identity()).amax() < 1e-15);
        assert!((schedule.total_duration() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn empty_schedule_and_inverse_composition() {
        let model = build_model(&ModelParams::Sh2).unwrap();
        let g0 = phi(&DVector::from_vec(vec![0.2, -0.1, 0.3]), &model).unwrap();
        let empty = ControlSchedule::empty();
        assert_eq!(simulate_schedule(&g0, &empty, &model).unwrap(), g0);

        let mut schedule = ControlSchedule::empty();
        schedule.push_move(0.4, 1);
        schedule.push_move(-0.7, 2);
        schedule.push_move(0.2, 1);
        let mut round = schedule.clone();
        round.extend(schedule.inverse());
        let endpoint = simulate_schedule(&model.rep.identity(), &round, &model).unwrap();
        assert!((endpoint - model.rep.identity()).amax() < 1e-10);
    }

    #[test]
    fn steer_identity_is_empty() {
        let model = heisenberg();
        let result = steer(&model.rep.identity(), &model, &SteerOptions::default()).unwrap();
        assert!(result.schedule.segments.is_empty());
        assert_eq!(result.total_duration, 0.0);
    }

    #[test]
    fn steer_heisenberg_center_direction() {
        // pure center target is reachable only through the commutator word
        let model = heisenberg();
        let mut target = model.rep.identity();
        target[(0, 2)] = 1.0;
        let result = steer(&target, &model, &SteerOptions::default()).unwrap();
        assert!(result.achieved_error <= 1e-6, "{}", result.achieved_error);
        assert!(result
            .schedule
            .segments
            .iter()
            .all(|seg| seg.index <= model.rank));
        let endpoint = simulate_schedule(&model.rep.identity(), &result.schedule, &model).unwrap();
        assert!((endpoint - target).amax() <= 1e-6);
    }

    #[test]
    fn steer_se2_small_target() {
        let model = build_model(&ModelParams::Se2).unwrap();
        let (p, x, y): (f64, f64, f64) = (0.2, 0.1, -0.05);
        let target = DMatrix::from_row_slice(
            3,
            3,
            &[
                p.cos(),
                -p.sin(),
                x,
                p.sin(),
                p.cos(),
                y,
                0.0,
                0.0,
                1.0,
            ],
        );
        let result = steer(&target, &model, &SteerOptions::default()).unwrap();
        assert!(result.achieved_error <= 1e-6, "{}", result.achieved_error);
        assert!(result.total_duration.is_finite());
    }

    #[test]
    fn steer_batch_of_chart_sized_targets() {
        let model = build_model(&ModelParams::Sh2).unwrap();
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut rand = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..10 {
            let s = DVector::from_fn(3, |_, _| 0.6 * rand());
            let target = phi(&s, &model).unwrap();
            let result = steer(&target, &model, &SteerOptions::default()).unwrap();
            let endpoint =
                simulate_schedule(&model.rep.identity(), &result.schedule, &model).unwrap();
            assert!((endpoint - target).amax() <= 1e-6);
        }
    }

    #[test]
    fn duration_budget_is_exact() {
        let model = build_model(&ModelParams::So3 { a: 1.0, b: 1.2 }).unwrap();
        let word = &model.sc.adapted_words(2).unwrap()[0];
        let (s, t2) = (0.37, 0.1);
        let schedule = schedule_for_basis_direction(word, s, &[t2], &model).unwrap();
        // segment durations are exactly |t_2|, |s|, |t_2|
        let durations: Vec<f64> = schedule.segments.iter().map(|x| x.duration).collect();
        assert_eq!(durations, vec![t2, s, t2]);
    }
}
