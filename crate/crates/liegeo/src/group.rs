//! Matrix-group layer: representation of algebra elements, matrix
//! exponential and logarithm, and the adjoint/coadjoint actions
//! Ad(g)v = g v g^{-1} and (Ad g)*(ψ) = ψ ∘ Ad(g).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::algebra::{AlgebraVector, StructureConstants, IDENTITY_TOL};
use crate::error::Error;

/// A matrix must reproduce within this residual when decomposed in the
/// algebra basis and re-embedded.
pub const SPAN_TOL: f64 = 1e-9;

/// Group elements must have |det| above this bound.
pub const DET_TOL: f64 = 1e-12;

/// Basis matrices E_1..E_n realizing the algebra inside gl(d).
///
/// The least-squares factorization for `decompose` is computed once at
/// construction (the decomposition runs per integration step).
#[derive(Debug, Clone)]
pub struct Representation {
    d: usize,
    basis_mats: Vec<DMatrix<f64>>,
    flat: DMatrix<f64>, // d^2 x n, column j = vec(E_j)
    gram_chol: Cholesky<f64, Dyn>,
}

impl Representation {
    pub fn new(d: usize, basis_mats: Vec<DMatrix<f64>>) -> Result<Self, Error> {
        if basis_mats.is_empty() {
            return Err(Error::InvalidParams("representation needs at least one basis matrix".into()));
        }
        let n = basis_mats.len();
        for m in &basis_mats {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d * d,
                    got: m.nrows() * m.ncols(),
                });
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteInput);
            }
        }
        let mut flat = DMatrix::zeros(d * d, n);
        for (j, m) in basis_mats.iter().enumerate() {
            flat.set_column(j, &DVector::from_column_slice(m.as_slice()));
        }
        let svals = flat.clone().singular_values();
        if svals.min() <= 1e-10 * svals.max() {
            return Err(Error::InvalidParams(
                "representation basis matrices are linearly dependent".into(),
            ));
        }
        let gram = flat.transpose() * &flat;
        let gram_chol = Cholesky::new(gram).ok_or_else(|| {
            Error::InvalidParams("representation basis matrices are linearly dependent".into())
        })?;
        Ok(Self {
            d,
            basis_mats,
            flat,
            gram_chol,
        })
    }

    pub fn rep_dim(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.basis_mats.len()
    }

    pub fn basis_matrix(&self, i: usize) -> &DMatrix<f64> {
        &self.basis_mats[i]
    }

    pub fn identity(&self) -> DMatrix<f64> {
        DMatrix::identity(self.d, self.d)
    }

    /// Checks that commutators of the basis matrices reproduce the structure
    /// constants: E_i E_j - E_j E_i = Σ_k c_ij^k E_k within 1e-12.
    pub fn check_consistency(&self, sc: &StructureConstants) -> Result<(), Error> {
        let n = self.dim();
        if sc.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: sc.dim(),
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let comm = &self.basis_mats[i] * &self.basis_mats[j]
                    - &self.basis_mats[j] * &self.basis_mats[i];
                let mut expected = DMatrix::zeros(self.d, self.d);
                for k in 0..n {
                    let c = sc.get(i, j, k);
                    if c != 0.0 {
                        expected += &self.basis_mats[k] * c;
                    }
                }
                let residual = (comm - expected).amax();
                if residual > IDENTITY_TOL {
                    return Err(Error::RepresentationInconsistent {
                        i: i + 1,
                        j: j + 1,
                        residual,
                    });
                }
            }
        }
        Ok(())
    }

    /// Linear combination Σ v_i E_i.
    pub fn embed(&self, v: &AlgebraVector) -> Result<DMatrix<f64>, Error> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let mut out = DMatrix::zeros(self.d, self.d);
        for (i, e) in self.basis_mats.iter().enumerate() {
            if v[i] != 0.0 {
                out += e * v[i];
            }
        }
        Ok(out)
    }

    /// Least-squares coordinates of `m` in the basis, with the reconstruction
    /// residual max|embed(coeffs) - m|. Does not enforce [`SPAN_TOL`]; the
    /// residual doubles as a manifold-drift diagnostic during integration.
    pub fn project_in_basis(&self, m: &DMatrix<f64>) -> Result<(AlgebraVector, f64), Error> {
        if m.nrows() != self.d || m.ncols() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d * self.d,
                got: m.nrows() * m.ncols(),
            });
        }
        let vecm = DVector::from_column_slice(m.as_slice());
        let rhs = self.flat.transpose() * &vecm;
        let coeffs = self.gram_chol.solve(&rhs);
        let residual = (&self.flat * &coeffs - vecm).amax();
        Ok((coeffs, residual))
    }

    /// Coordinates of `m` in the basis; fails when `m` is outside the span
    /// (residual above [`SPAN_TOL`]).
    pub fn decompose_in_basis(&self, m: &DMatrix<f64>) -> Result<AlgebraVector, Error> {
        let (coeffs, residual) = self.project_in_basis(m)?;
        if residual > SPAN_TOL {
            return Err(Error::NotInSpan { residual });
        }
        Ok(coeffs)
    }

    /// Adjoint action Ad(g)(v) = decompose(g · embed(v) · g^{-1}).
    pub fn adjoint(&self, g: &DMatrix<f64>, v: &AlgebraVector) -> Result<AlgebraVector, Error> {
        let ginv = invert(g)?;
        self.decompose_in_basis(&(g * self.embed(v)? * ginv))
    }

    /// Matrix of Ad(g) in the algebra basis (column j = Ad(g)(e_j)), plus the
    /// largest span residual over the columns. Uses the unchecked projection.
    pub fn ad_group_matrix(&self, g: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64), Error> {
        let ginv = invert(g)?;
        let n = self.dim();
        let mut ad = DMatrix::zeros(n, n);
        let mut max_residual = 0.0_f64;
        for j in 0..n {
            let conj = g * &self.basis_mats[j] * &ginv;
            let (col, residual) = self.project_in_basis(&conj)?;
            max_residual = max_residual.max(residual);
            ad.set_column(j, &col);
        }
        Ok((ad, max_residual))
    }

    /// Coadjoint pullback (Ad g)*(ψ): the row vector ψ times the matrix of
    /// Ad(g), i.e. component j is ψ(Ad(g)(e_j)).
    pub fn coadjoint_pullback(
        &self,
        g: &DMatrix<f64>,
        psi: &AlgebraVector,
    ) -> Result<AlgebraVector, Error> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: psi.len(),
            });
        }
        let (ad, residual) = self.ad_group_matrix(g)?;
        if residual > SPAN_TOL {
            return Err(Error::NotInSpan { residual });
        }
        Ok(ad.transpose() * psi)
    }
}

/// Inverse with an explicit singularity check (|det| > [`DET_TOL`]).
pub fn invert(g: &DMatrix<f64>) -> Result<DMatrix<f64>, Error> {
    let det = g.determinant();
    if !det.is_finite() || det.abs() <= DET_TOL {
        return Err(Error::Singular { det });
    }
    g.clone()
        .try_inverse()
        .ok_or(Error::Singular { det })
}

/// Verifies a matrix is square, finite, and invertible; returns the determinant.
pub fn ensure_group_element(m: &DMatrix<f64>) -> Result<f64, Error> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows() * m.nrows(),
            got: m.nrows() * m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let det = m.determinant();
    if det.abs() <= DET_TOL {
        return Err(Error::Singular { det });
    }
    Ok(det)
}

const EXP_TAYLOR_ORDER: usize = 16;

/// Matrix exponential exp(m) = Σ m^k / k!.
///
/// Nilpotent arguments (m^p = 0 exactly for some p <= d) are summed with the
/// finite series, which is exact. Otherwise the argument is scaled so its
/// inf-norm is at most 0.5, the order-16 truncated series is evaluated
/// (remainder below 1e-15), and the result is squared back up.
pub fn exp_matrix(m: &DMatrix<f64>) -> Result<DMatrix<f64>, Error> {
    let d = m.nrows();
    if m.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: d * m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let id = DMatrix::identity(d, d);

    // exact finite series for nilpotent arguments
    let mut power = m.clone();
    let mut powers: Vec<DMatrix<f64>> = vec![];
    for _ in 1..=d {
        powers.push(power.clone());
        power = &power * m;
        if power.amax() == 0.0 {
            let mut out = id.clone();
            let mut factorial = 1.0;
            for (k, p) in powers.iter().enumerate() {
                factorial *= (k + 1) as f64;
                out += p / factorial;
            }
            return Ok(out);
        }
    }

    let norm = inf_norm(m);
    let squarings = if norm <= 0.5 {
        0
    } else {
        (norm / 0.5).log2().ceil() as u32
    };
    let scaled = m / 2f64.powi(squarings as i32);
    let mut acc = id.clone();
    for k in (1..=EXP_TAYLOR_ORDER).rev() {
        acc = &id + (&scaled * acc) / (k as f64);
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    Ok(acc)
}

/// Principal matrix logarithm, as the local inverse of [`exp_matrix`].
///
/// Square roots (Denman-Beavers) precondition the argument until it is close
/// to the identity, then the series log(I + Y) is summed. Fails with
/// [`Error::OutsidePrincipalBranch`] when the iteration does not converge or
/// the round trip exp(log(g)) misses g by more than [`SPAN_TOL`].
pub fn log_matrix(g: &DMatrix<f64>) -> Result<DMatrix<f64>, Error> {
    let d = g.nrows();
    if g.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: d * g.ncols(),
        });
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let id = DMatrix::identity(d, d);
    let mut x = g.clone();
    let mut sqrt_count = 0u32;
    while inf_norm(&(&x - &id)) > 0.25 {
        if sqrt_count >= 60 {
            return Err(Error::OutsidePrincipalBranch);
        }
        x = sqrt_denman_beavers(&x)?;
        sqrt_count += 1;
    }
    let y = &x - &id;
    let mut term = y.clone();
    let mut sum = DMatrix::zeros(d, d);
    for k in 1..=64 {
        let contribution = &term / (k as f64);
        if k % 2 == 1 {
            sum += &contribution;
        } else {
            sum -= &contribution;
        }
        if contribution.amax() < 1e-18 {
            break;
        }
        term = &term * &y;
    }
    let log = sum * 2f64.powi(sqrt_count as i32);
    let roundtrip = exp_matrix(&log)?;
    if (roundtrip - g).amax() > SPAN_TOL * (1.0 + g.amax()) {
        return Err(Error::OutsidePrincipalBranch);
    }
    Ok(log)
}

fn sqrt_denman_beavers(a: &DMatrix<f64>) -> Result<DMatrix<f64>, Error> {
    let mut y = a.clone();
    let mut z = DMatrix::identity(a.nrows(), a.ncols());
    for _ in 0..60 {
        let y_next = (&y + invert(&z).map_err(|_| Error::OutsidePrincipalBranch)?) / 2.0;
        let z_next = (&z + invert(&y).map_err(|_| Error::OutsidePrincipalBranch)?) / 2.0;
        let delta = (&y_next - &y).amax();
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * (1.0 + y.amax()) {
            return Ok(y);
        }
    }
    Err(Error::OutsidePrincipalBranch)
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
