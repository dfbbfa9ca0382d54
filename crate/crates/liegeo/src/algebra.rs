//! Lie-algebra core: structure constants, brackets, adjoint operators,
//! identity validation, generation filtrations, and adapted bracket words.
//!
//! The algebra is always presented through a fixed basis e_1..e_n, so every
//! element is a coefficient vector and the bracket is the tensor contraction
//! [x, y]_k = Σ_ij c_ij^k x_i y_j.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;

/// Element of the algebra (or a covector identified with one), as coordinates
/// in the fixed basis e_1..e_n.
pub type AlgebraVector = DVector<f64>;

/// Identities (antisymmetry, Jacobi) must hold to this absolute tolerance.
pub const IDENTITY_TOL: f64 = 1e-12;

/// Singular values below this fraction of the largest are treated as zero
/// when computing ranks of spanning sets.
pub const RANK_REL_TOL: f64 = 1e-10;

/// The tensor c_ij^k defining the Lie algebra in a fixed basis.
///
/// Storage is dense and 0-based internally; all public index reporting
/// (validation, errors, file formats) is 1-based.
#[derive(Debug, Clone)]
pub struct StructureConstants {
    n: usize,
    c: Vec<f64>,
}

impl StructureConstants {
    /// Builds from a raw dense tensor `c[(i*n + j)*n + k] = c_ij^k` without
    /// enforcing any identity. Use [`validate`](Self::validate) to check it.
    pub fn from_raw(n: usize, c: Vec<f64>) -> Result<Self, Error> {
        if c.len() != n * n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n * n,
                got: c.len(),
            });
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { n, c })
    }

    /// Builds from a raw tensor, enforcing antisymmetry by replacing
    /// c_ij^k with (c_ij^k - c_ji^k)/2. Returns the largest correction
    /// applied; corrections above [`IDENTITY_TOL`] are also logged.
    pub fn antisymmetrized(n: usize, c: Vec<f64>) -> Result<(Self, f64), Error> {
        let mut sc = Self::from_raw(n, c)?;
        let mut max_correction = 0.0_f64;
        for i in 0..n {
            for j in 0..=i {
                for k in 0..n {
                    let upper = sc.c[Self::offset(n, j, i, k)];
                    let lower = sc.c[Self::offset(n, i, j, k)];
                    let anti = (upper - lower) / 2.0;
                    max_correction = max_correction.max((upper - anti).abs());
                    sc.c[Self::offset(n, j, i, k)] = anti;
                    sc.c[Self::offset(n, i, j, k)] = -anti;
                }
            }
        }
        if max_correction > IDENTITY_TOL {
            log::warn!(
                "structure constants were not antisymmetric; corrected by up to {max_correction:e}"
            );
        }
        Ok((sc, max_correction))
    }

    /// Builds from a sparse list of brackets `[e_i, e_j] = value * e_k` with
    /// 1-based indices and i < j. The mirror entries are filled so the tensor
    /// is antisymmetric by construction.
    pub fn from_brackets(n: usize, entries: &[(usize, usize, usize, f64)]) -> Result<Self, Error> {
        let mut c = vec![0.0; n * n * n];
        for &(i, j, k, value) in entries {
            if i == 0 || j == 0 || k == 0 || i > n || j > n || k > n {
                return Err(Error::InvalidParams(format!(
                    "bracket entry ({i},{j},{k}) out of range 1..={n}"
                )));
            }
            if i >= j {
                return Err(Error::InvalidParams(format!(
                    "bracket entry ({i},{j},{k}) must have i < j"
                )));
            }
            c[Self::offset(n, i - 1, j - 1, k - 1)] = value;
            c[Self::offset(n, j - 1, i - 1, k - 1)] = -value;
        }
        Self::from_raw(n, c)
    }

    #[inline]
    fn offset(n: usize, i: usize, j: usize, k: usize) -> usize {
        (i * n + j) * n + k
    }

    /// Algebra dimension n.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Tensor entry c_ij^k, 0-based indices.
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[Self::offset(self.n, i, j, k)]
    }

    /// Standard basis vector e_i (0-based).
    pub fn basis_vector(&self, i: usize) -> AlgebraVector {
        let mut v = DVector::zeros(self.n);
        v[i] = 1.0;
        v
    }

    fn check_dim(&self, v: &AlgebraVector) -> Result<(), Error> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Lie bracket [x, y]_k = Σ_ij c_ij^k x_i y_j.
    ///
    /// Summation runs over index pairs i < j with the combination
    /// x_i y_j - x_j y_i, which is equivalent for an antisymmetric tensor and
    /// makes bracket(x, y) == -bracket(y, x) hold exactly in floating point.
    pub fn bracket(&self, x: &AlgebraVector, y: &AlgebraVector) -> Result<AlgebraVector, Error> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        let n = self.n;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let w = x[i] * y[j] - x[j] * y[i];
                if w == 0.0 {
                    continue;
                }
                for k in 0..n {
                    let c = self.get(i, j, k);
                    if c != 0.0 {
                        out[k] += c * w;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Matrix of ad(x): column j is bracket(x, e_j), so ad(x)·y = [x, y].
    pub fn ad_matrix(&self, x: &AlgebraVector) -> Result<DMatrix<f64>, Error> {
        self.check_dim(x)?;
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    s += x[i] * self.get(i, j, k);
                }
                m[(k, j)] = s;
            }
        }
        Ok(m)
    }

    /// Checks antisymmetry and the Jacobi identity at [`IDENTITY_TOL`] and
    /// reports every violated identity with its (1-based) indices.
    pub fn validate(&self) -> ValidationReport {
        let n = self.n;
        let mut violations = Vec::new();
        for i in 0..n {
            for j in i..n {
                for k in 0..n {
                    let residual = self.get(i, j, k) + self.get(j, i, k);
                    if residual.abs() > IDENTITY_TOL {
                        violations.push(Violation::Antisymmetry {
                            i: i + 1,
                            j: j + 1,
                            k: k + 1,
                            residual,
                        });
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    // The Jacobi expression is invariant under cyclic rotation
                    // of (i, j, l); report only the minimal rotation.
                    if (j, l, i) < (i, j, l) || (l, i, j) < (i, j, l) {
                        continue;
                    }
                    for m in 0..n {
                        let mut residual = 0.0;
                        for k in 0..n {
                            residual += self.get(j, l, k) * self.get(i, k, m)
                                + self.get(l, i, k) * self.get(j, k, m)
                                + self.get(i, j, k) * self.get(l, k, m);
                        }
                        if residual.abs() > IDENTITY_TOL {
                            violations.push(Violation::Jacobi {
                                i: i + 1,
                                j: j + 1,
                                l: l + 1,
                                m: m + 1,
                                residual,
                            });
                        }
                    }
                }
            }
        }
        ValidationReport { violations }
    }

    /// Ranks r_1 < ... < r_s of the filtration p_m = p^1 + ... + p^m with
    /// p^1 = span(e_1..e_r) and p^{k+1} = [p, p^k].
    ///
    /// Fails with [`Error::NotBracketGenerating`] when the ranks stall
    /// below n.
    pub fn generation_filtration(&self, rank: usize) -> Result<GenerationFiltration, Error> {
        let n = self.n;
        if rank < 2 || rank > n {
            return Err(Error::InvalidParams(format!(
                "distribution rank must satisfy 2 <= r <= n, got r = {rank}, n = {n}"
            )));
        }
        let mut spanning: Vec<AlgebraVector> = (0..rank).map(|i| self.basis_vector(i)).collect();
        let mut ortho = spanning.clone(); // e_i are orthonormal already
        let mut level = spanning.clone();
        let mut ranks = vec![numerical_rank(&spanning)];
        if ranks[0] == n {
            return Ok(GenerationFiltration {
                rank,
                ranks,
                degree: 1,
            });
        }
        loop {
            let mut next_level = Vec::new();
            for i in 0..rank {
                let ei = self.basis_vector(i);
                for w in &level {
                    let v = self.bracket(&ei, w)?;
                    spanning.push(v.clone());
                    if let Some(q) = orthogonal_complement(&ortho, &v) {
                        ortho.push(q);
                        next_level.push(v);
                    }
                }
            }
            let r_new = numerical_rank(&spanning);
            let r_prev = *ranks.last().unwrap();
            if r_new <= r_prev {
                return Err(Error::NotBracketGenerating {
                    rank,
                    achieved: r_prev,
                    dim: n,
                });
            }
            ranks.push(r_new);
            if r_new == n {
                let degree = ranks.len();
                return Ok(GenerationFiltration {
                    rank,
                    ranks,
                    degree,
                });
            }
            level = next_level;
            if ranks.len() > n {
                return Err(Error::NotBracketGenerating {
                    rank,
                    achieved: r_new,
                    dim: n,
                });
            }
        }
    }

    /// Evaluates the nested bracket [e_{i_m}, [... [e_{i_2}, e_{i_1}] ...]]
    /// encoded by `word` (letters are 1-based).
    pub fn word_value(&self, word: &BracketWord) -> Result<AlgebraVector, Error> {
        if word.letters.is_empty() {
            return Err(Error::InvalidParams("empty bracket word".into()));
        }
        for &l in &word.letters {
            if l == 0 || l > self.n {
                return Err(Error::InvalidParams(format!(
                    "bracket word letter {l} out of range 1..={}",
                    self.n
                )));
            }
        }
        let mut v = self.basis_vector(word.letters[word.letters.len() - 1] - 1);
        for &l in word.letters[..word.letters.len() - 1].iter().rev() {
            v = self.bracket(&self.basis_vector(l - 1), &v)?;
        }
        Ok(v)
    }

    /// Greedy breadth-first search for bracket words completing e_1..e_r to an
    /// adapted basis: one word per target index j = r+1..n, scanned in order
    /// of word length and then lexicographically, keeping words whose values
    /// extend the current span.
    pub fn adapted_words(&self, rank: usize) -> Result<Vec<BracketWord>, Error> {
        self.generation_filtration(rank)?;
        let n = self.n;
        let mut ortho: Vec<AlgebraVector> = (0..rank).map(|i| self.basis_vector(i)).collect();
        let mut words = Vec::new();
        if rank == n {
            return Ok(words);
        }
        for len in 2..=n {
            let mut letters = vec![1usize; len];
            'tuples: loop {
                let candidate = BracketWord {
                    target_index: rank + words.len() + 1,
                    letters: letters.clone(),
                };
                let v = self.word_value(&candidate)?;
                if let Some(q) = orthogonal_complement(&ortho, &v) {
                    ortho.push(q);
                    words.push(candidate);
                    if ortho.len() == n {
                        return Ok(words);
                    }
                }
                // lexicographic odometer over {1..r}^len
                for pos in (0..len).rev() {
                    if letters[pos] < rank {
                        letters[pos] += 1;
                        continue 'tuples;
                    }
                    letters[pos] = 1;
                }
                break;
            }
        }
        Err(Error::NotBracketGenerating {
            rank,
            achieved: ortho.len(),
            dim: n,
        })
    }
}

/// Result of the span-growth computation of `generation_filtration`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationFiltration {
    /// Distribution rank r = dim p.
    pub rank: usize,
    /// Strictly increasing ranks r_1 < ... < r_s with r_1 = r and r_s = n.
    pub ranks: Vec<usize>,
    /// Generation degree s.
    pub degree: usize,
}

/// A nested bracket of distribution basis vectors, letters (i_m, ..., i_1)
/// all in 1..r, standing for [e_{i_m}, [..., [e_{i_2}, e_{i_1}]...]].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BracketWord {
    /// Index j of the adapted basis vector this word stands in for (1-based).
    pub target_index: usize,
    /// Letters (i_m, ..., i_2, i_1), each in 1..r (1-based).
    pub letters: Vec<usize>,
}

/// One violated identity, with 1-based indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Antisymmetry {
        i: usize,
        j: usize,
        k: usize,
        residual: f64,
    },
    Jacobi {
        i: usize,
        j: usize,
        l: usize,
        m: usize,
        residual: f64,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Antisymmetry { i, j, k, residual } => write!(
                f,
                "antisymmetry violated at (i,j,k) = ({i},{j},{k}): c_ij^k + c_ji^k = {residual:e}"
            ),
            Violation::Jacobi {
                i,
                j,
                l,
                m,
                residual,
            } => write!(
                f,
                "Jacobi identity violated at (i,j,l), component m = ({i},{j},{l}), {m}: residual {residual:e}"
            ),
        }
    }
}

/// List of violated identities; empty iff the tensor is a valid Lie algebra.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_valid() {
            return write!(f, "structure constants valid (antisymmetry and Jacobi hold)");
        }
        writeln!(f, "{} violated identities:", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Component of `v` orthogonal to the orthonormal set `ortho`, normalized,
/// or None when `v` does not extend the span (relative tolerance
/// [`RANK_REL_TOL`]).
fn orthogonal_complement(ortho: &[AlgebraVector], v: &AlgebraVector) -> Option<AlgebraVector> {
    let scale = v.norm();
    if scale == 0.0 {
        return None;
    }
    let mut q = v.clone();
    // two rounds of modified Gram-Schmidt for numerical safety
    for _ in 0..2 {
        for b in ortho {
            let proj = b.dot(&q);
            q.axpy(-proj, b, 1.0);
        }
    }
    let rnorm = q.norm();
    if rnorm <= RANK_REL_TOL * scale {
        None
    } else {
        Some(q / rnorm)
    }
}

/// Numerical rank of a spanning set: singular values above
/// [`RANK_REL_TOL`] times the largest.
fn numerical_rank(vectors: &[AlgebraVector]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let n = vectors[0].len();
    let mut m = DMatrix::zeros(n, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        m.set_column(j, v);
    }
    let svals = m.singular_values();
    let smax = svals.max();
    if smax == 0.0 {
        return 0;
    }
    svals.iter().filter(|&&s| s > RANK_REL_TOL * smax).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn heisenberg() -> StructureConstants {
        StructureConstants::from_brackets(3, &[(1, 2, 3, 1.0)]).unwrap()
    }

    fn so3(a: f64, b: f64) -> StructureConstants {
        StructureConstants::from_brackets(
            3,
            &[(1, 2, 3, a * b), (1, 3, 2, -b / a), (2, 3, 1, a / b)],
        )
        .unwrap()
    }

    fn se2() -> StructureConstants {
        StructureConstants::from_brackets(3, &[(1, 2, 3, 1.0), (1, 3, 2, -1.0)]).unwrap()
    }

    fn vec3(a: f64, b: f64, c: f64) -> AlgebraVector {
        DVector::from_vec(vec![a, b, c])
    }

    #[test]
    fn heisenberg_bracket_e1_e2_is_e3() {
        let sc = heisenberg();
        let out = sc.bracket(&sc.basis_vector(0), &sc.basis_vector(1)).unwrap();
        assert_eq!(out, vec3(0.0, 0.0, 1.0));
    }

    #[test]
    fn bracket_of_vector_with_itself_vanishes() {
        let sc = so3(1.0, 2.0);
        let x = vec3(0.3, -1.2, 0.7);
        let out = sc.bracket(&x, &x).unwrap();
        assert_eq!(out, vec3(0.0, 0.0, 0.0));
    }

    #[test]
    fn so3_scaled_bracket() {
        let sc = so3(1.0, 2.0);
        let out = sc.bracket(&sc.basis_vector(0), &sc.basis_vector(1)).unwrap();
        assert_eq!(out, vec3(0.0, 0.0, 2.0));
    }

    #[test]
    fn bracket_dimension_mismatch_rejected() {
        let sc = heisenberg();
        let x = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(
            sc.bracket(&x, &sc.basis_vector(0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ad_matrix_of_zero_is_zero() {
        let sc = so3(1.0, 1.0);
        let m = sc.ad_matrix(&vec3(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(m, DMatrix::zeros(3, 3));
    }

    #[test]
    fn ad_matrix_heisenberg_e1() {
        let sc = heisenberg();
        let m = sc.ad_matrix(&sc.basis_vector(0)).unwrap();
        // expand bracket(e_1, e_j) for j = 1..3: only [e_1, e_2] = e_3
        let mut expected = DMatrix::zeros(3, 3);
        expected[(2, 1)] = 1.0;
        assert_eq!(m, expected);
    }

    #[test]
    fn ad_matrix_se2_e1_rotates_e2_e3() {
        let sc = se2();
        let m = sc.ad_matrix(&sc.basis_vector(0)).unwrap();
        let e2 = sc.basis_vector(1);
        let e3 = sc.basis_vector(2);
        assert_eq!(&m * &e2, e3);
        assert_eq!(&m * &e3, -e2);
    }

    #[test]
    fn ad_matrix_times_y_equals_bracket() {
        let sc = so3(1.0, 1.4);
        let x = vec3(0.2, -0.5, 1.1);
        let y = vec3(-0.3, 0.8, 0.4);
        let viaad = sc.ad_matrix(&x).unwrap() * &y;
        let direct = sc.bracket(&x, &y).unwrap();
        assert!((viaad - direct).amax() < 1e-14);
    }

    #[test]
    fn validation_passes_for_clean_models() {
        for sc in [heisenberg(), so3(1.0, 2.0_f64.sqrt()), se2()] {
            assert!(sc.validate().is_valid());
        }
    }

    #[test]
    fn broken_antisymmetry_names_indices() {
        let mut c = vec![0.0; 27];
        c[(0 * 3 + 1) * 3 + 2] = 1.0; // c_12^3 set without its mirror
        let sc = StructureConstants::from_raw(3, c).unwrap();
        let report = sc.validate();
        assert!(!report.is_valid());
        assert!(report.violations.iter().any(|v| matches!(
            v,
            Violation::Antisymmetry { i: 1, j: 2, k: 3, .. }
        )));
    }

    #[test]
    fn random_dense_tensor_fails_validation() {
        // fixed arbitrary entries in [-1, 1]; generic tensors violate Jacobi
        let mut c = vec![0.0; 27];
        let mut state = 88172645463325252u64;
        for x in c.iter_mut() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            *x = (state >> 11) as f64 / (1u64 << 52) as f64 - 1.0;
        }
        let sc = StructureConstants::from_raw(3, c).unwrap();
        assert!(!sc.validate().is_valid());
    }

    #[test]
    fn antisymmetrized_reports_correction() {
        let mut c = vec![0.0; 27];
        c[(0 * 3 + 1) * 3 + 2] = 1.0 + 1e-6;
        c[(1 * 3 + 0) * 3 + 2] = -1.0;
        let (sc, correction) = StructureConstants::antisymmetrized(3, c).unwrap();
        assert!((correction - 5e-7).abs() < 1e-9);
        assert!(sc.validate().is_valid());
        assert_eq!(sc.get(0, 1, 2), -sc.get(1, 0, 2));
    }

    #[test]
    fn filtration_heisenberg() {
        let f = heisenberg().generation_filtration(2).unwrap();
        assert_eq!(f.ranks, vec![2, 3]);
        assert_eq!(f.degree, 2);
    }

    #[test]
    fn filtration_so3_any_plane_generates() {
        let f = so3(1.0, 1.0).generation_filtration(2).unwrap();
        assert_eq!(f.ranks, vec![2, 3]);
        assert_eq!(f.degree, 2);
    }

    #[test]
    fn filtration_abelian_fails() {
        let sc = StructureConstants::from_raw(3, vec![0.0; 27]).unwrap();
        assert!(matches!(
            sc.generation_filtration(2),
            Err(Error::NotBracketGenerating {
                rank: 2,
                achieved: 2,
                dim: 3
            })
        ));
    }

    #[test]
    fn filtration_full_rank_degree_one() {
        let sc = heisenberg();
        let f = sc.generation_filtration(3).unwrap();
        assert_eq!(f.ranks, vec![3]);
        assert_eq!(f.degree, 1);
    }

    #[test]
    fn adapted_words_three_dim_models() {
        for sc in [heisenberg(), se2(), so3(1.0, 2.0)] {
            let words = sc.adapted_words(2).unwrap();
            assert_eq!(words.len(), 1);
            assert_eq!(words[0].target_index, 3);
            assert_eq!(words[0].letters, vec![1, 2]);
        }
    }

    #[test]
    fn adapted_words_depth_three() {
        // Engel-type algebra: [e1,e2]=e3, [e1,e3]=e4; degree 3 at r=2
        let sc = StructureConstants::from_brackets(4, &[(1, 2, 3, 1.0), (1, 3, 4, 1.0)]).unwrap();
        let f = sc.generation_filtration(2).unwrap();
        assert_eq!(f.ranks, vec![2, 3, 4]);
        let words = sc.adapted_words(2).unwrap();
        assert_eq!(words.len(), 2);
        assert_eq!(words[0].letters, vec![1, 2]);
        assert_eq!(words[1].letters, vec![1, 1, 2]);
        let v = sc.word_value(&words[1]).unwrap();
        assert_eq!(v, DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn adapted_words_propagate_failure() {
        let sc = StructureConstants::from_raw(3, vec![0.0; 27]).unwrap();
        assert!(sc.adapted_words(2).is_err());
    }

    proptest! {
        #[test]
        fn bracket_antisymmetric_exactly(
            xs in proptest::collection::vec(-10.0f64..10.0, 3),
            ys in proptest::collection::vec(-10.0f64..10.0, 3),
            a in 0.5f64..2.0,
            b in 0.5f64..2.0,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let sc = so3(lo, hi);
            let x = DVector::from_vec(xs);
            let y = DVector::from_vec(ys);
            let xy = sc.bracket(&x, &y).unwrap();
            let yx = sc.bracket(&y, &x).unwrap();
            prop_assert_eq!(xy, -yx);
        }

        #[test]
        fn bracket_bilinear(
            xs in proptest::collection::vec(-5.0f64..5.0, 3),
            ys in proptest::collection::vec(-5.0f64..5.0, 3),
            zs in proptest::collection::vec(-5.0f64..5.0, 3),
            s in -3.0f64..3.0,
        ) {
            let sc = se2();
            let x = DVector::from_vec(xs);
            let y = DVector::from_vec(ys);
            let z = DVector::from_vec(zs);
            let lhs = sc.bracket(&(&x * s + &y), &z).unwrap();
            let rhs = sc.bracket(&x, &z).unwrap() * s + sc.bracket(&y, &z).unwrap();
            prop_assert!((lhs - rhs).amax() < 1e-10);
        }

        #[test]
        fn jacobi_residual_small_for_valid_models(
            xs in proptest::collection::vec(-2.0f64..2.0, 3),
            ys in proptest::collection::vec(-2.0f64..2.0, 3),
            zs in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            let sc = so3(1.0, 2.0f64.sqrt());
            let x = DVector::from_vec(xs);
            let y = DVector::from_vec(ys);
            let z = DVector::from_vec(zs);
            let t1 = sc.bracket(&x, &sc.bracket(&y, &z).unwrap()).unwrap();
            let t2 = sc.bracket(&y, &sc.bracket(&z, &x).unwrap()).unwrap();
            let t3 = sc.bracket(&z, &sc.bracket(&x, &y).unwrap()).unwrap();
            prop_assert!((t1 + t2 + t3).amax() < 1e-10);
        }
    }
}
