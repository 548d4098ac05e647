//! Dense matrix carrier and the handful of spectral routines the estimators
//! need: thin SVD with a deterministic sign convention, column-space
//! projections, Schatten norms, and sparse Riesz constants.

use nalgebra::{DMatrix, SymmetricEigen, SVD};

use crate::error::{Error, Result};

/// Relative singular-value cutoff below which a direction counts as null.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Default cap on the number of column subsets [`sparse_riesz_constants`]
/// will enumerate.
pub const RIESZ_SUBSET_BUDGET: u128 = 1_000_000;

/// Real rectangular matrix with finite entries.
///
/// Public constructors reject NaN and infinities. Storage is nalgebra's
/// column-major `DMatrix`, but indexing is positional `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    /// Builds a matrix from entries listed row by row.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} entries, expected {ncols}",
                r.len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(rows.len(), ncols, &flat)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_dmatrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % m.nrows().max(1), pos / m.nrows().max(1));
            return Err(Error::NonFinite(format!("entry ({r}, {c})")));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix produced by internal arithmetic on finite inputs.
    pub(crate) fn wrap(m: DMatrix<f64>) -> Self {
        debug_assert!(m.iter().all(|v| v.is_finite()));
        Self(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Square matrix with `d` on the diagonal.
    pub fn diagonal(d: &[f64]) -> Result<Self> {
        Self::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols() != other.rows() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(Self(&self.0 * &other.0))
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "cannot subtract {:?} from {:?}",
                other.shape(),
                self.shape()
            )));
        }
        Ok(Self(&self.0 - &other.0))
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        Self::from_dmatrix(&self.0 * c)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.0.row(i).norm()
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.rows()).map(|i| self.row_norm(i)).collect()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.0.column_iter().map(|c| c.norm()).collect()
    }

    /// Indices of rows with at least one nonzero entry.
    pub fn row_support(&self) -> Vec<usize> {
        (0..self.rows())
            .filter(|&i| self.0.row(i).iter().any(|&v| v != 0.0))
            .collect()
    }

    /// Entries listed row by row.
    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            out.extend(self.0.row(i).iter());
        }
        out
    }

    /// Copy of the rows selected by `index`, in that order.
    pub fn select_rows(&self, index: &[usize]) -> Self {
        Self(self.0.select_rows(index.iter()))
    }

    /// Copy of the leading `k` columns.
    pub fn leading_columns(&self, k: usize) -> Self {
        Self(self.0.columns(0, k).into_owned())
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl AsRef<DMatrix<f64>> for DenseMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Leading singular triples `u · diag(s) · vᵀ`.
///
/// Each right singular vector is signed so its largest-magnitude entry is
/// positive, with the left vector flipped to match.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

impl ThinSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `u · diag(s) · vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.0.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        DenseMatrix(us * self.v.0.transpose())
    }
}

/// Exponent of a Schatten norm restricted to `[1, 2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchattenQ(f64);

impl SchattenQ {
    pub fn new(q: f64) -> Result<Self> {
        if (1.0..=2.0).contains(&q) {
            Ok(Self(q))
        } else {
            Err(Error::InvalidArgument(format!(
                "Schatten exponent {q} outside [1, 2]"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Full descending SVD with the sign convention applied.
pub(crate) fn svd_sorted(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (n, p) = m.shape();
    let k = n.min(p);
    if k == 0 {
        return (DMatrix::zeros(n, 0), Vec::new(), DMatrix::zeros(p, 0));
    }
    let svd = SVD::new(m.clone(), true, true);
    let u_raw = svd.u.expect("left vectors requested");
    let vt_raw = svd.v_t.expect("right vectors requested");
    let s_raw = svd.singular_values;

    let mut order: Vec<usize> = (0..k).collect();
    // Stable sort keeps nalgebra's order on exact ties.
    order.sort_by(|&a, &b| s_raw[b].total_cmp(&s_raw[a]));

    let mut u = DMatrix::zeros(n, k);
    let mut v = DMatrix::zeros(p, k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let mut vcol = vt_raw.row(src).transpose();
        let mut ucol = u_raw.column(src).into_owned();
        let pivot = vcol
            .iter()
            .copied()
            .fold((0.0f64, 0.0f64), |(best, val), x| {
                if x.abs() > best {
                    (x.abs(), x)
                } else {
                    (best, val)
                }
            })
            .1;
        if pivot < 0.0 {
            vcol.neg_mut();
            ucol.neg_mut();
        }
        u.set_column(dst, &ucol);
        v.set_column(dst, &vcol);
        s.push(s_raw[src].max(0.0));
    }
    (u, s, v)
}

/// Singular values in nonincreasing order, all `min(rows, cols)` of them.
pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    let k = m.rows().min(m.cols());
    if k == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = SVD::new(m.0.clone(), false, false)
        .singular_values
        .iter()
        .map(|v| v.max(0.0))
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// The `k` leading singular triples of `m`.
pub fn thin_svd(m: &DenseMatrix, k: usize) -> Result<ThinSvd> {
    let max = m.rows().min(m.cols());
    if k == 0 || k > max {
        return Err(Error::RankOutOfRange { requested: k, max });
    }
    if m.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("thin_svd input".into()));
    }
    let (u, s, v) = svd_sorted(&m.0);
    Ok(ThinSvd {
        u: DenseMatrix(u.columns(0, k).into_owned()),
        singular_values: s[..k].to_vec(),
        v: DenseMatrix(v.columns(0, k).into_owned()),
    })
}

/// Number of singular values above `RANK_TOLERANCE · σ₁`.
pub fn numerical_rank(m: &DenseMatrix) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > RANK_TOLERANCE * top).count(),
        _ => 0,
    }
}

/// `‖M‖²_{S_q} = (Σ σᵢ^q)^{2/q}`.
pub fn schatten_norm_sq(m: &DenseMatrix, q: SchattenQ) -> f64 {
    let q = q.value();
    if q == 2.0 {
        return m.frobenius_norm_sq();
    }
    let s = singular_values(m);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0.0;
    }
    // Scale by σ₁ so the power sum cannot overflow.
    let sum: f64 = s.iter().map(|v| (v / top).powf(q)).sum();
    top * top * sum.powf(2.0 / q)
}

/// Largest singular value.
pub fn operator_norm(m: &DenseMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Orthogonal projector onto the column space of `x`, i.e. `X (XᵀX)⁻ Xᵀ`.
pub fn projection_onto_column_space(x: &DenseMatrix) -> DenseMatrix {
    let basis = column_space_basis(&x.0);
    DenseMatrix(&basis * basis.transpose())
}

/// Orthonormal basis of the column space, from the left singular vectors
/// above the rank cutoff.
pub(crate) fn column_space_basis(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (u, s, _) = svd_sorted(x);
    let top = s.first().copied().unwrap_or(0.0);
    let k = if top > 0.0 {
        s.iter().filter(|&&v| v > RANK_TOLERANCE * top).count()
    } else {
        0
    };
    u.columns(0, k).into_owned()
}

/// Sparse Riesz constants `(κ²₋(k), κ²₊(k))`: extreme eigenvalues of the
/// `k`-column Gram submatrices of `x`, by exhaustive enumeration.
pub fn sparse_riesz_constants(x: &DenseMatrix, k: usize) -> Result<(f64, f64)> {
    sparse_riesz_constants_with_budget(x, k, RIESZ_SUBSET_BUDGET)
}

pub fn sparse_riesz_constants_with_budget(
    x: &DenseMatrix,
    k: usize,
    budget: u128,
) -> Result<(f64, f64)> {
    let p = x.cols();
    if k == 0 || k > p {
        return Err(Error::RankOutOfRange { requested: k, max: p });
    }
    let count = binomial(p as u128, k as u128);
    if count > budget {
        return Err(Error::CombinatorialBudget { count, budget });
    }
    let gram = x.0.transpose() * &x.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let (a, b) = gram_extremes(&gram, &subset);
        lo = lo.min(a);
        hi = hi.max(b);
        if !next_combination(&mut subset, p) {
            break;
        }
    }
    Ok((lo, hi))
}

/// Smallest and largest eigenvalue of the principal submatrix on `subset`.
pub(crate) fn gram_extremes(gram: &DMatrix<f64>, subset: &[usize]) -> (f64, f64) {
    let sub = gram.select_rows(subset.iter()).select_columns(subset.iter());
    let eig = SymmetricEigen::new(sub).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Advances `c` to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_entries() {
        assert!(DenseMatrix::from_row_major(1, 2, &[1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::from_row_major(1, 2, &[1.0, f64::INFINITY]).is_err());
        assert!(DenseMatrix::from_row_major(2, 2, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn diagonal_svd_picks_standard_basis() {
        let m = DenseMatrix::diagonal(&[3.0, 2.0, 1.0]).unwrap();
        let svd = thin_svd(&m, 2).unwrap();
        assert_eq!(svd.singular_values, vec![3.0, 2.0]);
        for j in 0..2 {
            for i in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((svd.u.get(i, j) - e).abs() < 1e-12);
                assert!((svd.v.get(i, j) - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn thin_svd_rejects_bad_rank() {
        let m = DenseMatrix::identity(3);
        assert!(matches!(thin_svd(&m, 0), Err(Error::RankOutOfRange { .. })));
        assert!(matches!(thin_svd(&m, 4), Err(Error::RankOutOfRange { .. })));
    }

    #[test]
    fn schatten_on_diagonals() {
        let m = DenseMatrix::diagonal(&[3.0, 4.0]).unwrap();
        let q2 = SchattenQ::new(2.0).unwrap();
        let q1 = SchattenQ::new(1.0).unwrap();
        assert!((schatten_norm_sq(&m, q2) - 25.0).abs() < 1e-12);
        assert!((schatten_norm_sq(&m, q1) - 49.0).abs() < 1e-10);
        assert_eq!(schatten_norm_sq(&DenseMatrix::zeros(3, 2), q1), 0.0);
        assert!(SchattenQ::new(2.5).is_err());
        assert!(SchattenQ::new(0.5).is_err());
    }

    #[test]
    fn operator_norm_basics() {
        assert!((operator_norm(&DenseMatrix::identity(3)) - 1.0).abs() < 1e-12);
        let m = DenseMatrix::diagonal(&[3.0, 4.0]).unwrap();
        assert!((operator_norm(&m) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn projection_of_unit_vector() {
        let x = DenseMatrix::from_row_major(4, 1, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let p = projection_onto_column_space(&x);
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert!((p.get(i, j) - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_handles_rank_deficiency() {
        // Two identical columns: rank one.
        let x = DenseMatrix::from_row_major(3, 2, &[1.0, 1.0, 2.0, 2.0, 0.0, 0.0]).unwrap();
        let p = projection_onto_column_space(&x);
        assert_eq!(numerical_rank(&p), 1);
        let px = p.matmul(&x).unwrap();
        assert!(px.max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn riesz_singletons_are_column_norms() {
        let x = DenseMatrix::from_row_major(2, 3, &[1.0, 0.0, 3.0, 1.0, 2.0, 0.0]).unwrap();
        let (lo, hi) = sparse_riesz_constants(&x, 1).unwrap();
        assert!((lo - 2.0).abs() < 1e-12);
        assert!((hi - 9.0).abs() < 1e-12);
    }

    #[test]
    fn riesz_respects_budget() {
        let x = DenseMatrix::from_fn(3, 30, |i, j| ((i * 7 + j) % 5) as f64).unwrap();
        let err = sparse_riesz_constants_with_budget(&x, 15, 1_000).unwrap_err();
        assert!(matches!(err, Error::CombinatorialBudget { .. }));
    }

    #[test]
    fn combinations_enumerate_all() {
        let mut c = vec![0, 1, 2];
        let mut n = 1;
        while next_combination(&mut c, 6) {
            n += 1;
        }
        assert_eq!(n, 20);
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(100, 50), 100891344545564193334812497256);
    }
}
