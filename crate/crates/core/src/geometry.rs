//! Real-vector formalism for states, effects and quasi-probabilities.
//!
//! States of a `d`-level system live in `ℝ^ℓ` with `ℓ = d²`, on the affine
//! hyperplane `u_ℓ · s = 1` where `u_ℓ` is the all-ones vector. Pure states
//! lie on the surface of the ball `𝔹` cut out of that hyperplane by the cone
//! `|v|² − (u_ℓ · v)² ≤ 0`; the ball has center `u_ℓ/ℓ` and radius
//! `sqrt(1 − 1/ℓ)`.
//!
//! # Embedding
//!
//! Density matrices map to vectors through
//!
//! ```text
//! s = u_ℓ/ℓ + α · T(ρ − 𝟙/d),    α = sqrt((d + 1)/d)
//! ```
//!
//! where `T` sends an orthonormal traceless Hermitian basis onto an
//! orthonormal basis of `u_ℓ⊥`. The scale `α` is the unique positive value
//! that puts pure states on the surface of `𝔹`. As a consequence the squared
//! norm is an affine function of the purity,
//!
//! ```text
//! |s|² = 1/ℓ + α² (Tr[ρ²] − 1/d),
//! ```
//!
//! and is equal to the purity only at the pure states. Effects are embedded
//! with `1/α` on the traceless part so that the Born rule `m · s = Tr[E ρ]`
//! holds for every unit-trace `ρ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::linalg;

/// Default relative tolerance for rank and membership decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

type C64 = Complex<f64>;

/// A point of the ℓ-dimensional real formalism: a state, an effect row, or
/// a quasi-probability vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GeomVector(DVector<f64>);

impl GeomVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite vector entry".into()));
        }
        Ok(Self(DVector::from_vec(entries)))
    }

    pub fn zeros(len: usize) -> Self {
        Self(DVector::zeros(len))
    }

    /// Standard basis vector `e_i` of `ℝ^len`.
    pub fn basis(len: usize, i: usize) -> Self {
        let mut v = DVector::zeros(len);
        v[i] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn entries(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn dot(&self, other: &GeomVector) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    /// `u · v`, the sum of the entries.
    pub fn sum(&self) -> f64 {
        self.0.sum()
    }

    /// `v / |v|`; the zero vector is returned unchanged.
    pub fn hat(&self) -> GeomVector {
        let n = self.0.norm();
        if n == 0.0 {
            self.clone()
        } else {
            Self(&self.0 / n)
        }
    }

    /// True when the point lies on the state hyperplane.
    pub fn is_state(&self, tol: f64) -> bool {
        (self.sum() - 1.0).abs() <= tol
    }

    /// True when the point is on the hyperplane and on the unit sphere.
    pub fn is_pure_state(&self, tol: f64) -> bool {
        self.is_state(tol) && (self.norm_squared() - 1.0).abs() <= tol
    }
}

impl From<DVector<f64>> for GeomVector {
    fn from(v: DVector<f64>) -> Self {
        Self(v)
    }
}

impl TryFrom<Vec<f64>> for GeomVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<GeomVector> for Vec<f64> {
    fn from(v: GeomVector) -> Self {
        v.0.as_slice().to_vec()
    }
}

/// The unit effect `u_ℓ = (1, …, 1)`.
pub fn unit_effect(l: usize) -> Result<GeomVector> {
    if l < 2 {
        return Err(Error::InvalidDimension(format!("l = {l}, need l >= 2")));
    }
    Ok(GeomVector(DVector::from_element(l, 1.0)))
}

/// Cone functional `f(v) = |v|² − (u · v)²`.
pub fn cone_functional(v: &GeomVector) -> f64 {
    let s = v.sum();
    v.norm_squared() - s * s
}

/// Membership in the ball `𝔹`: on the hyperplane and inside the cone.
pub fn ball_membership(s: &GeomVector, tol: f64) -> bool {
    (s.sum() - 1.0).abs() <= tol && cone_functional(s) <= tol
}

/// Center `u_ℓ/ℓ` of the ball.
pub fn ball_center(l: usize) -> DVector<f64> {
    DVector::from_element(l, 1.0 / l as f64)
}

/// Radius `sqrt(1 − 1/ℓ)` of the ball within the hyperplane.
pub fn ball_radius(l: usize) -> f64 {
    (1.0 - 1.0 / l as f64).sqrt()
}

/// Orthonormal basis of `u_ℓ⊥` (Helmert contrasts), as an `ℓ × (ℓ−1)`
/// matrix. Column `j` is `(1, …, 1, −(j+1), 0, …)/sqrt((j+1)(j+2))`.
pub fn complement_basis(l: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(l, l.saturating_sub(1));
    for j in 0..l.saturating_sub(1) {
        let k = (j + 1) as f64;
        let norm = (k * (k + 1.0)).sqrt();
        for i in 0..=j {
            h[(i, j)] = 1.0 / norm;
        }
        h[(j + 1, j)] = -k / norm;
    }
    h
}

/// Moore–Penrose pseudoinverse via SVD. Singular values at or below
/// `rank_tol * sigma_max` are treated as zero.
pub fn pseudoinverse(a: &DMatrix<f64>, rank_tol: f64) -> Result<DMatrix<f64>> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidInput("rank tolerance must be positive".into()));
    }
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Ok(DMatrix::zeros(cols, rows));
    }
    let d = linalg::svd(a);
    let smax = d.s.first().copied().unwrap_or(0.0);
    let mut out = DMatrix::zeros(cols, rows);
    for (i, &sigma) in d.s.iter().enumerate() {
        if smax > 0.0 && sigma > rank_tol * smax {
            out += (d.v.column(i) * d.u.column(i).transpose()) / sigma;
        }
    }
    Ok(out)
}

/// A Hermitian operator on `ℂ^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    entries: DMatrix<C64>,
}

impl HermitianOperator {
    /// Wrap `entries`, checking the Hermitian property up to `tol` (max
    /// absolute entry of `A − A†`). The stored matrix is symmetrized.
    pub fn new(entries: DMatrix<C64>, tol: f64) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidInput("operator must be a non-empty square matrix".into()));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite operator entry".into()));
        }
        let adj = entries.adjoint();
        let skew = (&entries - &adj).iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        if skew > tol {
            return Err(Error::InvalidInput(format!("operator is not Hermitian (skew {skew:e})")));
        }
        Ok(Self { entries: (&entries + adj) * C64::new(0.5, 0.0) })
    }

    pub fn identity(d: usize) -> Self {
        Self { entries: DMatrix::identity(d, d) }
    }

    pub fn zero(d: usize) -> Self {
        Self { entries: DMatrix::zeros(d, d) }
    }

    /// Rank-one projector onto the normalized `psi`.
    pub fn projector(psi: &[C64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        let n = v.norm();
        if psi.is_empty() || !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidInput("state vector must be non-zero and finite".into()));
        }
        let v = v / C64::new(n, 0.0);
        Ok(Self { entries: &v * v.adjoint() })
    }

    /// Qubit density operator `(𝟙 + r·σ)/2`.
    pub fn qubit_from_bloch(r: [f64; 3]) -> Self {
        let [x, y, z] = r;
        let entries = DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new((1.0 + z) / 2.0, 0.0),
                C64::new(x / 2.0, -y / 2.0),
                C64::new(x / 2.0, y / 2.0),
                C64::new((1.0 - z) / 2.0, 0.0),
            ],
        );
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    /// Hilbert–Schmidt inner product `Tr[A B]` (real for Hermitian pairs).
    pub fn hs_inner(&self, other: &HermitianOperator) -> f64 {
        self.entries
            .iter()
            .zip(other.entries.transpose().iter())
            .map(|(a, b)| (a * b).re)
            .sum()
    }

    /// `Tr[ρ²]`.
    pub fn purity(&self) -> f64 {
        self.hs_inner(self)
    }
}

/// JSON form of a density matrix: `{"d": int, "re": [[...]], "im": [[...]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityJson {
    pub d: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl DensityJson {
    pub fn to_operator(&self, tol: f64) -> Result<HermitianOperator> {
        let d = self.d;
        let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == d && rows.iter().all(|r| r.len() == d);
        if d == 0 || !shape_ok(&self.re) || !shape_ok(&self.im) {
            return Err(Error::InvalidInput(format!("density matrix entries must be {d}x{d}")));
        }
        let entries = DMatrix::from_fn(d, d, |i, j| C64::new(self.re[i][j], self.im[i][j]));
        HermitianOperator::new(entries, tol)
    }

    pub fn from_operator(op: &HermitianOperator) -> Self {
        let d = op.dim();
        let m = op.entries();
        Self {
            d,
            re: (0..d).map(|i| (0..d).map(|j| m[(i, j)].re).collect()).collect(),
            im: (0..d).map(|i| (0..d).map(|j| m[(i, j)].im).collect()).collect(),
        }
    }
}

/// Orthonormal (Hilbert–Schmidt) traceless Hermitian basis of generalized
/// Gell-Mann matrices: symmetric, antisymmetric, then diagonal elements.
pub fn gell_mann_basis(d: usize) -> Vec<DMatrix<C64>> {
    let mut out = Vec::with_capacity(d * d - 1);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = DMatrix::zeros(d, d);
            m[(j, k)] = C64::new(s, 0.0);
            m[(k, j)] = C64::new(s, 0.0);
            out.push(m);
        }
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = DMatrix::zeros(d, d);
            m[(j, k)] = C64::new(0.0, -s);
            m[(k, j)] = C64::new(0.0, s);
            out.push(m);
        }
    }
    for l in 1..d {
        let lf = l as f64;
        let norm = (lf * (lf + 1.0)).sqrt();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..l {
            m[(i, i)] = C64::new(1.0 / norm, 0.0);
        }
        m[(l, l)] = C64::new(-lf / norm, 0.0);
        out.push(m);
    }
    out
}

/// Concrete isomorphism between Hermitian operators on `ℂ^d` and `ℝ^{d²}`.
#[derive(Clone, Debug)]
pub struct EmbeddingMap {
    d: usize,
    traceless: Vec<DMatrix<C64>>,
    complement: DMatrix<f64>,
    alpha: f64,
}

impl EmbeddingMap {
    /// Gell-Mann basis paired with the Helmert basis of `u_ℓ⊥`.
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(format!("d = {d}, need d >= 2")));
        }
        Self::with_complement(d, complement_basis(d * d))
    }

    /// Gell-Mann basis paired with a caller-supplied orthonormal basis of
    /// `u_ℓ⊥` (an `ℓ × (ℓ−1)` matrix). All results are invariant under this
    /// choice.
    pub fn with_complement(d: usize, complement: DMatrix<f64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(format!("d = {d}, need d >= 2")));
        }
        let l = d * d;
        if complement.shape() != (l, l - 1) {
            return Err(Error::InvalidInput(format!(
                "complement basis must be {l}x{}, got {:?}",
                l - 1,
                complement.shape()
            )));
        }
        let gram_err = (complement.transpose() * &complement - DMatrix::identity(l - 1, l - 1)).amax();
        let u_err = (complement.transpose() * DVector::from_element(l, 1.0)).amax();
        if gram_err > 1e-10 || u_err > 1e-10 {
            return Err(Error::InvalidInput(
                "complement basis must be orthonormal and orthogonal to the unit effect".into(),
            ));
        }
        Ok(Self {
            d,
            traceless: gell_mann_basis(d),
            complement,
            alpha: ((d as f64 + 1.0) / d as f64).sqrt(),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn l(&self) -> usize {
        self.d * self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn complement(&self) -> &DMatrix<f64> {
        &self.complement
    }

    /// `T(A)`: coordinates of the traceless part of `a` pushed into `u_ℓ⊥`.
    fn traceless_image(&self, a: &HermitianOperator) -> DVector<f64> {
        let coords = DVector::from_iterator(
            self.traceless.len(),
            self.traceless.iter().map(|g| {
                // Tr[G A]; G is traceless so the identity part of A drops out.
                g.iter().zip(a.entries().transpose().iter()).map(|(x, y)| (x * y).re).sum::<f64>()
            }),
        );
        &self.complement * coords
    }

    fn check_dim(&self, a: &HermitianOperator) -> Result<()> {
        if a.dim() != self.d {
            return Err(Error::InvalidInput(format!(
                "operator dimension {} does not match embedding dimension {}",
                a.dim(),
                self.d
            )));
        }
        Ok(())
    }

    /// Embed a unit-trace operator as a state vector.
    pub fn embed_density(&self, rho: &HermitianOperator) -> Result<GeomVector> {
        self.embed_density_tol(rho, DEFAULT_TOL)
    }

    pub fn embed_density_tol(&self, rho: &HermitianOperator, tol: f64) -> Result<GeomVector> {
        self.check_dim(rho)?;
        let trace = rho.trace();
        if (trace - 1.0).abs() > tol {
            return Err(Error::NotNormalized { trace });
        }
        let l = self.l();
        let s = ball_center(l) + self.traceless_image(rho) * self.alpha;
        Ok(GeomVector(s))
    }

    /// Embed a (quasi-)effect as a row vector with `m · s = Tr[E ρ]`.
    pub fn embed_effect(&self, e: &HermitianOperator) -> Result<GeomVector> {
        self.check_dim(e)?;
        let l = self.l();
        let scale = e.trace() / self.d as f64;
        let m = DVector::from_element(l, scale) + self.traceless_image(e) / self.alpha;
        Ok(GeomVector(m))
    }
}
