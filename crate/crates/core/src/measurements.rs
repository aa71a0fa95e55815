//! Quasi-measurements: real `n × ℓ` matrices sending states to
//! quasi-probability vectors that sum to one.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pseudoinverse, GeomVector, DEFAULT_TOL};
use crate::linalg;

/// An `n × ℓ` matrix satisfying `Mᵀu_n = M⁺M u_ℓ`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasiMeasurement {
    matrix: DMatrix<f64>,
}

/// JSON form: `{"n": int, "l": int, "matrix": [[...], ...]}` (row-major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiMeasurementJson {
    pub n: usize,
    pub l: usize,
    pub matrix: Vec<Vec<f64>>,
}

impl QuasiMeasurementJson {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.matrix.len() != self.n || self.matrix.iter().any(|r| r.len() != self.l) {
            return Err(Error::InvalidInput(format!("matrix entries must be {}x{}", self.n, self.l)));
        }
        Ok(DMatrix::from_fn(self.n, self.l, |i, j| self.matrix[i][j]))
    }
}

impl Serialize for QuasiMeasurement {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let m = &self.matrix;
        QuasiMeasurementJson {
            n: m.nrows(),
            l: m.ncols(),
            matrix: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for QuasiMeasurement {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = QuasiMeasurementJson::deserialize(de)?;
        let m = raw.to_matrix().map_err(serde::de::Error::custom)?;
        QuasiMeasurement::validate(m, DEFAULT_TOL).map_err(serde::de::Error::custom)
    }
}

/// `‖Mᵀu_n − M⁺M u_ℓ‖`.
pub fn normalization_residual(m: &DMatrix<f64>) -> Result<f64> {
    let (n, l) = m.shape();
    let pinv = pseudoinverse(m, DEFAULT_TOL)?;
    let un = DVector::from_element(n, 1.0);
    let ul = DVector::from_element(l, 1.0);
    Ok((m.transpose() * un - pinv * m * ul).norm())
}

impl QuasiMeasurement {
    /// Wrap `matrix` if it satisfies the normalization identity within `tol`.
    pub fn validate(matrix: DMatrix<f64>, tol: f64) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidDimension("quasi-measurement needs n, l >= 1".into()));
        }
        let residual = normalization_residual(&matrix)?;
        if residual > tol {
            return Err(Error::NotAQuasiMeasurement { residual });
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn identity(l: usize) -> Self {
        Self { matrix: DMatrix::identity(l, l) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Number of outcomes.
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Dimension of the state space.
    pub fn l(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn pseudoinverse(&self) -> DMatrix<f64> {
        pseudoinverse(&self.matrix, DEFAULT_TOL).expect("validated matrices are finite")
    }

    /// Born rule `p = M s`. Negative entries are returned as they are.
    pub fn apply(&self, s: &GeomVector, tol: f64) -> Result<GeomVector> {
        if s.len() != self.l() {
            return Err(Error::InvalidInput(format!("state of length {} for l = {}", s.len(), self.l())));
        }
        if !s.is_state(tol) {
            return Err(Error::InvalidState { residual: (s.sum() - 1.0).abs() });
        }
        Ok(GeomVector::from(&self.matrix * s.as_vector()))
    }

    /// `‖M⁺M − 𝟙_ℓ‖_F ≤ tol`.
    pub fn is_informationally_complete(&self, tol: f64) -> bool {
        if self.n() < self.l() {
            return false;
        }
        let l = self.l();
        (self.pseudoinverse() * &self.matrix - DMatrix::identity(l, l)).norm() <= tol
    }

    /// `det MᵀM`, computed as the product of squared singular values.
    pub fn range_volume_sq(&self) -> Result<f64> {
        if self.n() < self.l() || linalg::rank(&self.matrix, DEFAULT_TOL) < self.l() {
            return Err(Error::DegenerateRange);
        }
        Ok(linalg::gram_determinant(&self.matrix))
    }

    /// Closure of quasi-measurements under pseudoinversion:
    /// `‖(M⁺)ᵀu_ℓ − MM⁺u_n‖ ≤ tol`.
    pub fn pseudoinverse_closure_check(&self, tol: f64) -> bool {
        self.pseudoinverse_closure_residual() <= tol
    }

    pub fn pseudoinverse_closure_residual(&self) -> f64 {
        let pinv = self.pseudoinverse();
        let un = DVector::from_element(self.n(), 1.0);
        let ul = DVector::from_element(self.l(), 1.0);
        (pinv.transpose() * ul - &self.matrix * &pinv * un).norm()
    }

    /// `M⁺` as a quasi-measurement in its own right.
    pub fn pseudoinverse_measurement(&self, tol: f64) -> Result<QuasiMeasurement> {
        QuasiMeasurement::validate(self.pseudoinverse(), tol)
    }

    /// The product `M L`.
    pub fn compose(&self, inner: &QuasiMeasurement) -> Result<QuasiMeasurement> {
        if self.l() != inner.n() {
            return Err(Error::InvalidInput(format!(
                "cannot compose {}x{} with {}x{}",
                self.n(),
                self.l(),
                inner.n(),
                inner.l()
            )));
        }
        Ok(Self { matrix: &self.matrix * &inner.matrix })
    }
}

/// Check `det((ML)ᵀML) = det(MᵀM) det(LᵀL)` to relative tolerance `tol`.
pub fn det_factorization_check(m: &QuasiMeasurement, l: &QuasiMeasurement, tol: f64) -> Result<bool> {
    Ok(det_factorization_residual(m, l)? <= tol)
}

/// Relative residual of the determinant factorization.
pub fn det_factorization_residual(m: &QuasiMeasurement, l: &QuasiMeasurement) -> Result<f64> {
    if l.n() != l.l() || m.l() != l.n() {
        return Err(Error::InvalidInput(format!(
            "need n x l and l x l factors, got {}x{} and {}x{}",
            m.n(),
            m.l(),
            l.n(),
            l.l()
        )));
    }
    let lhs = linalg::gram_determinant(&(m.matrix() * l.matrix()));
    let rhs = m.range_volume_sq()? * l.range_volume_sq()?;
    Ok((lhs - rhs).abs() / rhs.abs())
}

/// Seeded random informationally complete quasi-measurement
/// `M = u_n u_ℓᵀ/n + A` with Gaussian `A` projected to `Aᵀu_n = 0`.
pub fn random_ic_quasi_measurement(n: usize, l: usize, seed: u64) -> Result<QuasiMeasurement> {
    if l < 2 || n < l {
        return Err(Error::InvalidDimension(format!("need n >= l >= 2, got n = {n}, l = {l}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut a = DMatrix::<f64>::from_fn(n, l, |_, _| StandardNormal.sample(&mut rng));
        for mut col in a.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        let matrix = DMatrix::from_element(n, l, 1.0 / n as f64) + a;
        let m = QuasiMeasurement { matrix };
        if m.is_informationally_complete(DEFAULT_TOL) {
            return Ok(m);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qm(n: usize, l: usize, rows: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(n, l, rows)
    }

    #[test]
    fn validate_examples() {
        assert!(QuasiMeasurement::validate(DMatrix::identity(3, 3), DEFAULT_TOL).is_ok());
        let m = QuasiMeasurement::validate(qm(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]), DEFAULT_TOL).unwrap();
        assert_eq!((m.n(), m.l()), (3, 2));
        match QuasiMeasurement::validate(DMatrix::identity(3, 3) * 2.0, DEFAULT_TOL) {
            Err(Error::NotAQuasiMeasurement { residual }) => assert!((residual - 3f64.sqrt()).abs() < 1e-12),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn apply_examples() {
        let id = QuasiMeasurement::identity(3);
        let e1 = GeomVector::basis(3, 0);
        assert_eq!(id.apply(&e1, DEFAULT_TOL).unwrap(), e1);

        let m = random_ic_quasi_measurement(5, 3, 1).unwrap();
        let p = m.apply(&GeomVector::new(vec![1.0 / 3.0; 3]).unwrap(), DEFAULT_TOL).unwrap();
        assert!((p.sum() - 1.0).abs() < 1e-12);

        let m = QuasiMeasurement::validate(qm(3, 2, &[0.5, 0.5, 0.5, 0.5, 0.0, 0.0]), DEFAULT_TOL).unwrap();
        let p = m.apply(&GeomVector::basis(2, 0), DEFAULT_TOL).unwrap();
        assert_eq!(p.entries(), &[0.5, 0.5, 0.0]);

        let off = GeomVector::new(vec![0.2, 0.2]).unwrap();
        assert!(matches!(m.apply(&off, DEFAULT_TOL), Err(Error::InvalidState { .. })));
    }

    #[test]
    fn ic_examples() {
        assert!(QuasiMeasurement::identity(4).is_informationally_complete(DEFAULT_TOL));
        let wide = QuasiMeasurement::from_matrix_unchecked(DMatrix::from_element(3, 4, 0.25));
        assert!(!wide.is_informationally_complete(DEFAULT_TOL));
        let tall = QuasiMeasurement::validate(qm(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]), DEFAULT_TOL).unwrap();
        assert!(tall.is_informationally_complete(DEFAULT_TOL));
        // rank-deficient but normalized
        let flat = QuasiMeasurement::validate(qm(2, 2, &[0.5, 0.5, 0.5, 0.5]), DEFAULT_TOL).unwrap();
        assert!(!flat.is_informationally_complete(DEFAULT_TOL));
        assert!(matches!(flat.range_volume_sq(), Err(Error::DegenerateRange)));
    }

    #[test]
    fn range_volume_examples() {
        let o = crate::designs::random_stabilizing_orthogonal(4, 9).unwrap();
        let m = QuasiMeasurement::validate(o, DEFAULT_TOL).unwrap();
        assert!((m.range_volume_sq().unwrap() - 1.0).abs() < 1e-12);

        let m = QuasiMeasurement::validate(
            qm(3, 3, &[0.5, 0.5, 0.0, 0.5, 0.0, 0.5, 0.0, 0.5, 0.5]),
            DEFAULT_TOL,
        )
        .unwrap();
        // 3x3 determinant is -1/4 by cofactor expansion
        assert!((m.range_volume_sq().unwrap() - 1.0 / 16.0).abs() < 1e-15);

        // isometry [1 0; 0 1; 0 0]
        let v = QuasiMeasurement::validate(qm(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]), DEFAULT_TOL).unwrap();
        assert!((v.range_volume_sq().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closure_examples() {
        assert!(QuasiMeasurement::identity(3).pseudoinverse_closure_check(DEFAULT_TOL));
        let p = qm(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let p = QuasiMeasurement::validate(p, DEFAULT_TOL).unwrap();
        assert!(p.pseudoinverse_closure_check(DEFAULT_TOL));
        assert!(p.pseudoinverse_measurement(DEFAULT_TOL).is_ok());
    }

    #[test]
    fn det_factorization_examples() {
        let id = QuasiMeasurement::identity(3);
        assert!(det_factorization_check(&id, &id, 1e-12).unwrap());

        let o = QuasiMeasurement::validate(crate::designs::random_stabilizing_orthogonal(3, 1).unwrap(), DEFAULT_TOL).unwrap();
        let l = random_ic_quasi_measurement(3, 3, 2).unwrap();
        let lhs = crate::linalg::gram_determinant(&(o.matrix() * l.matrix()));
        assert!((lhs - l.range_volume_sq().unwrap()).abs() <= 1e-12 * lhs);

        let m = random_ic_quasi_measurement(5, 3, 3).unwrap();
        assert!(det_factorization_check(&m, &l, 1e-10).unwrap());
        assert!(det_factorization_check(&m, &m, 1e-10).is_err());
    }

    #[test]
    fn random_generator_contract() {
        for seed in 0..20 {
            let m = random_ic_quasi_measurement(6, 4, seed).unwrap();
            let ut = m.matrix().transpose() * DVector::from_element(6, 1.0);
            assert!((ut - DVector::from_element(4, 1.0)).amax() < 1e-12);
            assert!(m.is_informationally_complete(DEFAULT_TOL));
        }
        assert_eq!(random_ic_quasi_measurement(4, 3, 5).unwrap(), random_ic_quasi_measurement(4, 3, 5).unwrap());
        assert!(matches!(random_ic_quasi_measurement(2, 3, 0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let m = random_ic_quasi_measurement(4, 3, 12).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: QuasiMeasurement = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"n": 2, "l": 2, "matrix": [[2.0, 0.0], [0.0, 2.0]]}"#;
        assert!(serde_json::from_str::<QuasiMeasurement>(bad).is_err());
    }
}
