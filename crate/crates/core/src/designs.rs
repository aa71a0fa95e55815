//! Weighted state sets and their certification as spherical 2-designs.
//!
//! A weighted set of pure states is a 2-design when its frame operator
//! `Σ wᵢ sᵢ⊗sᵢ` equals the Haar average of `s⊗s` over the orthogonal
//! group fixing `û_ℓ`, which is `𝟙_ℓ/ℓ`. Certification uses that closed
//! form; [`haar_average_estimate`] keeps the integral as a Monte-Carlo
//! cross-check.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{complement_basis, pseudoinverse, GeomVector, DEFAULT_TOL};
use crate::linalg;

/// Tolerance on the weight total.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Weighted points on the state hyperplane.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedStateSet {
    l: usize,
    points: Vec<GeomVector>,
    weights: Vec<f64>,
}

/// Unvalidated JSON form `{"l": int, "points": [[...]], "weights": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedStateSetJson {
    pub l: usize,
    pub points: Vec<GeomVector>,
    pub weights: Vec<f64>,
}

impl WeightedStateSetJson {
    pub fn validate(self, tol: f64) -> Result<WeightedStateSet> {
        WeightedStateSet::new(self.l, self.points, self.weights, tol)
    }
}

impl<'de> Deserialize<'de> for WeightedStateSet {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        WeightedStateSetJson::deserialize(de)?.validate(DEFAULT_TOL).map_err(serde::de::Error::custom)
    }
}

impl WeightedStateSet {
    /// Validate and wrap. Points must have length `l` and lie on the
    /// hyperplane within `tol`; weights must be non-negative and sum to one.
    pub fn new(l: usize, points: Vec<GeomVector>, weights: Vec<f64>, tol: f64) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidDimension(format!("l = {l}, need l >= 2")));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| p.len() != l) {
            return Err(Error::InvalidInput(format!("point of length {} in a set with l = {l}", p.len())));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
        }
        if !points.is_empty() {
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
            }
        }
        if let Some(p) = points.iter().find(|p| !p.is_state(tol)) {
            return Err(Error::InvalidState { residual: (p.sum() - 1.0).abs() });
        }
        Ok(Self { l, points, weights })
    }

    /// Uniform weights over `points`.
    pub fn uniform(l: usize, points: Vec<GeomVector>, tol: f64) -> Result<Self> {
        let n = points.len();
        let weights = vec![1.0 / n.max(1) as f64; n];
        Self::new(l, points, weights, tol)
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn points(&self) -> &[GeomVector] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Convex mixture `t·self + (1−t)·other` as a single set.
    pub fn mix(&self, other: &WeightedStateSet, t: f64) -> Result<Self> {
        if self.l != other.l {
            return Err(Error::InvalidInput("cannot mix sets of different dimension".into()));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidInput(format!("mixing parameter {t} outside [0, 1]")));
        }
        let points = self.points.iter().chain(&other.points).cloned().collect();
        let weights = self
            .weights
            .iter()
            .map(|w| w * t)
            .chain(other.weights.iter().map(|w| w * (1.0 - t)))
            .collect();
        Self::new(self.l, points, weights, f64::INFINITY)
    }
}

/// Outcome of a design check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignCertificate {
    pub is_design: bool,
    /// `‖Σ wᵢ sᵢ⊗sᵢ − 𝟙/ℓ‖_op`, or the off-sphere deviation when the
    /// candidate points are not pure.
    pub frame_deviation: f64,
    #[serde(rename = "tol")]
    pub tol_used: f64,
}

impl DesignCertificate {
    pub fn new(frame_deviation: f64, tol: f64) -> Self {
        Self { is_design: frame_deviation <= tol, frame_deviation, tol_used: tol }
    }

    pub(crate) fn rejected(deviation: f64, tol: f64) -> Self {
        Self { is_design: false, frame_deviation: deviation, tol_used: tol }
    }
}

/// `Σ wᵢ sᵢ⊗sᵢ`.
pub fn frame_operator(set: &WeightedStateSet) -> Result<DMatrix<f64>> {
    if set.is_empty() {
        return Err(Error::InvalidInput("frame operator of an empty set".into()));
    }
    let l = set.l();
    let mut f = DMatrix::zeros(l, l);
    for (p, &w) in set.points.iter().zip(&set.weights) {
        let v = p.as_vector();
        f.ger(w, v, v, 1.0);
    }
    Ok(f)
}

/// Operator-norm distance of the frame operator from `𝟙/ℓ`.
pub fn frame_deviation(set: &WeightedStateSet) -> Result<f64> {
    let l = set.l();
    let f = frame_operator(set)?;
    Ok(linalg::sym_op_norm(&(f - DMatrix::identity(l, l) / l as f64)))
}

/// Certify `set` as a spherical 2-design at tolerance `tol`.
pub fn is_two_design(set: &WeightedStateSet, tol: f64) -> Result<DesignCertificate> {
    if let Some(p) = set.points.iter().find(|p| (p.norm_squared() - 1.0).abs() > tol) {
        return Err(Error::NotPureState { deviation: (p.norm_squared() - 1.0).abs() });
    }
    Ok(DesignCertificate::new(frame_deviation(set)?, tol))
}

/// The regular simplex: standard basis of `ℝ^ℓ` with uniform weights.
pub fn regular_simplex(l: usize) -> Result<WeightedStateSet> {
    if l < 2 {
        return Err(Error::InvalidDimension(format!("l = {l}, need l >= 2")));
    }
    let points = (0..l).map(|i| GeomVector::basis(l, i)).collect();
    WeightedStateSet::uniform(l, points, DEFAULT_TOL)
}

/// Haar-distributed element of `O(k)`, via QR of a Gaussian matrix with
/// the sign of `diag(R)` absorbed into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(k: usize, rng: &mut R) -> DMatrix<f64> {
    if k == 0 {
        return DMatrix::zeros(0, 0);
    }
    let g = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Haar-distributed orthogonal matrix on `ℝ^ℓ` fixing `û_ℓ`, drawn from `rng`.
pub fn stabilizing_orthogonal_using<R: Rng + ?Sized>(l: usize, rng: &mut R) -> DMatrix<f64> {
    let h = complement_basis(l);
    let r = haar_orthogonal(l - 1, rng);
    let u_hat = DVector::from_element(l, 1.0 / (l as f64).sqrt());
    &u_hat * u_hat.transpose() + &h * r * h.transpose()
}

/// Seeded Haar draw from the subgroup of `O(ℓ)` fixing `û_ℓ`.
pub fn random_stabilizing_orthogonal(l: usize, seed: u64) -> Result<DMatrix<f64>> {
    if l < 2 {
        return Err(Error::InvalidDimension(format!("l = {l}, need l >= 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(stabilizing_orthogonal_using(l, &mut rng))
}

/// `‖O û − û‖` for a square `O`.
pub fn stabilizer_residual(o: &DMatrix<f64>) -> f64 {
    let l = o.nrows();
    let u = DVector::from_element(l, 1.0 / (l as f64).sqrt());
    (o * &u - &u).norm()
}

/// Map every point through a `û`-stabilizing orthogonal matrix.
pub fn rotate_set(set: &WeightedStateSet, o: &DMatrix<f64>, tol: f64) -> Result<WeightedStateSet> {
    let l = set.l();
    if o.shape() != (l, l) {
        return Err(Error::InvalidInput(format!("rotation must be {l}x{l}")));
    }
    let residual = stabilizer_residual(o).max((o.transpose() * o - DMatrix::identity(l, l)).amax());
    if residual > tol {
        return Err(Error::InvalidRotation { residual });
    }
    let points = set.points.iter().map(|p| GeomVector::from(o * p.as_vector())).collect();
    WeightedStateSet::new(l, points, set.weights.clone(), f64::INFINITY)
}

/// Monte-Carlo estimate of `∫ O (s⊗s) Oᵀ dO` over the `û`-stabilizer.
pub fn haar_average_estimate(s: &GeomVector, samples: usize, seed: u64) -> Result<DMatrix<f64>> {
    if !s.is_pure_state(DEFAULT_TOL) {
        return Err(Error::NotPureState { deviation: (s.norm_squared() - 1.0).abs().max((s.sum() - 1.0).abs()) });
    }
    if samples == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let l = s.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = DMatrix::zeros(l, l);
    for _ in 0..samples {
        let o = stabilizing_orthogonal_using(l, &mut rng);
        let v = o * s.as_vector();
        acc.ger(1.0, &v, &v, 1.0);
    }
    Ok(acc / samples as f64)
}

fn vectorize_symmetric(m: &DMatrix<f64>) -> DVector<f64> {
    let l = m.nrows();
    let mut out = Vec::with_capacity(l * (l + 1) / 2);
    for i in 0..l {
        out.push(m[(i, i)]);
        for j in (i + 1)..l {
            out.push(m[(i, j)] * std::f64::consts::SQRT_2);
        }
    }
    DVector::from_vec(out)
}

/// Non-negative least squares (Lawson–Hanson).
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-14 * a.amax().max(1.0) * b.amax().max(1.0);

    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
        let mut ap = DMatrix::zeros(a.nrows(), idx.len());
        for (c, &i) in idx.iter().enumerate() {
            ap.set_column(c, &a.column(i));
        }
        let zp = pseudoinverse(&ap, 1e-14).map(|p| p * b).unwrap_or_else(|_| DVector::zeros(idx.len()));
        let mut z = DVector::zeros(n);
        for (c, &i) in idx.iter().enumerate() {
            z[i] = zp[c];
        }
        z
    };

    for _ in 0..(3 * n + 10) {
        let grad = a.transpose() * (b - a * &x);
        let next = (0..n).filter(|&i| !passive[i]).max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let Some(j) = next else { break };
        if grad[j] <= tol {
            break;
        }
        passive[j] = true;
        loop {
            let z = solve_passive(&passive);
            let infeasible: Vec<usize> = (0..n).filter(|&i| passive[i] && z[i] <= 0.0).collect();
            if infeasible.is_empty() {
                x = z;
                break;
            }
            let alpha = infeasible
                .iter()
                .map(|&i| x[i] / (x[i] - z[i]))
                .fold(f64::INFINITY, f64::min);
            x += (z - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// Search the weight simplex for the weighting of `points` whose frame
/// operator is closest (Frobenius) to `𝟙/ℓ`. Returns the normalized
/// weights and the resulting operator-norm deviation.
pub fn fit_design_weights(l: usize, points: &[GeomVector]) -> Result<(Vec<f64>, f64)> {
    if points.is_empty() {
        return Err(Error::InvalidInput("no candidate points".into()));
    }
    let mut a = DMatrix::zeros(l * (l + 1) / 2, points.len());
    for (j, p) in points.iter().enumerate() {
        let v = p.as_vector();
        a.set_column(j, &vectorize_symmetric(&(v * v.transpose())));
    }
    let b = vectorize_symmetric(&(DMatrix::identity(l, l) / l as f64));
    let w = nnls(&a, &b);
    let total = w.sum();
    if !(total > 0.0) {
        return Ok((vec![0.0; points.len()], f64::INFINITY));
    }
    let weights: Vec<f64> = w.iter().map(|x| x / total).collect();
    let set = WeightedStateSet::new(l, points.to_vec(), weights.clone(), f64::INFINITY)?;
    Ok((weights, frame_deviation(&set)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(l: usize, pts: &[&[f64]], w: &[f64]) -> WeightedStateSet {
        let points = pts.iter().map(|p| GeomVector::new(p.to_vec()).unwrap()).collect();
        WeightedStateSet::new(l, points, w.to_vec(), DEFAULT_TOL).unwrap()
    }

    #[test]
    fn frame_operator_examples() {
        let s = regular_simplex(3).unwrap();
        let f = frame_operator(&s).unwrap();
        assert!((f - DMatrix::identity(3, 3) / 3.0).amax() < 1e-15);

        let single = set(2, &[&[1.0, 0.0]], &[1.0]);
        let f = frame_operator(&single).unwrap();
        assert_eq!(f, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));

        let two = set(2, &[&[1.0, 0.0], &[0.0, 1.0]], &[0.5, 0.5]);
        assert_eq!(frame_operator(&two).unwrap(), DMatrix::identity(2, 2) * 0.5);

        let empty = WeightedStateSet::new(3, vec![], vec![], DEFAULT_TOL).unwrap();
        assert!(matches!(frame_operator(&empty), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn design_examples() {
        let cert = is_two_design(&regular_simplex(4).unwrap(), DEFAULT_TOL).unwrap();
        assert!(cert.is_design && cert.frame_deviation <= 1e-12);

        let non = set(3, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]], &[0.5, 0.5]);
        let cert = is_two_design(&non, DEFAULT_TOL).unwrap();
        assert!(!cert.is_design);
        // diag(1/2, 1/2, 0) - 1/3
        assert!((cert.frame_deviation - 1.0 / 3.0).abs() < 1e-14);

        let off = set(2, &[&[0.5, 0.5]], &[1.0]);
        assert!(matches!(is_two_design(&off, DEFAULT_TOL), Err(Error::NotPureState { .. })));
    }

    #[test]
    fn simplex_examples() {
        let s = regular_simplex(2).unwrap();
        assert_eq!(s.points()[0].entries(), &[1.0, 0.0]);
        assert_eq!(s.points()[1].entries(), &[0.0, 1.0]);
        assert_eq!(s.weights(), &[0.5, 0.5]);
        let s4 = regular_simplex(4).unwrap();
        for (i, a) in s4.points().iter().enumerate() {
            for b in &s4.points()[i + 1..] {
                assert_eq!(a.dot(b), 0.0);
            }
        }
        let f = frame_operator(&regular_simplex(5).unwrap()).unwrap();
        assert!((f - DMatrix::identity(5, 5) / 5.0).amax() < 1e-15);
        assert!(regular_simplex(1).is_err());
    }

    #[test]
    fn stabilizing_orthogonal_properties() {
        for l in 2..7 {
            for seed in 0..5 {
                let o = random_stabilizing_orthogonal(l, seed).unwrap();
                assert!((o.transpose() * &o - DMatrix::identity(l, l)).amax() < 1e-12);
                let u = DVector::from_element(l, 1.0);
                assert!((&o * &u - &u).norm() <= 1e-12);
                let det = o.determinant();
                assert!((det.abs() - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(random_stabilizing_orthogonal(3, 7).unwrap(), random_stabilizing_orthogonal(3, 7).unwrap());
    }

    #[test]
    fn l2_stabilizer_has_two_elements() {
        let id = DMatrix::<f64>::identity(2, 2);
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let mut seen = [false, false];
        for seed in 0..40 {
            let o = random_stabilizing_orthogonal(2, seed).unwrap();
            if (&o - &id).amax() < 1e-12 {
                seen[0] = true;
            } else if (&o - &swap).amax() < 1e-12 {
                seen[1] = true;
            } else {
                panic!("unexpected element {o}");
            }
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn rotate_set_examples() {
        let s = regular_simplex(4).unwrap();
        let same = rotate_set(&s, &DMatrix::identity(4, 4), DEFAULT_TOL).unwrap();
        assert_eq!(same, s);

        let o = random_stabilizing_orthogonal(4, 3).unwrap();
        let rotated = rotate_set(&s, &o, DEFAULT_TOL).unwrap();
        assert!(is_two_design(&rotated, DEFAULT_TOL).unwrap().is_design);

        let non = set(3, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]], &[0.5, 0.5]);
        let o3 = random_stabilizing_orthogonal(3, 11).unwrap();
        let before = is_two_design(&non, DEFAULT_TOL).unwrap();
        let after = is_two_design(&rotate_set(&non, &o3, DEFAULT_TOL).unwrap(), DEFAULT_TOL).unwrap();
        assert!(!after.is_design);
        assert!((before.frame_deviation - after.frame_deviation).abs() < 1e-12);

        // flipping one coordinate moves u-hat
        let mut flip = DMatrix::identity(4, 4);
        flip[(0, 0)] = -1.0;
        assert!(matches!(rotate_set(&s, &flip, DEFAULT_TOL), Err(Error::InvalidRotation { .. })));
    }

    #[test]
    fn haar_estimate_single_sample_and_trace() {
        let s = GeomVector::basis(3, 0);
        let est = haar_average_estimate(&s, 1, 5).unwrap();
        let o = random_stabilizing_orthogonal(3, 5).unwrap();
        let v = &o * s.as_vector();
        assert!((est - &v * v.transpose()).amax() < 1e-14);
        for n in [1, 7, 100] {
            let est = haar_average_estimate(&s, n, 1).unwrap();
            assert!((est.trace() - 1.0).abs() < 1e-12);
        }
        assert!(haar_average_estimate(&GeomVector::new(vec![0.5, 0.5]).unwrap(), 10, 0).is_err());
        assert!(haar_average_estimate(&s, 0, 0).is_err());
    }

    #[test]
    fn weight_fit_finds_simplex_inside_larger_set() {
        // simplex points plus an extra pure point that should get zero weight
        let mut pts: Vec<GeomVector> = regular_simplex(3).unwrap().points().to_vec();
        let o = random_stabilizing_orthogonal(3, 2).unwrap();
        pts.push(GeomVector::from(&o * pts[0].as_vector()));
        let (w, dev) = fit_design_weights(3, &pts).unwrap();
        assert!(dev < 1e-10, "deviation {dev}");
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_set_validation() {
        let p = GeomVector::basis(2, 0);
        assert!(WeightedStateSet::new(2, vec![p.clone()], vec![0.5], DEFAULT_TOL).is_err());
        assert!(WeightedStateSet::new(2, vec![p.clone()], vec![1.0, 0.0], DEFAULT_TOL).is_err());
        assert!(WeightedStateSet::new(3, vec![p.clone()], vec![1.0], DEFAULT_TOL).is_err());
        let off = GeomVector::new(vec![0.3, 0.3]).unwrap();
        assert!(matches!(
            WeightedStateSet::new(2, vec![off], vec![1.0], DEFAULT_TOL),
            Err(Error::InvalidState { .. })
        ));
        let json = r#"{"l": 2, "points": [[1.0, 0.0], [0.0, 1.0]], "weights": [0.5, 0.5]}"#;
        let s: WeightedStateSet = serde_json::from_str(json).unwrap();
        assert_eq!(s, regular_simplex(2).unwrap());
        let bad = r#"{"l": 2, "points": [[1.0, 0.0]], "weights": [0.7]}"#;
        assert!(serde_json::from_str::<WeightedStateSet>(bad).is_err());
    }
}
