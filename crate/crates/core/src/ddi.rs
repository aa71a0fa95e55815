//! Data-driven inference on the ball.
//!
//! Given observed quasi-probability vectors `𝒫 ⊂ ℝⁿ` spanning an
//! `ℓ`-dimensional subspace, the inference map returns the consistent
//! quasi-measurements `M` (with `Mᵀu_n = u_ℓ` and `𝒫 ⊆ M𝔹`) of minimum
//! `det MᵀM`. Every feasible `M` sends the center of `𝔹` to a point of the
//! affine slice `span(𝒫) ∩ {u_n · p = 1}` and the tangent ball to an
//! ellipsoid in it, and `det MᵀM` is a fixed multiple of the squared
//! `(ℓ−1)`-volume of that ellipsoid. The problem is therefore the minimum
//! volume enclosing ellipsoid of the cloud inside the slice, which
//! [`mvee`] solves with a Khachiyan-type barycentric ascent (with away
//! steps) on lifted points.
//!
//! The optimum is an orbit `{M·O}` over orthogonal `O` fixing `û_ℓ`. We
//! return the representative whose tangent block is symmetric positive
//! definite with respect to a fixed chart pairing: the Helmert basis of
//! `u_ℓ⊥` on the state side and [`tangent_chart`] on the outcome side.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::designs::{
    fit_design_weights, frame_deviation, haar_orthogonal, is_two_design, DesignCertificate,
    WeightedStateSet,
};
use crate::error::{Error, Result};
use crate::geometry::{ball_center, ball_membership, ball_radius, complement_basis, GeomVector, DEFAULT_TOL};
use crate::linalg;
use crate::measurements::QuasiMeasurement;

/// Default relative optimality gap for the ellipsoid solver.
pub const DEFAULT_EPS: f64 = 1e-9;
/// Default iteration cap for the ellipsoid solver.
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Knobs shared by the inference routines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DdiOptions {
    pub eps: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for DdiOptions {
    fn default() -> Self {
        Self { eps: DEFAULT_EPS, max_iter: DEFAULT_MAX_ITER, tol: DEFAULT_TOL }
    }
}

/// JSON form of a cloud: `{"n": int, "distributions": [[...], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudJson {
    pub n: usize,
    pub distributions: Vec<Vec<f64>>,
}

/// A finite set of quasi-probability vectors in `ℝⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityCloud {
    n: usize,
    points: Vec<GeomVector>,
    span: DMatrix<f64>,
}

impl ProbabilityCloud {
    /// Each point must sum to one within `tol`; the points must span at
    /// least two dimensions.
    pub fn new(points: Vec<GeomVector>, tol: f64) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidInput("empty cloud".into()));
        };
        let n = first.len();
        if n < 2 {
            return Err(Error::InvalidDimension(format!("n = {n}, need n >= 2")));
        }
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::InvalidInput(format!("distribution of length {} in a cloud with n = {n}", p.len())));
        }
        if let Some(p) = points.iter().find(|p| !p.is_state(tol)) {
            return Err(Error::InvalidInput(format!("distribution sums to {}, not 1", p.sum())));
        }
        let cols: Vec<DVector<f64>> = points.iter().map(|p| p.as_vector().clone()).collect();
        let span = linalg::column_space(&linalg::columns_to_matrix(n, &cols), DEFAULT_TOL);
        if span.ncols() < 2 {
            return Err(Error::DegenerateInput(format!("cloud spans {} dimension(s), need at least 2", span.ncols())));
        }
        Ok(Self { n, points, span })
    }

    pub fn from_json(json: &CloudJson, tol: f64) -> Result<Self> {
        if let Some(d) = json.distributions.iter().find(|d| d.len() != json.n) {
            return Err(Error::InvalidInput(format!("distribution of length {} but n = {}", d.len(), json.n)));
        }
        let points = json
            .distributions
            .iter()
            .map(|d| GeomVector::new(d.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(points, tol)
    }

    /// Images `M s` of a weighted set's points.
    pub fn from_measurement(m: &QuasiMeasurement, states: &WeightedStateSet, tol: f64) -> Result<Self> {
        let points = states.points().iter().map(|s| m.apply(s, tol)).collect::<Result<Vec<_>>>()?;
        Self::new(points, tol)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> &[GeomVector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Dimension `ℓ` of the linear span.
    pub fn span_dim(&self) -> usize {
        self.span.ncols()
    }

    /// Orthonormal basis of the linear span (`n × ℓ`).
    pub fn span_basis(&self) -> &DMatrix<f64> {
        &self.span
    }

    pub fn centroid(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.n);
        for p in &self.points {
            c += p.as_vector();
        }
        c / self.points.len() as f64
    }
}

/// Orthonormal basis of `span ∩ u_n⊥` for an orthonormal `span` basis
/// (`n × ℓ`), returned as an `n × (ℓ−1)` matrix.
///
/// The basis is obtained by Gram–Schmidt, in order, on the projections of
/// the Helmert columns of `u_n⊥`. When the span is all of `ℝⁿ` this returns
/// the Helmert basis itself.
pub fn tangent_chart(span: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = span.nrows();
    let k = span.ncols().saturating_sub(1);
    let un = DVector::from_element(n, 1.0);
    let pu = span * (span.transpose() * &un);
    let pu_sq = pu.norm_squared();
    if pu_sq < 1e-12 {
        return Err(Error::DegenerateInput("span is orthogonal to the unit vector".into()));
    }
    let proj = span * span.transpose() - &pu * pu.transpose() / pu_sq;
    let cand = proj * complement_basis(n);

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    let orthogonalize = |v: &DVector<f64>, basis: &[DVector<f64>]| {
        let mut r = v.clone();
        for _ in 0..2 {
            for b in basis {
                r -= b * b.dot(&r);
            }
        }
        r
    };
    for col in cand.column_iter() {
        if basis.len() == k {
            break;
        }
        let r = orthogonalize(&col.into_owned(), &basis);
        let norm = r.norm();
        if norm > 1e-3 {
            basis.push(r / norm);
        }
    }
    // pivoted fallback for spans nearly orthogonal to the leading columns
    while basis.len() < k {
        let best = cand
            .column_iter()
            .map(|c| orthogonalize(&c.into_owned(), &basis))
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .expect("n >= 2");
        let norm = best.norm();
        if norm < 1e-12 {
            return Err(Error::DegenerateInput("tangent space is rank deficient".into()));
        }
        basis.push(best / norm);
    }
    Ok(linalg::columns_to_matrix(n, &basis))
}

/// `{c + Q A x : |x| ≤ 1}` with `A = shape^{1/2}`, living in the affine
/// slice through `c` spanned by the orthonormal chart `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid {
    center: GeomVector,
    shape: DMatrix<f64>,
    chart: DMatrix<f64>,
}

impl Ellipsoid {
    pub fn new(center: GeomVector, shape: DMatrix<f64>, chart: DMatrix<f64>) -> Result<Self> {
        let k = chart.ncols();
        if chart.nrows() != center.len() || shape.shape() != (k, k) {
            return Err(Error::InvalidInput("ellipsoid dimensions do not match".into()));
        }
        if (chart.transpose() * &chart - DMatrix::identity(k, k)).amax() > 1e-9 {
            return Err(Error::InvalidInput("ellipsoid chart is not orthonormal".into()));
        }
        if (&shape - shape.transpose()).amax() > 1e-9 * shape.amax().max(1.0) || linalg::spd_inverse(&shape).is_none() {
            return Err(Error::InvalidInput("ellipsoid shape is not symmetric positive definite".into()));
        }
        Ok(Self { center, shape, chart })
    }

    /// `M𝔹` for an informationally complete quasi-measurement `M`, in the
    /// chart [`tangent_chart`] of its range.
    pub fn from_measurement(m: &QuasiMeasurement) -> Result<Self> {
        if !m.is_informationally_complete(DEFAULT_TOL) {
            return Err(Error::PreconditionViolated("measurement is not informationally complete".into()));
        }
        let l = m.l();
        let span = linalg::column_space(m.matrix(), DEFAULT_TOL);
        let chart = tangent_chart(&span)?;
        let center = m.matrix() * ball_center(l);
        let b = chart.transpose() * m.matrix() * complement_basis(l) * ball_radius(l);
        Self::new(GeomVector::from(center), &b * b.transpose(), chart)
    }

    pub fn center(&self) -> &GeomVector {
        &self.center
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn chart(&self) -> &DMatrix<f64> {
        &self.chart
    }

    /// Tangent dimension `ℓ − 1`.
    pub fn dim(&self) -> usize {
        self.chart.ncols()
    }

    /// `shape^{1/2}`, whose columns span the semi-axes.
    pub fn axes(&self) -> DMatrix<f64> {
        linalg::sym_sqrt(&self.shape)
    }

    /// Product of the semi-axis lengths, `sqrt(det shape)`.
    pub fn volume_factor(&self) -> f64 {
        self.shape.determinant().max(0.0).sqrt()
    }

    /// Chart coordinates of `p − c` and the norm of the part of `p − c`
    /// outside the chart.
    fn local(&self, p: &DVector<f64>) -> (DVector<f64>, f64) {
        let d = p - self.center.as_vector();
        let x = self.chart.transpose() * &d;
        let off = (&d - &self.chart * &x).norm();
        (x, off)
    }

    /// `(p − c)ᵀ shape⁻¹ (p − c)` for `p` in the slice; `≤ 1` inside.
    pub fn level(&self, p: &GeomVector) -> f64 {
        let inv = linalg::spd_inverse(&self.shape).expect("validated SPD shape");
        let (x, _) = self.local(p.as_vector());
        x.dot(&(inv * &x))
    }

    pub fn contains(&self, p: &GeomVector, tol: f64) -> bool {
        let (_, off) = self.local(p.as_vector());
        off <= tol * p.as_vector().norm().max(1.0) && self.level(p) <= 1.0 + tol
    }
}

/// Output of [`mvee`]: the ellipsoid together with its dual certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct MveeSolution {
    pub ellipsoid: Ellipsoid,
    /// Barycentric (John) weights on the cloud points.
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// `max(ε₊, ε₋)`: relative excess of the largest lifted leverage over
    /// `ℓ` and relative deficit of the smallest supported one.
    pub gap: f64,
}

/// Minimum-volume enclosing ellipsoid of the cloud inside its affine slice.
///
/// The returned shape is rescaled so that every point lies inside and the
/// outermost point lies on the boundary; without convergence the partial
/// solution is returned inside [`Error::MveeNoConvergence`].
pub fn mvee(cloud: &ProbabilityCloud, eps: f64, max_iter: usize) -> Result<MveeSolution> {
    if !(eps > 0.0) || max_iter == 0 {
        return Err(Error::InvalidInput("need eps > 0 and max_iter >= 1".into()));
    }
    let chart = tangent_chart(cloud.span_basis())?;
    let k = chart.ncols();
    let npts = cloud.len();
    let origin = cloud.centroid();
    let ys: Vec<DVector<f64>> = cloud.points().iter().map(|p| chart.transpose() * (p.as_vector() - &origin)).collect();
    let ymat = linalg::columns_to_matrix(k, &ys);
    if linalg::rank(&ymat, DEFAULT_TOL) < k {
        return Err(Error::DegenerateInput(format!("affine hull of the cloud has dimension < {k}")));
    }

    // lifted points (y, 1)
    let lift = DMatrix::from_fn(k + 1, npts, |i, j| if i < k { ymat[(i, j)] } else { 1.0 });
    let dim = (k + 1) as f64;
    let mut u = vec![1.0 / npts as f64; npts];
    let mut iterations = 0;
    let mut gap;
    loop {
        let mut x = DMatrix::zeros(k + 1, k + 1);
        for (j, &w) in u.iter().enumerate() {
            if w > 0.0 {
                let q = lift.column(j);
                x.ger(w, &q, &q, 1.0);
            }
        }
        let xinv = linalg::spd_inverse(&x)
            .ok_or_else(|| Error::DegenerateInput("lifted moment matrix is singular".into()))?;
        let z = &xinv * &lift;
        let g: Vec<f64> = (0..npts).map(|j| lift.column(j).dot(&z.column(j))).collect();

        let (jp, gmax) = g.iter().copied().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty");
        let (jm, gmin) = g
            .iter()
            .copied()
            .enumerate()
            .filter(|&(j, _)| u[j] > 0.0)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("some positive weight");
        let eps_plus = gmax / dim - 1.0;
        let eps_minus = 1.0 - gmin / dim;
        gap = eps_plus.max(eps_minus).max(0.0);
        if gap <= eps || iterations >= max_iter {
            break;
        }
        iterations += 1;

        if eps_plus >= eps_minus {
            let beta = (gmax - dim) / (dim * (gmax - 1.0));
            u.iter_mut().for_each(|w| *w *= 1.0 - beta);
            u[jp] += beta;
        } else {
            let drop = -u[jm] / (1.0 - u[jm]);
            let beta = if gmin > 1.0 { ((gmin - dim) / (dim * (gmin - 1.0))).max(drop) } else { drop };
            u.iter_mut().for_each(|w| *w *= 1.0 - beta);
            if beta <= drop {
                u[jm] = 0.0;
            } else {
                u[jm] += beta;
            }
        }
    }
    let converged = gap <= eps;

    let mut c = DVector::zeros(k);
    for (y, &w) in ys.iter().zip(&u) {
        c += y * w;
    }
    let mut cov = DMatrix::zeros(k, k);
    for (y, &w) in ys.iter().zip(&u) {
        let d = y - &c;
        cov.ger(w, &d, &d, 1.0);
    }
    let shape0 = cov * k as f64;
    let inv0 = linalg::spd_inverse(&shape0).ok_or_else(|| Error::DegenerateInput("ellipsoid shape is singular".into()))?;
    let rho = ys
        .iter()
        .map(|y| {
            let d = y - &c;
            d.dot(&(&inv0 * &d))
        })
        .fold(0.0_f64, f64::max);
    let shape = shape0 * rho;
    let center = GeomVector::from(origin + &chart * &c);
    let ellipsoid = Ellipsoid::new(center, shape, chart)?;
    let solution = MveeSolution { ellipsoid, weights: u, iterations, gap };
    if converged {
        Ok(solution)
    } else {
        Err(Error::MveeNoConvergence(Box::new(solution)))
    }
}

/// Canonical quasi-measurement `M` with `M𝔹 = E`.
///
/// `M = c u_ℓᵀ + Q (A/r) Pᵀ` with `A = shape^{1/2}`, `Q` the ellipsoid
/// chart, `P` the Helmert basis of `u_ℓ⊥` and `r` the ball radius.
pub fn ellipsoid_to_measurement(e: &Ellipsoid, cloud: &ProbabilityCloud, tol: f64) -> Result<QuasiMeasurement> {
    if let Some(p) = cloud.points().iter().find(|p| !e.contains(p, tol)) {
        return Err(Error::PreconditionViolated(format!(
            "ellipsoid does not enclose the cloud (level {})",
            e.level(p)
        )));
    }
    Ok(ellipsoid_to_measurement_unchecked(e))
}

fn ellipsoid_to_measurement_unchecked(e: &Ellipsoid) -> QuasiMeasurement {
    let l = e.dim() + 1;
    let tangent = e.chart() * (e.axes() / ball_radius(l)) * complement_basis(l).transpose();
    let m = e.center().as_vector() * DVector::from_element(l, 1.0).transpose() + tangent;
    QuasiMeasurement::from_matrix_unchecked(m)
}

/// Text recording the orthogonal gauge freedom of an optimum.
pub fn gauge_note(l: usize) -> String {
    format!(
        "optimum is the orbit {{M O : O orthogonal {l}x{l}, O u = u}} (a copy of O({})); \
         reported M is the representative whose tangent block is symmetric positive definite \
         in the Helmert/tangent-chart pairing",
        l - 1
    )
}

/// Inference result.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DdiResult {
    pub measurement: QuasiMeasurement,
    pub volume_sq: f64,
    /// `M⁺𝒫` with uniform weights.
    pub counter_image: WeightedStateSet,
    pub design_certificate: DesignCertificate,
    /// Weighting of the counter-image used by the certificate.
    pub design_weights: Vec<f64>,
    pub gauge_note: String,
    pub optimality_gap: f64,
    pub iterations: usize,
}

/// Certify that `points` support a spherical 2-design.
///
/// Uniform weights are tried first. Otherwise the weight simplex over the
/// points that are pure within `tol` is searched, starting from the
/// optional `hint` weights and by non-negative least squares on the frame
/// condition. When no point is pure the certificate is negative and its
/// deviation is the smallest off-sphere distance.
pub fn certify_counter_image(l: usize, points: &[GeomVector], hint: Option<&[f64]>, tol: f64) -> Result<(DesignCertificate, Vec<f64>)> {
    let npts = points.len();
    let off: Vec<f64> = points.iter().map(|p| (p.norm_squared() - 1.0).abs()).collect();
    if npts > 0 && off.iter().all(|&d| d <= tol) {
        let uniform = WeightedStateSet::uniform(l, points.to_vec(), f64::INFINITY)?;
        let cert = is_two_design(&uniform, tol)?;
        if cert.is_design {
            return Ok((cert, uniform.weights().to_vec()));
        }
    }
    let pure: Vec<usize> = (0..npts).filter(|&i| off[i] <= tol).collect();
    if pure.is_empty() {
        let dev = off.iter().copied().fold(f64::INFINITY, f64::min);
        return Ok((DesignCertificate::rejected(dev, tol), vec![0.0; npts]));
    }
    let candidates: Vec<GeomVector> = pure.iter().map(|&i| points[i].clone()).collect();
    let mut best: (f64, Vec<f64>) = (f64::INFINITY, vec![]);

    if let Some(h) = hint {
        let sub: Vec<f64> = pure.iter().map(|&i| h[i].max(0.0)).collect();
        let total: f64 = sub.iter().sum();
        if total > 0.0 {
            let w: Vec<f64> = sub.iter().map(|x| x / total).collect();
            let set = WeightedStateSet::new(l, candidates.clone(), w.clone(), f64::INFINITY)?;
            let dev = frame_deviation(&set)?;
            if dev < best.0 {
                best = (dev, w);
            }
        }
    }
    let (w, dev) = fit_design_weights(l, &candidates)?;
    if dev < best.0 {
        best = (dev, w);
    }
    let mut weights = vec![0.0; npts];
    for (&i, w) in pure.iter().zip(&best.1) {
        weights[i] = *w;
    }
    Ok((DesignCertificate::new(best.0, tol), weights))
}

fn counter_image_points(m: &QuasiMeasurement, cloud: &ProbabilityCloud) -> Vec<GeomVector> {
    let pinv = m.pseudoinverse();
    cloud.points().iter().map(|p| GeomVector::from(&pinv * p.as_vector())).collect()
}

fn assemble(
    cloud: &ProbabilityCloud,
    measurement: QuasiMeasurement,
    hint: Option<&[f64]>,
    cert_tol: f64,
    optimality_gap: f64,
    iterations: usize,
) -> Result<DdiResult> {
    let l = measurement.l();
    let volume_sq = measurement.range_volume_sq()?;
    let points = counter_image_points(&measurement, cloud);
    let (design_certificate, design_weights) = certify_counter_image(l, &points, hint, cert_tol)?;
    let counter_image = WeightedStateSet::uniform(l, points, 1e-6)?;
    Ok(DdiResult {
        measurement,
        volume_sq,
        counter_image,
        design_certificate,
        design_weights,
        gauge_note: gauge_note(l),
        optimality_gap,
        iterations,
    })
}

/// Data-driven inference with the ball as the admissible state set.
///
/// The certificate tolerance is `max(tol, 4·gap)`: the ellipsoid's
/// contact points are only pure to within the achieved optimality gap.
pub fn ddi_on_ball(cloud: &ProbabilityCloud, opts: &DdiOptions) -> Result<DdiResult> {
    let (solution, converged) = match mvee(cloud, opts.eps, opts.max_iter) {
        Ok(s) => (s, true),
        Err(Error::MveeNoConvergence(partial)) => (*partial, false),
        Err(e) => return Err(e),
    };
    let m = ellipsoid_to_measurement(&solution.ellipsoid, cloud, opts.tol.max(1e-9))?;
    let cert_tol = opts.tol.max(4.0 * solution.gap);
    let result = assemble(cloud, m, Some(&solution.weights), cert_tol, solution.gap, solution.iterations)?;
    if converged {
        Ok(result)
    } else {
        Err(Error::DdiNoConvergence(Box::new(result)))
    }
}

/// Closed-form inference when the cloud consists of exactly `ℓ` linearly
/// independent distributions: the counter-image is the regular simplex and
/// `M` has the distributions as columns, in input order.
pub fn ddi_closed_form(cloud: &ProbabilityCloud, tol: f64) -> Result<DdiResult> {
    let l = cloud.span_dim();
    if cloud.len() != l {
        return Err(Error::NotClosedFormCase(format!(
            "{} distributions spanning {l} dimensions",
            cloud.len()
        )));
    }
    let cols: Vec<DVector<f64>> = cloud.points().iter().map(|p| p.as_vector().clone()).collect();
    let m = QuasiMeasurement::validate(linalg::columns_to_matrix(cloud.n(), &cols), tol.max(1e-9) * l as f64)?;
    assemble(cloud, m, None, tol, 0.0, 0)
}

/// `𝒫 ⊆ M𝔹`: every `M⁺p` is in the ball and every `p` is in the range of `M`.
pub fn feasibility_check(m: &QuasiMeasurement, cloud: &ProbabilityCloud, tol: f64) -> bool {
    if m.n() != cloud.n() {
        return false;
    }
    let pinv = m.pseudoinverse();
    cloud.points().iter().all(|p| {
        let s = &pinv * p.as_vector();
        let back = m.matrix() * &s;
        (back - p.as_vector()).norm() <= tol * p.as_vector().norm().max(1.0) && ball_membership(&GeomVector::from(s), tol)
    })
}

/// Diagnostics of the lower bound `det MᵀM ≥ 1` for measurements whose
/// range contains a 2-design.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma1Report {
    pub det_mtm: f64,
    /// `Tr[M⁻¹M⁻ᵀ] − ℓ`, non-positive for feasible `M`.
    pub trace_residual: f64,
    pub holds: bool,
}

/// Check `det MᵀM ≥ 1 − tol` for a square invertible `M` with `S ⊆ M𝔹`
/// and `S` a certified 2-design.
pub fn lemma1_bound_check(m: &QuasiMeasurement, design: &WeightedStateSet, tol: f64) -> Result<Lemma1Report> {
    let l = m.l();
    if m.n() != l || design.l() != l {
        return Err(Error::InvalidInput(format!("need an {l}x{l} measurement and a set in R^{l}")));
    }
    let det_mtm = m.range_volume_sq()?;
    let inv = m
        .matrix()
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::PreconditionViolated("measurement is not invertible".into()))?;
    let cert = is_two_design(design, tol)?;
    if !cert.is_design {
        return Err(Error::PreconditionViolated(format!(
            "state set is not a 2-design (deviation {:e})",
            cert.frame_deviation
        )));
    }
    if let Some(s) = design.points().iter().find(|s| !ball_membership(&GeomVector::from(&inv * s.as_vector()), tol)) {
        return Err(Error::PreconditionViolated(format!(
            "state {:?} is outside the range of the measurement",
            s.entries()
        )));
    }
    let trace_residual = (&inv * inv.transpose()).trace() - l as f64;
    Ok(Lemma1Report { det_mtm, trace_residual, holds: det_mtm >= 1.0 - tol })
}

/// Uniform point of `𝔹`, or of its surface when `surface` is set.
pub fn random_ball_point<R: Rng + ?Sized>(l: usize, surface: bool, rng: &mut R) -> GeomVector {
    let k = l - 1;
    let g = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let dir = &g / g.norm();
    let t: f64 = if surface { 1.0 } else { rng.random::<f64>().powf(1.0 / k as f64) };
    GeomVector::from(ball_center(l) + complement_basis(l) * dir * (t * ball_radius(l)))
}

/// A random `ℓ × ℓ` quasi-measurement `M` with `𝒮 ⊆ M𝔹` for the regular
/// simplex `𝒮`: `M = T⁻¹` where the columns of `T` are uniform ball points.
/// Returns `M` and `T` (whose columns are the counter-image of `𝒮`).
pub fn random_feasible_for_simplex<R: Rng + ?Sized>(l: usize, rng: &mut R) -> (QuasiMeasurement, DMatrix<f64>) {
    loop {
        let cols: Vec<DVector<f64>> = (0..l).map(|_| random_ball_point(l, false, rng).into_vector()).collect();
        let t = linalg::columns_to_matrix(l, &cols);
        if linalg::rank(&t, 1e-8) == l {
            if let Some(inv) = t.clone().lu().try_inverse() {
                return (QuasiMeasurement::from_matrix_unchecked(inv), t);
            }
        }
    }
}

/// A random `K` with `K𝔹 ⊇ 𝔹` and `Kᵀu = u`: a shifted, stretched copy of
/// the ball containing the ball.
pub fn random_containing_stretch<R: Rng + ?Sized>(l: usize, rng: &mut R) -> DMatrix<f64> {
    let k = l - 1;
    let r = ball_radius(l);
    let p = complement_basis(l);
    let shift = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal)) * (0.1 * r * rng.random::<f64>());
    let floor = (1.0 + shift.norm() / r) * (1.0 + 1e-6);
    let sigma = DVector::from_fn(k, |_, _| floor + rng.random::<f64>());
    let b = haar_orthogonal(k, rng) * DMatrix::from_diagonal(&sigma) * haar_orthogonal(k, rng);
    let u = DVector::from_element(l, 1.0);
    &u * u.transpose() / l as f64 + &p * b * p.transpose() + (&p * shift) * u.transpose()
}

/// Outcome of the sampled bijection and ordering checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma3Report {
    pub samples: usize,
    pub forward_failures: usize,
    pub backward_failures: usize,
    pub max_det_residual: f64,
}

impl Lemma3Report {
    pub fn passed(&self) -> bool {
        self.forward_failures == 0 && self.backward_failures == 0 && self.max_det_residual <= 1e-8
    }
}

fn is_feasible_measurement(m: &DMatrix<f64>, cloud: &ProbabilityCloud, tol: f64) -> bool {
    match QuasiMeasurement::validate(m.clone(), tol) {
        Ok(q) => q.is_informationally_complete(tol.max(1e-8)) && feasibility_check(&q, cloud, tol),
        Err(_) => false,
    }
}

/// Sampled check that `M` maps `ℳ_𝔹(M⁺𝒫)` onto `ℳ_𝔹(𝒫)` and scales the
/// cost by `det MᵀM`.
pub fn lemma3_bijection_check(m: &QuasiMeasurement, cloud: &ProbabilityCloud, samples: usize, seed: u64) -> Result<Lemma3Report> {
    let tol = 1e-8;
    if m.n() != cloud.n() {
        return Err(Error::InvalidInput("cloud and measurement have different outcome counts".into()));
    }
    if !m.is_informationally_complete(DEFAULT_TOL) {
        return Err(Error::PreconditionViolated("measurement is not informationally complete".into()));
    }
    let l = m.l();
    let pinv = m.pseudoinverse();
    for p in cloud.points() {
        let v = p.as_vector();
        if (m.matrix() * (&pinv * v) - v).norm() > tol * v.norm().max(1.0) {
            return Err(Error::InvalidInput("cloud is not in the range of the measurement".into()));
        }
    }
    if cloud.span_dim() != l {
        return Err(Error::InvalidInput("cloud does not span the range of the measurement".into()));
    }
    let det_m = m.range_volume_sq()?;
    let states = ProbabilityCloud::new(counter_image_points(m, cloud), 1e-6)?;

    // ball around u/l enclosing the counter-image
    let pl = complement_basis(l);
    let reach = states
        .points()
        .iter()
        .map(|s| (pl.transpose() * (s.as_vector() - ball_center(l))).norm())
        .fold(0.0_f64, f64::max);
    let kappa = (reach / ball_radius(l)).max(1e-3) * (1.0 + 1e-9);
    let u = DVector::from_element(l, 1.0);
    let l0 = &u * u.transpose() / l as f64 + &pl * pl.transpose() * kappa;

    // ball inside the slice around the centroid enclosing the cloud
    let chart = tangent_chart(cloud.span_basis())?;
    let centroid = cloud.centroid();
    let spread = cloud.points().iter().map(|p| (p.as_vector() - &centroid).norm()).fold(0.0_f64, f64::max) * (1.0 + 1e-9);
    let k = l - 1;
    let ball_around = Ellipsoid::new(GeomVector::from(centroid), DMatrix::identity(k, k) * (spread * spread), chart)?;
    let n0 = ellipsoid_to_measurement_unchecked(&ball_around).into_matrix();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Lemma3Report { samples, forward_failures: 0, backward_failures: 0, max_det_residual: 0.0 };
    for _ in 0..samples {
        let lmat = &l0 * random_containing_stretch(l, &mut rng);
        let ml = m.matrix() * &lmat;
        if !is_feasible_measurement(&lmat, &states, tol) || !is_feasible_measurement(&ml, cloud, tol) {
            report.forward_failures += 1;
        } else {
            let det_l = linalg::gram_determinant(&lmat);
            let det_ml = linalg::gram_determinant(&ml);
            report.max_det_residual = report.max_det_residual.max((det_ml - det_m * det_l).abs() / (det_m * det_l));
        }

        let nmat = &n0 * random_containing_stretch(l, &mut rng);
        let back = &pinv * &nmat;
        if !is_feasible_measurement(&nmat, cloud, tol) || !is_feasible_measurement(&back, &states, tol) {
            report.backward_failures += 1;
        } else {
            let det_n = linalg::gram_determinant(&nmat);
            let det_back = linalg::gram_determinant(&back);
            report.max_det_residual = report.max_det_residual.max((det_back * det_m - det_n).abs() / det_n);
        }
    }
    Ok(report)
}

/// Configuration of [`theorem_harness`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarnessConfig {
    pub opts: DdiOptions,
    /// Number of feasible non-optimal instances to sample.
    pub perturbations: usize,
    pub seed: u64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self { opts: DdiOptions::default(), perturbations: 20, seed: 0 }
    }
}

/// One feasible, non-optimal measurement sampled by the harness.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationSample {
    /// Uniform-weight frame deviation of its counter-image.
    pub frame_deviation: f64,
    pub certified: bool,
    pub volume_sq: f64,
    /// `volume_sq` minus the optimum.
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarnessReport {
    pub det_m0: f64,
    pub volume_sq: f64,
    /// `|volume_sq − det M₀ᵀM₀| / det M₀ᵀM₀`.
    pub volume_gap_rel: f64,
    pub certificate: DesignCertificate,
    /// Relative disagreement of the closed-form and ellipsoid volumes.
    pub closed_form_gap_rel: Option<f64>,
    pub iterations: usize,
    pub perturbations: Vec<PerturbationSample>,
}

impl HarnessReport {
    /// Smallest volume excess over the sampled non-design instances.
    pub fn min_excess(&self) -> Option<f64> {
        self.perturbations.iter().filter(|p| !p.certified).map(|p| p.excess).reduce(f64::min)
    }
}

/// Counter-image `T` of a feasible competitor: each simplex vertex moved by
/// a Gaussian tangent step of size `scale` and pulled back into the ball.
fn perturbed_simplex<R: Rng + ?Sized>(l: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let p = complement_basis(l);
    let r = ball_radius(l);
    loop {
        let cols: Vec<DVector<f64>> = (0..l)
            .map(|i| {
                let e = DVector::from_fn(l, |j, _| if i == j { 1.0 } else { 0.0 });
                let step = DVector::from_fn(l - 1, |_, _| rng.sample::<f64, _>(StandardNormal)) * scale;
                let mut x = p.transpose() * (e - ball_center(l)) + step;
                let norm = x.norm();
                if norm > r {
                    x *= r / norm;
                }
                ball_center(l) + &p * x
            })
            .collect();
        let t = linalg::columns_to_matrix(l, &cols);
        if linalg::rank(&t, 1e-8) == l {
            return t;
        }
    }
}

/// Round trip `M₀ → 𝒫 = M₀·simplex → ddi_on_ball(𝒫)`, plus sampled
/// feasible competitors `M₀ T⁻¹`. Their counter-images `T` are the simplex
/// moved inside the ball by log-uniform amounts in `[1e-3, 1]`, and so are
/// generically not designs.
pub fn theorem_harness(m0: &QuasiMeasurement, config: &HarnessConfig) -> Result<HarnessReport> {
    if !m0.is_informationally_complete(DEFAULT_TOL) {
        return Err(Error::PreconditionViolated("M0 is not informationally complete".into()));
    }
    let l = m0.l();
    let simplex = crate::designs::regular_simplex(l)?;
    let cloud = ProbabilityCloud::from_measurement(m0, &simplex, 1e-9)?;
    let det_m0 = m0.range_volume_sq()?;
    let result = ddi_on_ball(&cloud, &config.opts)?;
    let volume_gap_rel = (result.volume_sq - det_m0).abs() / det_m0;
    let closed_form_gap_rel = ddi_closed_form(&cloud, config.opts.tol)
        .ok()
        .map(|cf| (cf.volume_sq - result.volume_sq).abs() / result.volume_sq);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut perturbations = Vec::with_capacity(config.perturbations);
    for _ in 0..config.perturbations {
        let scale = 10f64.powf(-3.0 * rng.random::<f64>());
        let t = perturbed_simplex(l, scale, &mut rng);
        let tinv = t.clone().lu().try_inverse().ok_or(Error::DegenerateRange)?;
        let candidate = m0.compose(&QuasiMeasurement::from_matrix_unchecked(tinv))?;
        let points: Vec<GeomVector> = t.column_iter().map(|c| GeomVector::from(c.into_owned())).collect();
        let uniform = WeightedStateSet::uniform(l, points.clone(), 1e-6)?;
        let dev = frame_deviation(&uniform)?;
        let (cert, _) = certify_counter_image(l, &points, None, config.opts.tol)?;
        let volume_sq = candidate.range_volume_sq()?;
        perturbations.push(PerturbationSample {
            frame_deviation: dev,
            certified: cert.is_design,
            volume_sq,
            excess: volume_sq - result.volume_sq,
        });
    }
    Ok(HarnessReport {
        det_m0,
        volume_sq: result.volume_sq,
        volume_gap_rel,
        certificate: result.design_certificate,
        closed_form_gap_rel,
        iterations: result.iterations,
        perturbations,
    })
}
