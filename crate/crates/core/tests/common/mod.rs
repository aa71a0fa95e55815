#![allow(dead_code)]

use ddi_core::geometry::{ball_center, ball_radius, complement_basis, Complex, GeomVector, HermitianOperator};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Density matrix `G G† / Tr[G G†]` with complex Gaussian `G`.
pub fn random_density<R: Rng>(d: usize, rng: &mut R) -> HermitianOperator {
    let g = DMatrix::from_fn(d, d, |_, _| Complex::new(gaussian(rng), gaussian(rng)));
    let rho = &g * g.adjoint();
    let tr = rho.trace().re;
    HermitianOperator::new(rho / Complex::new(tr, 0.0), 1e-12).unwrap()
}

/// Hermitian operator with Gaussian entries (not necessarily positive).
pub fn random_hermitian<R: Rng>(d: usize, rng: &mut R) -> HermitianOperator {
    let g = DMatrix::from_fn(d, d, |_, _| Complex::new(gaussian(rng), gaussian(rng)));
    HermitianOperator::new((&g + g.adjoint()) * Complex::new(0.5, 0.0), 1e-12).unwrap()
}

/// `Tr[A B]` straight from the matrix entries.
pub fn trace_product(a: &HermitianOperator, b: &HermitianOperator) -> f64 {
    let (a, b) = (a.entries(), b.entries());
    let d = a.nrows();
    let mut acc = Complex::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc.re
}

/// Point of the ball at a random direction and radius fraction `t`.
pub fn ball_point<R: Rng>(l: usize, t: f64, rng: &mut R) -> GeomVector {
    let x = DVector::from_fn(l - 1, |_, _| gaussian(rng));
    let x = x.normalize() * (t * ball_radius(l));
    GeomVector::from(ball_center(l) + complement_basis(l) * x)
}

/// Area-minimizing ellipse through the three planar points, found by a
/// nested grid search over the center. Centers admitting an ellipse
/// through the vertices lie in the medial triangle, searched in barycentric
/// coordinates. For a center `c` the ellipse `(x−c)ᵀ S (x−c) = 1` through
/// the points is a 3×3 linear solve for `S`, and its area is
/// `π / sqrt(det S)`. Returns `(center, S)`.
pub fn triangle_ellipse_oracle(pts: &[[f64; 2]; 3]) -> ([f64; 2], [[f64; 2]; 2]) {
    let fit = |c: [f64; 2]| -> Option<(f64, [[f64; 2]; 2])> {
        let mut a = nalgebra::Matrix3::zeros();
        for (r, p) in pts.iter().enumerate() {
            let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
            a[(r, 0)] = dx * dx;
            a[(r, 1)] = 2.0 * dx * dy;
            a[(r, 2)] = dy * dy;
        }
        let s = a.lu().solve(&nalgebra::Vector3::from_element(1.0))?;
        let det = s[0] * s[2] - s[1] * s[1];
        (s[0] > 0.0 && det > 0.0).then(|| (1.0 / det.sqrt(), [[s[0], s[1]], [s[1], s[2]]]))
    };
    let mid = |i: usize, j: usize| [(pts[i][0] + pts[j][0]) / 2.0, (pts[i][1] + pts[j][1]) / 2.0];
    let m = [mid(1, 2), mid(0, 2), mid(0, 1)];
    let at = |a: f64, b: f64| {
        let c = 1.0 - a - b;
        [a * m[0][0] + b * m[1][0] + c * m[2][0], a * m[0][1] + b * m[1][1] + c * m[2][1]]
    };
    let (mut best, mut half) = ([0.5, 0.25], 0.5);
    for _ in 0..60 {
        let mut top = (f64::INFINITY, best);
        for i in 0..=20 {
            for j in 0..=20 {
                let a = best[0] + half * (i as f64 / 10.0 - 1.0);
                let b = best[1] + half * (j as f64 / 10.0 - 1.0);
                if a < 0.0 || b < 0.0 || a + b > 1.0 {
                    continue;
                }
                if let Some((area, _)) = fit(at(a, b)) {
                    if area < top.0 {
                        top = (area, [a, b]);
                    }
                }
            }
        }
        best = top.1;
        half /= 2.0;
    }
    let center = at(best[0], best[1]);
    let (_, s) = fit(center).expect("oracle center admits an ellipse");
    (center, s)
}
