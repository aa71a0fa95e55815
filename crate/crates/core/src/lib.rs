//! Data-driven inference of quantum measurements in the real-vector
//! formalism.
//!
//! States live on the hyperplane `u · s = 1` of `ℝ^ℓ`, measurements are
//! `n × ℓ` real matrices, and inference from a cloud of observed
//! distributions returns the consistent measurement of minimum range
//! volume `det MᵀM`, computed on the ball `𝔹` as a minimum-volume
//! enclosing ellipsoid. Optimality is certified by checking that the
//! counter-image of the cloud supports a spherical 2-design.
//!
//! ```
//! use ddi_core::{ddi_on_ball, regular_simplex, DdiOptions, ProbabilityCloud};
//!
//! let simplex = regular_simplex(3).unwrap();
//! let cloud = ProbabilityCloud::new(simplex.points().to_vec(), 1e-9).unwrap();
//! let result = ddi_on_ball(&cloud, &DdiOptions::default()).unwrap();
//! assert!((result.volume_sq - 1.0).abs() < 1e-9);
//! assert!(result.design_certificate.is_design);
//! ```

pub mod ddi;
pub mod designs;
pub mod error;
pub mod geometry;
mod linalg;
pub mod measurements;

pub use ddi::{
    ddi_closed_form, ddi_on_ball, ellipsoid_to_measurement, feasibility_check, lemma1_bound_check,
    lemma3_bijection_check, mvee, theorem_harness, CloudJson, DdiOptions, DdiResult, Ellipsoid,
    HarnessConfig, HarnessReport, MveeSolution, ProbabilityCloud,
};
pub use designs::{frame_operator, is_two_design, regular_simplex, DesignCertificate, WeightedStateSet};
pub use error::{Error, Result};
pub use geometry::{EmbeddingMap, GeomVector, HermitianOperator};
pub use measurements::QuasiMeasurement;
