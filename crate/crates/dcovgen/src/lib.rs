//! Distance-covariance association testing for genotype data.
//!
//! The crate provides energy-statistics hypothesis tests specialized to
//! discrete genetic markers: genotype–phenotype association (with optional
//! covariate adjustment, dosage and multiallelic variants), SNP–SNP
//! interaction screens, and categorical independence / goodness-of-fit
//! tests — all with closed-form null distributions evaluated to double
//! precision, so no permutation sampling is needed on the critical path.
//!
//! Modules:
//!
//! - [`geno`]: genotype containers, the `d_b` distance family and its
//!   feature maps, and dense pair-matrix machinery.
//! - [`quadform`]: null-distribution numerics (weighted chi-square sums,
//!   the two-weight variance ratio, tail brackets).

pub mod assoc;
pub mod categorical;
pub mod epistasis;
pub mod error;
pub mod geno;
pub mod plink;
pub mod quadform;
pub mod sim;

pub use error::{Error, Result};
