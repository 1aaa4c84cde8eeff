//! Null-distribution numerics.
//!
//! Everything in this module is pure and reentrant: CDFs of weighted sums of
//! independent chi-square variables ([`wchisq_cdf`]), the two-weight
//! variance-ratio distribution evaluated through the Appell F1 closed form or
//! a cancellation-free polar integral ([`genf_cdf`], [`genf_sf`]), the
//! finite-sample tail probability used by the association tests
//! ([`tn_tail`]), and the cheap lower/upper bracket around that tail that
//! drives screening ([`pvalue_bounds`]).

mod appell;
mod genf;
mod special;
mod wchisq;

pub use appell::appell_f1;
pub use genf::{genf_cdf, genf_sf, pvalue_bounds, tn_tail, two_weight_sf};
pub use special::{chi2_cdf, chi2_sf, f_cdf, f_sf};
pub use wchisq::{wchisq_cdf, wchisq_sf};

use crate::error::{Error, Result};

/// Weight spectrum of a quadratic form `Q = Σ wᵢ·χ²(dᵢ)`.
///
/// Weights are kept sorted in descending order; negative weights are
/// permitted (finite-sample null statistics mix signs). Each weight carries
/// an integer degrees-of-freedom count, 1 unless stated otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadFormWeights {
    components: Vec<(f64, u32)>,
}

impl QuadFormWeights {
    /// Builds a spectrum from bare weights, one degree of freedom each.
    ///
    /// # Errors
    ///
    /// Fails on an empty list or non-finite weights.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::with_dof(weights.into_iter().map(|w| (w, 1)).collect())
    }

    /// Builds a spectrum from `(weight, degrees_of_freedom)` pairs.
    ///
    /// # Errors
    ///
    /// Fails on an empty list, non-finite weights, or a zero df count.
    pub fn with_dof(components: Vec<(f64, u32)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("quadratic form needs at least one weight"));
        }
        for &(w, d) in &components {
            if !w.is_finite() {
                return Err(Error::invalid(format!("weight {w} is not finite")));
            }
            if d == 0 {
                return Err(Error::invalid("degrees of freedom must be positive"));
            }
        }
        let mut components = components;
        components.sort_by(|a, b| b.0.total_cmp(&a.0));
        Ok(Self { components })
    }

    /// The `(weight, df)` pairs in descending weight order.
    pub fn components(&self) -> &[(f64, u32)] {
        &self.components
    }
}

/// Parameters of the two-weight variance ratio
/// `(α₁Q₁² + α₂Q₂²) / ((Q₃²+…+Q²_{ν+2})/ν)` with independent standard-normal
/// `Qᵢ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenFParams {
    alpha1: f64,
    alpha2: f64,
    nu: u32,
}

impl GenFParams {
    /// Validates `α₁ ≥ α₂ ≥ 0`, `α₁ > 0`, `ν ≥ 1`.
    ///
    /// # Errors
    ///
    /// Fails when the ordering or positivity constraints are violated.
    pub fn new(alpha1: f64, alpha2: f64, nu: u32) -> Result<Self> {
        if !alpha1.is_finite() || !alpha2.is_finite() {
            return Err(Error::invalid("variance-ratio weights must be finite"));
        }
        if !(alpha1 > 0.0) {
            return Err(Error::invalid(format!(
                "leading weight must be positive, got {alpha1}"
            )));
        }
        if !(alpha2 >= 0.0) {
            return Err(Error::invalid(format!(
                "trailing weight must be nonnegative, got {alpha2}"
            )));
        }
        if alpha2 > alpha1 {
            return Err(Error::invalid(format!(
                "weights must be ordered: {alpha1} < {alpha2}"
            )));
        }
        if nu == 0 {
            return Err(Error::invalid("denominator degrees of freedom must be positive"));
        }
        Ok(Self { alpha1, alpha2, nu })
    }

    /// Leading numerator weight.
    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    /// Trailing numerator weight.
    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }

    /// Denominator degrees of freedom.
    pub fn nu(&self) -> u32 {
        self.nu
    }
}
