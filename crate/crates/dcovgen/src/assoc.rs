//! Genotype–phenotype association testing.
//!
//! The statistic is the generalized distance covariance `V̂_b²` between a
//! genetic marker and a quantitative phenotype, computed in O(n) through the
//! two-dimensional feature map of the `d_b` marker distance. P-values come
//! from closed-form null distributions: a weighted chi-square limit for the
//! asymptotic test and an exact finite-sample ratio distribution (Gaussian
//! errors) for the default test. Covariate adjustment residualizes both the
//! phenotype and the feature columns; the screened scan driver brackets each
//! marker's p-value with cheap bounds and evaluates the exact tail only where
//! the bracket spans the decision region.

use crate::error::{Error, Result};
use crate::geno::{DosageVector, FeatureMap, GenotypeVector};
use crate::quadform::{pvalue_bounds, tn_tail, wchisq_sf, QuadFormWeights};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use std::fmt;

/// Eigenvalues with relative magnitude below this are exact zeros of a
/// rank-deficient covariance; mirrored from the quadform truncation rule.
const EIGEN_TRUNCATION_REL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Result flags
// ---------------------------------------------------------------------------

/// Bit set describing how a test result was obtained.
#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct ResultFlags(u8);

impl ResultFlags {
    /// The p-value is an exact evaluation of the null distribution.
    pub const EXACT: ResultFlags = ResultFlags(1);
    /// Only the upper bound `p**` was evaluated (deep-significance screen).
    pub const BOUND_ONLY_HIGH: ResultFlags = ResultFlags(1 << 1);
    /// Only the lower bound `p*` was evaluated (insignificance screen).
    pub const BOUND_ONLY_LOW: ResultFlags = ResultFlags(1 << 2);
    /// The marker carries a single genotype; the test is vacuous (p = 1).
    pub const MONOMORPHIC: ResultFlags = ResultFlags(1 << 3);
    /// The test could not be evaluated; the p-value is NaN.
    pub const DEGENERATE: ResultFlags = ResultFlags(1 << 4);
    /// Rows or columns with zero margin were dropped before testing.
    pub const EMPTY_MARGIN_DROPPED: ResultFlags = ResultFlags(1 << 5);
    /// Cells with zero expected count were skipped in a classical statistic.
    pub const ZERO_EXPECTED_CELLS: ResultFlags = ResultFlags(1 << 6);

    /// No flags set.
    pub fn empty() -> Self {
        ResultFlags(0)
    }

    /// True when every flag in `other` is set in `self`.
    pub fn contains(self, other: ResultFlags) -> bool {
        self.0 & other.0 == other.0
    }

    /// Sets all flags in `other`.
    pub fn insert(&mut self, other: ResultFlags) {
        self.0 |= other.0;
    }

    /// True when no flag is set.
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl std::ops::BitOr for ResultFlags {
    type Output = ResultFlags;
    fn bitor(self, rhs: ResultFlags) -> ResultFlags {
        ResultFlags(self.0 | rhs.0)
    }
}

impl fmt::Display for ResultFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "NONE");
        }
        let names = [
            (ResultFlags::EXACT, "EXACT"),
            (ResultFlags::BOUND_ONLY_HIGH, "BOUND_ONLY_HIGH"),
            (ResultFlags::BOUND_ONLY_LOW, "BOUND_ONLY_LOW"),
            (ResultFlags::MONOMORPHIC, "MONOMORPHIC"),
            (ResultFlags::DEGENERATE, "DEGENERATE"),
            (ResultFlags::EMPTY_MARGIN_DROPPED, "EMPTY_MARGIN_DROPPED"),
            (ResultFlags::ZERO_EXPECTED_CELLS, "ZERO_EXPECTED_CELLS"),
        ];
        let mut first = true;
        for (flag, name) in names {
            if self.contains(flag) {
                if !first {
                    write!(f, "|")?;
                }
                write!(f, "{name}")?;
                first = false;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for ResultFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

// ---------------------------------------------------------------------------
// Input containers
// ---------------------------------------------------------------------------

/// A quantitative phenotype; `NaN` entries mark missing observations.
#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeVector {
    values: Vec<f64>,
}

impl PhenotypeVector {
    /// Wraps raw values; infinities are rejected, `NaN` means missing.
    ///
    /// # Errors
    ///
    /// Fails on an empty vector or infinite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("phenotype vector must be nonempty"));
        }
        for (i, &v) in values.iter().enumerate() {
            if v.is_infinite() {
                return Err(Error::invalid(format!(
                    "phenotype entry {i} is infinite; use NaN for missing"
                )));
            }
        }
        Ok(Self { values })
    }

    /// Builds from optional values, mapping `None` to missing.
    ///
    /// # Errors
    ///
    /// As [`PhenotypeVector::new`].
    pub fn from_options(values: &[Option<f64>]) -> Result<Self> {
        Self::new(values.iter().map(|v| v.unwrap_or(f64::NAN)).collect())
    }

    /// The raw values (missing entries are `NaN`).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of entries including missing ones.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the vector has no entries.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when entry `i` is missing.
    pub fn is_missing(&self, i: usize) -> bool {
        self.values[i].is_nan()
    }

    /// Number of observed (non-missing) entries.
    pub fn n_complete(&self) -> usize {
        self.values.iter().filter(|v| !v.is_nan()).count()
    }
}

/// A marker genotype in either hard-call or imputed-dosage form.
///
/// The two forms use different interpolations of the feature map; keeping
/// them in one enum guarantees a single marker never mixes encodings.
#[derive(Debug, Clone, PartialEq)]
pub enum SnpVector {
    /// Hard genotype calls in {0, 1, 2}.
    Hard(GenotypeVector),
    /// Expected allele dosages in [0, 2].
    Dosage(DosageVector),
}

impl SnpVector {
    /// Number of entries including missing ones.
    pub fn len(&self) -> usize {
        match self {
            SnpVector::Hard(g) => g.len(),
            SnpVector::Dosage(d) => d.len(),
        }
    }

    /// True when the vector has no entries.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when entry `i` is missing (dosages are always observed).
    pub fn is_missing(&self, i: usize) -> bool {
        match self {
            SnpVector::Hard(g) => g.is_missing(i),
            SnpVector::Dosage(_) => false,
        }
    }

    fn value(&self, i: usize) -> f64 {
        match self {
            SnpVector::Hard(g) => f64::from(g.codes()[i]),
            SnpVector::Dosage(d) => d.values()[i],
        }
    }

    fn is_dosage(&self) -> bool {
        matches!(self, SnpVector::Dosage(_))
    }
}

impl From<GenotypeVector> for SnpVector {
    fn from(g: GenotypeVector) -> Self {
        SnpVector::Hard(g)
    }
}

impl From<DosageVector> for SnpVector {
    fn from(d: DosageVector) -> Self {
        SnpVector::Dosage(d)
    }
}

/// Design matrix for covariate adjustment: `n × (q+1)` with an all-ones
/// first column, validated to full column rank at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    columns: Vec<Vec<f64>>,
}

impl CovariateMatrix {
    /// An intercept-only design (plain centering).
    pub fn intercept_only(n: usize) -> Self {
        Self {
            columns: vec![vec![1.0; n]],
        }
    }

    /// Builds the design from covariate columns; the intercept column is
    /// prepended automatically.
    ///
    /// # Errors
    ///
    /// Fails on length mismatches, non-finite entries (covariates cannot be
    /// missing — exclude those rows upstream), or rank deficiency, naming
    /// the first offending column.
    pub fn with_covariates(n: usize, covariates: Vec<Vec<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("design matrix needs at least one row"));
        }
        let mut columns = Vec::with_capacity(covariates.len() + 1);
        columns.push(vec![1.0; n]);
        for (j, col) in covariates.into_iter().enumerate() {
            if col.len() != n {
                return Err(Error::dims(format!(
                    "covariate column {j} has {} rows, expected {n}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "covariate column {j} has a non-finite entry at row {i}"
                )));
            }
            columns.push(col);
        }
        // Surface rank problems at construction rather than mid-scan.
        orthonormal_columns(&columns)?;
        Ok(Self { columns })
    }

    /// Number of rows.
    pub fn n(&self) -> usize {
        self.columns[0].len()
    }

    /// Number of covariates, excluding the intercept.
    pub fn q(&self) -> usize {
        self.columns.len() - 1
    }

    /// The design columns, intercept first.
    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// The design restricted to a subset of rows.
    fn subset(&self, keep: &[usize]) -> Vec<Vec<f64>> {
        self.columns
            .iter()
            .map(|col| keep.iter().map(|&i| col[i]).collect())
            .collect()
    }
}

/// Outcome of one association test.
#[derive(Debug, Clone, PartialEq)]
pub struct AssocResult {
    /// The statistic `V̂_b²` (NaN when the test is degenerate).
    pub statistic: f64,
    /// The p-value; a bound rather than an exact value when the flags say
    /// so, and NaN when degenerate.
    pub p_value: f64,
    /// Lower bound `p*` when a screening stage computed one.
    pub p_lo: Option<f64>,
    /// Upper bound `p**` when a screening stage computed one.
    pub p_hi: Option<f64>,
    /// The two leading null-spectrum eigenvalues `(λ̂₁, λ̂₂)`.
    pub eigenvalues: (f64, f64),
    /// Number of observations actually used (complete pairs).
    pub n_effective: usize,
    /// How the result was obtained.
    pub flags: ResultFlags,
}

impl AssocResult {
    fn degenerate() -> Self {
        AssocResult {
            statistic: f64::NAN,
            p_value: f64::NAN,
            p_lo: None,
            p_hi: None,
            eigenvalues: (f64::NAN, f64::NAN),
            n_effective: 0,
            flags: ResultFlags::DEGENERATE,
        }
    }
}

// ---------------------------------------------------------------------------
// Least squares helpers
// ---------------------------------------------------------------------------

/// Orthonormalizes columns by modified Gram-Schmidt with a second
/// reorthogonalization pass.
///
/// # Errors
///
/// Fails with the index of the first column that is (numerically) a linear
/// combination of the preceding ones.
fn orthonormal_columns(columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(columns.len());
    for (j, col) in columns.iter().enumerate() {
        let original_norm = norm(col);
        if original_norm == 0.0 {
            return Err(Error::RankDeficient(format!(
                "design column {j} is identically zero"
            )));
        }
        let mut v = col.clone();
        for _pass in 0..2 {
            for q in &basis {
                let coef = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= coef * qi;
                }
            }
        }
        let nv = norm(&v);
        if nv <= 1e-10 * original_norm {
            return Err(Error::RankDeficient(format!(
                "design column {j} is linearly dependent on earlier columns"
            )));
        }
        for vi in &mut v {
            *vi /= nv;
        }
        basis.push(v);
    }
    Ok(basis)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Replaces `v` with its residual after projecting out an orthonormal basis.
fn project_out(basis: &[Vec<f64>], v: &mut [f64]) {
    for q in basis {
        let coef = dot(q, v);
        for (vi, qi) in v.iter_mut().zip(q) {
            *vi -= coef * qi;
        }
    }
}

/// Ordinary-least-squares residuals of the phenotype on the design.
///
/// # Errors
///
/// Fails on missing phenotype entries (exclude those rows first), dimension
/// mismatch, rank deficiency, or too few rows (`n ≤ q+1`).
pub fn residualize(y: &PhenotypeVector, z: &CovariateMatrix) -> Result<PhenotypeVector> {
    if y.len() != z.n() {
        return Err(Error::dims(format!(
            "phenotype has {} rows, design has {}",
            y.len(),
            z.n()
        )));
    }
    if y.values().iter().any(|v| v.is_nan()) {
        return Err(Error::degenerate(
            "cannot residualize a phenotype with missing entries",
        ));
    }
    if y.len() <= z.q() + 1 {
        return Err(Error::invalid(format!(
            "need more than {} observations to fit {} design columns",
            z.q() + 1,
            z.q() + 1
        )));
    }
    let basis = orthonormal_columns(z.columns())?;
    let mut r = y.values().to_vec();
    project_out(&basis, &mut r);
    // A second pass removes the rounding residue of the first, keeping the
    // orthogonality invariant below 1e-9 relative even for ill-scaled
    // covariates.
    project_out(&basis, &mut r);
    PhenotypeVector::new(r)
}

// ---------------------------------------------------------------------------
// Core statistic
// ---------------------------------------------------------------------------

/// Per-marker summary shared by every test variant.
struct SnpSummary {
    /// Complete-pair count.
    n: usize,
    /// The statistic `V̂_b²`.
    statistic: f64,
    /// Phenotype variance (1/n divisor) after any adjustment.
    sigma2: f64,
    /// Leading eigenvalues of the feature covariance.
    l1: f64,
    l2: f64,
    /// Studentized scaled statistic `n·V̂²/σ̂²`.
    k: f64,
    /// All retained genotype values identical.
    monomorphic: bool,
}

/// Indices where both the marker and the phenotype are observed.
fn complete_pairs(x: &SnpVector, y: &PhenotypeVector) -> Result<Vec<usize>> {
    if x.len() != y.len() {
        return Err(Error::dims(format!(
            "marker has {} entries, phenotype has {}",
            x.len(),
            y.len()
        )));
    }
    Ok((0..x.len())
        .filter(|&i| !x.is_missing(i) && !y.is_missing(i))
        .collect())
}

/// Computes the summary on given rows, optionally residualizing on a design.
///
/// With a design, both the phenotype and the two feature columns are
/// projected onto the orthogonal complement of the column space, which
/// realizes the adjusted statistic and the adjusted null covariance
/// `(1/n)·Uᵗ(I − Z(ZᵗZ)⁻¹Zᵗ)U` in one stroke. Without one, plain centering
/// (equivalently, an intercept-only design) is applied via closed-form
/// moment sums.
fn summarize(
    x: &SnpVector,
    y: &PhenotypeVector,
    b: f64,
    keep: &[usize],
    z: Option<&CovariateMatrix>,
) -> Result<SnpSummary> {
    let n = keep.len();
    if n < 5 {
        return Err(Error::degenerate(format!(
            "only {n} complete observations; need at least 5"
        )));
    }
    let map = FeatureMap::new(b, x.is_dosage())?;

    let mut first = f64::NAN;
    let mut monomorphic = true;
    let nf = n as f64;

    match z {
        None => {
            // Moment accumulation: one pass for means, one for the centered
            // cross-products.
            let mut my = 0.0;
            let mut m1 = 0.0;
            let mut m2 = 0.0;
            for &i in keep {
                let v = x.value(i);
                if first.is_nan() {
                    first = v;
                } else if v != first {
                    monomorphic = false;
                }
                let (f1, f2) = map.eval(v);
                my += y.values()[i];
                m1 += f1;
                m2 += f2;
            }
            my /= nf;
            m1 /= nf;
            m2 /= nf;

            let mut s1 = 0.0;
            let mut s2 = 0.0;
            let mut syy = 0.0;
            let mut c11 = 0.0;
            let mut c12 = 0.0;
            let mut c22 = 0.0;
            for &i in keep {
                let (f1, f2) = map.eval(x.value(i));
                let dy = y.values()[i] - my;
                let d1 = f1 - m1;
                let d2 = f2 - m2;
                s1 += d1 * dy;
                s2 += d2 * dy;
                syy += dy * dy;
                c11 += d1 * d1;
                c12 += d1 * d2;
                c22 += d2 * d2;
            }
            finish_summary(n, s1, s2, syy, c11, c12, c22, monomorphic)
        }
        Some(design) => {
            if design.n() != x.len() {
                return Err(Error::dims(format!(
                    "design has {} rows, marker has {}",
                    design.n(),
                    x.len()
                )));
            }
            if n <= design.q() + 3 {
                return Err(Error::degenerate(format!(
                    "{n} complete observations cannot support {} covariates",
                    design.q()
                )));
            }
            let basis = orthonormal_columns(&design.subset(keep))?;

            let mut ry = Vec::with_capacity(n);
            let mut u1 = Vec::with_capacity(n);
            let mut u2 = Vec::with_capacity(n);
            for &i in keep {
                let v = x.value(i);
                if first.is_nan() {
                    first = v;
                } else if v != first {
                    monomorphic = false;
                }
                let (f1, f2) = map.eval(v);
                ry.push(y.values()[i]);
                u1.push(f1);
                u2.push(f2);
            }
            for col in [&mut ry, &mut u1, &mut u2] {
                project_out(&basis, col);
                project_out(&basis, col);
            }

            let s1 = dot(&u1, &ry);
            let s2 = dot(&u2, &ry);
            let syy = dot(&ry, &ry);
            let c11 = dot(&u1, &u1);
            let c12 = dot(&u1, &u2);
            let c22 = dot(&u2, &u2);
            finish_summary(n, s1, s2, syy, c11, c12, c22, monomorphic)
        }
    }
}

/// Assembles statistic, variance, and null spectrum from moment sums.
#[allow(clippy::too_many_arguments)]
fn finish_summary(
    n: usize,
    s1: f64,
    s2: f64,
    syy: f64,
    c11: f64,
    c12: f64,
    c22: f64,
    monomorphic: bool,
) -> Result<SnpSummary> {
    let nf = n as f64;
    let sigma2 = syy / nf;
    if sigma2 <= 0.0 {
        return Err(Error::degenerate("phenotype variance is zero"));
    }
    let statistic = (s1 * s1 + s2 * s2) / (nf * nf);
    // Eigenvalues of the 2×2 feature covariance (1/n divisor).
    let k11 = c11 / nf;
    let k12 = c12 / nf;
    let k22 = c22 / nf;
    let mid = 0.5 * (k11 + k22);
    let half_gap = 0.5 * (k11 - k22);
    let root = (half_gap * half_gap + k12 * k12).sqrt();
    let mut l1 = mid + root;
    let mut l2 = mid - root;
    // The covariance is positive semidefinite; tiny negatives and tiny
    // positives alike are rounding debris of exact zeros.
    let tol = EIGEN_TRUNCATION_REL * (k11 + k22).abs();
    if l1.abs() <= tol {
        l1 = 0.0;
    }
    if l2.abs() <= tol {
        l2 = 0.0;
    }
    l2 = l2.max(0.0);
    let k = nf * statistic / sigma2;
    Ok(SnpSummary {
        n,
        statistic,
        sigma2,
        l1,
        l2,
        k,
        monomorphic,
    })
}

/// The generalized distance covariance `V̂_b²` between a marker and a
/// phenotype, on complete pairs.
///
/// Computed as `(s₁² + s₂²)/n²` from the feature-map sums
/// `s_j = Σᵢ φ_j(xᵢ)(yᵢ − ȳ)`, which equals the double-centered
/// distance-matrix trace form (an O(n²) identity exploited only in tests).
///
/// # Errors
///
/// Fails on length mismatch, fewer than 5 complete pairs, zero phenotype
/// variance, or `b` outside [0, 4].
pub fn vb2_statistic(x: &SnpVector, y: &PhenotypeVector, b: f64) -> Result<f64> {
    let keep = complete_pairs(x, y)?;
    Ok(summarize(x, y, b, &keep, None)?.statistic)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

/// Association test against the large-sample null: `n·V̂²` is compared to a
/// weighted sum of two chi-squares with weights `σ̂²·λ̂ᵢ`.
///
/// # Errors
///
/// Fails on dimension mismatch, too few complete pairs, zero phenotype
/// variance, or an invalid `b`.
pub fn test_asymptotic(x: &SnpVector, y: &PhenotypeVector, b: f64) -> Result<AssocResult> {
    let keep = complete_pairs(x, y)?;
    let s = summarize(x, y, b, &keep, None)?;
    asymptotic_from_summary(&s)
}

fn asymptotic_from_summary(s: &SnpSummary) -> Result<AssocResult> {
    if s.monomorphic {
        return Ok(monomorphic_result(s));
    }
    if s.l1 <= 0.0 {
        // The premetric cannot separate the observed genotypes (possible at
        // the boundary values of b); the statistic is identically zero.
        return Ok(AssocResult {
            statistic: s.statistic,
            p_value: 1.0,
            p_lo: None,
            p_hi: None,
            eigenvalues: (s.l1, s.l2),
            n_effective: s.n,
            flags: ResultFlags::EXACT,
        });
    }
    let w = QuadFormWeights::new(vec![s.sigma2 * s.l1, s.sigma2 * s.l2])?;
    let p = wchisq_sf(&w, s.n as f64 * s.statistic)?;
    Ok(AssocResult {
        statistic: s.statistic,
        p_value: p.clamp(0.0, 1.0),
        p_lo: None,
        p_hi: None,
        eigenvalues: (s.l1, s.l2),
        n_effective: s.n,
        flags: ResultFlags::EXACT,
    })
}

/// Exact finite-sample association test under Gaussian phenotype errors:
/// p = P(Tₙ ≥ 0) for the recentered spectral statistic.
///
/// For `b ∈ {0, 4}` (one-dimensional feature space) this reproduces the
/// classical one-predictor regression F-test p-value.
///
/// # Errors
///
/// As [`test_asymptotic`].
pub fn test_finite(x: &SnpVector, y: &PhenotypeVector, b: f64) -> Result<AssocResult> {
    let keep = complete_pairs(x, y)?;
    let s = summarize(x, y, b, &keep, None)?;
    finite_from_summary(&s, 0)
}

fn finite_from_summary(s: &SnpSummary, p_columns: u32) -> Result<AssocResult> {
    if s.monomorphic {
        return Ok(monomorphic_result(s));
    }
    let p = tn_tail(s.l1, s.l2, s.k, s.n as u32, p_columns)?;
    Ok(AssocResult {
        statistic: s.statistic,
        p_value: p.clamp(0.0, 1.0),
        p_lo: None,
        p_hi: None,
        eigenvalues: (s.l1, s.l2),
        n_effective: s.n,
        flags: ResultFlags::EXACT,
    })
}

fn monomorphic_result(s: &SnpSummary) -> AssocResult {
    AssocResult {
        statistic: s.statistic,
        p_value: 1.0,
        p_lo: None,
        p_hi: None,
        eigenvalues: (s.l1, s.l2),
        n_effective: s.n,
        flags: ResultFlags::EXACT | ResultFlags::MONOMORPHIC,
    }
}

/// Covariate-adjusted finite-sample test: the phenotype and both feature
/// columns are residualized on the design, and the denominator degrees of
/// freedom shrink by the covariate count.
///
/// With an intercept-only design this is identical (bitwise) to
/// [`test_finite`].
///
/// # Errors
///
/// As [`test_finite`], plus design rank deficiency and `n ≤ q+3`.
pub fn test_adjusted(
    x: &SnpVector,
    y: &PhenotypeVector,
    z: &CovariateMatrix,
    b: f64,
) -> Result<AssocResult> {
    let keep = complete_pairs(x, y)?;
    if z.q() == 0 {
        // Plain centering takes the closed-form moment path; delegating
        // keeps the two evaluation orders bitwise identical.
        let s = summarize(x, y, b, &keep, None)?;
        return finite_from_summary(&s, 0);
    }
    let s = summarize(x, y, b, &keep, Some(z))?;
    finite_from_summary(&s, z.q() as u32 + 1)
}

/// Association test for a multiallelic marker given per-allele counts.
///
/// `x_counts` is `n × m` with row sums 2 (diploid). The marker distance is
/// the average of per-allele `d_b` distances, realized by the `2m`-column
/// feature matrix with per-allele maps scaled by `1/√2`. The null spectrum
/// is the full feature covariance (rank at most `C(m+1,2) − 1`); the tail is
/// evaluated by characteristic-function inversion of the recentered
/// statistic. `m = 2` delegates to the biallelic finite-sample test on
/// minor-allele counts.
///
/// # Errors
///
/// Fails when a row does not sum to 2, on dimension mismatch, or on the
/// biallelic preconditions.
pub fn test_multiallelic(
    x_counts: &DMatrix<u8>,
    y: &PhenotypeVector,
    b: f64,
) -> Result<AssocResult> {
    let (n, m) = x_counts.shape();
    if m < 2 {
        return Err(Error::invalid(format!("need at least 2 alleles, got {m}")));
    }
    if n != y.len() {
        return Err(Error::dims(format!(
            "count matrix has {n} rows, phenotype has {}",
            y.len()
        )));
    }
    for i in 0..n {
        let row_sum: u32 = (0..m).map(|a| u32::from(x_counts[(i, a)])).sum();
        if row_sum != 2 {
            return Err(Error::invalid(format!(
                "allele counts in row {i} sum to {row_sum}, expected 2 (diploid)"
            )));
        }
    }

    if m == 2 {
        // Count the rarer allele so the genotype code is the minor-allele
        // dose, matching convention; the p-value is invariant either way.
        let totals: Vec<u64> = (0..2)
            .map(|a| (0..n).map(|i| u64::from(x_counts[(i, a)])).sum())
            .collect();
        let minor = if totals[1] <= totals[0] { 1 } else { 0 };
        let codes: Vec<u8> = (0..n).map(|i| x_counts[(i, minor)]).collect();
        let gv = GenotypeVector::new(codes)?;
        return test_finite(&SnpVector::Hard(gv), y, b);
    }

    let keep = complete_pairs_multi(y)?;
    let nk = keep.len();
    if nk < 5 {
        return Err(Error::degenerate(format!(
            "only {nk} complete observations; need at least 5"
        )));
    }
    let map = FeatureMap::new(b, false)?;
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let nf = nk as f64;

    // Feature matrix column sums and phenotype moments.
    let my: f64 = keep.iter().map(|&i| y.values()[i]).sum::<f64>() / nf;
    let mut syy = 0.0;
    for &i in keep.iter() {
        let dy = y.values()[i] - my;
        syy += dy * dy;
    }
    let sigma2 = syy / nf;
    if sigma2 <= 0.0 {
        return Err(Error::degenerate("phenotype variance is zero"));
    }

    let d = 2 * m;
    let mut u = DMatrix::<f64>::zeros(nk, d);
    for (r, &i) in keep.iter().enumerate() {
        for a in 0..m {
            let (f1, f2) = map.eval_genotype(x_counts[(i, a)]);
            u[(r, 2 * a)] = scale * f1;
            u[(r, 2 * a + 1)] = scale * f2;
        }
    }
    // Center columns.
    let monomorphic = {
        let mut mono = true;
        for r in 1..nk {
            if (0..m).any(|a| x_counts[(keep[r], a)] != x_counts[(keep[0], a)]) {
                mono = false;
                break;
            }
        }
        mono
    };
    for c in 0..d {
        let mean: f64 = u.column(c).sum() / nf;
        for r in 0..nk {
            u[(r, c)] -= mean;
        }
    }

    // Statistic from feature sums; covariance spectrum from UᵗU/n.
    let mut stat = 0.0;
    for c in 0..d {
        let s: f64 = (0..nk).map(|r| u[(r, c)] * (y.values()[keep[r]] - my)).sum();
        stat += s * s;
    }
    let statistic = stat / (nf * nf);
    let cov = u.transpose() * &u / nf;
    let eig = SymmetricEigen::new(cov);
    let mut lambdas: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let trace: f64 = lambdas.iter().map(|l| l.abs()).sum();
    lambdas.retain(|l| *l > EIGEN_TRUNCATION_REL * trace);

    let summary_top = (
        lambdas.first().copied().unwrap_or(0.0),
        lambdas.get(1).copied().unwrap_or(0.0),
    );
    if monomorphic || lambdas.is_empty() {
        let mut flags = ResultFlags::EXACT;
        if monomorphic {
            flags.insert(ResultFlags::MONOMORPHIC);
        }
        return Ok(AssocResult {
            statistic,
            p_value: 1.0,
            p_lo: None,
            p_hi: None,
            eigenvalues: summary_top,
            n_effective: nk,
            flags,
        });
    }

    // Recentered statistic: P(Σ(λᵢ − k/n)Qᵢ² − (k/n)·χ²(n−1−r) ≥ 0).
    let k = nf * statistic / sigma2;
    let r = lambdas.len();
    let kn = k / nf;
    let mut comps: Vec<(f64, u32)> = lambdas.iter().map(|&l| (l - kn, 1)).collect();
    comps.push((-kn, (nk - 1 - r) as u32));
    let w = QuadFormWeights::with_dof(comps)?;
    let p = wchisq_sf(&w, 0.0)?;
    Ok(AssocResult {
        statistic,
        p_value: p.clamp(0.0, 1.0),
        p_lo: None,
        p_hi: None,
        eigenvalues: summary_top,
        n_effective: nk,
        flags: ResultFlags::EXACT,
    })
}

/// Rows of a multiallelic test where the phenotype is observed.
fn complete_pairs_multi(y: &PhenotypeVector) -> Result<Vec<usize>> {
    Ok((0..y.len()).filter(|&i| !y.is_missing(i)).collect())
}

// ---------------------------------------------------------------------------
// Scan driver
// ---------------------------------------------------------------------------

/// Which null distribution the scan evaluates exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TestMethod {
    /// Finite-sample when the complete-pair count is at most 30 000, else
    /// asymptotic.
    #[default]
    Auto,
    /// Always the exact finite-sample tail.
    Finite,
    /// Always the weighted chi-square limit.
    Asymptotic,
}

/// Configuration of the screened association scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    /// Marker-distance parameter `b ∈ [0, 4]`.
    pub b: f64,
    /// Insignificance threshold `M`: markers whose p-value lower bound is
    /// at least `M` are reported by that bound alone.
    pub screen_min: f64,
    /// Deep-significance floor `m`: markers whose p-value upper bound is at
    /// most `m` are reported by that bound alone.
    pub screen_floor: f64,
    /// Null-distribution selection.
    pub method: TestMethod,
    /// Disable to force exact evaluation of every marker (the naive path).
    pub screening: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            b: 2.0,
            screen_min: 1e-4,
            screen_floor: 1e-64,
            method: TestMethod::Auto,
            screening: true,
        }
    }
}

/// Tests every marker against the phenotype, optionally adjusted, with
/// two-stage screening.
///
/// Stage 1 brackets each marker's p-value with the closed-form bounds;
/// markers whose bracket already decides insignificance (`p* ≥ M`) or deep
/// significance (`p** ≤ m`) skip the exact stage and carry the respective
/// `BOUND_ONLY_*` flag. Per-marker failures become `DEGENERATE` results with
/// NaN p-values; the scan itself never aborts. Output order equals input
/// order regardless of worker count.
///
/// # Errors
///
/// Fails only on global misconfiguration (invalid thresholds or `b`); all
/// per-marker conditions are reported in-band.
pub fn scan(
    snps: &[SnpVector],
    y: &PhenotypeVector,
    z: Option<&CovariateMatrix>,
    config: &ScanConfig,
) -> Result<Vec<AssocResult>> {
    if !(config.b >= 0.0 && config.b <= 4.0) {
        return Err(Error::invalid(format!(
            "distance parameter b = {} outside [0, 4]",
            config.b
        )));
    }
    if !(config.screen_min > 0.0 && config.screen_min <= 1.0) {
        return Err(Error::invalid("screen threshold M must lie in (0, 1]"));
    }
    if !(config.screen_floor >= 0.0 && config.screen_floor < config.screen_min) {
        return Err(Error::invalid("screen floor m must lie in [0, M)"));
    }
    if let Some(design) = z {
        if design.n() != y.len() {
            return Err(Error::dims(format!(
                "design has {} rows, phenotype has {}",
                design.n(),
                y.len()
            )));
        }
    }

    Ok(snps
        .par_iter()
        .map(|x| scan_one(x, y, z, config))
        .collect())
}

/// One marker of the scan; errors become DEGENERATE results.
fn scan_one(
    x: &SnpVector,
    y: &PhenotypeVector,
    z: Option<&CovariateMatrix>,
    config: &ScanConfig,
) -> AssocResult {
    match scan_one_inner(x, y, z, config) {
        Ok(r) => r,
        Err(_) => AssocResult::degenerate(),
    }
}

fn scan_one_inner(
    x: &SnpVector,
    y: &PhenotypeVector,
    z: Option<&CovariateMatrix>,
    config: &ScanConfig,
) -> Result<AssocResult> {
    let keep = complete_pairs(x, y)?;
    let q = match z {
        Some(design) if design.q() > 0 => design.q(),
        _ => 0,
    };
    let s = if q == 0 {
        summarize(x, y, config.b, &keep, None)?
    } else {
        summarize(x, y, config.b, &keep, z)?
    };
    if s.monomorphic {
        return Ok(monomorphic_result(&s));
    }

    let p_columns = if q == 0 { 0 } else { q as u32 + 1 };
    let n_eff = s.n - q;

    let mut bounds = None;
    if config.screening {
        // The bracket is evaluated for the adjusted statistic's structure:
        // scaling k by n_eff/n makes the bound's internal k/n equal the true
        // recentering constant while its degrees of freedom match the
        // adjusted chi-square count.
        let k_eff = s.k * n_eff as f64 / s.n as f64;
        let (lo, hi) = pvalue_bounds(s.l1, s.l2, k_eff, n_eff as u32)?;
        if lo >= config.screen_min {
            return Ok(AssocResult {
                statistic: s.statistic,
                p_value: lo,
                p_lo: Some(lo),
                p_hi: Some(hi),
                eigenvalues: (s.l1, s.l2),
                n_effective: s.n,
                flags: ResultFlags::BOUND_ONLY_LOW,
            });
        }
        if hi <= config.screen_floor {
            return Ok(AssocResult {
                statistic: s.statistic,
                p_value: hi,
                p_lo: Some(lo),
                p_hi: Some(hi),
                eigenvalues: (s.l1, s.l2),
                n_effective: s.n,
                flags: ResultFlags::BOUND_ONLY_HIGH,
            });
        }
        bounds = Some((lo, hi));
    }

    let use_finite = match config.method {
        TestMethod::Finite => true,
        TestMethod::Asymptotic => false,
        TestMethod::Auto => s.n <= 30_000,
    };
    let mut result = if use_finite {
        finite_from_summary(&s, p_columns)?
    } else {
        asymptotic_from_summary(&s)?
    };
    if let Some((lo, hi)) = bounds {
        result.p_lo = Some(lo);
        result.p_hi = Some(hi);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geno::{gdc_statistic, PairMatrix, SnpDistanceSpec};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    fn toy_data(n: usize, seed: u64) -> (SnpVector, PhenotypeVector) {
        let mut rng = StdRng::seed_from_u64(seed);
        let codes: Vec<u8> = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                if u < 0.25 {
                    0
                } else if u < 0.75 {
                    1
                } else {
                    2
                }
            })
            .collect();
        let normal = Normal::new(0.0, 1.0).unwrap();
        let y: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        (
            SnpVector::Hard(GenotypeVector::new(codes).unwrap()),
            PhenotypeVector::new(y).unwrap(),
        )
    }

    #[test]
    fn constant_phenotype_is_an_error() {
        let (x, _) = toy_data(20, 1);
        let y = PhenotypeVector::new(vec![3.5; 20]).unwrap();
        assert!(vb2_statistic(&x, &y, 2.0).is_err());
    }

    #[test]
    fn feature_path_matches_matrix_path() {
        // O(n) feature sums vs O(n²) double-centered trace form.
        for seed in 0..5 {
            let (x, y) = toy_data(40, seed);
            for &b in &[0.0, 0.7, 2.0, 3.3, 4.0] {
                let fast = vb2_statistic(&x, &y, b).unwrap();
                let SnpVector::Hard(ref gv) = x else { unreachable!() };
                let spec = SnpDistanceSpec::db(b).unwrap();
                let dx = PairMatrix::distances(&spec, gv).unwrap();
                let dy = PairMatrix::half_squared_differences(y.values());
                let slow = gdc_statistic(&dx, &dy).unwrap();
                assert_abs_diff_eq!(fast, slow, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn missing_entries_are_excluded_pairwise() {
        let x = SnpVector::Hard(
            GenotypeVector::new(vec![0, 1, 2, crate::geno::MISSING, 1, 0, 2, 1]).unwrap(),
        );
        let mut yv = vec![0.3, -1.0, 2.0, 0.5, f64::NAN, 1.1, -0.4, 0.9];
        let y = PhenotypeVector::new(yv.clone()).unwrap();
        let r = test_finite(&x, &y, 2.0).unwrap();
        assert_eq!(r.n_effective, 6);
        // Same answer as explicitly dropping the incomplete rows.
        let xk = SnpVector::Hard(GenotypeVector::new(vec![0, 1, 2, 0, 2, 1]).unwrap());
        yv.remove(4);
        yv.remove(3);
        let yk = PhenotypeVector::new(yv).unwrap();
        let rk = test_finite(&xk, &yk, 2.0).unwrap();
        assert_eq!(r.p_value, rk.p_value);
    }

    #[test]
    fn monomorphic_marker_yields_p_one() {
        let x = SnpVector::Hard(GenotypeVector::new(vec![1; 30]).unwrap());
        let (_, y) = toy_data(30, 7);
        let r = test_finite(&x, &y, 2.0).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(r.flags.contains(ResultFlags::MONOMORPHIC));
        assert_abs_diff_eq!(r.statistic, 0.0, epsilon = 1e-30);
    }

    #[test]
    fn asymptotic_eigenvalues_match_printed_matrix() {
        // b = 2, p̂ = (1/4, 1/2, 1/4): K = diag(1/2, 1/4).
        let mut codes = Vec::new();
        for _ in 0..10 {
            codes.extend_from_slice(&[0, 1, 1, 2]);
        }
        let x = SnpVector::Hard(GenotypeVector::new(codes).unwrap());
        let (_, y) = toy_data(40, 3);
        let r = test_asymptotic(&x, &y, 2.0).unwrap();
        assert_relative_eq!(r.eigenvalues.0, 0.5, max_relative = 1e-12);
        assert_relative_eq!(r.eigenvalues.1, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_k_matrix_agrees_with_moment_path() {
        // The closed form in genotype frequencies: K11 = (b/2)(p0+p2−(p2−p0)²),
        // K22 = ((4−b)/2)(p1−p1²), K12² = (b(4−b)/4)·p1²(p0−p2)².
        for seed in 0..4 {
            let (x, y) = toy_data(60, 100 + seed);
            let SnpVector::Hard(ref gv) = x else { unreachable!() };
            for &b in &[0.5, 1.0, 2.0, 3.7] {
                let r = test_asymptotic(&x, &y, b).unwrap();
                let [p0, p1, p2] = gv.genotype_freqs().unwrap();
                let k11 = 0.5 * b * (p0 + p2 - (p2 - p0) * (p2 - p0));
                let k22 = 0.5 * (4.0 - b) * (p1 - p1 * p1);
                let k12sq = 0.25 * b * (4.0 - b) * p1 * p1 * (p0 - p2) * (p0 - p2);
                let mid = 0.5 * (k11 + k22);
                let root = (0.25 * (k11 - k22) * (k11 - k22) + k12sq).sqrt();
                assert_relative_eq!(r.eigenvalues.0, mid + root, max_relative = 1e-10);
                assert_abs_diff_eq!(r.eigenvalues.1, mid - root, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn b4_matches_simple_regression_f_test() {
        // At b = 4 the feature space is one-dimensional in the dosage, so the
        // finite-sample p-value must equal the classical F(1, n−2) test.
        for seed in 0..5 {
            let (x, y) = toy_data(50, 200 + seed);
            let r = test_finite(&x, &y, 4.0).unwrap();

            // Textbook regression of y on x.
            let xs: Vec<f64> = match &x {
                SnpVector::Hard(g) => g.codes().iter().map(|&c| f64::from(c)).collect(),
                _ => unreachable!(),
            };
            let ys = y.values();
            let n = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| (a - mx) * (b - my)).sum();
            let sxx: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
            let syy: f64 = ys.iter().map(|b| (b - my) * (b - my)).sum();
            let r2 = sxy * sxy / (sxx * syy);
            let f = (n - 2.0) * r2 / (1.0 - r2);
            let p_reg = crate::quadform::f_sf(1.0, n - 2.0, f).unwrap();
            assert_relative_eq!(r.p_value, p_reg, max_relative = 1e-10);
        }
    }

    #[test]
    fn b0_matches_heterozygote_indicator_f_test() {
        for seed in 0..3 {
            let (x, y) = toy_data(50, 300 + seed);
            let r = test_finite(&x, &y, 0.0).unwrap();
            let xs: Vec<f64> = match &x {
                SnpVector::Hard(g) => g
                    .codes()
                    .iter()
                    .map(|&c| if c == 1 { 1.0 } else { 0.0 })
                    .collect(),
                _ => unreachable!(),
            };
            let ys = y.values();
            let n = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| (a - mx) * (b - my)).sum();
            let sxx: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
            let syy: f64 = ys.iter().map(|b| (b - my) * (b - my)).sum();
            let r2 = sxy * sxy / (sxx * syy);
            let f = (n - 2.0) * r2 / (1.0 - r2);
            let p_reg = crate::quadform::f_sf(1.0, n - 2.0, f).unwrap();
            assert_relative_eq!(r.p_value, p_reg, max_relative = 1e-10);
        }
    }

    #[test]
    fn label_swap_leaves_p_invariant() {
        for seed in 0..4 {
            let (x, y) = toy_data(45, 400 + seed);
            let SnpVector::Hard(ref gv) = x else { unreachable!() };
            let swapped = SnpVector::Hard(gv.swap_homozygotes());
            for &b in &[0.5, 2.0, 3.0] {
                let r1 = test_finite(&x, &y, b).unwrap();
                let r2 = test_finite(&swapped, &y, b).unwrap();
                assert_relative_eq!(r1.p_value, r2.p_value, max_relative = 1e-12);
                assert_relative_eq!(r1.statistic, r2.statistic, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn phenotype_scaling_preserves_p() {
        let (x, y) = toy_data(60, 11);
        let scaled =
            PhenotypeVector::new(y.values().iter().map(|v| 7.3 * v).collect()).unwrap();
        for &b in &[1.0, 2.0] {
            let r1 = test_finite(&x, &y, b).unwrap();
            let r2 = test_finite(&x, &scaled, b).unwrap();
            assert_relative_eq!(r2.statistic, 7.3 * 7.3 * r1.statistic, max_relative = 1e-12);
            assert_relative_eq!(r1.p_value, r2.p_value, max_relative = 1e-12);
        }
    }

    #[test]
    fn dosage_at_hard_values_matches_hard_calls() {
        let (x, y) = toy_data(50, 21);
        let SnpVector::Hard(ref gv) = x else { unreachable!() };
        let dosage = SnpVector::Dosage(
            DosageVector::new(gv.codes().iter().map(|&c| f64::from(c)).collect()).unwrap(),
        );
        for &b in &[0.5, 2.0, 4.0] {
            let rh = test_finite(&x, &y, b).unwrap();
            let rd = test_finite(&dosage, &y, b).unwrap();
            assert_relative_eq!(rh.p_value, rd.p_value, max_relative = 1e-12);
            assert_relative_eq!(rh.statistic, rd.statistic, max_relative = 1e-12);
        }
    }

    #[test]
    fn residualize_intercept_only_centers() {
        let y = PhenotypeVector::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let z = CovariateMatrix::intercept_only(4);
        let r = residualize(&y, &z).unwrap();
        let expect = [-1.5, -0.5, 0.5, 1.5];
        for (got, want) in r.values().iter().zip(expect) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn residualize_annihilates_column_space() {
        let mut rng = StdRng::seed_from_u64(5);
        let n = 30;
        let z1: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0).collect();
        let z2: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let z = CovariateMatrix::with_covariates(n, vec![z1.clone(), z2.clone()]).unwrap();
        // y built inside the column space must residualize to zero.
        let y = PhenotypeVector::new(
            (0..n).map(|i| 2.0 - 3.0 * z1[i] + 0.5 * z2[i]).collect(),
        )
        .unwrap();
        let r = residualize(&y, &z).unwrap();
        for v in r.values() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-9);
        }
        // Residuals of generic y are orthogonal to every design column.
        let y2 = PhenotypeVector::new((0..n).map(|_| rng.random::<f64>()).collect()).unwrap();
        let r2 = residualize(&y2, &z).unwrap();
        let scale = norm(r2.values());
        for col in z.columns() {
            assert!(dot(col, r2.values()).abs() <= 1e-9 * scale * norm(col));
        }
    }

    #[test]
    fn residualize_matches_normal_equations() {
        let mut rng = StdRng::seed_from_u64(17);
        let n = 25;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let z = CovariateMatrix::with_covariates(n, cols.clone()).unwrap();
        let yv: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y = PhenotypeVector::new(yv.clone()).unwrap();
        let r = residualize(&y, &z).unwrap();

        // Independent solve of the normal equations with nalgebra.
        let mut zm = DMatrix::<f64>::zeros(n, 4);
        for i in 0..n {
            zm[(i, 0)] = 1.0;
            for j in 0..3 {
                zm[(i, j + 1)] = cols[j][i];
            }
        }
        let yv = nalgebra::DVector::from_vec(yv);
        let beta = (zm.transpose() * &zm)
            .cholesky()
            .unwrap()
            .solve(&(zm.transpose() * &yv));
        let fitted = zm * beta;
        for i in 0..n {
            assert_abs_diff_eq!(r.values()[i], yv[i] - fitted[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn rank_deficiency_reported_with_column() {
        let n = 20;
        let z1: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let z2: Vec<f64> = z1.iter().map(|v| 2.0 * v + 1.0).collect();
        let err = CovariateMatrix::with_covariates(n, vec![z1, z2]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("column 2"), "unhelpful message: {msg}");
    }

    #[test]
    fn adjusted_with_intercept_only_is_bitwise_identical() {
        let (x, y) = toy_data(60, 31);
        let z = CovariateMatrix::intercept_only(60);
        for &b in &[0.7, 2.0, 4.0] {
            let r1 = test_finite(&x, &y, b).unwrap();
            let r2 = test_adjusted(&x, &y, &z, b).unwrap();
            assert_eq!(r1.p_value.to_bits(), r2.p_value.to_bits());
            assert_eq!(r1.statistic.to_bits(), r2.statistic.to_bits());
        }
    }

    #[test]
    fn adjustment_absorbs_covariate_effect() {
        // Phenotype driven by a covariate, marker independent: the adjusted
        // test must not find the covariate signal.
        let mut rng = StdRng::seed_from_u64(99);
        let n = 400;
        let (x, _) = toy_data(n, 99);
        let zc: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
        let normal = Normal::new(0.0, 0.3).unwrap();
        let y = PhenotypeVector::new(
            (0..n)
                .map(|i| 5.0 * zc[i] + normal.sample(&mut rng))
                .collect(),
        )
        .unwrap();
        let z = CovariateMatrix::with_covariates(n, vec![zc]).unwrap();
        let adjusted = test_adjusted(&x, &y, &z, 2.0).unwrap();
        // The adjusted statistic must be far smaller than the unadjusted one.
        let unadjusted = test_finite(&x, &y, 2.0).unwrap();
        assert!(adjusted.statistic < unadjusted.statistic);
        assert!(adjusted.p_value > 1e-4, "adjusted p = {}", adjusted.p_value);
    }

    #[test]
    fn multiallelic_m2_equals_biallelic() {
        let (x, y) = toy_data(40, 55);
        let SnpVector::Hard(ref gv) = x else { unreachable!() };
        let n = gv.len();
        let mut counts = DMatrix::<u8>::zeros(n, 2);
        for i in 0..n {
            let c = gv.codes()[i];
            counts[(i, 0)] = c;
            counts[(i, 1)] = 2 - c;
        }
        let rm = test_multiallelic(&counts, &y, 2.0).unwrap();
        let rb = test_finite(&x, &y, 2.0).unwrap();
        assert_eq!(rm.p_value.to_bits(), rb.p_value.to_bits());
    }

    #[test]
    fn multiallelic_absent_allele_is_dropped() {
        // m = 3 with allele 2 never observed behaves like the m = 2 problem.
        let (x, y) = toy_data(40, 56);
        let SnpVector::Hard(ref gv) = x else { unreachable!() };
        let n = gv.len();
        let mut c3 = DMatrix::<u8>::zeros(n, 3);
        let mut c2 = DMatrix::<u8>::zeros(n, 2);
        for i in 0..n {
            let c = gv.codes()[i];
            c3[(i, 0)] = c;
            c3[(i, 1)] = 2 - c;
            c2[(i, 0)] = c;
            c2[(i, 1)] = 2 - c;
        }
        let r3 = test_multiallelic(&c3, &y, 2.0).unwrap();
        let r2 = test_multiallelic(&c2, &y, 2.0).unwrap();
        // m = 3 runs the spectral path, m = 2 the biallelic delegation; both
        // are exact finite-sample evaluations of the same statistic.
        assert_relative_eq!(r3.statistic, r2.statistic, max_relative = 1e-10);
        assert_relative_eq!(r3.p_value, r2.p_value, max_relative = 1e-6);
    }

    #[test]
    fn multiallelic_triallelic_statistic_matches_brute_force() {
        // Brute-force double-centered GDC under the averaged distance.
        let mut rng = StdRng::seed_from_u64(77);
        let n = 30;
        let m = 3;
        let mut counts = DMatrix::<u8>::zeros(n, m);
        for i in 0..n {
            // Random diploid draw of two alleles.
            let a1 = rng.random_range(0..m);
            let a2 = rng.random_range(0..m);
            counts[(i, a1)] += 1;
            counts[(i, a2)] += 1;
        }
        let normal = Normal::new(0.0, 1.0).unwrap();
        let y =
            PhenotypeVector::new((0..n).map(|_| normal.sample(&mut rng)).collect()).unwrap();
        let b = 2.0;
        let r = test_multiallelic(&counts, &y, b).unwrap();

        let spec = SnpDistanceSpec::db(b).unwrap();
        let dist = |i: usize, j: usize| -> f64 {
            (0..m)
                .map(|a| spec.eval(counts[(i, a)], counts[(j, a)]))
                .sum::<f64>()
                / 2.0
        };
        let dx = PairMatrix::from_fn(n, crate::geno::MatrixTag::Distance, dist);
        let dy = PairMatrix::half_squared_differences(y.values());
        let brute = gdc_statistic(&dx, &dy).unwrap();
        assert_relative_eq!(r.statistic, brute, max_relative = 1e-10);
    }

    #[test]
    fn multiallelic_rejects_bad_rows() {
        let mut counts = DMatrix::<u8>::zeros(6, 3);
        for i in 0..6 {
            counts[(i, 0)] = 2;
        }
        counts[(3, 1)] = 1; // row sums to 3
        let y = PhenotypeVector::new(vec![0.1, 0.4, -0.2, 0.8, 0.0, 1.0]).unwrap();
        assert!(test_multiallelic(&counts, &y, 2.0).is_err());
    }

    #[test]
    fn scan_screened_and_naive_agree_on_exact_markers() {
        let mut rng = StdRng::seed_from_u64(123);
        let n = 200;
        let n_snps = 50;
        let normal = Normal::new(0.0, 1.0).unwrap();
        let snps: Vec<SnpVector> = (0..n_snps)
            .map(|_| {
                let maf = 0.1 + 0.4 * rng.random::<f64>();
                let codes: Vec<u8> = (0..n)
                    .map(|_| {
                        let u: f64 = rng.random();
                        let p0 = (1.0 - maf) * (1.0 - maf);
                        let p1 = 2.0 * maf * (1.0 - maf);
                        if u < p0 {
                            0
                        } else if u < p0 + p1 {
                            1
                        } else {
                            2
                        }
                    })
                    .collect();
                SnpVector::Hard(GenotypeVector::new(codes).unwrap())
            })
            .collect();
        // Signal on the first marker so some p-values are small.
        let effect: Vec<f64> = match &snps[0] {
            SnpVector::Hard(g) => g.codes().iter().map(|&c| f64::from(c) * 1.2).collect(),
            _ => unreachable!(),
        };
        let y = PhenotypeVector::new(
            (0..n)
                .map(|i| effect[i] + normal.sample(&mut rng))
                .collect(),
        )
        .unwrap();

        let screened = scan(&snps, &y, None, &ScanConfig::default()).unwrap();
        let naive = scan(
            &snps,
            &y,
            None,
            &ScanConfig {
                screening: false,
                ..ScanConfig::default()
            },
        )
        .unwrap();
        assert_eq!(screened.len(), naive.len());
        let mut n_exact = 0;
        for (s, nv) in screened.iter().zip(&naive) {
            if s.flags.contains(ResultFlags::EXACT) {
                assert_eq!(s.p_value.to_bits(), nv.p_value.to_bits());
                n_exact += 1;
            } else {
                // Screened-out markers carry a valid bracket around the
                // exactly evaluated value.
                let lo = s.p_lo.unwrap();
                let hi = s.p_hi.unwrap();
                assert!(
                    lo <= nv.p_value * (1.0 + 1e-9) && nv.p_value <= hi * (1.0 + 1e-9),
                    "bracket [{lo}, {hi}] misses exact {}",
                    nv.p_value
                );
            }
        }
        assert!(n_exact >= 1, "expected the causal marker to pass the screen");
        assert!(
            screened
                .iter()
                .any(|r| r.flags.contains(ResultFlags::BOUND_ONLY_LOW)),
            "expected null markers to be screened out"
        );
    }

    #[test]
    fn scan_preserves_input_order_and_flags_degenerates() {
        let (x0, y) = toy_data(30, 8);
        let mono = SnpVector::Hard(GenotypeVector::new(vec![2; 30]).unwrap());
        // A marker whose complete-pair count is too small is degenerate.
        let mut sparse_codes = vec![crate::geno::MISSING; 30];
        for (i, v) in [0u8, 1, 2, 1].iter().enumerate() {
            sparse_codes[i] = *v;
        }
        let sparse = SnpVector::Hard(GenotypeVector::new(sparse_codes).unwrap());
        let snps = vec![x0.clone(), mono, sparse, x0];
        let out = scan(&snps, &y, None, &ScanConfig::default()).unwrap();
        assert_eq!(out.len(), 4);
        assert!(out[1].flags.contains(ResultFlags::MONOMORPHIC));
        assert!(out[2].flags.contains(ResultFlags::DEGENERATE));
        assert!(out[2].p_value.is_nan());
        assert_eq!(out[0].p_value.to_bits(), out[3].p_value.to_bits());
    }

    #[test]
    fn flags_display_joins_names() {
        let f = ResultFlags::EXACT | ResultFlags::MONOMORPHIC;
        assert_eq!(f.to_string(), "EXACT|MONOMORPHIC");
        assert_eq!(ResultFlags::empty().to_string(), "NONE");
    }
}
