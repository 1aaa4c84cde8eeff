//! Independence and goodness-of-fit tests on finite categorical supports.
//!
//! The independence statistic is the distance covariance of the two category
//! labels under discrete metrics, which collapses to `(1/n)ΣΣ(n_ij − n*_ij)²`
//! on the contingency table; its null is a weighted chi-square sum whose
//! weights are products of the nonzero eigenvalues of the two multinomial
//! covariance matrices at the empirical marginals. The goodness-of-fit
//! statistic is the analogous energy distance to a fixed null distribution,
//! with weights from the null's own multinomial covariance — no estimation.
//! Classical Pearson and likelihood-ratio baselines and a margin-conditional
//! permutation oracle round out the module.

use crate::assoc::ResultFlags;
use crate::error::{Error, Result};
use crate::quadform::{chi2_sf, wchisq_sf, QuadFormWeights};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Hypergeometric};

/// Relative threshold under which a spectral eigenvalue is an exact zero.
const EIGEN_TRUNCATION_REL: f64 = 1e-12;

/// Tolerance for probability vectors summing to one.
const SIMPLEX_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Inputs
// ---------------------------------------------------------------------------

/// An `I×J` table of nonnegative counts with cached margins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    n: u64,
}

impl ContingencyTable {
    /// Wraps a rectangular count grid.
    ///
    /// # Errors
    ///
    /// Fails on an empty or ragged grid or an all-zero table.
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.is_empty() || counts[0].is_empty() {
            return Err(Error::invalid("contingency table must be nonempty"));
        }
        let j = counts[0].len();
        for (i, row) in counts.iter().enumerate() {
            if row.len() != j {
                return Err(Error::dims(format!(
                    "row {i} has {} columns, expected {j}",
                    row.len()
                )));
            }
        }
        let row_sums: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums: Vec<u64> = (0..j)
            .map(|c| counts.iter().map(|r| r[c]).sum())
            .collect();
        let n: u64 = row_sums.iter().sum();
        if n == 0 {
            return Err(Error::degenerate("contingency table has no observations"));
        }
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            n,
        })
    }

    /// Tabulates paired category labels (0-based) into a table sized by the
    /// largest observed label in each coordinate.
    ///
    /// # Errors
    ///
    /// Fails on length mismatch or empty input.
    pub fn from_observations(rows: &[usize], cols: &[usize]) -> Result<Self> {
        if rows.len() != cols.len() {
            return Err(Error::dims(format!(
                "{} row labels vs {} column labels",
                rows.len(),
                cols.len()
            )));
        }
        if rows.is_empty() {
            return Err(Error::invalid("no observations to tabulate"));
        }
        let i = rows.iter().max().unwrap() + 1;
        let j = cols.iter().max().unwrap() + 1;
        let mut counts = vec![vec![0u64; j]; i];
        for (&r, &c) in rows.iter().zip(cols) {
            counts[r][c] += 1;
        }
        Self::new(counts)
    }

    /// The count grid.
    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    /// Number of rows.
    pub fn n_rows(&self) -> usize {
        self.counts.len()
    }

    /// Number of columns.
    pub fn n_cols(&self) -> usize {
        self.counts[0].len()
    }

    /// Row margins `n_i·`.
    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    /// Column margins `n_·j`.
    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    /// Grand total.
    pub fn total(&self) -> u64 {
        self.n
    }

    /// Expected count `n_i·n_·j/n` under independence.
    pub fn expected(&self, i: usize, j: usize) -> f64 {
        self.row_sums[i] as f64 * self.col_sums[j] as f64 / self.n as f64
    }

    /// The table with zero-margin rows and columns removed, plus whether
    /// anything was removed.
    fn drop_empty_margins(&self) -> (ContingencyTable, bool) {
        let keep_rows: Vec<usize> = (0..self.n_rows())
            .filter(|&i| self.row_sums[i] > 0)
            .collect();
        let keep_cols: Vec<usize> = (0..self.n_cols())
            .filter(|&j| self.col_sums[j] > 0)
            .collect();
        let dropped =
            keep_rows.len() != self.n_rows() || keep_cols.len() != self.n_cols();
        if !dropped {
            return (self.clone(), false);
        }
        let counts = keep_rows
            .iter()
            .map(|&i| keep_cols.iter().map(|&j| self.counts[i][j]).collect())
            .collect();
        (
            ContingencyTable::new(counts).expect("nonempty by construction"),
            true,
        )
    }
}

/// A goodness-of-fit problem: observed counts against fixed null category
/// probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct GofSpec {
    probs: Vec<f64>,
    counts: Vec<u64>,
}

impl GofSpec {
    /// Pairs null probabilities with observed counts.
    ///
    /// # Errors
    ///
    /// Fails on length mismatch, probabilities off the simplex (tolerance
    /// 1e-12), or empty input.
    pub fn new(probs: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("goodness-of-fit needs at least one category"));
        }
        if probs.len() != counts.len() {
            return Err(Error::dims(format!(
                "{} probabilities vs {} counts",
                probs.len(),
                counts.len()
            )));
        }
        validate_simplex(&probs)?;
        Ok(Self { probs, counts })
    }

    /// Null probabilities.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Observed counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total observations.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn validate_simplex(p: &[f64]) -> Result<()> {
    for (i, &v) in p.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::invalid(format!(
                "probability {i} is {v}; must be finite and nonnegative"
            )));
        }
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::invalid(format!(
            "probabilities sum to {s}, expected 1"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

/// Outcome of one categorical test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    /// The test statistic (scaled distance covariance, energy distance,
    /// χ², or G depending on the test).
    pub statistic: f64,
    /// Upper-tail p-value against the test's reference distribution.
    pub p_value: f64,
    /// Weights of the chi-square mixture null (empty for classical tests).
    pub weights: Vec<f64>,
    /// Degrees of freedom of a classical chi-square reference, when used.
    pub df: Option<u64>,
    /// How the result was obtained.
    pub flags: ResultFlags,
}

// ---------------------------------------------------------------------------
// Spectral helpers
// ---------------------------------------------------------------------------

/// Nonzero eigenvalues (descending) of the multinomial covariance
/// `diag(p) − ppᵗ`; rank is one less than the number of positive entries.
pub fn multinomial_spectrum(p: &[f64]) -> Vec<f64> {
    let k = p.len();
    let m = DMatrix::<f64>::from_fn(k, k, |i, j| {
        let d = if i == j { p[i] } else { 0.0 };
        d - p[i] * p[j]
    });
    let trace = m.trace();
    let eig = SymmetricEigen::new(m);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals.retain(|v| *v > EIGEN_TRUNCATION_REL * trace.abs());
    vals
}

// ---------------------------------------------------------------------------
// Table statistics
// ---------------------------------------------------------------------------

fn dcov_table_statistic(t: &ContingencyTable) -> f64 {
    let n = t.total() as f64;
    let mut s = 0.0;
    for i in 0..t.n_rows() {
        for j in 0..t.n_cols() {
            let d = t.counts()[i][j] as f64 - t.expected(i, j);
            s += d * d;
        }
    }
    s / n
}

fn pearson_table_statistic(t: &ContingencyTable) -> f64 {
    let mut s = 0.0;
    for i in 0..t.n_rows() {
        for j in 0..t.n_cols() {
            let e = t.expected(i, j);
            if e > 0.0 {
                let d = t.counts()[i][j] as f64 - e;
                s += d * d / e;
            }
        }
    }
    s
}

fn g_table_statistic(t: &ContingencyTable) -> f64 {
    let mut s = 0.0;
    for i in 0..t.n_rows() {
        for j in 0..t.n_cols() {
            let o = t.counts()[i][j] as f64;
            if o > 0.0 {
                s += o * (o / t.expected(i, j)).ln();
            }
        }
    }
    2.0 * s
}

// ---------------------------------------------------------------------------
// Independence tests
// ---------------------------------------------------------------------------

/// Distance-covariance independence test on a contingency table:
/// statistic `(1/n)ΣΣ(n_ij − n*_ij)²`, null weights `λ̂ᵢμ̂ⱼ` from the
/// multinomial covariances at the empirical marginals.
///
/// Zero-margin rows and columns are dropped first (they contribute exact
/// zero eigenvalues) and flagged. If fewer than two rows or columns remain,
/// the statistic is identically zero and `p = 1`.
///
/// # Errors
///
/// Fails when the input has fewer than two rows or columns, or fewer than
/// 10 observations.
pub fn dcov_indep_test(t: &ContingencyTable) -> Result<TestResult> {
    if t.n_rows() < 2 || t.n_cols() < 2 {
        return Err(Error::invalid(format!(
            "need at least a 2×2 table, got {}×{}",
            t.n_rows(),
            t.n_cols()
        )));
    }
    if t.total() < 10 {
        return Err(Error::degenerate(format!(
            "only {} observations; need at least 10",
            t.total()
        )));
    }
    let (t, dropped) = t.drop_empty_margins();
    let mut flags = ResultFlags::EXACT;
    if dropped {
        flags.insert(ResultFlags::EMPTY_MARGIN_DROPPED);
    }
    let statistic = dcov_table_statistic(&t);
    if t.n_rows() < 2 || t.n_cols() < 2 {
        // One surviving category on either side: independence is vacuous.
        flags.insert(ResultFlags::MONOMORPHIC);
        return Ok(TestResult {
            statistic,
            p_value: 1.0,
            weights: Vec::new(),
            df: None,
            flags,
        });
    }
    let n = t.total() as f64;
    let q: Vec<f64> = t.row_sums().iter().map(|&v| v as f64 / n).collect();
    let r: Vec<f64> = t.col_sums().iter().map(|&v| v as f64 / n).collect();
    let lambda = multinomial_spectrum(&q);
    let mu = multinomial_spectrum(&r);
    let mut weights = Vec::with_capacity(lambda.len() * mu.len());
    for &l in &lambda {
        for &m in &mu {
            weights.push(l * m);
        }
    }
    let p_value = wchisq_sf(&QuadFormWeights::new(weights.clone())?, statistic)?;
    Ok(TestResult {
        statistic,
        p_value: p_value.clamp(0.0, 1.0),
        weights,
        df: None,
        flags,
    })
}

/// Pearson's chi-square test of independence with the `(I−1)(J−1)`-df
/// reference, after zero-margin dropping.
///
/// # Errors
///
/// As [`dcov_indep_test`].
pub fn pearson_chi2(t: &ContingencyTable) -> Result<TestResult> {
    if t.n_rows() < 2 || t.n_cols() < 2 {
        return Err(Error::invalid(format!(
            "need at least a 2×2 table, got {}×{}",
            t.n_rows(),
            t.n_cols()
        )));
    }
    let (t, dropped) = t.drop_empty_margins();
    let mut flags = ResultFlags::EXACT;
    if dropped {
        flags.insert(ResultFlags::EMPTY_MARGIN_DROPPED);
    }
    let statistic = pearson_table_statistic(&t);
    if t.n_rows() < 2 || t.n_cols() < 2 {
        flags.insert(ResultFlags::MONOMORPHIC);
        return Ok(TestResult {
            statistic,
            p_value: 1.0,
            weights: Vec::new(),
            df: Some(0),
            flags,
        });
    }
    let df = (t.n_rows() as u64 - 1) * (t.n_cols() as u64 - 1);
    Ok(TestResult {
        statistic,
        p_value: chi2_sf(df as f64, statistic),
        weights: Vec::new(),
        df: Some(df),
        flags,
    })
}

/// Likelihood-ratio (G) test of independence: `G = 2ΣΣ n_ij ln(n_ij/n*_ij)`
/// over positive cells, with the same chi-square reference as Pearson.
///
/// # Errors
///
/// As [`dcov_indep_test`].
pub fn g_test(t: &ContingencyTable) -> Result<TestResult> {
    if t.n_rows() < 2 || t.n_cols() < 2 {
        return Err(Error::invalid(format!(
            "need at least a 2×2 table, got {}×{}",
            t.n_rows(),
            t.n_cols()
        )));
    }
    let (t, dropped) = t.drop_empty_margins();
    let mut flags = ResultFlags::EXACT;
    if dropped {
        flags.insert(ResultFlags::EMPTY_MARGIN_DROPPED);
    }
    let statistic = g_table_statistic(&t);
    if t.n_rows() < 2 || t.n_cols() < 2 {
        flags.insert(ResultFlags::MONOMORPHIC);
        return Ok(TestResult {
            statistic,
            p_value: 1.0,
            weights: Vec::new(),
            df: Some(0),
            flags,
        });
    }
    let df = (t.n_rows() as u64 - 1) * (t.n_cols() as u64 - 1);
    Ok(TestResult {
        statistic,
        p_value: chi2_sf(df as f64, statistic),
        weights: Vec::new(),
        df: Some(df),
        flags,
    })
}

// ---------------------------------------------------------------------------
// Goodness of fit
// ---------------------------------------------------------------------------

/// Energy-distance goodness-of-fit test: statistic `E_n = (1/n)Σ(n_i −
/// n·p_i)²`, null weights the nonzero eigenvalues of `diag(p) − ppᵗ` at the
/// **null** probabilities (no estimation).
///
/// A degenerate nullated at a single category makes the test trivial:
/// `p = 1` exactly when all observations fall there.
///
/// # Errors
///
/// Fails with fewer than 10 observations.
pub fn energy_gof_test(g: &GofSpec) -> Result<TestResult> {
    let n = g.total();
    if n < 10 {
        return Err(Error::degenerate(format!(
            "only {n} observations; need at least 10"
        )));
    }
    let nf = n as f64;
    let statistic = g
        .counts()
        .iter()
        .zip(g.probs())
        .map(|(&c, &p)| {
            let d = c as f64 - nf * p;
            d * d
        })
        .sum::<f64>()
        / nf;
    let weights = multinomial_spectrum(g.probs());
    if weights.is_empty() {
        // Point-mass null: the statistic is zero iff the data sit entirely
        // on the unit-probability category.
        let p_value = if statistic <= 0.0 { 1.0 } else { 0.0 };
        return Ok(TestResult {
            statistic,
            p_value,
            weights,
            df: None,
            flags: ResultFlags::EXACT,
        });
    }
    let p_value = wchisq_sf(&QuadFormWeights::new(weights.clone())?, statistic)?;
    Ok(TestResult {
        statistic,
        p_value: p_value.clamp(0.0, 1.0),
        weights,
        df: None,
        flags: ResultFlags::EXACT,
    })
}

/// Pearson's chi-square goodness-of-fit test against fixed probabilities.
///
/// Cells with zero null probability are skipped (and flagged); the degrees
/// of freedom count only the positive-probability categories.
///
/// # Errors
///
/// Fails with fewer than 10 observations or no positive-probability cells.
pub fn pearson_chi2_gof(g: &GofSpec) -> Result<TestResult> {
    let n = g.total();
    if n < 10 {
        return Err(Error::degenerate(format!(
            "only {n} observations; need at least 10"
        )));
    }
    let nf = n as f64;
    let mut statistic = 0.0;
    let mut positive = 0u64;
    let mut skipped = false;
    for (&c, &p) in g.counts().iter().zip(g.probs()) {
        if p > 0.0 {
            positive += 1;
            let d = c as f64 - nf * p;
            statistic += d * d / (nf * p);
        } else {
            skipped = true;
        }
    }
    if positive < 2 {
        return Err(Error::degenerate(
            "need at least two positive-probability categories",
        ));
    }
    let mut flags = ResultFlags::EXACT;
    if skipped {
        flags.insert(ResultFlags::ZERO_EXPECTED_CELLS);
    }
    let df = positive - 1;
    Ok(TestResult {
        statistic,
        p_value: chi2_sf(df as f64, statistic),
        weights: Vec::new(),
        df: Some(df),
        flags,
    })
}

// ---------------------------------------------------------------------------
// Permutation oracle (margin-conditional tables)
// ---------------------------------------------------------------------------

/// Which statistic a permutation run recomputes per replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableStatistic {
    /// The scaled distance-covariance statistic.
    #[default]
    DistanceCovariance,
    /// Pearson's χ².
    PearsonChi2,
    /// The likelihood-ratio G statistic.
    GTest,
}

/// Draws a table from the margin-conditional null (the distribution of a
/// table under independence given both margins) by sequential hypergeometric
/// cell filling.
fn patefield_table<R: Rng + ?Sized>(
    row_sums: &[u64],
    col_sums: &[u64],
    rng: &mut R,
) -> Vec<Vec<u64>> {
    let i_n = row_sums.len();
    let j_n = col_sums.len();
    let mut out = vec![vec![0u64; j_n]; i_n];
    let mut colrem = col_sums.to_vec();
    let mut totrem: u64 = col_sums.iter().sum();
    for i in 0..i_n {
        if i == i_n - 1 {
            out[i].copy_from_slice(&colrem);
            break;
        }
        let mut draws = row_sums[i];
        // Units available in columns j.. of the unfilled region.
        let mut pool = totrem;
        for j in 0..j_n {
            if draws == 0 {
                break;
            }
            if j == j_n - 1 {
                out[i][j] = draws;
                colrem[j] -= draws;
                break;
            }
            let k = if colrem[j] == 0 {
                0
            } else {
                Hypergeometric::new(pool, colrem[j], draws)
                    .expect("margins form a valid hypergeometric")
                    .sample(rng)
            };
            out[i][j] = k;
            colrem[j] -= k;
            pool -= colrem[j] + k;
            draws -= k;
        }
        totrem -= row_sums[i];
    }
    out
}

/// Monte Carlo p-value of `statistic_kind` over margin-preserving null
/// tables: `(1 + #{stat* ≥ stat})/(B + 1)` with `B` defaulting to 999.
///
/// Used as the resampling oracle for [`dcov_indep_test`]; the expected
/// counts are margin-determined and shared across replicates.
///
/// # Errors
///
/// Fails on tables smaller than 2×2 or a replicate count under 99.
pub fn perm_indep_pvalue<R: Rng + ?Sized>(
    t: &ContingencyTable,
    statistic_kind: TableStatistic,
    replicates: Option<usize>,
    rng: &mut R,
) -> Result<f64> {
    if t.n_rows() < 2 || t.n_cols() < 2 {
        return Err(Error::invalid(format!(
            "need at least a 2×2 table, got {}×{}",
            t.n_rows(),
            t.n_cols()
        )));
    }
    let b = replicates.unwrap_or(999);
    if b < 99 {
        return Err(Error::invalid(format!(
            "{b} replicates is too few; need at least 99"
        )));
    }
    let (t, _) = t.drop_empty_margins();
    let stat = |table: &ContingencyTable| match statistic_kind {
        TableStatistic::DistanceCovariance => dcov_table_statistic(table),
        TableStatistic::PearsonChi2 => pearson_table_statistic(table),
        TableStatistic::GTest => g_table_statistic(table),
    };
    let observed = stat(&t);
    let mut at_least = 0usize;
    for _ in 0..b {
        let counts = patefield_table(t.row_sums(), t.col_sums(), rng);
        let table = ContingencyTable::new(counts).expect("margins preserved");
        if stat(&table) >= observed {
            at_least += 1;
        }
    }
    Ok((1 + at_least) as f64 / (b + 1) as f64)
}

// ---------------------------------------------------------------------------
// Hardy–Weinberg null probabilities
// ---------------------------------------------------------------------------

/// Genotype probabilities under Hardy–Weinberg equilibrium for two or three
/// allele frequencies.
///
/// Two alleles yield `(θ₁², 2θ₁θ₂, θ₂²)` in the conventional genotype order
/// (first homozygote, heterozygote, second homozygote). Three alleles yield
/// six categories ordered homozygotes first: `(θ₁², θ₂², θ₃², 2θ₁θ₂, 2θ₁θ₃,
/// 2θ₂θ₃)`.
///
/// # Errors
///
/// Fails when the frequencies are off the simplex or the allele count is
/// not 2 or 3.
pub fn hwe_expected(thetas: &[f64]) -> Result<Vec<f64>> {
    validate_simplex(thetas)?;
    match thetas {
        [t1, t2] => Ok(vec![t1 * t1, 2.0 * t1 * t2, t2 * t2]),
        [t1, t2, t3] => Ok(vec![
            t1 * t1,
            t2 * t2,
            t3 * t3,
            2.0 * t1 * t2,
            2.0 * t1 * t3,
            2.0 * t2 * t3,
        ]),
        _ => Err(Error::invalid(format!(
            "{} allele frequencies; supported counts are 2 and 3",
            thetas.len()
        ))),
    }
}
