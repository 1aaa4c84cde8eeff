//! SNP–SNP interaction testing.
//!
//! The statistic is the distance covariance between two markers on the
//! genotype space `{0,1,2}`, computed from the 3×3 joint count table in O(n).
//! Under independence `n·V̂²` converges to a weighted sum of four chi-squares
//! whose weights are the pairwise products of two per-marker eigenvalue
//! pairs; for the discrete and Euclidean metrics those eigenvalues have
//! closed forms in the marginal probabilities, and any other premetric takes
//! a generic 3×3 spectral path. A three-marker multivariance test, a
//! permutation oracle, Benjamini–Hochberg selection, and the case/control
//! scan driver complete the module.

use crate::assoc::ResultFlags;
use crate::error::{Error, Result};
use crate::geno::{GenotypeVector, SnpDistanceSpec};
use crate::quadform::{wchisq_sf, QuadFormWeights};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

/// Discriminant magnitudes below this are rounding residue of an exact
/// double eigenvalue and are clamped to zero.
const DISC_CLAMP: f64 = 1e-14;

/// Relative threshold under which a spectral eigenvalue is an exact zero.
const EIGEN_TRUNCATION_REL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Marginal eigenvalues
// ---------------------------------------------------------------------------

fn validate_simplex(p: &[f64; 3]) -> Result<()> {
    for (i, &v) in p.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::invalid(format!(
                "probability {i} is {v}; must be finite and nonnegative"
            )));
        }
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "probabilities sum to {s}, expected 1"
        )));
    }
    Ok(())
}

/// The two (possibly coincident) nonzero eigenvalues of the centered
/// premetric operator at marginal `p`, in descending order.
///
/// These are the per-marker weight factors of the null distribution of
/// `n·V̂²`. The discrete metric (`d_b` at `b = 1`) and the Euclidean metric
/// (`b = 2`) use closed forms in `p`; every other premetric goes through the
/// generic 3×3 spectrum. The operator is positive semidefinite with a
/// one-dimensional kernel, so exactly two eigenvalues can be nonzero.
///
/// # Errors
///
/// Fails when `p` is not a probability vector.
pub fn ternary_eigenvalues(p: [f64; 3], metric: &SnpDistanceSpec) -> Result<(f64, f64)> {
    validate_simplex(&p)?;
    let prod: f64 = p.iter().product();
    let closed = |mid_sum: f64, prod_coef: f64| -> (f64, f64) {
        let mid = 0.5 * mid_sum;
        let mut disc = mid * mid - prod_coef * prod;
        if disc.abs() < DISC_CLAMP {
            disc = 0.0;
        }
        // The operator is positive semidefinite; a negative discriminant
        // beyond the clamp cannot occur for a valid simplex point.
        let root = disc.max(0.0).sqrt();
        (mid + root, (mid - root).max(0.0))
    };
    match metric.b() {
        Some(b) if b == 1.0 => {
            let sum_sq: f64 = p.iter().map(|v| v * v).sum();
            Ok(closed(2.0 * 0.5 * (1.0 - sum_sq), 3.0))
        }
        Some(b) if b == 2.0 => {
            let s = p[0] * (1.0 - p[0]) + p[2] * (1.0 - p[2]);
            Ok(closed(2.0 * s, 4.0))
        }
        _ => Ok(table_spectrum(&p, &metric.table())),
    }
}

/// Nonzero spectrum of `D_√p · (−Ã) · D_√p` where `Ã` is the premetric table
/// double-centered under `p`.
fn table_spectrum(p: &[f64; 3], table: &[[f64; 3]; 3]) -> (f64, f64) {
    let r: Vec<f64> = (0..3)
        .map(|a| (0..3).map(|b| p[b] * table[a][b]).sum())
        .collect();
    let grand: f64 = (0..3).map(|a| p[a] * r[a]).sum();
    let m = DMatrix::<f64>::from_fn(3, 3, |a, b| {
        -(p[a] * p[b]).sqrt() * (table[a][b] - r[a] - r[b] + grand)
    });
    let trace = m.trace();
    let eig = SymmetricEigen::new(m);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|x, y| y.total_cmp(x));
    let clamp = |v: f64| {
        if v.abs() <= EIGEN_TRUNCATION_REL * trace.abs() {
            0.0
        } else {
            v.max(0.0)
        }
    };
    (clamp(vals[0]), clamp(vals[1]))
}

// ---------------------------------------------------------------------------
// Joint tabulation and the table-form statistic
// ---------------------------------------------------------------------------

/// Centered premetric table `Ã(a,b) = d(a,b) − r_a − r_b + d̄` under `p`.
fn centered_table(p: &[f64; 3], table: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let r: Vec<f64> = (0..3)
        .map(|a| (0..3).map(|b| p[b] * table[a][b]).sum())
        .collect();
    let grand: f64 = (0..3).map(|a| p[a] * r[a]).sum();
    let mut out = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            out[a][b] = table[a][b] - r[a] - r[b] + grand;
        }
    }
    out
}

/// 3×3 joint counts over pairwise-complete entries.
fn joint_counts(x1: &GenotypeVector, x2: &GenotypeVector) -> Result<[[f64; 3]; 3]> {
    if x1.len() != x2.len() {
        return Err(Error::dims(format!(
            "markers have lengths {} and {}",
            x1.len(),
            x2.len()
        )));
    }
    let mut counts = [[0.0; 3]; 3];
    for (&a, &b) in x1.codes().iter().zip(x2.codes()) {
        if a != crate::geno::MISSING && b != crate::geno::MISSING {
            counts[a as usize][b as usize] += 1.0;
        }
    }
    Ok(counts)
}

/// `n·V̂²` from joint counts and the two centered premetric tables.
///
/// Grouping the double-centered matrix sum by genotype pair collapses the
/// O(n²) trace form to 81 products.
fn statistic_from_counts(
    counts: &[[f64; 3]; 3],
    at: &[[f64; 3]; 3],
    bt: &[[f64; 3]; 3],
    n: f64,
) -> f64 {
    let mut total = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            if counts[a][b] == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for a2 in 0..3 {
                for b2 in 0..3 {
                    inner += counts[a2][b2] * at[a][a2] * bt[b][b2];
                }
            }
            total += counts[a][b] * inner;
        }
    }
    // (1/n²)·ΣΣ … scaled by n for the test statistic.
    total / n
}

fn row_marginals(counts: &[[f64; 3]; 3], n: f64) -> [f64; 3] {
    [
        (counts[0][0] + counts[0][1] + counts[0][2]) / n,
        (counts[1][0] + counts[1][1] + counts[1][2]) / n,
        (counts[2][0] + counts[2][1] + counts[2][2]) / n,
    ]
}

fn col_marginals(counts: &[[f64; 3]; 3], n: f64) -> [f64; 3] {
    [
        (counts[0][0] + counts[1][0] + counts[2][0]) / n,
        (counts[0][1] + counts[1][1] + counts[2][1]) / n,
        (counts[0][2] + counts[1][2] + counts[2][2]) / n,
    ]
}

// ---------------------------------------------------------------------------
// Pair test
// ---------------------------------------------------------------------------

/// Outcome of one two-marker independence test.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTestResult {
    /// The scaled statistic `n·V̂²`.
    pub statistic: f64,
    /// Upper-tail p-value against the weighted chi-square null.
    pub p_value: f64,
    /// Eigenvalue pair of the first marker's marginal.
    pub eigen_x: (f64, f64),
    /// Eigenvalue pair of the second marker's marginal.
    pub eigen_y: (f64, f64),
    /// Premetric the test was run under.
    pub metric: SnpDistanceSpec,
    /// Complete-pair count.
    pub n: usize,
    /// How the result was obtained.
    pub flags: ResultFlags,
}

/// Tests independence of two markers: `p = P(Σ λᵢμⱼ Zᵢⱼ² ≥ n·V̂²)` with all
/// four weight products.
///
/// A monomorphic marginal (or one the premetric cannot separate, possible
/// for the merged dominance tables) makes the statistic identically zero and
/// yields `p = 1` with the `MONOMORPHIC` flag in the first case.
///
/// # Errors
///
/// Fails on length mismatch or fewer than 10 complete pairs.
pub fn pair_test(
    x1: &GenotypeVector,
    x2: &GenotypeVector,
    metric: &SnpDistanceSpec,
) -> Result<PairTestResult> {
    let counts = joint_counts(x1, x2)?;
    let n: f64 = counts.iter().flatten().sum();
    if n < 10.0 {
        return Err(Error::degenerate(format!(
            "only {n} complete pairs; need at least 10"
        )));
    }
    let p = row_marginals(&counts, n);
    let q = col_marginals(&counts, n);
    let table = metric.table();
    let at = centered_table(&p, &table);
    let bt = centered_table(&q, &table);
    let statistic = statistic_from_counts(&counts, &at, &bt, n);
    let eigen_x = ternary_eigenvalues(p, metric)?;
    let eigen_y = ternary_eigenvalues(q, metric)?;

    let mut flags = ResultFlags::EXACT;
    let monomorphic = p.iter().any(|&v| v == 1.0) || q.iter().any(|&v| v == 1.0);
    if monomorphic {
        flags.insert(ResultFlags::MONOMORPHIC);
    }
    let p_value = if monomorphic || eigen_x.0 <= 0.0 || eigen_y.0 <= 0.0 {
        // Degenerate null spectrum: the statistic is identically zero.
        1.0
    } else {
        let weights = eigen_products(&[eigen_x, eigen_y]);
        wchisq_sf(&QuadFormWeights::new(weights)?, statistic)?.clamp(0.0, 1.0)
    };
    Ok(PairTestResult {
        statistic,
        p_value,
        eigen_x,
        eigen_y,
        metric: *metric,
        n: n as usize,
        flags,
    })
}

/// All products of one eigenvalue per pair (4 for two pairs, 8 for three).
fn eigen_products(pairs: &[(f64, f64)]) -> Vec<f64> {
    let mut out = vec![1.0];
    for &(a, b) in pairs {
        let mut next = Vec::with_capacity(out.len() * 2);
        for v in &out {
            next.push(v * a);
            next.push(v * b);
        }
        out = next;
    }
    out
}

// ---------------------------------------------------------------------------
// Permutation oracle
// ---------------------------------------------------------------------------

/// Default replicate count `200 + ⌊5000/n⌋`, shrinking as the analytic
/// approximation improves with sample size.
pub fn default_permutation_count(n: usize) -> usize {
    200 + 5000 / n
}

/// Monte Carlo permutation p-value `(1 + #{stat* ≥ stat})/(B + 1)` for the
/// two-marker statistic, used as an oracle for [`pair_test`].
///
/// The marginals are permutation-invariant, so the centered tables are
/// precomputed and each replicate costs one O(n) tabulation plus an 81-term
/// contraction.
///
/// # Errors
///
/// As [`pair_test`].
pub fn permutation_pvalue<R: Rng + ?Sized>(
    x1: &GenotypeVector,
    x2: &GenotypeVector,
    metric: &SnpDistanceSpec,
    replicates: Option<usize>,
    rng: &mut R,
) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::dims(format!(
            "markers have lengths {} and {}",
            x1.len(),
            x2.len()
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&a, &b) in x1.codes().iter().zip(x2.codes()) {
        if a != crate::geno::MISSING && b != crate::geno::MISSING {
            xs.push(a as usize);
            ys.push(b as usize);
        }
    }
    let n = xs.len();
    if n < 10 {
        return Err(Error::degenerate(format!(
            "only {n} complete pairs; need at least 10"
        )));
    }
    let nf = n as f64;
    let mut counts = [[0.0; 3]; 3];
    for (&a, &b) in xs.iter().zip(&ys) {
        counts[a][b] += 1.0;
    }
    let p = row_marginals(&counts, nf);
    let q = col_marginals(&counts, nf);
    let table = metric.table();
    let at = centered_table(&p, &table);
    let bt = centered_table(&q, &table);
    let observed = statistic_from_counts(&counts, &at, &bt, nf);

    let b = replicates.unwrap_or_else(|| default_permutation_count(n));
    let mut at_least = 0usize;
    for _ in 0..b {
        ys.shuffle(rng);
        let mut c = [[0.0; 3]; 3];
        for (&a, &y) in xs.iter().zip(&ys) {
            c[a][y] += 1.0;
        }
        if statistic_from_counts(&c, &at, &bt, nf) >= observed {
            at_least += 1;
        }
    }
    Ok((1 + at_least) as f64 / (b + 1) as f64)
}

// ---------------------------------------------------------------------------
// Three-marker multivariance
// ---------------------------------------------------------------------------

/// Outcome of the three-marker joint-independence test.
#[derive(Debug, Clone, PartialEq)]
pub struct Mv3TestResult {
    /// The scaled statistic `n·M̂²` (can round below zero under dependence).
    pub statistic: f64,
    /// Upper-tail p-value against the eight-weight chi-square null.
    pub p_value: f64,
    /// Marginal eigenvalue pairs of the three markers.
    pub eigen_x: (f64, f64),
    /// Second marker.
    pub eigen_y: (f64, f64),
    /// Third marker.
    pub eigen_z: (f64, f64),
    /// Premetric the test was run under.
    pub metric: SnpDistanceSpec,
    /// Complete-triple count.
    pub n: usize,
    /// How the result was obtained.
    pub flags: ResultFlags,
}

/// Tests joint independence of three markers with the sample distance
/// multivariance `M̂² = −(1/n²)Σ AᵢⱼBᵢⱼCᵢⱼ`; under joint independence
/// `n·M̂²` converges to the eight-product weighted chi-square sum.
///
/// # Errors
///
/// Fails on length mismatch or fewer than 10 complete triples.
pub fn mv3_test(
    x1: &GenotypeVector,
    x2: &GenotypeVector,
    x3: &GenotypeVector,
    metric: &SnpDistanceSpec,
) -> Result<Mv3TestResult> {
    if x1.len() != x2.len() || x1.len() != x3.len() {
        return Err(Error::dims(format!(
            "markers have lengths {}, {}, {}",
            x1.len(),
            x2.len(),
            x3.len()
        )));
    }
    // Joint counts over the 27 genotype triples.
    let mut counts = [[[0.0f64; 3]; 3]; 3];
    for i in 0..x1.len() {
        let (a, b, c) = (x1.codes()[i], x2.codes()[i], x3.codes()[i]);
        if a != crate::geno::MISSING && b != crate::geno::MISSING && c != crate::geno::MISSING {
            counts[a as usize][b as usize][c as usize] += 1.0;
        }
    }
    let n: f64 = counts.iter().flatten().flatten().sum();
    if n < 10.0 {
        return Err(Error::degenerate(format!(
            "only {n} complete triples; need at least 10"
        )));
    }
    let mut p = [0.0; 3];
    let mut q = [0.0; 3];
    let mut r = [0.0; 3];
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                let v = counts[a][b][c];
                p[a] += v;
                q[b] += v;
                r[c] += v;
            }
        }
    }
    for v in p.iter_mut().chain(q.iter_mut()).chain(r.iter_mut()) {
        *v /= n;
    }
    let table = metric.table();
    let at = centered_table(&p, &table);
    let bt = centered_table(&q, &table);
    let ct = centered_table(&r, &table);

    // −(1/n²) Σᵢⱼ A∘B∘C grouped by genotype triple: 27×27 products.
    let mut total = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                if counts[a][b][c] == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for a2 in 0..3 {
                    for b2 in 0..3 {
                        for c2 in 0..3 {
                            inner += counts[a2][b2][c2] * at[a][a2] * bt[b][b2] * ct[c][c2];
                        }
                    }
                }
                total += counts[a][b][c] * inner;
            }
        }
    }
    let statistic = -total / n;

    let eigen_x = ternary_eigenvalues(p, metric)?;
    let eigen_y = ternary_eigenvalues(q, metric)?;
    let eigen_z = ternary_eigenvalues(r, metric)?;
    let mut flags = ResultFlags::EXACT;
    let monomorphic = [p, q, r].iter().any(|m| m.iter().any(|&v| v == 1.0));
    if monomorphic {
        flags.insert(ResultFlags::MONOMORPHIC);
    }
    let p_value = if monomorphic || eigen_x.0 <= 0.0 || eigen_y.0 <= 0.0 || eigen_z.0 <= 0.0 {
        1.0
    } else {
        let weights = eigen_products(&[eigen_x, eigen_y, eigen_z]);
        wchisq_sf(&QuadFormWeights::new(weights)?, statistic)?.clamp(0.0, 1.0)
    };
    Ok(Mv3TestResult {
        statistic,
        p_value,
        eigen_x,
        eigen_y,
        eigen_z,
        metric: *metric,
        n: n as usize,
        flags,
    })
}

// ---------------------------------------------------------------------------
// Benjamini–Hochberg selection
// ---------------------------------------------------------------------------

/// Benjamini–Hochberg step-up rejection mask at FDR level `q`.
///
/// NaN p-values (degenerate tests) are treated as 1 and never rejected.
/// Tied p-values share a fate: if the largest index satisfying the step-up
/// inequality has value t, every p ≤ t is rejected.
///
/// # Errors
///
/// Fails when `q` is outside `(0, 1)`.
pub fn bh_fdr(pvalues: &[f64], q: f64) -> Result<Vec<bool>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("FDR level q = {q} outside (0, 1)")));
    }
    let m = pvalues.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let cleaned: Vec<f64> = pvalues
        .iter()
        .map(|&p| if p.is_nan() { 1.0 } else { p })
        .collect();
    let mut sorted = cleaned.clone();
    sorted.sort_by(f64::total_cmp);
    let mut threshold = -1.0;
    for (k, &p) in sorted.iter().enumerate() {
        if p <= q * (k + 1) as f64 / m as f64 {
            threshold = p;
        }
    }
    Ok(cleaned.iter().map(|&p| p <= threshold).collect())
}

// ---------------------------------------------------------------------------
// Case/control scan
// ---------------------------------------------------------------------------

/// How a pair's case/control rejection pattern is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpistasisClass {
    /// Rejected in cases only: candidate disease-specific interaction.
    PutativeInteraction,
    /// Rejected in controls only: dependence attributed to population
    /// structure rather than disease.
    PopulationSubstructure,
    /// Rejected in both groups or in neither.
    None,
}

impl std::fmt::Display for EpistasisClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EpistasisClass::PutativeInteraction => "PUTATIVE_INTERACTION",
            EpistasisClass::PopulationSubstructure => "POPULATION_SUBSTRUCTURE",
            EpistasisClass::None => "NONE",
        };
        write!(f, "{s}")
    }
}

/// Genomic location used by the physical proximity filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnpPosition {
    /// Chromosome label (compared by equality only).
    pub chromosome: String,
    /// Base-pair coordinate.
    pub position_bp: u64,
}

/// One tested marker pair of the case/control scan.
#[derive(Debug, Clone, PartialEq)]
pub struct EpistasisHit {
    /// Index of the first marker (input order).
    pub snp_a: usize,
    /// Index of the second marker.
    pub snp_b: usize,
    /// Independence p-value among cases.
    pub p_cases: f64,
    /// Independence p-value among controls.
    pub p_controls: f64,
    /// Joint interpretation after FDR selection in each group.
    pub classification: EpistasisClass,
    /// Flags from the case-group test.
    pub flags_cases: ResultFlags,
    /// Flags from the control-group test.
    pub flags_controls: ResultFlags,
}

/// Default physical proximity filter: 1 Mb.
pub const DEFAULT_MIN_DISTANCE_BP: u64 = 1_000_000;

/// Tests all retained marker pairs in cases and controls separately, applies
/// Benjamini–Hochberg at level `q` within each group, and classifies each
/// pair by its rejection pattern.
///
/// When `positions` are supplied, pairs on the same chromosome closer than
/// `min_distance_bp` (default 1 Mb) are excluded, removing linkage-driven
/// dependence. Per-pair failures yield NaN p-values flagged `DEGENERATE`
/// (never rejected); the scan itself does not abort.
///
/// # Errors
///
/// Fails on global misconfiguration: differing SNP counts between groups,
/// inconsistent vector lengths within a group, a position list of the wrong
/// length, or `q` outside `(0, 1)`.
pub fn epistasis_scan(
    cases: &[GenotypeVector],
    controls: &[GenotypeVector],
    metric: &SnpDistanceSpec,
    q: f64,
    min_distance_bp: Option<u64>,
    positions: Option<&[SnpPosition]>,
) -> Result<Vec<EpistasisHit>> {
    if cases.len() != controls.len() {
        return Err(Error::dims(format!(
            "cases have {} markers, controls have {}",
            cases.len(),
            controls.len()
        )));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("FDR level q = {q} outside (0, 1)")));
    }
    let l = cases.len();
    for (group, name) in [(cases, "cases"), (controls, "controls")] {
        for (i, g) in group.iter().enumerate() {
            if g.len() != group[0].len() {
                return Err(Error::dims(format!(
                    "{name} marker {i} has {} entries, expected {}",
                    g.len(),
                    group[0].len()
                )));
            }
        }
    }
    if let Some(pos) = positions {
        if pos.len() != l {
            return Err(Error::dims(format!(
                "{} positions for {l} markers",
                pos.len()
            )));
        }
    }
    let min_bp = min_distance_bp.unwrap_or(DEFAULT_MIN_DISTANCE_BP);

    let mut pairs = Vec::new();
    for i in 0..l {
        for j in (i + 1)..l {
            if let Some(pos) = positions {
                let same_chrom = pos[i].chromosome == pos[j].chromosome;
                let close = pos[i].position_bp.abs_diff(pos[j].position_bp) <= min_bp;
                if same_chrom && close {
                    continue;
                }
            }
            pairs.push((i, j));
        }
    }

    let tested: Vec<(f64, f64, ResultFlags, ResultFlags)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let run = |group: &[GenotypeVector]| match pair_test(&group[i], &group[j], metric) {
                Ok(r) => (r.p_value, r.flags),
                Err(_) => (f64::NAN, ResultFlags::DEGENERATE),
            };
            let (pc, fc) = run(cases);
            let (pk, fk) = run(controls);
            (pc, pk, fc, fk)
        })
        .collect();

    let p_cases: Vec<f64> = tested.iter().map(|t| t.0).collect();
    let p_controls: Vec<f64> = tested.iter().map(|t| t.1).collect();
    let rej_cases = bh_fdr(&p_cases, q)?;
    let rej_controls = bh_fdr(&p_controls, q)?;

    Ok(pairs
        .iter()
        .zip(tested)
        .zip(rej_cases.iter().zip(&rej_controls))
        .map(|((&(i, j), (pc, pk, fc, fk)), (&rc, &rk))| EpistasisHit {
            snp_a: i,
            snp_b: j,
            p_cases: pc,
            p_controls: pk,
            classification: match (rc, rk) {
                (true, false) => EpistasisClass::PutativeInteraction,
                (false, true) => EpistasisClass::PopulationSubstructure,
                _ => EpistasisClass::None,
            },
            flags_cases: fc,
            flags_controls: fk,
        })
        .collect())
}
