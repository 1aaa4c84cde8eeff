//! Python bindings for the distance-covariance genotype testing library.
//!
//! The module exposes the statistical core — association tests and scans,
//! pairwise marker dependence tests, categorical independence and
//! goodness-of-fit tests, the null-distribution numerics, and the simulation
//! models — with plain Python types at the boundary: genotype vectors are
//! lists of `0/1/2/None`, phenotypes are lists of floats (`None` or NaN for
//! missing), tables are nested lists, and premetrics are named by string
//! (`"discrete"`, `"euclidean"`, `"dominant"`, `"recessive"`,
//! `"heterozygous"`, or `"db:<b>"`).

use dcovgen::assoc::{
    self, CovariateMatrix, PhenotypeVector, ScanConfig, SnpVector, TestMethod,
};
use dcovgen::categorical::{self, ContingencyTable, GofSpec};
use dcovgen::epistasis::{self, SnpPosition};
use dcovgen::geno::{GenotypeVector, SnpDistanceSpec, MISSING};
use dcovgen::quadform::{self, QuadFormWeights};
use dcovgen::sim::{self, SeededGenerator};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: dcovgen::Error) -> PyErr {
    use dcovgen::Error as E;
    match e {
        E::InvalidParameter(_) | E::DimensionMismatch(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn genotypes(codes: Vec<Option<u8>>) -> PyResult<GenotypeVector> {
    GenotypeVector::new(codes.into_iter().map(|c| c.unwrap_or(MISSING)).collect()).map_err(err)
}

fn phenotype(values: Vec<Option<f64>>) -> PyResult<PhenotypeVector> {
    PhenotypeVector::from_options(&values).map_err(err)
}

fn metric(name: &str) -> PyResult<SnpDistanceSpec> {
    name.parse().map_err(err)
}

fn design(n: usize, covariates: Option<Vec<Vec<f64>>>) -> PyResult<Option<CovariateMatrix>> {
    match covariates {
        None => Ok(None),
        Some(cols) => Ok(Some(CovariateMatrix::with_covariates(n, cols).map_err(err)?)),
    }
}

// ---------------------------------------------------------------------------
// Result wrappers
// ---------------------------------------------------------------------------

/// Outcome of one genotype–phenotype association test.
#[pyclass(frozen, get_all, name = "AssocResult")]
struct PyAssocResult {
    statistic: f64,
    p_value: f64,
    p_lo: Option<f64>,
    p_hi: Option<f64>,
    eigenvalues: (f64, f64),
    n_effective: usize,
    flags: String,
}

#[pymethods]
impl PyAssocResult {
    fn __repr__(&self) -> String {
        format!(
            "AssocResult(statistic={}, p_value={}, flags={})",
            self.statistic, self.p_value, self.flags
        )
    }
}

impl From<assoc::AssocResult> for PyAssocResult {
    fn from(r: assoc::AssocResult) -> Self {
        Self {
            statistic: r.statistic,
            p_value: r.p_value,
            p_lo: r.p_lo,
            p_hi: r.p_hi,
            eigenvalues: r.eigenvalues,
            n_effective: r.n_effective,
            flags: r.flags.to_string(),
        }
    }
}

/// Outcome of one pairwise marker dependence test.
#[pyclass(frozen, get_all, name = "PairResult")]
struct PyPairResult {
    statistic: f64,
    p_value: f64,
    eigen_x: (f64, f64),
    eigen_y: (f64, f64),
    n: usize,
    flags: String,
}

#[pymethods]
impl PyPairResult {
    fn __repr__(&self) -> String {
        format!(
            "PairResult(statistic={}, p_value={}, flags={})",
            self.statistic, self.p_value, self.flags
        )
    }
}

/// Outcome of a categorical independence or goodness-of-fit test.
#[pyclass(frozen, get_all, name = "TableResult")]
struct PyTableResult {
    statistic: f64,
    p_value: f64,
    weights: Vec<f64>,
    df: Option<u64>,
    flags: String,
}

#[pymethods]
impl PyTableResult {
    fn __repr__(&self) -> String {
        format!(
            "TableResult(statistic={}, p_value={}, flags={})",
            self.statistic, self.p_value, self.flags
        )
    }
}

impl From<categorical::TestResult> for PyTableResult {
    fn from(r: categorical::TestResult) -> Self {
        Self {
            statistic: r.statistic,
            p_value: r.p_value,
            weights: r.weights,
            df: r.df,
            flags: r.flags.to_string(),
        }
    }
}

/// One reported pair from a case/control dependence scan.
#[pyclass(frozen, get_all, name = "EpistasisHit")]
struct PyEpistasisHit {
    snp_a: usize,
    snp_b: usize,
    p_cases: f64,
    p_controls: f64,
    classification: String,
    flags_cases: String,
    flags_controls: String,
}

#[pymethods]
impl PyEpistasisHit {
    fn __repr__(&self) -> String {
        format!(
            "EpistasisHit(snp_a={}, snp_b={}, classification={})",
            self.snp_a, self.snp_b, self.classification
        )
    }
}

// ---------------------------------------------------------------------------
// Association tests
// ---------------------------------------------------------------------------

/// Tests one marker against a quantitative phenotype.
///
/// `method` is "finite" (exact finite-sample null), "asymptotic", or "auto"
/// (finite below 30k observations). `covariates` is a list of columns; when
/// given, the adjusted finite-sample test runs regardless of `method`.
#[pyfunction]
#[pyo3(signature = (codes, y, b = 2.0, method = "auto", covariates = None))]
fn assoc_test(
    codes: Vec<Option<u8>>,
    y: Vec<Option<f64>>,
    b: f64,
    method: &str,
    covariates: Option<Vec<Vec<f64>>>,
) -> PyResult<PyAssocResult> {
    let x = SnpVector::from(genotypes(codes)?);
    let y = phenotype(y)?;
    if let Some(z) = design(y.len(), covariates)? {
        return Ok(assoc::test_adjusted(&x, &y, &z, b).map_err(err)?.into());
    }
    let use_finite = match method {
        "finite" => true,
        "asymptotic" => false,
        "auto" => y.len() <= 30_000,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown method '{other}'; expected auto, finite, or asymptotic"
            )))
        }
    };
    let r = if use_finite {
        assoc::test_finite(&x, &y, b)
    } else {
        assoc::test_asymptotic(&x, &y, b)
    };
    Ok(r.map_err(err)?.into())
}

/// The raw statistic `V̂_b²` for one marker (complete pairs only).
#[pyfunction]
#[pyo3(signature = (codes, y, b = 2.0))]
fn vb2_statistic(codes: Vec<Option<u8>>, y: Vec<Option<f64>>, b: f64) -> PyResult<f64> {
    let x = SnpVector::from(genotypes(codes)?);
    assoc::vb2_statistic(&x, &phenotype(y)?, b).map_err(err)
}

/// Scans many markers against one phenotype with optional two-stage
/// screening; returns one result per marker in input order.
#[pyfunction]
#[pyo3(signature = (snps, y, b = 2.0, covariates = None, screening = true, method = "auto",
                    screen_min = 1e-4, screen_floor = 1e-64))]
#[allow(clippy::too_many_arguments)]
fn scan(
    py: Python<'_>,
    snps: Vec<Vec<Option<u8>>>,
    y: Vec<Option<f64>>,
    b: f64,
    covariates: Option<Vec<Vec<f64>>>,
    screening: bool,
    method: &str,
    screen_min: f64,
    screen_floor: f64,
) -> PyResult<Vec<PyAssocResult>> {
    let xs: Vec<SnpVector> = snps
        .into_iter()
        .map(|codes| genotypes(codes).map(SnpVector::from))
        .collect::<PyResult<_>>()?;
    let y = phenotype(y)?;
    let z = design(y.len(), covariates)?;
    let config = ScanConfig {
        b,
        screen_min,
        screen_floor,
        method: match method {
            "finite" => TestMethod::Finite,
            "asymptotic" => TestMethod::Asymptotic,
            "auto" => TestMethod::Auto,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown method '{other}'; expected auto, finite, or asymptotic"
                )))
            }
        },
        screening,
    };
    let results = py
        .detach(|| assoc::scan(&xs, &y, z.as_ref(), &config))
        .map_err(err)?;
    Ok(results.into_iter().map(Into::into).collect())
}

// ---------------------------------------------------------------------------
// Pairwise marker dependence
// ---------------------------------------------------------------------------

/// Tests independence of two markers under a named premetric.
#[pyfunction]
#[pyo3(signature = (x1, x2, metric = "discrete"))]
fn pair_test(
    x1: Vec<Option<u8>>,
    x2: Vec<Option<u8>>,
    metric: &str,
) -> PyResult<PyPairResult> {
    let spec = self::metric(metric)?;
    let r = epistasis::pair_test(&genotypes(x1)?, &genotypes(x2)?, &spec).map_err(err)?;
    Ok(PyPairResult {
        statistic: r.statistic,
        p_value: r.p_value,
        eigen_x: r.eigen_x,
        eigen_y: r.eigen_y,
        n: r.n,
        flags: r.flags.to_string(),
    })
}

/// Closed-form nonzero eigenvalue pair of one ternary marginal under a
/// named premetric.
#[pyfunction]
#[pyo3(signature = (probs, metric = "discrete"))]
fn ternary_eigenvalues(probs: [f64; 3], metric: &str) -> PyResult<(f64, f64)> {
    epistasis::ternary_eigenvalues(probs, &self::metric(metric)?).map_err(err)
}

/// Benjamini–Hochberg step-up rejections at level `q` (NaN counts as 1).
#[pyfunction]
fn bh_fdr(pvalues: Vec<f64>, q: f64) -> PyResult<Vec<bool>> {
    epistasis::bh_fdr(&pvalues, q).map_err(err)
}

/// Scans case and control marker panels for pairwise dependence.
///
/// `cases` and `controls` each hold one code list per marker (same marker
/// order). `positions` is an optional list of `(chromosome, bp)` pairs;
/// same-chromosome pairs closer than `min_distance_bp` are skipped when both
/// are given.
#[pyfunction]
#[pyo3(signature = (cases, controls, metric = "discrete", q = 0.05,
                    min_distance_bp = None, positions = None))]
fn epistasis_scan(
    py: Python<'_>,
    cases: Vec<Vec<Option<u8>>>,
    controls: Vec<Vec<Option<u8>>>,
    metric: &str,
    q: f64,
    min_distance_bp: Option<u64>,
    positions: Option<Vec<(String, u64)>>,
) -> PyResult<Vec<PyEpistasisHit>> {
    let spec = self::metric(metric)?;
    let cases: Vec<GenotypeVector> = cases.into_iter().map(genotypes).collect::<PyResult<_>>()?;
    let controls: Vec<GenotypeVector> =
        controls.into_iter().map(genotypes).collect::<PyResult<_>>()?;
    let positions: Option<Vec<SnpPosition>> = positions.map(|ps| {
        ps.into_iter()
            .map(|(chromosome, position_bp)| SnpPosition {
                chromosome,
                position_bp,
            })
            .collect()
    });
    let hits = py
        .detach(|| {
            epistasis::epistasis_scan(
                &cases,
                &controls,
                &spec,
                q,
                min_distance_bp,
                positions.as_deref(),
            )
        })
        .map_err(err)?;
    Ok(hits
        .into_iter()
        .map(|h| PyEpistasisHit {
            snp_a: h.snp_a,
            snp_b: h.snp_b,
            p_cases: h.p_cases,
            p_controls: h.p_controls,
            classification: h.classification.to_string(),
            flags_cases: h.flags_cases.to_string(),
            flags_controls: h.flags_controls.to_string(),
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Categorical tests
// ---------------------------------------------------------------------------

fn table(counts: Vec<Vec<u64>>) -> PyResult<ContingencyTable> {
    ContingencyTable::new(counts).map_err(err)
}

/// Distance-covariance independence test on a contingency table.
#[pyfunction]
fn dcov_independence(counts: Vec<Vec<u64>>) -> PyResult<PyTableResult> {
    Ok(categorical::dcov_indep_test(&table(counts)?).map_err(err)?.into())
}

/// Pearson chi-square independence test on a contingency table.
#[pyfunction]
fn pearson_chi2(counts: Vec<Vec<u64>>) -> PyResult<PyTableResult> {
    Ok(categorical::pearson_chi2(&table(counts)?).map_err(err)?.into())
}

/// Likelihood-ratio (G) independence test on a contingency table.
#[pyfunction]
fn g_test(counts: Vec<Vec<u64>>) -> PyResult<PyTableResult> {
    Ok(categorical::g_test(&table(counts)?).map_err(err)?.into())
}

/// Energy goodness-of-fit test of counts against null probabilities.
#[pyfunction]
fn energy_gof(probs: Vec<f64>, counts: Vec<u64>) -> PyResult<PyTableResult> {
    let spec = GofSpec::new(probs, counts).map_err(err)?;
    Ok(categorical::energy_gof_test(&spec).map_err(err)?.into())
}

/// Pearson chi-square goodness-of-fit test of counts against null
/// probabilities.
#[pyfunction]
fn pearson_gof(probs: Vec<f64>, counts: Vec<u64>) -> PyResult<PyTableResult> {
    let spec = GofSpec::new(probs, counts).map_err(err)?;
    Ok(categorical::pearson_chi2_gof(&spec).map_err(err)?.into())
}

/// Genotype probabilities implied by equilibrium allele frequencies (two
/// frequencies give three ordered genotypes, three give six).
#[pyfunction]
fn hwe_expected(thetas: Vec<f64>) -> PyResult<Vec<f64>> {
    categorical::hwe_expected(&thetas).map_err(err)
}

/// Nonzero eigenvalues of `diag(p) − p pᵗ`, descending.
#[pyfunction]
fn multinomial_spectrum(probs: Vec<f64>) -> PyResult<Vec<f64>> {
    if probs.is_empty() || probs.iter().any(|v| !v.is_finite()) {
        return Err(PyValueError::new_err(
            "probabilities must be a nonempty list of finite numbers",
        ));
    }
    Ok(categorical::multinomial_spectrum(&probs))
}

// ---------------------------------------------------------------------------
// Null-distribution numerics
// ---------------------------------------------------------------------------

/// Finite-sample upper-tail probability of the recentered two-eigenvalue
/// statistic at its observed value `k`, on `n` observations with
/// `p_covariates` regression columns (0 = unadjusted).
#[pyfunction]
#[pyo3(signature = (l1, l2, k, n, p_covariates = 0))]
fn tn_tail(l1: f64, l2: f64, k: f64, n: u32, p_covariates: u32) -> PyResult<f64> {
    quadform::tn_tail(l1, l2, k, n, p_covariates).map_err(err)
}

/// Cheap lower/upper bracket `(p*, p**)` around the finite-sample tail.
#[pyfunction]
fn pvalue_bounds(l1: f64, l2: f64, k: f64, n: u32) -> PyResult<(f64, f64)> {
    quadform::pvalue_bounds(l1, l2, k, n).map_err(err)
}

/// Upper-tail probability of `Σ wᵢ·χ²₁` at `x`.
#[pyfunction]
fn wchisq_sf(weights: Vec<f64>, x: f64) -> PyResult<f64> {
    quadform::wchisq_sf(&QuadFormWeights::new(weights).map_err(err)?, x).map_err(err)
}

/// The Appell F1 double hypergeometric series inside its convergence domain.
#[pyfunction]
fn appell_f1(a: f64, b1: f64, b2: f64, c: f64, x: f64, y: f64) -> PyResult<f64> {
    quadform::appell_f1(a, b1, b2, c, x, y).map_err(err)
}

// ---------------------------------------------------------------------------
// Simulation models
// ---------------------------------------------------------------------------

/// Draws `n` biallelic genotypes at equilibrium with the given minor allele
/// frequency; deterministic in `(seed, stream)`.
#[pyfunction]
#[pyo3(signature = (maf, n, seed = 0, stream = 0))]
fn sample_hwe_genotypes(maf: f64, n: usize, seed: u64, stream: u64) -> PyResult<Vec<u8>> {
    let mut gen = SeededGenerator::new(seed, stream);
    Ok(sim::sample_hwe_genotypes(maf, n, &mut gen)
        .map_err(err)?
        .codes()
        .to_vec())
}

/// Draws a genotype vector and a phenotype with additive-coded effect `beta`
/// and heterozygote weight `h`; returns `(codes, phenotype)`.
#[pyfunction]
#[pyo3(signature = (maf, h, beta, n, seed = 0, stream = 0))]
fn sample_power_model(
    maf: f64,
    h: f64,
    beta: f64,
    n: usize,
    seed: u64,
    stream: u64,
) -> PyResult<(Vec<u8>, Vec<f64>)> {
    let mut gen = SeededGenerator::new(seed, stream);
    let (x, y) = sim::sample_power_model(maf, h, beta, n, &mut gen).map_err(err)?;
    Ok((x.codes().to_vec(), y.values().to_vec()))
}

/// Joint 3×3 genotype-pair law with exponential-family dependence `e ≥ 1`
/// (`e = 1` is independence).
#[pyfunction]
fn qexp_table(p: f64, q: f64, r: f64, s: f64, e: f64) -> PyResult<Vec<Vec<f64>>> {
    let m = sim::qexp_table(p, q, r, s, e).map_err(err)?;
    Ok(m.cells().iter().map(|row| row.to_vec()).collect())
}

/// Joint 3×3 genotype-pair law with multiplicative dependence `g ∈ [0, 1]`
/// (`g = 1` is independence).
#[pyfunction]
fn qmult_table(p: f64, q: f64, r: f64, s: f64, g: f64) -> PyResult<Vec<Vec<f64>>> {
    let m = sim::qmult_table(p, q, r, s, g).map_err(err)?;
    Ok(m.cells().iter().map(|row| row.to_vec()).collect())
}

/// Genotype probabilities under a parametric equilibrium departure
/// (`model` is "2s", "2k", "3s", or "3k"; param 0 is the null).
#[pyfunction]
fn hwe_departure(model: &str, param: f64) -> PyResult<Vec<f64>> {
    let m: sim::HweDepartureModel = model.parse().map_err(err)?;
    sim::hwe_departure(m, param).map_err(err)
}

/// Cell probabilities with geometrically decaying margins and an optional
/// dependence perturbation `eps` in the top-left 2×2 block.
#[pyfunction]
#[pyo3(signature = (rows, cols, eps = 0.0))]
fn decaying_marginals(rows: usize, cols: usize, eps: f64) -> PyResult<Vec<Vec<f64>>> {
    sim::decaying_marginals(rows, cols, eps).map_err(err)
}

#[pymodule]
fn dcovgen_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAssocResult>()?;
    m.add_class::<PyPairResult>()?;
    m.add_class::<PyTableResult>()?;
    m.add_class::<PyEpistasisHit>()?;
    m.add_function(wrap_pyfunction!(assoc_test, m)?)?;
    m.add_function(wrap_pyfunction!(vb2_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(scan, m)?)?;
    m.add_function(wrap_pyfunction!(pair_test, m)?)?;
    m.add_function(wrap_pyfunction!(ternary_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(bh_fdr, m)?)?;
    m.add_function(wrap_pyfunction!(epistasis_scan, m)?)?;
    m.add_function(wrap_pyfunction!(dcov_independence, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_chi2, m)?)?;
    m.add_function(wrap_pyfunction!(g_test, m)?)?;
    m.add_function(wrap_pyfunction!(energy_gof, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_gof, m)?)?;
    m.add_function(wrap_pyfunction!(hwe_expected, m)?)?;
    m.add_function(wrap_pyfunction!(multinomial_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(tn_tail, m)?)?;
    m.add_function(wrap_pyfunction!(pvalue_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(wchisq_sf, m)?)?;
    m.add_function(wrap_pyfunction!(appell_f1, m)?)?;
    m.add_function(wrap_pyfunction!(sample_hwe_genotypes, m)?)?;
    m.add_function(wrap_pyfunction!(sample_power_model, m)?)?;
    m.add_function(wrap_pyfunction!(qexp_table, m)?)?;
    m.add_function(wrap_pyfunction!(qmult_table, m)?)?;
    m.add_function(wrap_pyfunction!(hwe_departure, m)?)?;
    m.add_function(wrap_pyfunction!(decaying_marginals, m)?)?;
    Ok(())
}
