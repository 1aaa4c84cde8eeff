//! Batch front end for the distance-covariance genotype testing engine:
//! association scans, case/control pair scans, categorical tests, goodness
//! of fit, simulation designs, and throughput benchmarks.
//!
//! Machine-readable summaries go to standard output; progress and warnings
//! go to standard error. Exit codes: 0 success, 2 usage or configuration
//! error, 3 unreadable or malformed input data, 4 computation failure.

use clap::{Parser, Subcommand};
use dcovgen::assoc::{
    AssocResult, CovariateMatrix, PhenotypeVector, ResultFlags, ScanConfig, SnpVector,
    TestMethod,
};
use dcovgen::categorical::{
    dcov_indep_test, energy_gof_test, g_test, hwe_expected, pearson_chi2, pearson_chi2_gof,
    perm_indep_pvalue, ContingencyTable, GofSpec, TableStatistic,
};
use dcovgen::epistasis::{
    epistasis_scan, pair_test, EpistasisClass, SnpPosition, DEFAULT_MIN_DISTANCE_BP,
};
use dcovgen::geno::{GenotypeVector, SnpDistanceSpec};
use dcovgen::plink::{
    apply_qc, read_covariate_table, read_pheno_table, write_results, BedDataset, QcConfig,
    ResultRow, RESULTS_FORMAT_VERSION,
};
use dcovgen::sim::{
    decaying_marginals, hwe_departure, hwe_marginal, qexp_table, qmult_table,
    sample_categorical, sample_hwe_genotypes, sample_joint_labels, sample_power_model,
    HweDepartureModel, JointTernaryModel, SeededGenerator,
};
use rand::Rng;
use rayon::prelude::*;
use std::collections::HashMap;
use std::fmt::Write as FmtWrite;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

/// Genome-wide significance threshold used in scan summaries.
const GENOME_WIDE_ALPHA: f64 = 5e-8;

/// Markers decoded per scan batch; bounds memory at ~chunk × n bytes.
const SCAN_CHUNK: usize = 4096;

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct CliError {
    code: i32,
    msg: String,
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        msg: msg.into(),
    }
}

impl From<dcovgen::Error> for CliError {
    fn from(e: dcovgen::Error) -> Self {
        use dcovgen::Error as E;
        let code = match &e {
            E::Io(_) | E::Parse { .. } => 3,
            E::InvalidParameter(_) | E::DimensionMismatch(_) => 2,
            _ => 4,
        };
        CliError {
            code,
            msg: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: 3,
            msg: e.to_string(),
        }
    }
}

// ---------------------------------------------------------------------------
// Command-line surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "dcovgen",
    version,
    about = "Distance-covariance and energy-statistics tests for genotype data"
)]
struct Cli {
    /// Flat key=value configuration file; command-line flags take precedence
    /// over file entries, which take precedence over built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: the DCOVGEN_WORKERS variable, then all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for anything randomized; identical seeds give identical output
    /// regardless of worker count.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Genotype–phenotype association scan over a binary dataset triplet.
    Scan(ScanArgs),
    /// Case/control SNP-pair dependence scan.
    Epistasis(EpistasisArgs),
    /// Independence tests on a contingency table.
    Categorical(CategoricalArgs),
    /// Goodness-of-fit tests for genotype counts.
    Gof(GofArgs),
    /// Replicate-level simulation designs (delimited output tables).
    Simulate(SimulateArgs),
    /// Screened-versus-naive scan timing.
    Bench(BenchArgs),
}

#[derive(clap::Args)]
struct ScanArgs {
    /// Path stem of the .bed/.bim/.fam triplet.
    #[arg(long)]
    bed: Option<PathBuf>,
    /// Phenotype table (family and individual id columns, then values).
    #[arg(long)]
    pheno: Option<PathBuf>,
    /// Phenotype column name (default: first value column).
    #[arg(long)]
    pheno_col: Option<String>,
    /// Covariate table; every value column is adjusted for.
    #[arg(long)]
    covar: Option<PathBuf>,
    /// Results file (default scan_results.tsv).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Genotype-distance parameter b in [0, 4] (default 2).
    #[arg(long)]
    b: Option<f64>,
    /// Null distribution: auto, finite, or asymptotic (default auto).
    #[arg(long)]
    method: Option<String>,
    /// Evaluate every marker exactly instead of two-stage screening.
    #[arg(long)]
    no_screen: bool,
    /// Screening insignificance threshold M (default 1e-4).
    #[arg(long)]
    screen_min: Option<f64>,
    /// Screening deep-significance floor m (default 1e-64).
    #[arg(long)]
    screen_floor: Option<f64>,
    /// Apply quality-control filters before scanning.
    #[arg(long)]
    qc: bool,
    /// Minimum minor allele frequency for --qc (default 0.01).
    #[arg(long)]
    maf_min: Option<f64>,
    /// Minimum call rate for --qc (default 0.95).
    #[arg(long)]
    call_rate_min: Option<f64>,
    /// Equilibrium test level for --qc (default 0.001).
    #[arg(long)]
    hwe_alpha: Option<f64>,
    /// Count copies of allele 2 instead of allele 1 (reporting only).
    #[arg(long)]
    count_allele2: bool,
}

#[derive(clap::Args)]
struct EpistasisArgs {
    /// Path stem of the .bed/.bim/.fam triplet.
    #[arg(long)]
    bed: Option<PathBuf>,
    /// Case/control status table (default: the .fam phenotype column;
    /// statuses 2/1 or 1/0 mean case/control).
    #[arg(long)]
    pheno: Option<PathBuf>,
    /// Status column name in --pheno (default: first value column).
    #[arg(long)]
    pheno_col: Option<String>,
    /// Results file (default epistasis_results.tsv).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pair distance: discrete, euclidean, dominant, recessive,
    /// heterozygous, or db:<b> (default discrete).
    #[arg(long)]
    metric: Option<String>,
    /// False-discovery level q within each group (default 0.05).
    #[arg(long)]
    q: Option<f64>,
    /// Same-chromosome pairs closer than this many base pairs are skipped
    /// (default 1000000).
    #[arg(long)]
    min_bp: Option<u64>,
    /// Test physically close pairs too.
    #[arg(long)]
    no_position_filter: bool,
    /// Apply quality-control filters (controls-only equilibrium test).
    #[arg(long)]
    qc: bool,
    /// Minimum minor allele frequency for --qc (default 0.01).
    #[arg(long)]
    maf_min: Option<f64>,
    /// Minimum call rate for --qc (default 0.95).
    #[arg(long)]
    call_rate_min: Option<f64>,
    /// Equilibrium test level for --qc (default 0.001).
    #[arg(long)]
    hwe_alpha: Option<f64>,
}

#[derive(clap::Args)]
struct CategoricalArgs {
    /// Count table file: one row per line, whitespace-separated counts.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Inline counts: rows separated by ';', cells by ',' (e.g. "12,9;4,7").
    #[arg(long)]
    counts: Option<String>,
    /// Which tests to run: dcov, pearson, g, or all (default all).
    #[arg(long)]
    test: Option<String>,
    /// Margin-conditional permutation replicates (0 = analytic only).
    #[arg(long)]
    perm: Option<usize>,
}

#[derive(clap::Args)]
struct GofArgs {
    /// Observed category counts, comma-separated (3 or 6 categories).
    #[arg(long)]
    counts: Option<String>,
    /// Null probabilities, comma-separated (overrides --hwe-theta).
    #[arg(long)]
    probs: Option<String>,
    /// Equilibrium null from allele frequencies: a single value F (null
    /// ((1−F)², 2F(1−F), F²) for counts ordered hom/het/hom) or three
    /// comma-separated frequencies for six genotype categories.
    #[arg(long)]
    hwe_theta: Option<String>,
    /// Which tests to run: energy, pearson, or both (default both).
    #[arg(long)]
    test: Option<String>,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Design: assoc-calibration, assoc-power, epistasis, categorical, gof.
    #[arg(long)]
    design: Option<String>,
    /// Replicates (default 1000; 0 writes a header-only table).
    #[arg(long)]
    reps: Option<usize>,
    /// Sample size per replicate (default 300).
    #[arg(long)]
    n: Option<usize>,
    /// Output table (default sim_results.tsv).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Minor allele frequency (default 0.3).
    #[arg(long)]
    maf: Option<f64>,
    /// Genotype-distance parameter b (default 2).
    #[arg(long)]
    b: Option<f64>,
    /// Heterozygote effect h of the power model (default 0.5).
    #[arg(long)]
    h: Option<f64>,
    /// Effect size β of the power model (default 0 = null).
    #[arg(long)]
    beta: Option<f64>,
    /// Pair model for the epistasis design: indep, qexp, or qmult.
    #[arg(long)]
    model: Option<String>,
    /// Pair-model parameter (e for qexp, g for qmult).
    #[arg(long)]
    param: Option<f64>,
    /// Pair distance for the epistasis design (default discrete).
    #[arg(long)]
    metric: Option<String>,
    /// Departure model for the gof design: 2s, 2k, 3s, or 3k (default 2s).
    #[arg(long)]
    departure: Option<String>,
    /// Rows of the categorical design table (default 5).
    #[arg(long)]
    rows: Option<usize>,
    /// Columns of the categorical design table (default 8).
    #[arg(long)]
    cols: Option<usize>,
    /// Dependence perturbation of the categorical design (default 0).
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(clap::Args)]
struct BenchArgs {
    /// Null markers to synthesize (default 100000).
    #[arg(long)]
    snps: Option<usize>,
    /// Sample size (default 8000).
    #[arg(long)]
    n: Option<usize>,
    /// Genotype-distance parameter b (default 2).
    #[arg(long)]
    b: Option<f64>,
    /// Markers timed on the naive path; 0 times the full set (default 2000).
    #[arg(long)]
    naive_subset: Option<usize>,
}

// ---------------------------------------------------------------------------
// Flat key=value configuration
// ---------------------------------------------------------------------------

struct ConfigMap(HashMap<String, String>);

impl ConfigMap {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let mut map = HashMap::new();
        let Some(path) = path else {
            return Ok(Self(map));
        };
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(usage(format!(
                    "{}:{}: expected key=value, got '{line}'",
                    path.display(),
                    idx + 1
                )));
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self(map))
    }

    /// The configured value for `key`, parsed; `None` when absent.
    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                usage(format!("config key '{key}' has unparseable value '{raw}'"))
            }),
        }
    }
}

/// Flag value if given, else config value, else the default.
fn resolve<T: FromStr + Clone>(
    flag: &Option<T>,
    cfg: &ConfigMap,
    key: &str,
    default: T,
) -> CliResult<T> {
    if let Some(v) = flag {
        return Ok(v.clone());
    }
    Ok(cfg.get(key)?.unwrap_or(default))
}

/// Like [`resolve`] but with no default: the setting is mandatory.
fn require<T: FromStr + Clone>(flag: &Option<T>, cfg: &ConfigMap, key: &str) -> CliResult<T> {
    if let Some(v) = flag {
        return Ok(v.clone());
    }
    cfg.get(key)?
        .ok_or_else(|| usage(format!("missing required setting --{key}")))
}

fn require_existing(path: &Path, what: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(usage(format!("{what} {} does not exist", path.display())))
    }
}

fn parse_method(name: &str) -> CliResult<TestMethod> {
    match name.to_ascii_lowercase().as_str() {
        "auto" => Ok(TestMethod::Auto),
        "finite" => Ok(TestMethod::Finite),
        "asymptotic" => Ok(TestMethod::Asymptotic),
        other => Err(usage(format!(
            "unknown method '{other}'; expected auto, finite, or asymptotic"
        ))),
    }
}

fn parse_f64_list(raw: &str, what: &str) -> CliResult<Vec<f64>> {
    raw.split(',')
        .map(|tok| {
            tok.trim()
                .parse()
                .map_err(|_| usage(format!("bad {what} entry '{tok}'")))
        })
        .collect()
}

fn parse_u64_list(raw: &str, what: &str) -> CliResult<Vec<u64>> {
    raw.split(',')
        .map(|tok| {
            tok.trim()
                .parse()
                .map_err(|_| usage(format!("bad {what} entry '{tok}'")))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.msg);
        std::process::exit(e.code);
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = ConfigMap::load(cli.config.as_deref())?;
    let workers = match resolve(&cli.workers, &cfg, "workers", 0usize)? {
        0 => match std::env::var("DCOVGEN_WORKERS") {
            Ok(raw) => raw
                .parse()
                .map_err(|_| usage(format!("DCOVGEN_WORKERS has unparseable value '{raw}'")))?,
            Err(_) => 0,
        },
        w => w,
    };
    if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| usage(format!("cannot size the worker pool: {e}")))?;
    }
    let seed = resolve(&cli.seed, &cfg, "seed", 0u64)?;
    match cli.command {
        Command::Scan(args) => run_scan(args, &cfg),
        Command::Epistasis(args) => run_epistasis(args, &cfg),
        Command::Categorical(args) => run_categorical(args, &cfg, seed),
        Command::Gof(args) => run_gof(args, &cfg),
        Command::Simulate(args) => run_simulate(args, &cfg, seed),
        Command::Bench(args) => run_bench(args, &cfg, seed),
    }
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

fn qc_config(
    maf_min: &Option<f64>,
    call_rate_min: &Option<f64>,
    hwe_alpha: &Option<f64>,
    cfg: &ConfigMap,
) -> CliResult<QcConfig> {
    let d = QcConfig::default();
    Ok(QcConfig {
        maf_min: resolve(maf_min, cfg, "maf-min", d.maf_min)?,
        call_rate_min: resolve(call_rate_min, cfg, "call-rate-min", d.call_rate_min)?,
        hwe_alpha: resolve(hwe_alpha, cfg, "hwe-alpha", d.hwe_alpha)?,
    })
}

fn load_triplet(stem: &Path) -> CliResult<BedDataset> {
    for ext in ["bed", "bim", "fam"] {
        require_existing(&stem.with_extension(ext), "input file")?;
    }
    Ok(BedDataset::read(stem)?)
}

fn run_scan(args: ScanArgs, cfg: &ConfigMap) -> CliResult<()> {
    let stem: PathBuf = require(&args.bed, cfg, "bed")?;
    let pheno_path: PathBuf = require(&args.pheno, cfg, "pheno")?;
    require_existing(&pheno_path, "phenotype file")?;
    let out: PathBuf = resolve(&args.out, cfg, "out", PathBuf::from("scan_results.tsv"))?;
    let scan_config = ScanConfig {
        b: resolve(&args.b, cfg, "b", 2.0)?,
        screen_min: resolve(&args.screen_min, cfg, "screen-min", 1e-4)?,
        screen_floor: resolve(&args.screen_floor, cfg, "screen-floor", 1e-64)?,
        method: parse_method(&resolve(&args.method, cfg, "method", "auto".to_string())?)?,
        screening: !(args.no_screen || cfg.get("no-screen")?.unwrap_or(false)),
    };

    let mut ds = load_triplet(&stem)?;
    ds.set_count_allele2(args.count_allele2 || cfg.get("count-allele2")?.unwrap_or(false));
    eprintln!(
        "loaded {} samples × {} variants from {}",
        ds.n_samples(),
        ds.n_variants(),
        stem.display()
    );
    if args.qc || cfg.get("qc")?.unwrap_or(false) {
        let qc = qc_config(&args.maf_min, &args.call_rate_min, &args.hwe_alpha, cfg)?;
        let (filtered, report) = apply_qc(&ds, None, &qc)?;
        eprintln!(
            "qc: kept {}/{} variants (maf {}, call-rate {}, equilibrium {})",
            report.n_retained,
            report.n_input,
            report.removed_maf.len(),
            report.removed_call_rate.len(),
            report.removed_hwe.len()
        );
        ds = filtered;
    }

    let pheno_col = match resolve(&args.pheno_col, cfg, "pheno-col", String::new())? {
        s if s.is_empty() => None,
        s => Some(s),
    };
    let (mut y_values, alignment) =
        read_pheno_table(&pheno_path, ds.samples(), pheno_col.as_deref())?;
    if alignment.n_unmatched > 0 {
        eprintln!(
            "warning: {} phenotype rows matched no sample",
            alignment.n_unmatched
        );
    }

    let covar_path = match &args.covar {
        Some(p) => Some(p.clone()),
        None => cfg.get::<PathBuf>("covar")?,
    };
    let design = match covar_path {
        None => None,
        Some(path) => {
            require_existing(&path, "covariate file")?;
            let (names, mut columns, _) = read_covariate_table(&path, ds.samples())?;
            // A sample with any unknown covariate can't be adjusted: blank
            // its phenotype so every marker excludes it, then zero the cell
            // (the placeholder never reaches a test).
            let mut dropped = 0usize;
            for i in 0..ds.n_samples() {
                if columns.iter().any(|c| c[i].is_nan()) {
                    if !y_values[i].is_nan() {
                        dropped += 1;
                    }
                    y_values[i] = f64::NAN;
                    for c in columns.iter_mut() {
                        c[i] = 0.0;
                    }
                }
            }
            if dropped > 0 {
                eprintln!("warning: {dropped} samples dropped for missing covariates");
            }
            eprintln!("adjusting for {} covariates: {}", names.len(), names.join(", "));
            Some(CovariateMatrix::with_covariates(ds.n_samples(), columns)?)
        }
    };
    let y = PhenotypeVector::new(y_values)?;

    // Decode and test in batches to keep peak memory at chunk × n bytes.
    let mut results: Vec<AssocResult> = Vec::with_capacity(ds.n_variants());
    let started = Instant::now();
    for chunk_start in (0..ds.n_variants()).step_by(SCAN_CHUNK) {
        let chunk_end = (chunk_start + SCAN_CHUNK).min(ds.n_variants());
        let snps: Vec<SnpVector> = (chunk_start..chunk_end)
            .map(|j| ds.genotypes(j).map(SnpVector::from))
            .collect::<Result<_, _>>()?;
        results.extend(scan_with_config(&snps, &y, design.as_ref(), &scan_config)?);
        eprintln!(
            "scanned {chunk_end}/{} variants ({:.1}s)",
            ds.n_variants(),
            started.elapsed().as_secs_f64()
        );
    }

    let rows: Vec<ResultRow> = results
        .iter()
        .zip(ds.variants())
        .map(|(r, v)| ResultRow {
            id: v.id.clone(),
            chromosome: v.chromosome.clone(),
            position_bp: v.position_bp,
            allele: if ds.counts_allele2() {
                v.allele2.clone()
            } else {
                v.allele1.clone()
            },
            statistic: r.statistic,
            p_value: r.p_value,
            flags: r.flags,
            n_effective: r.n_effective,
        })
        .collect();
    write_results(&rows, &out)?;

    let count = |flag: ResultFlags| results.iter().filter(|r| r.flags.contains(flag)).count();
    let hits = results
        .iter()
        .filter(|r| r.p_value < GENOME_WIDE_ALPHA)
        .count();
    println!(
        "summary scan snps={} exact={} bound_low={} bound_high={} degenerate={} \
         monomorphic={} hits={hits} hit_threshold={GENOME_WIDE_ALPHA:e} out={}",
        results.len(),
        count(ResultFlags::EXACT),
        count(ResultFlags::BOUND_ONLY_LOW),
        count(ResultFlags::BOUND_ONLY_HIGH),
        count(ResultFlags::DEGENERATE),
        count(ResultFlags::MONOMORPHIC),
        out.display()
    );
    Ok(())
}

fn scan_with_config(
    snps: &[SnpVector],
    y: &PhenotypeVector,
    design: Option<&CovariateMatrix>,
    config: &ScanConfig,
) -> CliResult<Vec<AssocResult>> {
    Ok(dcovgen::assoc::scan(snps, y, design, config)?)
}

// ---------------------------------------------------------------------------
// epistasis
// ---------------------------------------------------------------------------

fn case_control_mask(statuses: &[f64]) -> CliResult<Vec<Option<bool>>> {
    let mut distinct: Vec<i64> = statuses
        .iter()
        .filter(|v| v.is_finite())
        .map(|&v| v as i64)
        .collect();
    distinct.sort_unstable();
    distinct.dedup();
    let case_value = if distinct.iter().all(|v| [1, 2].contains(v)) {
        2
    } else if distinct.iter().all(|v| [0, 1].contains(v)) {
        1
    } else {
        return Err(CliError {
            code: 3,
            msg: format!(
                "statuses must be coded 1/2 or 0/1 (case = larger); found {distinct:?}"
            ),
        });
    };
    Ok(statuses
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                None
            } else {
                Some(v as i64 == case_value)
            }
        })
        .collect())
}

fn run_epistasis(args: EpistasisArgs, cfg: &ConfigMap) -> CliResult<()> {
    let stem: PathBuf = require(&args.bed, cfg, "bed")?;
    let out: PathBuf = resolve(&args.out, cfg, "out", PathBuf::from("epistasis_results.tsv"))?;
    let metric: SnpDistanceSpec = resolve(&args.metric, cfg, "metric", "discrete".to_string())?
        .parse()
        .map_err(|e: dcovgen::Error| usage(e.to_string()))?;
    let q = resolve(&args.q, cfg, "q", 0.05)?;
    let min_bp = if args.no_position_filter || cfg.get("no-position-filter")?.unwrap_or(false) {
        None
    } else {
        Some(resolve(&args.min_bp, cfg, "min-bp", DEFAULT_MIN_DISTANCE_BP)?)
    };

    let mut ds = load_triplet(&stem)?;
    let statuses: Vec<f64> = match &args.pheno {
        Some(path) => {
            require_existing(path, "status file")?;
            let col = match resolve(&args.pheno_col, cfg, "pheno-col", String::new())? {
                s if s.is_empty() => None,
                s => Some(s),
            };
            read_pheno_table(path, ds.samples(), col.as_deref())?.0
        }
        None => ds
            .samples()
            .iter()
            .map(|s| s.phenotype.parse().unwrap_or(f64::NAN))
            .collect(),
    };
    let mask = case_control_mask(&statuses)?;
    let n_cases = mask.iter().filter(|m| **m == Some(true)).count();
    let n_controls = mask.iter().filter(|m| **m == Some(false)).count();
    let n_unknown = mask.iter().filter(|m| m.is_none()).count();
    if n_unknown > 0 {
        eprintln!("warning: {n_unknown} samples have unknown status and are excluded");
    }
    eprintln!("groups: {n_cases} cases, {n_controls} controls");

    if args.qc || cfg.get("qc")?.unwrap_or(false) {
        let controls: Vec<bool> = mask.iter().map(|m| *m == Some(false)).collect();
        let qc = qc_config(&args.maf_min, &args.call_rate_min, &args.hwe_alpha, cfg)?;
        let (filtered, report) = apply_qc(&ds, Some(&controls), &qc)?;
        eprintln!(
            "qc: kept {}/{} variants (maf {}, call-rate {}, equilibrium {})",
            report.n_retained,
            report.n_input,
            report.removed_maf.len(),
            report.removed_call_rate.len(),
            report.removed_hwe.len()
        );
        ds = filtered;
    }

    let mut cases = Vec::with_capacity(ds.n_variants());
    let mut controls = Vec::with_capacity(ds.n_variants());
    for j in 0..ds.n_variants() {
        let full = ds.genotypes(j)?;
        let split = |want: bool| -> Result<GenotypeVector, dcovgen::Error> {
            GenotypeVector::new(
                full.codes()
                    .iter()
                    .zip(&mask)
                    .filter(|(_, m)| **m == Some(want))
                    .map(|(&c, _)| c)
                    .collect(),
            )
        };
        cases.push(split(true)?);
        controls.push(split(false)?);
    }
    let positions: Vec<SnpPosition> = ds
        .variants()
        .iter()
        .map(|v| SnpPosition {
            chromosome: v.chromosome.clone(),
            position_bp: v.position_bp,
        })
        .collect();

    let hits = epistasis_scan(&cases, &controls, &metric, q, min_bp, Some(&positions))?;

    let mut text = String::new();
    writeln!(text, "# {RESULTS_FORMAT_VERSION} (pair scan)").expect("infallible");
    writeln!(
        text,
        "snp_a\tsnp_b\tchrom_a\tpos_a\tchrom_b\tpos_b\tp_cases\tp_controls\tclass\t\
         flags_cases\tflags_controls"
    )
    .expect("infallible");
    for h in &hits {
        let (va, vb) = (&ds.variants()[h.snp_a], &ds.variants()[h.snp_b]);
        writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            va.id,
            vb.id,
            va.chromosome,
            va.position_bp,
            vb.chromosome,
            vb.position_bp,
            fmt_float(h.p_cases),
            fmt_float(h.p_controls),
            h.classification,
            h.flags_cases,
            h.flags_controls
        )
        .expect("infallible");
    }
    write_text_atomically(&out, &text)?;

    let by_class = |c: EpistasisClass| hits.iter().filter(|h| h.classification == c).count();
    println!(
        "summary epistasis pairs={} putative={} substructure={} none={} q={q} out={}",
        hits.len(),
        by_class(EpistasisClass::PutativeInteraction),
        by_class(EpistasisClass::PopulationSubstructure),
        by_class(EpistasisClass::None),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// categorical / gof
// ---------------------------------------------------------------------------

fn parse_count_table(args: &CategoricalArgs, cfg: &ConfigMap) -> CliResult<ContingencyTable> {
    let inline = match &args.counts {
        Some(c) => Some(c.clone()),
        None => cfg.get("counts")?,
    };
    let rows: Vec<Vec<u64>> = if let Some(raw) = inline {
        raw.split(';')
            .map(|row| parse_u64_list(row, "count"))
            .collect::<CliResult<_>>()?
    } else {
        let path: PathBuf = require(&args.table, cfg, "table")?;
        require_existing(&path, "table file")?;
        fs::read_to_string(&path)?
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|l| {
                l.split_whitespace()
                    .map(|tok| {
                        tok.parse()
                            .map_err(|_| usage(format!("bad count '{tok}' in {}", path.display())))
                    })
                    .collect()
            })
            .collect::<CliResult<_>>()?
    };
    Ok(ContingencyTable::new(rows)?)
}

fn run_categorical(args: CategoricalArgs, cfg: &ConfigMap, seed: u64) -> CliResult<()> {
    let table = parse_count_table(&args, cfg)?;
    let which = resolve(&args.test, cfg, "test", "all".to_string())?.to_ascii_lowercase();
    let perm = resolve(&args.perm, cfg, "perm", 0usize)?;
    eprintln!(
        "table: {}×{} with {} observations",
        table.n_rows(),
        table.n_cols(),
        table.total()
    );
    let wants = |name: &str| which == "all" || which == name;
    if !["all", "dcov", "pearson", "g"].contains(&which.as_str()) {
        return Err(usage(format!(
            "unknown test '{which}'; expected dcov, pearson, g, or all"
        )));
    }
    if wants("dcov") {
        let r = dcov_indep_test(&table)?;
        println!(
            "test=dcov statistic={} p_value={} weights={} flags={}",
            fmt_float(r.statistic),
            fmt_float(r.p_value),
            r.weights.len(),
            r.flags
        );
        if perm > 0 {
            let mut gen = SeededGenerator::new(seed, 0);
            let p = perm_indep_pvalue(
                &table,
                TableStatistic::DistanceCovariance,
                Some(perm),
                &mut gen,
            )?;
            println!("test=dcov_perm replicates={perm} p_value={}", fmt_float(p));
        }
    }
    if wants("pearson") {
        let r = pearson_chi2(&table)?;
        println!(
            "test=pearson statistic={} df={} p_value={} flags={}",
            fmt_float(r.statistic),
            r.df.unwrap_or(0),
            fmt_float(r.p_value),
            r.flags
        );
        if perm > 0 {
            let mut gen = SeededGenerator::new(seed, 1);
            let p = perm_indep_pvalue(&table, TableStatistic::PearsonChi2, Some(perm), &mut gen)?;
            println!(
                "test=pearson_perm replicates={perm} p_value={}",
                fmt_float(p)
            );
        }
    }
    if wants("g") {
        let r = g_test(&table)?;
        println!(
            "test=g statistic={} df={} p_value={} flags={}",
            fmt_float(r.statistic),
            r.df.unwrap_or(0),
            fmt_float(r.p_value),
            r.flags
        );
    }
    Ok(())
}

fn run_gof(args: GofArgs, cfg: &ConfigMap) -> CliResult<()> {
    let counts_raw: String = require(&args.counts, cfg, "counts")?;
    let counts = parse_u64_list(&counts_raw, "count")?;
    let probs: Vec<f64> = if let Some(raw) = args.probs.clone().or(cfg.get("probs")?) {
        parse_f64_list(&raw, "probability")?
    } else if let Some(raw) = args.hwe_theta.clone().or(cfg.get("hwe-theta")?) {
        let thetas = parse_f64_list(&raw, "allele frequency")?;
        match thetas.len() {
            1 => hwe_expected(&[1.0 - thetas[0], thetas[0]])?,
            2 | 3 => hwe_expected(&thetas)?,
            k => return Err(usage(format!("--hwe-theta takes 1–3 frequencies, got {k}"))),
        }
    } else {
        return Err(usage("one of --probs or --hwe-theta is required"));
    };
    let spec = GofSpec::new(probs, counts)?;
    let which = resolve(&args.test, cfg, "test", "both".to_string())?.to_ascii_lowercase();
    if !["both", "energy", "pearson"].contains(&which.as_str()) {
        return Err(usage(format!(
            "unknown test '{which}'; expected energy, pearson, or both"
        )));
    }
    if which == "both" || which == "energy" {
        let r = energy_gof_test(&spec)?;
        println!(
            "test=energy statistic={} p_value={} flags={}",
            fmt_float(r.statistic),
            fmt_float(r.p_value),
            r.flags
        );
    }
    if which == "both" || which == "pearson" {
        let r = pearson_chi2_gof(&spec)?;
        println!(
            "test=pearson statistic={} df={} p_value={} flags={}",
            fmt_float(r.statistic),
            r.df.unwrap_or(0),
            fmt_float(r.p_value),
            r.flags
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn run_simulate(args: SimulateArgs, cfg: &ConfigMap, seed: u64) -> CliResult<()> {
    let design = resolve(&args.design, cfg, "design", "assoc-calibration".to_string())?
        .to_ascii_lowercase();
    let reps = resolve(&args.reps, cfg, "reps", 1000usize)?;
    let n = resolve(&args.n, cfg, "n", 300usize)?;
    let out: PathBuf = resolve(&args.out, cfg, "out", PathBuf::from("sim_results.tsv"))?;
    let b = resolve(&args.b, cfg, "b", 2.0)?;
    let maf = resolve(&args.maf, cfg, "maf", 0.3)?;

    let mut text = String::new();
    writeln!(text, "# dcovgen-sim v1").expect("infallible");

    match design.as_str() {
        "assoc-calibration" => {
            writeln!(
                text,
                "# params design={design} reps={reps} n={n} b={b} maf={maf} seed={seed}"
            )
            .expect("infallible");
            writeln!(text, "rep\tstatistic\tp_value").expect("infallible");
            let rows: Vec<String> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let mut gen = SeededGenerator::new(seed, rep as u64);
                    let x = sample_hwe_genotypes(maf, n, &mut gen)?;
                    let y = PhenotypeVector::new(
                        (0..n)
                            .map(|_| {
                                rand_distr::Distribution::sample(
                                    &rand_distr::StandardNormal,
                                    &mut gen,
                                )
                            })
                            .collect(),
                    )?;
                    let r = dcovgen::assoc::test_finite(&SnpVector::from(x), &y, b)?;
                    Ok(format!(
                        "{rep}\t{}\t{}",
                        fmt_float(r.statistic),
                        fmt_float(r.p_value)
                    ))
                })
                .collect::<Result<_, dcovgen::Error>>()?;
            for row in rows {
                writeln!(text, "{row}").expect("infallible");
            }
        }
        "assoc-power" => {
            let h = resolve(&args.h, cfg, "h", 0.5)?;
            let beta = resolve(&args.beta, cfg, "beta", 0.0)?;
            writeln!(
                text,
                "# params design={design} reps={reps} n={n} b={b} maf={maf} h={h} beta={beta} \
                 seed={seed}"
            )
            .expect("infallible");
            writeln!(text, "rep\tstatistic\tp_value").expect("infallible");
            let rows: Vec<String> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let mut gen = SeededGenerator::new(seed, rep as u64);
                    let (x, y) = sample_power_model(maf, h, beta, n, &mut gen)?;
                    let r = dcovgen::assoc::test_finite(&SnpVector::from(x), &y, b)?;
                    Ok(format!(
                        "{rep}\t{}\t{}",
                        fmt_float(r.statistic),
                        fmt_float(r.p_value)
                    ))
                })
                .collect::<Result<_, dcovgen::Error>>()?;
            for row in rows {
                writeln!(text, "{row}").expect("infallible");
            }
        }
        "epistasis" => {
            let model = resolve(&args.model, cfg, "model", "indep".to_string())?;
            let param = resolve(&args.param, cfg, "param", 1.0)?;
            let metric: SnpDistanceSpec =
                resolve(&args.metric, cfg, "metric", "discrete".to_string())?
                    .parse()
                    .map_err(|e: dcovgen::Error| usage(e.to_string()))?;
            let marg = hwe_marginal(maf)?;
            let (p, q) = (marg[0], marg[1]);
            let case_model = match model.as_str() {
                "indep" => JointTernaryModel::independent(marg, marg)?,
                "qexp" => qexp_table(p, q, p, q, param)?,
                "qmult" => qmult_table(p, q, p, q, param)?,
                other => {
                    return Err(usage(format!(
                        "unknown model '{other}'; expected indep, qexp, or qmult"
                    )))
                }
            };
            let control_model = JointTernaryModel::independent(marg, marg)?;
            writeln!(
                text,
                "# params design={design} reps={reps} n={n} maf={maf} model={model} \
                 param={param} metric={} seed={seed}",
                metric.name()
            )
            .expect("infallible");
            writeln!(text, "rep\tp_cases\tp_controls").expect("infallible");
            let rows: Vec<String> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let mut gen = SeededGenerator::new(seed, rep as u64);
                    let (xa, xb) = case_model.sample_pair(n, &mut gen)?;
                    let (ya, yb) = control_model.sample_pair(n, &mut gen)?;
                    let pc = pair_test(&xa, &xb, &metric)?.p_value;
                    let pk = pair_test(&ya, &yb, &metric)?.p_value;
                    Ok(format!("{rep}\t{}\t{}", fmt_float(pc), fmt_float(pk)))
                })
                .collect::<Result<_, dcovgen::Error>>()?;
            for row in rows {
                writeln!(text, "{row}").expect("infallible");
            }
        }
        "categorical" => {
            let rows_n = resolve(&args.rows, cfg, "rows", 5usize)?;
            let cols_n = resolve(&args.cols, cfg, "cols", 8usize)?;
            let eps = resolve(&args.eps, cfg, "eps", 0.0)?;
            let table = decaying_marginals(rows_n, cols_n, eps)?;
            writeln!(
                text,
                "# params design={design} reps={reps} n={n} rows={rows_n} cols={cols_n} \
                 eps={eps} seed={seed}"
            )
            .expect("infallible");
            writeln!(text, "rep\tp_dcov\tp_pearson").expect("infallible");
            let rows: Vec<String> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let mut gen = SeededGenerator::new(seed, rep as u64);
                    let (ri, ci) = sample_joint_labels(&table, n, &mut gen)?;
                    let t = ContingencyTable::from_observations(&ri, &ci)?;
                    let pd = dcov_indep_test(&t)?.p_value;
                    let pp = pearson_chi2(&t)?.p_value;
                    Ok(format!("{rep}\t{}\t{}", fmt_float(pd), fmt_float(pp)))
                })
                .collect::<Result<_, dcovgen::Error>>()?;
            for row in rows {
                writeln!(text, "{row}").expect("infallible");
            }
        }
        "gof" => {
            let departure: HweDepartureModel =
                resolve(&args.departure, cfg, "departure", "2s".to_string())?
                    .parse()
                    .map_err(|e: dcovgen::Error| usage(e.to_string()))?;
            let param = resolve(&args.param, cfg, "param", 0.0)?;
            let truth = hwe_departure(departure, param)?;
            let null = hwe_departure(departure, 0.0)?;
            writeln!(
                text,
                "# params design={design} reps={reps} n={n} departure={departure:?} \
                 param={param} seed={seed}"
            )
            .expect("infallible");
            writeln!(text, "rep\tp_energy\tp_pearson").expect("infallible");
            let rows: Vec<String> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let mut gen = SeededGenerator::new(seed, rep as u64);
                    let labels = sample_categorical(&truth, n, &mut gen)?;
                    let mut counts = vec![0u64; truth.len()];
                    for &k in &labels {
                        counts[k] += 1;
                    }
                    let spec = GofSpec::new(null.clone(), counts)?;
                    let pe = energy_gof_test(&spec)?.p_value;
                    let pp = pearson_chi2_gof(&spec)?.p_value;
                    Ok(format!("{rep}\t{}\t{}", fmt_float(pe), fmt_float(pp)))
                })
                .collect::<Result<_, dcovgen::Error>>()?;
            for row in rows {
                writeln!(text, "{row}").expect("infallible");
            }
        }
        other => {
            return Err(usage(format!(
                "unknown design '{other}'; expected assoc-calibration, assoc-power, \
                 epistasis, categorical, or gof"
            )))
        }
    }

    write_text_atomically(&out, &text)?;
    println!("summary simulate design={design} reps={reps} out={}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

fn run_bench(args: BenchArgs, cfg: &ConfigMap, seed: u64) -> CliResult<()> {
    let n_snps = resolve(&args.snps, cfg, "snps", 100_000usize)?;
    let n = resolve(&args.n, cfg, "n", 8000usize)?;
    let b = resolve(&args.b, cfg, "b", 2.0)?;
    let naive_subset = match resolve(&args.naive_subset, cfg, "naive-subset", 2000usize)? {
        0 => n_snps,
        k => k.min(n_snps),
    };

    eprintln!("generating {n_snps} null markers × {n} samples");
    let y = {
        let mut gen = SeededGenerator::new(seed, u64::MAX);
        PhenotypeVector::new(
            (0..n)
                .map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut gen))
                .collect(),
        )?
    };
    let snps: Vec<SnpVector> = (0..n_snps)
        .into_par_iter()
        .map(|j| {
            let mut gen = SeededGenerator::new(seed, j as u64);
            let maf = gen.random_range(0.05..=0.5);
            sample_hwe_genotypes(maf, n, &mut gen).map(SnpVector::from)
        })
        .collect::<Result<_, dcovgen::Error>>()?;

    let screened_cfg = ScanConfig {
        b,
        ..ScanConfig::default()
    };
    let naive_cfg = ScanConfig {
        b,
        screening: false,
        ..ScanConfig::default()
    };

    eprintln!("timing screened scan of {n_snps} markers");
    let started = Instant::now();
    let screened = dcovgen::assoc::scan(&snps, &y, None, &screened_cfg)?;
    let screened_secs = started.elapsed().as_secs_f64();

    eprintln!("timing naive scan of {naive_subset} markers");
    let started = Instant::now();
    let naive = dcovgen::assoc::scan(&snps[..naive_subset], &y, None, &naive_cfg)?;
    let naive_subset_secs = started.elapsed().as_secs_f64();
    let naive_secs = naive_subset_secs * n_snps as f64 / naive_subset as f64;

    // The two paths must agree wherever the screen passed a marker through.
    let mut disagreements = 0usize;
    for (s, e) in screened.iter().zip(&naive) {
        if s.flags.contains(ResultFlags::EXACT)
            && e.p_value.is_finite()
            && s.p_value.to_bits() != e.p_value.to_bits()
        {
            disagreements += 1;
        }
    }
    let exact_evals = screened
        .iter()
        .filter(|r| r.flags.contains(ResultFlags::EXACT))
        .count();
    println!(
        "summary bench snps={n_snps} n={n} b={b} screened_secs={screened_secs:.3} \
         exact_evals={exact_evals} naive_subset={naive_subset} \
         naive_subset_secs={naive_subset_secs:.3} naive_secs_extrapolated={naive_secs:.3} \
         speedup={:.2} disagreements={disagreements}",
        naive_secs / screened_secs
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared output helpers
// ---------------------------------------------------------------------------

fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Writes via a temporary sibling plus rename so failures leave no partial
/// output behind.
fn write_text_atomically(path: &Path, text: &str) -> CliResult<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
