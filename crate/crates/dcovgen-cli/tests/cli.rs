//! End-to-end tests that drive the compiled binary over real files and
//! assert on exit codes, machine-readable output, and determinism.

use dcovgen::geno::GenotypeVector;
use dcovgen::plink::{BedDataset, SampleRecord, VariantRecord};
use dcovgen::sim::{
    qexp_table, sample_hwe_genotypes, sample_power_model, SeededGenerator,
};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dcovgen_bin() -> &'static str {
    env!("CARGO_BIN_EXE_dcovgen")
}

fn run(args: &[&str]) -> Output {
    Command::new(dcovgen_bin())
        .args(args)
        .output()
        .expect("binary spawns")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Extracts `key=<f64>` from a machine-readable output line.
fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|tok| tok.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no field {key} in: {line}"))
        .parse()
        .unwrap_or_else(|_| panic!("unparseable field {key} in: {line}"))
}

fn sample_ids(n: usize) -> Vec<SampleRecord> {
    (0..n).map(|i| SampleRecord::minimal("F", &format!("I{i}"))).collect()
}

fn variant_rows(l: usize) -> Vec<VariantRecord> {
    (0..l)
        .map(|j| VariantRecord {
            chromosome: format!("{}", 1 + j % 22),
            id: format!("snp{j}"),
            genetic_distance: 0.0,
            position_bp: 1_000_000 * (1 + j as u64 / 22) + j as u64,
            allele1: "A".to_string(),
            allele2: "G".to_string(),
        })
        .collect()
}

fn write_triplet(stem: &Path, samples: Vec<SampleRecord>, variants: Vec<VariantRecord>, snps: &[GenotypeVector]) {
    let ds = BedDataset::from_parts(samples, variants, snps).expect("consistent dataset");
    ds.write(stem).expect("triplet writes");
}

/// A dataset of `l` null markers plus one planted causal marker, with a
/// phenotype table; returns (stem, pheno path, planted index).
fn scan_fixture(dir: &Path, n: usize, l: usize, planted: usize, beta: f64) -> (PathBuf, PathBuf) {
    let mut gen = SeededGenerator::new(11, 0);
    let (x_causal, y) = sample_power_model(0.3, 0.5, beta, n, &mut gen).unwrap();
    let mut snps: Vec<GenotypeVector> = Vec::with_capacity(l);
    for j in 0..l {
        if j == planted {
            snps.push(x_causal.clone());
        } else {
            let mut g = SeededGenerator::new(11, 1 + j as u64);
            snps.push(sample_hwe_genotypes(0.25, n, &mut g).unwrap());
        }
    }
    let stem = dir.join("study");
    write_triplet(&stem, sample_ids(n), variant_rows(l), &snps);
    let pheno = dir.join("pheno.tsv");
    let mut text = String::from("FID\tIID\ttrait\n");
    for (i, v) in y.values().iter().enumerate() {
        text.push_str(&format!("F\tI{i}\t{v}\n"));
    }
    fs::write(&pheno, text).unwrap();
    (stem, pheno)
}

#[test]
fn scan_finds_the_planted_marker_and_is_worker_count_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let (stem, pheno) = scan_fixture(dir.path(), 200, 50, 7, 12.0);
    let out1 = dir.path().join("r1.tsv");
    let out2 = dir.path().join("r2.tsv");

    let res = run(&[
        "scan",
        "--bed",
        stem.to_str().unwrap(),
        "--pheno",
        pheno.to_str().unwrap(),
        "--out",
        out1.to_str().unwrap(),
        "--workers",
        "1",
    ]);
    assert!(res.status.success(), "stderr: {}", stderr_of(&res));
    let summary = stdout_of(&res);
    assert!(summary.starts_with("summary scan snps=50"), "got: {summary}");
    assert!(field(&summary, "hits") >= 1.0, "planted marker missed: {summary}");

    // The planted marker must carry the smallest p-value in the table.
    let table = fs::read_to_string(&out1).unwrap();
    let mut best: Option<(String, f64)> = None;
    for line in table.lines().skip(2) {
        let cols: Vec<&str> = line.split('\t').collect();
        let p: f64 = cols[5].parse().unwrap();
        if best.as_ref().is_none_or(|(_, bp)| p < *bp) {
            best = Some((cols[0].to_string(), p));
        }
    }
    let (best_id, best_p) = best.unwrap();
    assert_eq!(best_id, "snp7");
    assert!(best_p < 1e-6, "planted p-value too weak: {best_p}");

    // Same input, different worker count: byte-identical results file.
    let res = run(&[
        "scan",
        "--bed",
        stem.to_str().unwrap(),
        "--pheno",
        pheno.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert!(res.status.success(), "stderr: {}", stderr_of(&res));
    assert_eq!(fs::read(&out1).unwrap(), fs::read(&out2).unwrap());
}

#[test]
fn missing_phenotype_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (stem, _) = scan_fixture(dir.path(), 40, 3, 0, 0.0);
    let res = run(&[
        "scan",
        "--bed",
        stem.to_str().unwrap(),
        "--pheno",
        dir.path().join("no_such_file.tsv").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2), "stderr: {}", stderr_of(&res));
    assert!(stderr_of(&res).contains("does not exist"));
}

#[test]
fn unknown_flags_and_bad_values_are_usage_errors() {
    let res = run(&["scan", "--no-such-flag"]);
    assert_eq!(res.status.code(), Some(2));
    let res = run(&["gof", "--counts", "10,20,30", "--hwe-theta", "banana"]);
    assert_eq!(res.status.code(), Some(2), "stderr: {}", stderr_of(&res));
}

#[test]
fn corrupt_bed_magic_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (stem, pheno) = scan_fixture(dir.path(), 40, 3, 0, 0.0);
    let bed = stem.with_extension("bed");
    let mut bytes = fs::read(&bed).unwrap();
    bytes[0] ^= 0xFF;
    fs::write(&bed, bytes).unwrap();
    let res = run(&[
        "scan",
        "--bed",
        stem.to_str().unwrap(),
        "--pheno",
        pheno.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3), "stderr: {}", stderr_of(&res));
}

#[test]
fn gof_matches_the_published_worked_example() {
    let res = run(&["gof", "--counts", "139,232,56", "--hwe-theta", "0.41"]);
    assert!(res.status.success(), "stderr: {}", stderr_of(&res));
    let text = stdout_of(&res);
    let energy = text.lines().find(|l| l.starts_with("test=energy")).unwrap();
    let pearson = text.lines().find(|l| l.starts_with("test=pearson")).unwrap();
    assert!((field(energy, "p_value") - 0.027).abs() < 0.002, "{energy}");
    assert!((field(pearson, "p_value") - 0.027).abs() < 0.002, "{pearson}");
}

#[test]
fn categorical_matches_the_published_admission_table() {
    let res = run(&[
        "categorical",
        "--counts",
        "12,9,4;37,20,29;40,58,44;53,55,66",
    ]);
    assert!(res.status.success(), "stderr: {}", stderr_of(&res));
    let text = stdout_of(&res);
    let dcov = text.lines().find(|l| l.starts_with("test=dcov")).unwrap();
    let pearson = text.lines().find(|l| l.starts_with("test=pearson")).unwrap();
    let g = text.lines().find(|l| l.starts_with("test=g ")).unwrap();
    assert!((field(dcov, "p_value") - 0.044).abs() < 0.003, "{dcov}");
    assert!((field(pearson, "p_value") - 0.025).abs() < 0.003, "{pearson}");
    assert!((field(g, "p_value") - 0.022).abs() < 0.003, "{g}");
}

#[test]
fn simulate_zero_reps_writes_a_header_only_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.tsv");
    let res = run(&[
        "simulate",
        "--design",
        "categorical",
        "--reps",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "stderr: {}", stderr_of(&res));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "got: {text}");
    assert!(lines[0].starts_with('#'));
    assert!(lines[1].starts_with("# params"));
    assert_eq!(lines[2], "rep\tp_dcov\tp_pearson");
}

#[test]
fn flags_override_config_file_entries_which_override_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    fs::write(
        &config,
        "# comment line\nb=4\nreps=2\nn=60\ndesign=assoc-calibration\nseed=9\n",
    )
    .unwrap();
    let out = dir.path().join("sim.tsv");

    // Config only: b comes from the file.
    let res = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "stderr: {}", stderr_of(&res));
    let params = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .find(|l| l.starts_with("# params"))
        .unwrap()
        .to_string();
    assert!(params.contains("b=4"), "got: {params}");
    assert!(params.contains("reps=2"), "got: {params}");
    assert!(params.contains("seed=9"), "got: {params}");

    // Flag beats the file.
    let res = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--b",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "stderr: {}", stderr_of(&res));
    let params = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .find(|l| l.starts_with("# params"))
        .unwrap()
        .to_string();
    assert!(params.contains("b=2"), "got: {params}");
}

#[test]
fn epistasis_flags_a_cases_only_dependent_pair() {
    let n_cases = 400;
    let n_controls = 400;
    let l = 6;
    let dir = tempfile::tempdir().unwrap();

    // Markers 0 and 1 are jointly dependent in cases only; everything else
    // (and everything in controls) is independent equilibrium noise.
    let mut gen = SeededGenerator::new(5, 0);
    let joint = qexp_table(0.49, 0.42, 0.49, 0.42, 3.0).unwrap();
    let (case0, case1) = joint.sample_pair(n_cases, &mut gen).unwrap();
    let mut snps: Vec<GenotypeVector> = Vec::with_capacity(l);
    for j in 0..l {
        let mut g = SeededGenerator::new(5, 100 + j as u64);
        let case_part = match j {
            0 => case0.clone(),
            1 => case1.clone(),
            _ => sample_hwe_genotypes(0.3, n_cases, &mut g).unwrap(),
        };
        let control_part = sample_hwe_genotypes(0.3, n_controls, &mut g).unwrap();
        let mut codes = case_part.codes().to_vec();
        codes.extend_from_slice(control_part.codes());
        snps.push(GenotypeVector::new(codes).unwrap());
    }

    // Case/control status travels in the pedigree phenotype column (2 = case).
    let mut samples = sample_ids(n_cases + n_controls);
    for (i, s) in samples.iter_mut().enumerate() {
        s.phenotype = if i < n_cases { "2" } else { "1" }.to_string();
    }
    let stem = dir.path().join("cc");
    write_triplet(&stem, samples, variant_rows(l), &snps);

    let out = dir.path().join("pairs.tsv");
    let res = run(&[
        "epistasis",
        "--bed",
        stem.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "stderr: {}", stderr_of(&res));
    let summary = stdout_of(&res);
    assert!(field(&summary, "putative") >= 1.0, "got: {summary}");

    let table = fs::read_to_string(&out).unwrap();
    let planted = table
        .lines()
        .find(|l| l.starts_with("snp0\tsnp1"))
        .expect("planted pair reported");
    assert!(
        planted.contains("PUTATIVE_INTERACTION"),
        "got: {planted}\nsummary: {summary}"
    );
}
