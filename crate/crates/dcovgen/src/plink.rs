//! Binary PLINK triplet I/O, sample-aligned phenotype/covariate/dosage
//! tables, per-SNP quality control, and result persistence.
//!
//! Genotypes stay 2-bit packed in memory (a 10⁵-SNP × 10⁴-sample dataset is
//! ~250 MB packed); decoding to code vectors happens per SNP at test time.
//! By default the genotype code counts copies of allele 1 as listed in the
//! variant table (the conventional minor allele); an orientation flag counts
//! allele 2 instead. Association p-values are invariant under that swap, so
//! orientation affects only reporting.

use crate::assoc::ResultFlags;
use crate::categorical::{energy_gof_test, hwe_expected, GofSpec};
use crate::error::{Error, Result};
use crate::geno::{DosageVector, GenotypeVector, MISSING};
use std::collections::HashMap;
use std::fmt::Write as FmtWrite;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write as IoWrite};
use std::path::{Path, PathBuf};

/// Magic header of a SNP-major binary genotype file.
const BED_MAGIC: [u8; 3] = [0x6C, 0x1B, 0x01];

// ---------------------------------------------------------------------------
// Dataset types
// ---------------------------------------------------------------------------

/// One sample row: family/individual ids plus the pedigree, sex, and
/// phenotype placeholder columns carried through verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    /// Family identifier (first id column).
    pub family_id: String,
    /// Individual identifier (second id column).
    pub individual_id: String,
    /// Paternal id placeholder.
    pub father_id: String,
    /// Maternal id placeholder.
    pub mother_id: String,
    /// Sex code placeholder (1/2/0 conventionally).
    pub sex: String,
    /// Phenotype placeholder column.
    pub phenotype: String,
}

impl SampleRecord {
    /// A minimal record with the given ids and unknown placeholders.
    pub fn minimal(family_id: &str, individual_id: &str) -> Self {
        Self {
            family_id: family_id.to_string(),
            individual_id: individual_id.to_string(),
            father_id: "0".to_string(),
            mother_id: "0".to_string(),
            sex: "0".to_string(),
            phenotype: "-9".to_string(),
        }
    }
}

/// One variant row: chromosome, identifier, genetic distance, physical
/// position, and the two allele labels.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantRecord {
    /// Chromosome label (kept as text: "1".."22", "X", …).
    pub chromosome: String,
    /// Variant identifier.
    pub id: String,
    /// Genetic distance in morgans (often 0).
    pub genetic_distance: f64,
    /// Base-pair position.
    pub position_bp: u64,
    /// First allele label (conventionally the minor allele).
    pub allele1: String,
    /// Second allele label.
    pub allele2: String,
}

/// A packed SNP-major genotype dataset with its sample and variant tables.
#[derive(Debug, Clone)]
pub struct BedDataset {
    samples: Vec<SampleRecord>,
    variants: Vec<VariantRecord>,
    /// SNP-major payload: `variants.len()` consecutive blocks of
    /// `bytes_per_snp` bytes, two bits per sample, little-endian in each byte.
    data: Vec<u8>,
    bytes_per_snp: usize,
    /// When set, genotype codes count copies of allele 2 instead of allele 1.
    count_allele2: bool,
}

const fn bytes_for(n_samples: usize) -> usize {
    n_samples.div_ceil(4)
}

/// Packs genotype codes (two bits per sample) into a SNP block.
fn pack_codes(codes: &[u8]) -> Vec<u8> {
    let mut block = vec![0u8; bytes_for(codes.len())];
    for (k, &code) in codes.iter().enumerate() {
        // Stored pairs: 00 hom-allele1, 01 missing, 10 het, 11 hom-allele2.
        let bits = match code {
            2 => 0b00,
            MISSING => 0b01,
            1 => 0b10,
            _ => 0b11,
        };
        block[k / 4] |= bits << ((k % 4) * 2);
    }
    block
}

/// Unpacks one SNP block into genotype codes.
fn unpack_codes(block: &[u8], n_samples: usize, count_allele2: bool) -> Vec<u8> {
    let mut codes = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let bits = (block[k / 4] >> ((k % 4) * 2)) & 0b11;
        let code = match bits {
            0b00 => 2,
            0b01 => MISSING,
            0b10 => 1,
            _ => 0,
        };
        codes.push(if count_allele2 && code != MISSING {
            2 - code
        } else {
            code
        });
    }
    codes
}

impl BedDataset {
    /// Assembles a dataset from explicit tables and per-SNP genotype vectors.
    ///
    /// # Errors
    ///
    /// Fails when any genotype vector's length differs from the sample count.
    pub fn from_parts(
        samples: Vec<SampleRecord>,
        variants: Vec<VariantRecord>,
        genotypes: &[GenotypeVector],
    ) -> Result<Self> {
        if variants.len() != genotypes.len() {
            return Err(Error::dims(format!(
                "{} variants vs {} genotype vectors",
                variants.len(),
                genotypes.len()
            )));
        }
        if samples.is_empty() {
            return Err(Error::invalid("dataset needs at least one sample"));
        }
        let n = samples.len();
        let bytes_per_snp = bytes_for(n);
        let mut data = Vec::with_capacity(bytes_per_snp * variants.len());
        for (j, g) in genotypes.iter().enumerate() {
            if g.len() != n {
                return Err(Error::dims(format!(
                    "variant {j} has {} genotypes for {n} samples",
                    g.len()
                )));
            }
            data.extend_from_slice(&pack_codes(g.codes()));
        }
        Ok(Self {
            samples,
            variants,
            data,
            bytes_per_snp,
            count_allele2: false,
        })
    }

    /// Number of samples.
    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    /// Number of variants.
    pub fn n_variants(&self) -> usize {
        self.variants.len()
    }

    /// The sample table.
    pub fn samples(&self) -> &[SampleRecord] {
        &self.samples
    }

    /// The variant table.
    pub fn variants(&self) -> &[VariantRecord] {
        &self.variants
    }

    /// Whether genotype codes count allele 2 instead of allele 1.
    pub fn counts_allele2(&self) -> bool {
        self.count_allele2
    }

    /// Flips which allele the genotype codes count.
    pub fn set_count_allele2(&mut self, yes: bool) {
        self.count_allele2 = yes;
    }

    /// Decodes the genotype vector of variant `j`.
    ///
    /// # Errors
    ///
    /// Fails when `j` is out of range.
    pub fn genotypes(&self, j: usize) -> Result<GenotypeVector> {
        if j >= self.n_variants() {
            return Err(Error::invalid(format!(
                "variant index {j} out of range for {} variants",
                self.n_variants()
            )));
        }
        let block = &self.data[j * self.bytes_per_snp..(j + 1) * self.bytes_per_snp];
        GenotypeVector::new(unpack_codes(block, self.n_samples(), self.count_allele2))
    }

    /// A new dataset keeping only the listed variant indices (in order).
    ///
    /// # Errors
    ///
    /// Fails on an out-of-range index.
    pub fn subset_variants(&self, keep: &[usize]) -> Result<Self> {
        let mut variants = Vec::with_capacity(keep.len());
        let mut data = Vec::with_capacity(keep.len() * self.bytes_per_snp);
        for &j in keep {
            if j >= self.n_variants() {
                return Err(Error::invalid(format!(
                    "variant index {j} out of range for {} variants",
                    self.n_variants()
                )));
            }
            variants.push(self.variants[j].clone());
            data.extend_from_slice(
                &self.data[j * self.bytes_per_snp..(j + 1) * self.bytes_per_snp],
            );
        }
        Ok(Self {
            samples: self.samples.clone(),
            variants,
            data,
            bytes_per_snp: self.bytes_per_snp,
            count_allele2: self.count_allele2,
        })
    }

    /// Reads the `.bed`/`.bim`/`.fam` triplet at `stem`.
    ///
    /// # Errors
    ///
    /// Fails on missing files, a bad magic header, a sample-major payload,
    /// or a payload size inconsistent with the tables.
    pub fn read(stem: &Path) -> Result<Self> {
        let samples = read_fam(&stem.with_extension("fam"))?;
        let variants = read_bim(&stem.with_extension("bim"))?;
        let bed_path = stem.with_extension("bed");
        let mut raw = Vec::new();
        fs::File::open(&bed_path)?.read_to_end(&mut raw)?;
        if raw.len() < 3 || raw[0] != BED_MAGIC[0] || raw[1] != BED_MAGIC[1] {
            return Err(Error::Parse {
                path: bed_path.display().to_string(),
                line: 0,
                msg: "not a binary genotype file (bad magic bytes)".to_string(),
            });
        }
        if raw[2] == 0x00 {
            return Err(Error::Parse {
                path: bed_path.display().to_string(),
                line: 0,
                msg: "payload is sample-major; re-export in SNP-major order \
                      (the third header byte must be 0x01)"
                    .to_string(),
            });
        }
        if raw[2] != 0x01 {
            return Err(Error::Parse {
                path: bed_path.display().to_string(),
                line: 0,
                msg: format!("unknown orientation byte 0x{:02X}", raw[2]),
            });
        }
        let bytes_per_snp = bytes_for(samples.len());
        let expected = 3 + bytes_per_snp * variants.len();
        if raw.len() != expected {
            return Err(Error::Parse {
                path: bed_path.display().to_string(),
                line: 0,
                msg: format!(
                    "payload is {} bytes, expected {expected} for {} samples × {} variants",
                    raw.len(),
                    samples.len(),
                    variants.len()
                ),
            });
        }
        Ok(Self {
            samples,
            variants,
            data: raw[3..].to_vec(),
            bytes_per_snp,
            count_allele2: false,
        })
    }

    /// Writes the `.bed`/`.bim`/`.fam` triplet at `stem` (SNP-major).
    ///
    /// # Errors
    ///
    /// Fails on I/O errors.
    pub fn write(&self, stem: &Path) -> Result<()> {
        let mut fam = String::new();
        for s in &self.samples {
            writeln!(
                fam,
                "{}\t{}\t{}\t{}\t{}\t{}",
                s.family_id, s.individual_id, s.father_id, s.mother_id, s.sex, s.phenotype
            )
            .expect("string formatting cannot fail");
        }
        write_atomically(&stem.with_extension("fam"), fam.as_bytes())?;

        let mut bim = String::new();
        for v in &self.variants {
            writeln!(
                bim,
                "{}\t{}\t{}\t{}\t{}\t{}",
                v.chromosome, v.id, v.genetic_distance, v.position_bp, v.allele1, v.allele2
            )
            .expect("string formatting cannot fail");
        }
        write_atomically(&stem.with_extension("bim"), bim.as_bytes())?;

        let mut bed = Vec::with_capacity(3 + self.data.len());
        bed.extend_from_slice(&BED_MAGIC);
        bed.extend_from_slice(&self.data);
        write_atomically(&stem.with_extension("bed"), &bed)
    }
}

fn read_fam(path: &Path) -> Result<Vec<SampleRecord>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut samples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() < 6 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: format!("expected 6 columns, found {}", f.len()),
            });
        }
        samples.push(SampleRecord {
            family_id: f[0].to_string(),
            individual_id: f[1].to_string(),
            father_id: f[2].to_string(),
            mother_id: f[3].to_string(),
            sex: f[4].to_string(),
            phenotype: f[5].to_string(),
        });
    }
    if samples.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: "no samples".to_string(),
        });
    }
    Ok(samples)
}

fn read_bim(path: &Path) -> Result<Vec<VariantRecord>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut variants = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() < 6 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: format!("expected 6 columns, found {}", f.len()),
            });
        }
        let parse_err = |what: &str, v: &str| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg: format!("bad {what} '{v}'"),
        };
        variants.push(VariantRecord {
            chromosome: f[0].to_string(),
            id: f[1].to_string(),
            genetic_distance: f[2]
                .parse()
                .map_err(|_| parse_err("genetic distance", f[2]))?,
            position_bp: f[3].parse().map_err(|_| parse_err("position", f[3]))?,
            allele1: f[4].to_string(),
            allele2: f[5].to_string(),
        });
    }
    Ok(variants)
}

/// Writes `content` to `path` via a temporary sibling plus rename, so a
/// failed run never leaves a partial file behind.
fn write_atomically(path: &Path, content: &[u8]) -> Result<()> {
    let mut tmp = PathBuf::from(path);
    tmp.set_extension(match path.extension() {
        Some(e) => format!("{}.partial", e.to_string_lossy()),
        None => "partial".to_string(),
    });
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        w.write_all(content)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Quality control
// ---------------------------------------------------------------------------

/// Per-SNP quality-control thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct QcConfig {
    /// Minimum minor allele frequency (default 0.01).
    pub maf_min: f64,
    /// Equilibrium goodness-of-fit level, applied to controls (default 0.001).
    pub hwe_alpha: f64,
    /// Minimum fraction of non-missing calls (default 0.95).
    pub call_rate_min: f64,
}

impl Default for QcConfig {
    fn default() -> Self {
        Self {
            maf_min: 0.01,
            hwe_alpha: 0.001,
            call_rate_min: 0.95,
        }
    }
}

impl QcConfig {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("maf_min", self.maf_min),
            ("hwe_alpha", self.hwe_alpha),
            ("call_rate_min", self.call_rate_min),
        ] {
            if !v.is_finite() || !(0.0..1.0).contains(&v) || v == 0.0 {
                return Err(Error::invalid(format!("{name} = {v} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Which SNPs each quality filter removed (indices into the input dataset).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QcReport {
    /// Input variant count.
    pub n_input: usize,
    /// Variants under the allele-frequency floor.
    pub removed_maf: Vec<usize>,
    /// Variants under the call-rate floor.
    pub removed_call_rate: Vec<usize>,
    /// Variants rejecting the equilibrium null among controls.
    pub removed_hwe: Vec<usize>,
    /// Variants whose equilibrium test could not run (kept, not counted
    /// against the filter).
    pub hwe_untested: Vec<usize>,
    /// Retained variant count.
    pub n_retained: usize,
}

/// Minor allele frequency and call rate of one genotype vector.
///
/// Returns `(maf, call_rate)`; the frequency is 0 when nothing was called.
pub fn variant_stats(x: &GenotypeVector) -> (f64, f64) {
    let [n0, n1, n2] = x.genotype_counts();
    let called = n0 + n1 + n2;
    let call_rate = called as f64 / x.len() as f64;
    if called == 0 {
        return (0.0, call_rate);
    }
    let f1 = (2 * n2 + n1) as f64 / (2 * called) as f64;
    (f1.min(1.0 - f1), call_rate)
}

/// Filters SNPs by allele frequency, call rate, and a Hardy–Weinberg
/// goodness-of-fit test on controls (or on all samples when no mask is
/// given). The filter is idempotent: running it on its own output removes
/// nothing further. A SNP failing several criteria is listed under each.
///
/// # Errors
///
/// Fails on invalid thresholds or a mask length mismatch.
pub fn apply_qc(
    ds: &BedDataset,
    controls: Option<&[bool]>,
    cfg: &QcConfig,
) -> Result<(BedDataset, QcReport)> {
    cfg.validate()?;
    if let Some(mask) = controls {
        if mask.len() != ds.n_samples() {
            return Err(Error::dims(format!(
                "controls mask has {} entries for {} samples",
                mask.len(),
                ds.n_samples()
            )));
        }
    }
    let mut report = QcReport {
        n_input: ds.n_variants(),
        ..QcReport::default()
    };
    let mut keep = Vec::new();
    for j in 0..ds.n_variants() {
        let x = ds.genotypes(j)?;
        let (maf, call_rate) = variant_stats(&x);
        let mut failed = false;
        if call_rate < cfg.call_rate_min {
            report.removed_call_rate.push(j);
            failed = true;
        }
        if maf < cfg.maf_min {
            report.removed_maf.push(j);
            failed = true;
        }
        match hwe_pvalue(&x, controls) {
            Some(p) if p < cfg.hwe_alpha => {
                report.removed_hwe.push(j);
                failed = true;
            }
            Some(_) => {}
            None => report.hwe_untested.push(j),
        }
        if !failed {
            keep.push(j);
        }
    }
    report.n_retained = keep.len();
    Ok((ds.subset_variants(&keep)?, report))
}

/// Equilibrium goodness-of-fit p-value on the control subset, or `None`
/// when the test cannot run (too few calls or a fixed allele).
fn hwe_pvalue(x: &GenotypeVector, controls: Option<&[bool]>) -> Option<f64> {
    let mut counts = [0u64; 3];
    for (k, &code) in x.codes().iter().enumerate() {
        let in_controls = controls.is_none_or(|m| m[k]);
        if in_controls && code != MISSING {
            counts[code as usize] += 1;
        }
    }
    let called: u64 = counts.iter().sum();
    if called < 10 {
        return None;
    }
    let f1 = (2 * counts[2] + counts[1]) as f64 / (2 * called) as f64;
    if f1 <= 0.0 || f1 >= 1.0 {
        return None;
    }
    let probs = hwe_expected(&[1.0 - f1, f1]).ok()?;
    let spec = GofSpec::new(probs, counts.to_vec()).ok()?;
    energy_gof_test(&spec).ok().map(|r| r.p_value)
}

// ---------------------------------------------------------------------------
// Sample-aligned delimited tables
// ---------------------------------------------------------------------------

/// How a table matched against the dataset's sample ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableAlignment {
    /// Data rows in the table.
    pub n_table_rows: usize,
    /// Rows matched to a sample.
    pub n_matched: usize,
    /// Rows whose ids matched no sample (dropped with a warning count).
    pub n_unmatched: usize,
}

/// Missing-value tokens accepted in delimited tables.
fn is_missing_token(tok: &str) -> bool {
    matches!(tok, "NA" | "na" | "NaN" | "nan" | "-9" | ".")
}

struct ParsedTable {
    column_names: Vec<String>,
    /// Column-major values aligned to `samples` order; missing → NaN.
    columns: Vec<Vec<f64>>,
    alignment: TableAlignment,
}

/// Reads a whitespace-delimited table whose first two header columns are the
/// family and individual ids, aligning rows to `samples` order.
fn read_aligned_table(path: &Path, samples: &[SampleRecord]) -> Result<ParsedTable> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: 0,
                    msg: "empty table".to_string(),
                })
            }
        }
    };
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() < 3 {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: "need two id columns plus at least one value column".to_string(),
        });
    }
    let column_names: Vec<String> = head[2..].iter().map(|s| s.to_string()).collect();

    let index: HashMap<(String, String), usize> = samples
        .iter()
        .enumerate()
        .map(|(k, s)| ((s.family_id.clone(), s.individual_id.clone()), k))
        .collect();

    let mut columns = vec![vec![f64::NAN; samples.len()]; column_names.len()];
    let mut seen: HashMap<(String, String), ()> = HashMap::new();
    let mut alignment = TableAlignment::default();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != head.len() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: format!("expected {} columns, found {}", head.len(), f.len()),
            });
        }
        alignment.n_table_rows += 1;
        let key = (f[0].to_string(), f[1].to_string());
        if seen.insert(key.clone(), ()).is_some() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: format!("duplicate id ({}, {})", f[0], f[1]),
            });
        }
        let Some(&row) = index.get(&key) else {
            alignment.n_unmatched += 1;
            continue;
        };
        alignment.n_matched += 1;
        for (c, tok) in f[2..].iter().enumerate() {
            columns[c][row] = if is_missing_token(tok) {
                f64::NAN
            } else {
                tok.parse().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    msg: format!("bad number '{tok}' in column {}", column_names[c]),
                })?
            };
        }
    }
    if alignment.n_matched == 0 {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: "no table row matches any sample id".to_string(),
        });
    }
    Ok(ParsedTable {
        column_names,
        columns,
        alignment,
    })
}

/// Reads a phenotype column aligned to the dataset's sample order; samples
/// absent from the table (and missing cells) become NaN.
///
/// `column` picks a named column; the default is the first value column.
///
/// # Errors
///
/// Fails on duplicate ids, zero id overlap, malformed numbers, or an
/// unknown column name.
pub fn read_pheno_table(
    path: &Path,
    samples: &[SampleRecord],
    column: Option<&str>,
) -> Result<(Vec<f64>, TableAlignment)> {
    let table = read_aligned_table(path, samples)?;
    let c = match column {
        None => 0,
        Some(name) => table
            .column_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "no phenotype column '{name}'; table has: {}",
                    table.column_names.join(", ")
                ))
            })?,
    };
    let mut columns = table.columns;
    Ok((columns.swap_remove(c), table.alignment))
}

/// Reads all covariate columns aligned to the dataset's sample order.
///
/// # Errors
///
/// As [`read_pheno_table`].
pub fn read_covariate_table(
    path: &Path,
    samples: &[SampleRecord],
) -> Result<(Vec<String>, Vec<Vec<f64>>, TableAlignment)> {
    let table = read_aligned_table(path, samples)?;
    Ok((table.column_names, table.columns, table.alignment))
}

/// Reads a dosage table (one column per SNP, values in `[0, 2]`) aligned to
/// the dataset's sample order. Dosages admit no missing values, so every
/// sample must be matched and every cell numeric.
///
/// # Errors
///
/// As [`read_pheno_table`], plus out-of-range or missing dosage cells.
pub fn read_dosage_table(
    path: &Path,
    samples: &[SampleRecord],
) -> Result<(Vec<String>, Vec<DosageVector>)> {
    let table = read_aligned_table(path, samples)?;
    if table.alignment.n_matched != samples.len() {
        return Err(Error::degenerate(format!(
            "dosage table covers {} of {} samples; dosages admit no missing entries",
            table.alignment.n_matched,
            samples.len()
        )));
    }
    let vectors = table
        .columns
        .into_iter()
        .zip(&table.column_names)
        .map(|(col, name)| {
            DosageVector::new(col)
                .map_err(|e| Error::invalid(format!("dosage column '{name}': {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((table.column_names, vectors))
}

// ---------------------------------------------------------------------------
// Result persistence
// ---------------------------------------------------------------------------

/// Results-file schema version written into the header comment.
pub const RESULTS_FORMAT_VERSION: &str = "dcovgen-results v1";

/// One output row of an association scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    /// Variant identifier.
    pub id: String,
    /// Chromosome label.
    pub chromosome: String,
    /// Base-pair position.
    pub position_bp: u64,
    /// Reported allele (the one the genotype code counts).
    pub allele: String,
    /// Test statistic.
    pub statistic: f64,
    /// P-value (NaN serializes as NA).
    pub p_value: f64,
    /// Result flags, serialized with `|` separators.
    pub flags: ResultFlags,
    /// Complete-pair count the test ran on.
    pub n_effective: usize,
}

/// Writes scan results as a tab-separated table (17 significant digits, so
/// read-back reproduces every float bit-exactly), atomically.
///
/// # Errors
///
/// Fails on I/O errors.
pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# {RESULTS_FORMAT_VERSION}").expect("string formatting cannot fail");
    writeln!(
        out,
        "snp\tchrom\tpos_bp\tallele\tstatistic\tp_value\tflags\tn_effective"
    )
    .expect("string formatting cannot fail");
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.id,
            r.chromosome,
            r.position_bp,
            r.allele,
            fmt_float(r.statistic),
            fmt_float(r.p_value),
            r.flags,
            r.n_effective
        )
        .expect("string formatting cannot fail");
    }
    write_atomically(path, out.as_bytes())
}

fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn parse_float(tok: &str) -> Result<f64> {
    if is_missing_token(tok) {
        Ok(f64::NAN)
    } else {
        tok.parse()
            .map_err(|_| Error::invalid(format!("bad number '{tok}'")))
    }
}

/// Reads a results file back into rows (flags come back as their token
/// string via `parse`-free comparison; see [`write_results`]).
///
/// # Errors
///
/// Fails on a malformed file.
pub fn read_results(path: &Path) -> Result<Vec<(ResultRowText, f64, f64)>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.starts_with('#') || line.starts_with("snp\t") || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 8 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: format!("expected 8 columns, found {}", f.len()),
            });
        }
        let text = ResultRowText {
            id: f[0].to_string(),
            chromosome: f[1].to_string(),
            position_bp: f[2].parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: format!("bad position '{}'", f[2]),
            })?,
            allele: f[3].to_string(),
            flags: f[6].to_string(),
            n_effective: f[7].parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: format!("bad count '{}'", f[7]),
            })?,
        };
        rows.push((text, parse_float(f[4])?, parse_float(f[5])?));
    }
    Ok(rows)
}

/// The textual fields of a read-back result row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultRowText {
    /// Variant identifier.
    pub id: String,
    /// Chromosome label.
    pub chromosome: String,
    /// Base-pair position.
    pub position_bp: u64,
    /// Reported allele.
    pub allele: String,
    /// Flag tokens as written.
    pub flags: String,
    /// Complete-pair count.
    pub n_effective: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{hwe_departure, sample_categorical, HweDepartureModel, SeededGenerator};
    use rand::Rng;
    use tempfile::tempdir;

    fn toy_variant(j: usize) -> VariantRecord {
        VariantRecord {
            chromosome: format!("{}", 1 + j % 22),
            id: format!("rs{j}"),
            genetic_distance: 0.0,
            position_bp: 1000 * (j as u64 + 1),
            allele1: "A".to_string(),
            allele2: "G".to_string(),
        }
    }

    fn toy_samples(n: usize) -> Vec<SampleRecord> {
        (0..n)
            .map(|k| SampleRecord::minimal(&format!("F{k}"), &format!("I{k}")))
            .collect()
    }

    #[test]
    fn hand_packed_byte_decodes_in_both_orientations() {
        let block = [0b11_10_01_00u8];
        assert_eq!(unpack_codes(&block, 4, false), vec![2, MISSING, 1, 0]);
        assert_eq!(unpack_codes(&block, 4, true), vec![0, MISSING, 1, 2]);
        assert_eq!(pack_codes(&[2, MISSING, 1, 0]), vec![0b11_10_01_00]);
    }

    #[test]
    fn triplet_round_trip_is_identity() {
        let mut rng = SeededGenerator::new(31, 0);
        // Sample counts straddling the 4-per-byte packing boundary.
        for &(n, l) in &[(5usize, 3usize), (8, 2), (203, 40), (997, 117)] {
            let genotypes: Vec<GenotypeVector> = (0..l)
                .map(|_| {
                    GenotypeVector::new(
                        (0..n)
                            .map(|_| *[0u8, 1, 2, MISSING, 1, 0].get(rng.random_range(0..6)).unwrap())
                            .collect(),
                    )
                    .unwrap()
                })
                .collect();
            let ds =
                BedDataset::from_parts(toy_samples(n), (0..l).map(toy_variant).collect(), &genotypes)
                    .unwrap();
            let dir = tempdir().unwrap();
            let stem = dir.path().join("toy");
            ds.write(&stem).unwrap();
            let back = BedDataset::read(&stem).unwrap();
            assert_eq!(back.samples(), ds.samples());
            assert_eq!(back.variants(), ds.variants());
            for j in 0..l {
                assert_eq!(
                    back.genotypes(j).unwrap().codes(),
                    genotypes[j].codes(),
                    "variant {j} at n = {n}"
                );
            }
        }
    }

    #[test]
    fn padding_bits_are_ignored() {
        // n = 5 occupies two bytes; the upper 6 bits of byte 2 are padding.
        let codes = vec![0u8, 1, 2, MISSING, 1];
        let ds = BedDataset::from_parts(
            toy_samples(5),
            vec![toy_variant(0)],
            &[GenotypeVector::new(codes.clone()).unwrap()],
        )
        .unwrap();
        let dir = tempdir().unwrap();
        let stem = dir.path().join("pad");
        ds.write(&stem).unwrap();
        // Corrupt the padding bits on disk; decoding must not change.
        let bed = stem.with_extension("bed");
        let mut raw = fs::read(&bed).unwrap();
        let last = raw.len() - 1;
        raw[last] |= 0b1111_1100;
        fs::write(&bed, &raw).unwrap();
        let back = BedDataset::read(&stem).unwrap();
        assert_eq!(back.genotypes(0).unwrap().codes(), codes.as_slice());
    }

    #[test]
    fn bad_headers_are_rejected() {
        let ds = BedDataset::from_parts(
            toy_samples(4),
            vec![toy_variant(0)],
            &[GenotypeVector::new(vec![0, 1, 2, 1]).unwrap()],
        )
        .unwrap();
        let dir = tempdir().unwrap();
        let stem = dir.path().join("hdr");
        ds.write(&stem).unwrap();
        let bed = stem.with_extension("bed");

        let mut raw = fs::read(&bed).unwrap();
        raw[0] = 0xAA;
        fs::write(&bed, &raw).unwrap();
        let err = BedDataset::read(&stem).unwrap_err().to_string();
        assert!(err.contains("magic"), "{err}");

        let mut raw = fs::read(&bed).unwrap();
        raw[0] = BED_MAGIC[0];
        raw[2] = 0x00;
        fs::write(&bed, &raw).unwrap();
        let err = BedDataset::read(&stem).unwrap_err().to_string();
        assert!(err.contains("SNP-major"), "{err}");

        let mut raw = fs::read(&bed).unwrap();
        raw[2] = 0x01;
        raw.pop();
        fs::write(&bed, &raw).unwrap();
        let err = BedDataset::read(&stem).unwrap_err().to_string();
        assert!(err.contains("expected"), "{err}");
    }

    #[test]
    fn qc_removes_failing_snps_and_is_idempotent() {
        let mut rng = SeededGenerator::new(77, 0);
        let n = 500;
        // SNP 0: healthy common variant in equilibrium.
        let healthy = GenotypeVector::new(
            sample_categorical(&[0.49, 0.42, 0.09], n, &mut rng)
                .unwrap()
                .iter()
                .map(|&k| k as u8)
                .collect(),
        )
        .unwrap();
        // SNP 1: monomorphic.
        let mono = GenotypeVector::new(vec![0u8; n]).unwrap();
        // SNP 2: 10% missing calls.
        let sparse = GenotypeVector::new(
            (0..n)
                .map(|k| if k % 10 == 0 { MISSING } else { (k % 3) as u8 })
                .collect(),
        )
        .unwrap();
        // SNP 3: strong heterozygote excess among controls.
        let probs = hwe_departure(HweDepartureModel::TwoK, 0.5).unwrap();
        let excess = GenotypeVector::new(
            sample_categorical(&probs, n, &mut rng)
                .unwrap()
                .iter()
                .map(|&k| k as u8)
                .collect(),
        )
        .unwrap();
        let ds = BedDataset::from_parts(
            toy_samples(n),
            (0..4).map(toy_variant).collect(),
            &[healthy, mono, sparse, excess],
        )
        .unwrap();

        let controls = vec![true; n];
        let (kept, report) = apply_qc(&ds, Some(&controls), &QcConfig::default()).unwrap();
        assert!(report.removed_maf.contains(&1), "{report:?}");
        assert!(report.removed_call_rate.contains(&2), "{report:?}");
        assert!(report.removed_hwe.contains(&3), "{report:?}");
        assert_eq!(kept.n_variants(), 1);
        assert_eq!(kept.variants()[0].id, "rs0");
        assert_eq!(report.n_retained, 1);

        let (again, report2) = apply_qc(&kept, Some(&controls), &QcConfig::default()).unwrap();
        assert_eq!(again.n_variants(), kept.n_variants());
        assert!(report2.removed_maf.is_empty());
        assert!(report2.removed_call_rate.is_empty());
        assert!(report2.removed_hwe.is_empty());
    }

    #[test]
    fn qc_hwe_uses_controls_only() {
        let mut rng = SeededGenerator::new(78, 0);
        let n = 1000;
        // Controls in equilibrium, cases wildly out: the SNP must survive.
        let probs_null = hwe_departure(HweDepartureModel::TwoK, 0.0).unwrap();
        let mut codes: Vec<u8> = sample_categorical(&probs_null, n / 2, &mut rng)
            .unwrap()
            .iter()
            .map(|&k| k as u8)
            .collect();
        codes.extend(std::iter::repeat_n(1u8, n / 2)); // all-het cases
        let ds = BedDataset::from_parts(
            toy_samples(n),
            vec![toy_variant(0)],
            &[GenotypeVector::new(codes).unwrap()],
        )
        .unwrap();
        let controls: Vec<bool> = (0..n).map(|k| k < n / 2).collect();
        let (kept, _) = apply_qc(&ds, Some(&controls), &QcConfig::default()).unwrap();
        assert_eq!(kept.n_variants(), 1);
        // Without the mask the pooled sample is far from equilibrium.
        let (kept_all, report_all) = apply_qc(&ds, None, &QcConfig::default()).unwrap();
        assert_eq!(kept_all.n_variants(), 0);
        assert_eq!(report_all.removed_hwe, vec![0]);
    }

    #[test]
    fn pheno_table_alignment_is_order_free() {
        let samples = toy_samples(4);
        let dir = tempdir().unwrap();
        let ordered = dir.path().join("ordered.tsv");
        fs::write(
            &ordered,
            "FID\tIID\tbmi\nF0\tI0\t1.5\nF1\tI1\t2.5\nF2\tI2\t3.5\nF3\tI3\t4.5\n",
        )
        .unwrap();
        let shuffled = dir.path().join("shuffled.tsv");
        fs::write(
            &shuffled,
            "FID\tIID\tbmi\nF2\tI2\t3.5\nF0\tI0\t1.5\nF3\tI3\t4.5\nF1\tI1\t2.5\n",
        )
        .unwrap();
        let (a, align_a) = read_pheno_table(&ordered, &samples, None).unwrap();
        let (b, _) = read_pheno_table(&shuffled, &samples, None).unwrap();
        assert_eq!(a, vec![1.5, 2.5, 3.5, 4.5]);
        assert_eq!(a, b);
        assert_eq!(align_a.n_matched, 4);
        assert_eq!(align_a.n_unmatched, 0);
    }

    #[test]
    fn pheno_table_edge_cases() {
        let samples = toy_samples(3);
        let dir = tempdir().unwrap();

        let unmatched = dir.path().join("u.tsv");
        fs::write(
            &unmatched,
            "FID\tIID\ty\nF0\tI0\t1\nF9\tI9\t7\nF2\tI2\tNA\n",
        )
        .unwrap();
        let (y, align) = read_pheno_table(&unmatched, &samples, None).unwrap();
        assert_eq!(align.n_unmatched, 1);
        assert_eq!(y[0], 1.0);
        assert!(y[1].is_nan(), "absent sample must be missing");
        assert!(y[2].is_nan(), "NA cell must be missing");

        let dup = dir.path().join("d.tsv");
        fs::write(&dup, "FID\tIID\ty\nF0\tI0\t1\nF0\tI0\t2\n").unwrap();
        let err = read_pheno_table(&dup, &samples, None).unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");

        let disjoint = dir.path().join("n.tsv");
        fs::write(&disjoint, "FID\tIID\ty\nQ0\tQ0\t1\n").unwrap();
        assert!(read_pheno_table(&disjoint, &samples, None).is_err());

        let named = dir.path().join("m.tsv");
        fs::write(&named, "FID\tIID\tage\tscore\nF0\tI0\t40\t1.25\n").unwrap();
        let (s, _) = read_pheno_table(&named, &samples, Some("score")).unwrap();
        assert_eq!(s[0], 1.25);
        assert!(read_pheno_table(&named, &samples, Some("weight")).is_err());
    }

    #[test]
    fn covariate_and_dosage_tables() {
        let samples = toy_samples(3);
        let dir = tempdir().unwrap();
        let cov = dir.path().join("cov.tsv");
        fs::write(
            &cov,
            "FID\tIID\tage\tpc1\nF0\tI0\t40\t0.1\nF1\tI1\tNA\t-0.2\nF2\tI2\t55\t0.3\n",
        )
        .unwrap();
        let (names, cols, _) = read_covariate_table(&cov, &samples).unwrap();
        assert_eq!(names, vec!["age", "pc1"]);
        assert!(cols[0][1].is_nan());
        assert_eq!(cols[1], vec![0.1, -0.2, 0.3]);

        let dos = dir.path().join("dos.tsv");
        fs::write(
            &dos,
            "FID\tIID\tsnpA\tsnpB\nF0\tI0\t0.1\t1.9\nF1\tI1\t1.0\t0.5\nF2\tI2\t2.0\t0.0\n",
        )
        .unwrap();
        let (snps, vecs) = read_dosage_table(&dos, &samples).unwrap();
        assert_eq!(snps, vec!["snpA", "snpB"]);
        assert_eq!(vecs[0].values(), &[0.1, 1.0, 2.0]);

        let bad = dir.path().join("bad.tsv");
        fs::write(&bad, "FID\tIID\tsnpA\nF0\tI0\t2.5\nF1\tI1\t1\nF2\tI2\t1\n").unwrap();
        assert!(read_dosage_table(&bad, &samples).is_err());
        let partial = dir.path().join("part.tsv");
        fs::write(&partial, "FID\tIID\tsnpA\nF0\tI0\t1\nF1\tI1\t1\n").unwrap();
        assert!(read_dosage_table(&partial, &samples).is_err());
    }

    #[test]
    fn results_round_trip_and_schema() {
        let rows = vec![
            ResultRow {
                id: "rs1".into(),
                chromosome: "7".into(),
                position_bp: 12345,
                allele: "A".into(),
                statistic: 1.234567890123456e-3,
                p_value: 5.0e-8 / 3.0,
                flags: ResultFlags::EXACT,
                n_effective: 427,
            },
            ResultRow {
                id: "rs2".into(),
                chromosome: "X".into(),
                position_bp: 999,
                allele: "T".into(),
                statistic: f64::NAN,
                p_value: f64::NAN,
                flags: ResultFlags::DEGENERATE,
                n_effective: 0,
            },
        ];
        let dir = tempdir().unwrap();
        let path = dir.path().join("out.tsv");
        write_results(&rows, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(&format!("# {RESULTS_FORMAT_VERSION}\n")));
        assert!(text.contains("\tEXACT\t"));
        assert!(text.contains("\tNA\t"));

        let back = read_results(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].1.to_bits(), rows[0].statistic.to_bits());
        assert_eq!(back[0].2.to_bits(), rows[0].p_value.to_bits());
        assert!(back[1].1.is_nan() && back[1].2.is_nan());
        assert_eq!(back[1].0.flags, "DEGENERATE");
        assert_eq!(back[0].0.n_effective, 427);

        write_results(&[], &path).unwrap();
        let empty = fs::read_to_string(&path).unwrap();
        assert_eq!(empty.lines().count(), 2, "version comment plus header");
        assert!(read_results(&path).unwrap().is_empty());
    }
}
