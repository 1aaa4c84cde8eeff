//! Genotype-space geometry.
//!
//! Genotypes are allele counts in `{0, 1, 2}`. This module provides:
//!
//! - the one-parameter premetric family `d_b` on `{0,1,2}` (with
//!   `d(0,1) = d(1,2) = 1` and `d(0,2) = b` for `b ∈ [0,4]`) plus the named
//!   dominance premetrics, all under [`SnpDistanceSpec`];
//! - the kernel induced by a premetric around a centre point, and the reverse
//!   direction from a kernel back to its semimetric;
//! - the two-dimensional feature map whose squared feature distance
//!   reproduces `2·d_b`, in both hard-call and dosage form;
//! - pairwise distance/kernel matrices, double centering, and the generic
//!   empirical generalized-distance-covariance statistic.
//!
//! # Example
//!
//! ```
//! use dcovgen::geno::{GenotypeVector, SnpDistanceSpec, PairMatrix, gdc_statistic};
//!
//! let spec = SnpDistanceSpec::db(2.0).unwrap();
//! let x = GenotypeVector::new(vec![0, 1, 2, 2, 0, 1]).unwrap();
//! let y = GenotypeVector::new(vec![0, 1, 1, 2, 0, 2]).unwrap();
//! let dx = PairMatrix::distances(&spec, &x).unwrap();
//! let dy = PairMatrix::distances(&spec, &y).unwrap();
//! let v2 = gdc_statistic(&dx, &dy).unwrap();
//! assert!(v2 > 0.0);
//! ```

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Sentinel for a missing genotype call.
pub const MISSING: u8 = u8::MAX;

/// Largest value of the family parameter `b`.
pub const B_MAX: f64 = 4.0;

// ---------------------------------------------------------------------------
// Genotype and dosage vectors
// ---------------------------------------------------------------------------

/// Per-sample allele counts in `{0, 1, 2}` with [`MISSING`] as the sentinel
/// for failed calls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenotypeVector {
    codes: Vec<u8>,
}

impl GenotypeVector {
    /// Builds a genotype vector, validating every entry.
    ///
    /// # Errors
    ///
    /// Rejects empty input and any entry outside `{0, 1, 2, MISSING}`.
    pub fn new(codes: Vec<u8>) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::invalid("genotype vector must not be empty"));
        }
        if let Some(pos) = codes.iter().position(|&c| c > 2 && c != MISSING) {
            return Err(Error::invalid(format!(
                "genotype code {} at index {pos} is not in {{0,1,2}} or MISSING",
                codes[pos]
            )));
        }
        Ok(Self { codes })
    }

    /// Number of samples, including missing entries.
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    /// True when the vector holds no samples (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Raw codes, `MISSING` included.
    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    /// True when sample `i` has no call.
    pub fn is_missing(&self, i: usize) -> bool {
        self.codes[i] == MISSING
    }

    /// Number of non-missing samples.
    pub fn n_complete(&self) -> usize {
        self.codes.iter().filter(|&&c| c != MISSING).count()
    }

    /// Counts of codes 0, 1, 2 among non-missing samples.
    pub fn genotype_counts(&self) -> [usize; 3] {
        let mut counts = [0usize; 3];
        for &c in &self.codes {
            if c != MISSING {
                counts[c as usize] += 1;
            }
        }
        counts
    }

    /// Empirical genotype frequencies among non-missing samples.
    ///
    /// # Errors
    ///
    /// Fails when every entry is missing.
    pub fn genotype_freqs(&self) -> Result<[f64; 3]> {
        let counts = self.genotype_counts();
        let n = counts.iter().sum::<usize>();
        if n == 0 {
            return Err(Error::degenerate("all genotype calls are missing"));
        }
        Ok([
            counts[0] as f64 / n as f64,
            counts[1] as f64 / n as f64,
            counts[2] as f64 / n as f64,
        ])
    }

    /// Returns a copy with homozygous codes swapped (0 ↔ 2).
    ///
    /// Statistics built on the `d_b` family are invariant to this relabeling,
    /// which corresponds to counting the other allele.
    pub fn swap_homozygotes(&self) -> Self {
        let codes = self
            .codes
            .iter()
            .map(|&c| match c {
                0 => 2,
                2 => 0,
                other => other,
            })
            .collect();
        Self { codes }
    }
}

/// Expected allele counts in `[0, 2]`, one per sample, as produced by
/// genotype imputation.
#[derive(Debug, Clone, PartialEq)]
pub struct DosageVector {
    values: Vec<f64>,
}

impl DosageVector {
    /// Builds a dosage vector, validating every entry.
    ///
    /// # Errors
    ///
    /// Rejects empty input and entries outside `[0, 2]` (or non-finite).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("dosage vector must not be empty"));
        }
        if let Some(pos) = values
            .iter()
            .position(|&v| !v.is_finite() || !(0.0..=2.0).contains(&v))
        {
            return Err(Error::invalid(format!(
                "dosage {} at index {pos} is not in [0, 2]",
                values[pos]
            )));
        }
        Ok(Self { values })
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the vector holds no samples (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Raw values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

// ---------------------------------------------------------------------------
// Premetrics on {0,1,2}
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum DistKind {
    /// `d(0,1) = d(1,2) = 1`, `d(0,2) = b`.
    Db(f64),
    /// `d(1,2) = 0`, other off-diagonal distances 1 (codes 1 and 2 merged).
    Dominant,
    /// `d(0,1) = 0`, other off-diagonal distances 1 (codes 0 and 1 merged).
    Recessive,
    /// `d(0,2) = 0`, other off-diagonal distances 1 (homozygotes merged).
    Heterozygous,
}

/// A premetric on the genotype space `{0, 1, 2}`.
///
/// The workhorse is the one-parameter family `d_b` with `b ∈ [0, 4]`:
/// `b = 1` is the discrete metric, `b = 2` the Euclidean metric on allele
/// counts, and `b = 4` the squared Euclidean distance. The named dominance
/// premetrics merge two genotype classes and therefore fall outside the
/// family; they are kept as explicit tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnpDistanceSpec {
    kind: DistKind,
}

impl SnpDistanceSpec {
    /// Member of the `d_b` family.
    ///
    /// # Errors
    ///
    /// Rejects `b` outside `[0, 4]` or non-finite.
    pub fn db(b: f64) -> Result<Self> {
        if !b.is_finite() || !(0.0..=B_MAX).contains(&b) {
            return Err(Error::invalid(format!("b = {b} is outside [0, {B_MAX}]")));
        }
        Ok(Self { kind: DistKind::Db(b) })
    }

    /// Discrete metric; canonicalized to `d_b` with `b = 1`.
    pub fn discrete() -> Self {
        Self { kind: DistKind::Db(1.0) }
    }

    /// Euclidean metric on allele counts; canonicalized to `d_b` with `b = 2`.
    pub fn euclidean() -> Self {
        Self { kind: DistKind::Db(2.0) }
    }

    /// Dominant-model premetric (heterozygote and minor homozygote merged).
    pub fn dominant() -> Self {
        Self { kind: DistKind::Dominant }
    }

    /// Recessive-model premetric (major homozygote and heterozygote merged).
    pub fn recessive() -> Self {
        Self { kind: DistKind::Recessive }
    }

    /// Heterozygous-model premetric (the two homozygotes merged).
    pub fn heterozygous() -> Self {
        Self { kind: DistKind::Heterozygous }
    }

    /// The family parameter when this spec belongs to the `d_b` family.
    pub fn b(&self) -> Option<f64> {
        match self.kind {
            DistKind::Db(b) => Some(b),
            _ => None,
        }
    }

    /// Short lowercase name used in reports and on the command line.
    pub fn name(&self) -> String {
        match self.kind {
            DistKind::Db(b) if b == 1.0 => "discrete".to_string(),
            DistKind::Db(b) if b == 2.0 => "euclidean".to_string(),
            DistKind::Db(b) => format!("db({b})"),
            DistKind::Dominant => "dominant".to_string(),
            DistKind::Recessive => "recessive".to_string(),
            DistKind::Heterozygous => "heterozygous".to_string(),
        }
    }

    /// Full 3×3 distance table, indexed by genotype codes.
    pub fn table(&self) -> [[f64; 3]; 3] {
        match self.kind {
            DistKind::Db(b) => [[0.0, 1.0, b], [1.0, 0.0, 1.0], [b, 1.0, 0.0]],
            DistKind::Dominant => [[0.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
            DistKind::Recessive => [[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]],
            DistKind::Heterozygous => [[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]],
        }
    }

    /// Distance between two genotype codes.
    ///
    /// # Panics
    ///
    /// Panics in debug builds when a code is outside `{0,1,2}`; release
    /// builds index out of bounds. Validate inputs with [`GenotypeVector`].
    pub fn eval(&self, x: u8, y: u8) -> f64 {
        self.table()[x as usize][y as usize]
    }
}

impl std::str::FromStr for SnpDistanceSpec {
    type Err = Error;

    /// Parses `discrete`, `euclidean`, `dominant`, `recessive`,
    /// `heterozygous`, or `db:<b>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "discrete" => Ok(Self::discrete()),
            "euclidean" => Ok(Self::euclidean()),
            "dominant" => Ok(Self::dominant()),
            "recessive" => Ok(Self::recessive()),
            "heterozygous" => Ok(Self::heterozygous()),
            other => {
                if let Some(bs) = other.strip_prefix("db:") {
                    let b: f64 = bs
                        .parse()
                        .map_err(|_| Error::invalid(format!("cannot parse b from '{bs}'")))?;
                    Self::db(b)
                } else {
                    Err(Error::invalid(format!("unknown distance spec '{s}'")))
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Kernel duality
// ---------------------------------------------------------------------------

/// Kernel induced by a premetric around a centre point:
/// `k(x, x') = d(x, c) + d(x', c) − d(x, x')`.
///
/// The result is symmetric and positive semidefinite for every member of the
/// `d_b` family and every dominance premetric.
pub fn induced_kernel(spec: &SnpDistanceSpec, center: u8) -> [[f64; 3]; 3] {
    assert!(center <= 2, "centre must be a genotype code");
    let d = spec.table();
    let c = center as usize;
    let mut k = [[0.0; 3]; 3];
    for (x, row) in k.iter_mut().enumerate() {
        for (y, v) in row.iter_mut().enumerate() {
            *v = d[x][c] + d[y][c] - d[x][y];
        }
    }
    k
}

/// Semimetric induced by a kernel table:
/// `ρ(z, z') = (k(z, z) + k(z', z'))/2 − k(z, z')`.
///
/// Composing with [`induced_kernel`] recovers the original distance table for
/// any centre, because the centre terms cancel.
pub fn induced_semimetric(k: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut d = [[0.0; 3]; 3];
    for (x, row) in d.iter_mut().enumerate() {
        for (y, v) in row.iter_mut().enumerate() {
            *v = 0.5 * (k[x][x] + k[y][y]) - k[x][y];
        }
    }
    d
}

// ---------------------------------------------------------------------------
// Feature maps
// ---------------------------------------------------------------------------

/// Two-dimensional feature embedding of the `d_b` geometry.
///
/// In hard-call mode the features are
/// `φ1(x) = √(b/2)·(1{x=2} − 1{x=0})` and `φ2(x) = √((4−b)/2)·1{x=1}`;
/// in dosage mode they interpolate to `φ̃1(x) = √(b/2)·x` and
/// `φ̃2(x) = √((4−b)/2)·|x−1|` on `[0, 2]`.
///
/// Both versions satisfy `‖Φ(x) − Φ(x')‖² = 2·d_b(x, x')` on `{0,1,2}`
/// (they differ only by a constant shift per coordinate, which every centered
/// statistic ignores), so the Gram matrix of either map induces `d_b` through
/// [`induced_semimetric`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureMap {
    b: f64,
    dosage_mode: bool,
    /// `√(b/2)`, cached.
    c1: f64,
    /// `√((4−b)/2)`, cached.
    c2: f64,
}

impl FeatureMap {
    /// Builds the feature map for a family parameter `b ∈ [0, 4]`.
    ///
    /// # Errors
    ///
    /// Rejects `b` outside the family range.
    pub fn new(b: f64, dosage_mode: bool) -> Result<Self> {
        if !b.is_finite() || !(0.0..=B_MAX).contains(&b) {
            return Err(Error::invalid(format!("b = {b} is outside [0, {B_MAX}]")));
        }
        Ok(Self {
            b,
            dosage_mode,
            c1: (b / 2.0).sqrt(),
            c2: ((B_MAX - b) / 2.0).sqrt(),
        })
    }

    /// Family parameter.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// True when built for dosage input.
    pub fn dosage_mode(&self) -> bool {
        self.dosage_mode
    }

    /// Features of a hard genotype call.
    pub fn eval_genotype(&self, g: u8) -> (f64, f64) {
        debug_assert!(g <= 2, "genotype code out of range");
        let phi1 = match g {
            0 => -self.c1,
            2 => self.c1,
            _ => 0.0,
        };
        let phi2 = if g == 1 { self.c2 } else { 0.0 };
        (phi1, phi2)
    }

    /// Features of a dosage in `[0, 2]` (the interpolated map).
    pub fn eval_dosage(&self, x: f64) -> (f64, f64) {
        (self.c1 * x, self.c2 * (x - 1.0).abs())
    }

    /// Features in the mode the map was built for; hard calls must be passed
    /// as exact `0.0`, `1.0`, or `2.0` in genotype mode.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        if self.dosage_mode {
            self.eval_dosage(x)
        } else {
            self.eval_genotype(x as u8)
        }
    }
}

// ---------------------------------------------------------------------------
// Pairwise matrices and the empirical statistic
// ---------------------------------------------------------------------------

/// What a [`PairMatrix`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixTag {
    /// Pairwise distances (zero diagonal, nonnegative entries).
    Distance,
    /// Pairwise kernel evaluations.
    Kernel,
    /// A doubly centered matrix (row and column sums vanish).
    Centered,
}

/// A symmetric n×n matrix of pairwise distances or kernel values.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix {
    values: DMatrix<f64>,
    tag: MatrixTag,
}

impl PairMatrix {
    /// Wraps a symmetric matrix produced elsewhere.
    ///
    /// # Errors
    ///
    /// Rejects non-square or non-symmetric input (tolerance `1e-12` relative
    /// to the largest entry), and distance tags with nonzero diagonal or
    /// negative entries.
    pub fn from_matrix(values: DMatrix<f64>, tag: MatrixTag) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::dims(format!(
                "pair matrix must be square, got {}×{}",
                values.nrows(),
                values.ncols()
            )));
        }
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * scale.max(1.0);
        for i in 0..values.nrows() {
            for j in (i + 1)..values.ncols() {
                if (values[(i, j)] - values[(j, i)]).abs() > tol {
                    return Err(Error::invalid(format!(
                        "pair matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if tag == MatrixTag::Distance {
            for i in 0..values.nrows() {
                if values[(i, i)].abs() > tol {
                    return Err(Error::invalid(format!("distance diagonal nonzero at {i}")));
                }
            }
            if values.iter().any(|&v| v < -tol) {
                return Err(Error::invalid("distance matrix has negative entries"));
            }
        }
        Ok(Self { values, tag })
    }

    /// Builds the pairwise matrix from a function of index pairs.
    pub fn from_fn(n: usize, tag: MatrixTag, f: impl Fn(usize, usize) -> f64) -> Self {
        Self {
            values: DMatrix::from_fn(n, n, f),
            tag,
        }
    }

    /// Pairwise genotype distances under a premetric.
    ///
    /// # Errors
    ///
    /// Rejects vectors containing missing calls; restrict to complete cases
    /// first (tests exclude missing entries pairwise per SNP).
    pub fn distances(spec: &SnpDistanceSpec, x: &GenotypeVector) -> Result<Self> {
        if x.codes().iter().any(|&c| c == MISSING) {
            return Err(Error::invalid(
                "pairwise matrix requires complete cases; drop missing entries first",
            ));
        }
        let d = spec.table();
        let codes = x.codes();
        let n = codes.len();
        Ok(Self::from_fn(n, MatrixTag::Distance, |i, j| {
            d[codes[i] as usize][codes[j] as usize]
        }))
    }

    /// Pairwise kernel values under the kernel induced by a premetric.
    pub fn kernel(spec: &SnpDistanceSpec, center: u8, x: &GenotypeVector) -> Result<Self> {
        if x.codes().iter().any(|&c| c == MISSING) {
            return Err(Error::invalid(
                "pairwise matrix requires complete cases; drop missing entries first",
            ));
        }
        let k = induced_kernel(spec, center);
        let codes = x.codes();
        let n = codes.len();
        Ok(Self::from_fn(n, MatrixTag::Kernel, |i, j| {
            k[codes[i] as usize][codes[j] as usize]
        }))
    }

    /// Pairwise half squared differences of a real response:
    /// `ρ(y, y') = (y − y')²/2`.
    pub fn half_squared_differences(y: &[f64]) -> Self {
        Self::from_fn(y.len(), MatrixTag::Distance, |i, j| {
            let d = y[i] - y[j];
            0.5 * d * d
        })
    }

    /// Number of rows (= columns).
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// The stored matrix.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Content tag.
    pub fn tag(&self) -> MatrixTag {
        self.tag
    }
}

/// Doubly centers a pairwise matrix: `(I − H) M (I − H)` with `H = 11ᵗ/n`.
///
/// Row and column sums of the result vanish, and the operation is idempotent.
pub fn double_center(m: &PairMatrix) -> PairMatrix {
    let a = &m.values;
    let n = a.nrows();
    let nf = n as f64;
    // Row means, column means (equal by symmetry, kept separate for clarity),
    // and the grand mean.
    let row_means: Vec<f64> = (0..n).map(|i| a.row(i).sum() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| a.column(j).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let centered = DMatrix::from_fn(n, n, |i, j| a[(i, j)] - row_means[i] - col_means[j] + grand);
    PairMatrix {
        values: centered,
        tag: MatrixTag::Centered,
    }
}

/// Empirical generalized distance covariance of two pairwise matrices:
/// `(1/n²)·trace(Dˣ · D̃ʸ)`, where `D̃ʸ` is the doubly centered version of
/// the second matrix.
///
/// Centering one factor or both gives the same value, so the implementation
/// centers the second matrix and sums the elementwise product.
///
/// # Errors
///
/// Rejects dimension mismatches.
pub fn gdc_statistic(dx: &PairMatrix, dy: &PairMatrix) -> Result<f64> {
    if dx.n() != dy.n() {
        return Err(Error::dims(format!(
            "pair matrices have sizes {} and {}",
            dx.n(),
            dy.n()
        )));
    }
    let n = dx.n();
    let dy_centered = double_center(dy);
    // trace(A·B̃) = Σ_ij A_ij B̃_ij for symmetric matrices.
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += dx.values[(i, j)] * dy_centered.values[(i, j)];
        }
    }
    Ok(acc / (n as f64 * n as f64))
}
