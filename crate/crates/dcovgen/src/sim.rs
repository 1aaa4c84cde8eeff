//! Population models and samplers: Hardy–Weinberg genotypes, a
//! genotype–phenotype power model, tunable dependent SNP-pair tables,
//! equilibrium-departure alternatives, and decaying-marginal contingency
//! models. Everything is deterministic given a `(seed, stream)` pair so
//! replicate farms reproduce bit-identically regardless of execution order.

use crate::error::{Error, Result};
use crate::geno::GenotypeVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

/// Phenotype noise variance of the power model.
pub const POWER_MODEL_VARIANCE: f64 = 25.0;

/// Tolerance for probability tables summing to one.
const SIMPLEX_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Reproducible stream generator
// ---------------------------------------------------------------------------

/// A counter-based random generator addressed by `(seed, stream)`.
///
/// Identical pairs give identical draw sequences; distinct streams under one
/// seed are independent, so parallel replicate loops can hand stream `r` to
/// replicate `r` without any cross-replicate coupling.
#[derive(Debug, Clone)]
pub struct SeededGenerator {
    rng: ChaCha12Rng,
    seed: u64,
    stream: u64,
}

impl SeededGenerator {
    /// Positions a fresh generator at the start of `stream` under `seed`.
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, seed, stream }
    }

    /// The seed this generator was built from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The stream id this generator was built from.
    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for SeededGenerator {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest);
    }
}

// ---------------------------------------------------------------------------
// Categorical sampling helpers
// ---------------------------------------------------------------------------

/// One draw from a finite distribution by inverse transform.
fn draw_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// `n` i.i.d. category labels with the given probabilities.
///
/// # Errors
///
/// Fails when `probs` is not a probability vector.
pub fn sample_categorical<R: Rng + ?Sized>(
    probs: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    validate_probs(probs)?;
    Ok((0..n).map(|_| draw_index(probs, rng)).collect())
}

fn validate_probs(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid("probability vector is empty"));
    }
    for (i, &v) in p.iter().enumerate() {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!(
                "probability {i} is {v}; must lie in [0, 1]"
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
// Hardy–Weinberg genotypes and the power model
// ---------------------------------------------------------------------------

/// Genotype probabilities `((1−maf)², 2·maf·(1−maf), maf²)` at a given minor
/// allele frequency.
///
/// # Errors
///
/// Fails unless `0 < maf ≤ 0.5`.
pub fn hwe_marginal(maf: f64) -> Result<[f64; 3]> {
    if !maf.is_finite() || maf <= 0.0 || maf > 0.5 {
        return Err(Error::invalid(format!(
            "minor allele frequency {maf} outside (0, 0.5]"
        )));
    }
    let p = 1.0 - maf;
    Ok([p * p, 2.0 * p * maf, maf * maf])
}

/// `n` independent Hardy–Weinberg genotypes at minor allele frequency `maf`.
///
/// # Errors
///
/// As [`hwe_marginal`].
pub fn sample_hwe_genotypes<R: Rng + ?Sized>(
    maf: f64,
    n: usize,
    rng: &mut R,
) -> Result<GenotypeVector> {
    let probs = hwe_marginal(maf)?;
    let codes = (0..n).map(|_| draw_index(&probs, rng) as u8).collect();
    GenotypeVector::new(codes)
}

/// Genotype–phenotype pairs from the two-parameter dominance model
/// `y = hβ·1{X=1} + β·1{X=2} + ε` with `ε ~ Normal(0, 25)`: `h = 0` is
/// recessive, `h = 1/2` additive, `h = 1` dominant.
///
/// # Errors
///
/// Fails on an out-of-range `maf` or non-finite `h`/`beta`.
pub fn sample_power_model<R: Rng + ?Sized>(
    maf: f64,
    h: f64,
    beta: f64,
    n: usize,
    rng: &mut R,
) -> Result<(GenotypeVector, crate::assoc::PhenotypeVector)> {
    if !h.is_finite() || !beta.is_finite() {
        return Err(Error::invalid(format!(
            "effect parameters must be finite, got h = {h}, beta = {beta}"
        )));
    }
    let x = sample_hwe_genotypes(maf, n, rng)?;
    let noise = Normal::new(0.0, POWER_MODEL_VARIANCE.sqrt())
        .expect("fixed positive standard deviation");
    let y: Vec<f64> = x
        .codes()
        .iter()
        .map(|&g| {
            let mean = match g {
                1 => h * beta,
                2 => beta,
                _ => 0.0,
            };
            mean + noise.sample(rng)
        })
        .collect();
    Ok((x, crate::assoc::PhenotypeVector::new(y)?))
}

// ---------------------------------------------------------------------------
// Dependent SNP-pair models
// ---------------------------------------------------------------------------

/// A joint distribution over a genotype pair `(Z_i, Z_j) ∈ {0,1,2}²`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTernaryModel {
    cells: [[f64; 3]; 3],
}

impl JointTernaryModel {
    /// Validates a 3×3 probability table.
    ///
    /// # Errors
    ///
    /// Fails when any cell is outside `[0, 1]` or the total is not 1.
    pub fn new(cells: [[f64; 3]; 3]) -> Result<Self> {
        let flat: Vec<f64> = cells.iter().flatten().copied().collect();
        validate_probs(&flat)?;
        Ok(Self { cells })
    }

    /// The cell probabilities, row index first.
    pub fn cells(&self) -> &[[f64; 3]; 3] {
        &self.cells
    }

    /// Marginal distribution of the first coordinate.
    pub fn row_marginals(&self) -> [f64; 3] {
        let mut m = [0.0; 3];
        for (i, row) in self.cells.iter().enumerate() {
            m[i] = row.iter().sum();
        }
        m
    }

    /// Marginal distribution of the second coordinate.
    pub fn col_marginals(&self) -> [f64; 3] {
        let mut m = [0.0; 3];
        for row in &self.cells {
            for (j, &v) in row.iter().enumerate() {
                m[j] += v;
            }
        }
        m
    }

    /// The independence table with the given marginals.
    ///
    /// # Errors
    ///
    /// Fails when either marginal is not a probability vector.
    pub fn independent(row: [f64; 3], col: [f64; 3]) -> Result<Self> {
        validate_probs(&row)?;
        validate_probs(&col)?;
        let mut cells = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                cells[i][j] = row[i] * col[j];
            }
        }
        Self::new(cells)
    }

    /// `n` i.i.d. joint draws as a pair of genotype vectors.
    pub fn sample_pair<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<(GenotypeVector, GenotypeVector)> {
        let flat: Vec<f64> = self.cells.iter().flatten().copied().collect();
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let k = draw_index(&flat, rng);
            xs.push((k / 3) as u8);
            ys.push((k % 3) as u8);
        }
        Ok((GenotypeVector::new(xs)?, GenotypeVector::new(ys)?))
    }
}

/// Builds the shared scaffolding of the two dependence models: rows and
/// columns away from the `{0,1}×{0,1}` block are pure products, and the
/// perturbation `delta` moves mass from cells (0,1)/(1,0) into (0,0)/(1,1)…
/// negative `delta` moves it the other way.
fn perturbed_pair_table(
    p: f64,
    q: f64,
    r: f64,
    s: f64,
    delta: f64,
) -> Result<JointTernaryModel> {
    for (name, v) in [("p", p), ("q", q), ("r", r), ("s", s)] {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!(
                "marginal parameter {name} = {v} outside [0, 1]"
            )));
        }
    }
    if p + q > 1.0 + SIMPLEX_TOL || r + s > 1.0 + SIMPLEX_TOL {
        return Err(Error::invalid(
            "marginal pairs (p, q) and (r, s) must each sum to at most 1",
        ));
    }
    let (pt, st) = (1.0 - p - q, 1.0 - r - s);
    let cells = [
        [p * r + delta, p * s - delta, p * st],
        [q * r - delta, q * s + delta, q * st],
        [pt * r, pt * s, pt * st],
    ];
    JointTernaryModel::new(cells).map_err(|_| {
        Error::invalid(format!(
            "infeasible parameter combination: perturbation {delta} drives a \
             cell outside [0, 1]"
        ))
    })
}

/// The exponential-family dependent pair model: cell `(1,1)` carries mass
/// `qᵉ·s` and the rest of the `{0,1}` block compensates, leaving the
/// marginals `(p, q, 1−p−q)` and `(r, s, 1−r−s)` intact. `e = 1` is exact
/// independence and dependence grows with `e`.
///
/// # Errors
///
/// Fails when `e < 1` or the parameters drive any cell outside `[0, 1]`.
pub fn qexp_table(p: f64, q: f64, r: f64, s: f64, e: f64) -> Result<JointTernaryModel> {
    if !e.is_finite() || e < 1.0 {
        return Err(Error::invalid(format!(
            "dependence exponent e = {e}; must be at least 1"
        )));
    }
    // Cell (1,1) = qᵉs; delta = qᵉs − qs shifts the rest of the block.
    let delta = (q.powf(e) - q) * s;
    perturbed_pair_table(p, q, r, s, delta)
}

/// The multiplicative dependent pair model: cell `(1,1)` carries mass
/// `g·q·s` with the same compensation scheme as [`qexp_table`]. `g = 1` is
/// exact independence and dependence grows as `g` shrinks toward 0.
///
/// # Errors
///
/// Fails when `g` is outside `[0, 1]` or a cell leaves `[0, 1]`.
pub fn qmult_table(p: f64, q: f64, r: f64, s: f64, g: f64) -> Result<JointTernaryModel> {
    if !g.is_finite() || !(0.0..=1.0).contains(&g) {
        return Err(Error::invalid(format!(
            "dependence factor g = {g}; must lie in [0, 1]"
        )));
    }
    // Cell (1,1) = gqs; delta = gqs − qs = −(1−g)qs.
    let delta = -(1.0 - g) * q * s;
    perturbed_pair_table(p, q, r, s, delta)
}

// ---------------------------------------------------------------------------
// Equilibrium-departure models
// ---------------------------------------------------------------------------

/// Named departure-from-equilibrium families for the goodness-of-fit power
/// studies. The `Two*` models are biallelic (three genotype categories), the
/// `Three*` models triallelic (six categories, homozygotes first).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HweDepartureModel {
    /// Biallelic drift toward the rare homozygote; `s ∈ [0, 1]`, null at 0.
    TwoS,
    /// Biallelic heterozygote excess/deficit; `k ∈ [−1, 1]`, null at 0.
    TwoK,
    /// Triallelic drift concentrating on one homozygote; `s ∈ [0, 1]`.
    ThreeS,
    /// Triallelic homozygote/heterozygote rebalancing; `k ∈ [0, 1]`.
    ThreeK,
}

impl std::str::FromStr for HweDepartureModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "2s" => Ok(Self::TwoS),
            "2k" => Ok(Self::TwoK),
            "3s" => Ok(Self::ThreeS),
            "3k" => Ok(Self::ThreeK),
            other => Err(Error::invalid(format!(
                "unknown departure model '{other}'; expected 2s, 2k, 3s, or 3k"
            ))),
        }
    }
}

/// Genotype probabilities of a departure model at the given parameter.
///
/// # Errors
///
/// Fails when the parameter is outside the model's range.
pub fn hwe_departure(model: HweDepartureModel, param: f64) -> Result<Vec<f64>> {
    let check = |lo: f64, hi: f64| -> Result<()> {
        if !param.is_finite() || param < lo || param > hi {
            Err(Error::invalid(format!(
                "parameter {param} outside [{lo}, {hi}] for {model:?}"
            )))
        } else {
            Ok(())
        }
    };
    match model {
        HweDepartureModel::TwoS => {
            check(0.0, 1.0)?;
            let s = param;
            Ok(vec![
                4.0 * (1.0 - s) / 9.0,
                4.0 * (1.0 - s) / 9.0,
                (1.0 + 8.0 * s) / 9.0,
            ])
        }
        HweDepartureModel::TwoK => {
            check(-1.0, 1.0)?;
            let k = param;
            Ok(vec![(1.0 - k) / 4.0, (k + 1.0) / 2.0, (1.0 - k) / 4.0])
        }
        HweDepartureModel::ThreeS => {
            check(0.0, 1.0)?;
            let s = param;
            Ok(vec![
                0.49 * (1.0 - s),
                (1.0 + 15.0 * s) / 16.0,
                0.0025 * (1.0 - s),
                0.35 * (1.0 - s),
                0.07 * (1.0 - s),
                0.025 * (1.0 - s),
            ])
        }
        HweDepartureModel::ThreeK => {
            check(0.0, 1.0)?;
            let k = param;
            let hom = (2.0 * k + 1.0) / 9.0;
            let het = (2.0 - 2.0 * k) / 9.0;
            Ok(vec![hom, hom, hom, het, het, het])
        }
    }
}

// ---------------------------------------------------------------------------
// Decaying-marginal contingency models
// ---------------------------------------------------------------------------

/// Largest admissible perturbation for [`decaying_marginals`]: the smaller
/// of the budgets that keep the drained cells nonnegative and the boosted
/// corner cell at most 1. Grows toward 1/8 as the table widens.
pub fn decaying_eps_bound(i_cats: usize, j_cats: usize) -> f64 {
    let z = (1.0 - 0.5f64.powi(i_cats as i32)) * (1.0 - 0.5f64.powi(j_cats as i32));
    (1.0 / (8.0 * z)).min(1.0 - 1.0 / (4.0 * z))
}

/// An `I×J` cell-probability table with geometrically decaying marginals,
/// `p⁰_ij ∝ 2^{−(i+j)}`, plus a four-cell dependence perturbation: `+eps` at
/// cells (1,1) and (2,2), `−eps` at (1,2) and (2,1) (1-indexed), which
/// leaves both marginals untouched. `eps = 0` is exact independence.
///
/// # Errors
///
/// Fails when dimensions are under 2×2 or `eps` exceeds
/// [`decaying_eps_bound`].
pub fn decaying_marginals(i_cats: usize, j_cats: usize, eps: f64) -> Result<Vec<Vec<f64>>> {
    if i_cats < 2 || j_cats < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 categories per margin, got {i_cats}×{j_cats}"
        )));
    }
    let bound = decaying_eps_bound(i_cats, j_cats);
    if !eps.is_finite() || eps < 0.0 || eps > bound {
        return Err(Error::invalid(format!(
            "perturbation {eps} outside [0, {bound}] for a {i_cats}×{j_cats} table"
        )));
    }
    let z = (1.0 - 0.5f64.powi(i_cats as i32)) * (1.0 - 0.5f64.powi(j_cats as i32));
    let mut table = vec![vec![0.0; j_cats]; i_cats];
    for (i, row) in table.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = 0.5f64.powi((i + j + 2) as i32) / z;
        }
    }
    table[0][0] += eps;
    table[1][1] += eps;
    table[0][1] -= eps;
    table[1][0] -= eps;
    Ok(table)
}

/// `n` i.i.d. label pairs from an arbitrary joint probability table.
///
/// # Errors
///
/// Fails when the flattened table is not a probability vector.
pub fn sample_joint_labels<R: Rng + ?Sized>(
    table: &[Vec<f64>],
    n: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if table.is_empty() || table[0].is_empty() {
        return Err(Error::invalid("joint table is empty"));
    }
    let j_n = table[0].len();
    let flat: Vec<f64> = table.iter().flatten().copied().collect();
    validate_probs(&flat)?;
    let mut rows = Vec::with_capacity(n);
    let mut cols = Vec::with_capacity(n);
    for _ in 0..n {
        let k = draw_index(&flat, rng);
        rows.push(k / j_n);
        cols.push(k % j_n);
    }
    Ok((rows, cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::categorical::hwe_expected;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn hwe_marginal_pins() {
        let half = hwe_marginal(0.5).unwrap();
        assert_eq!(half, [0.25, 0.5, 0.25]);
        let fifth = hwe_marginal(0.2).unwrap();
        assert_relative_eq!(fifth[0], 0.64, max_relative = 1e-15);
        assert_relative_eq!(fifth[1], 0.32, max_relative = 1e-15);
        assert_relative_eq!(fifth[2], 0.04, max_relative = 1e-15);
        assert!(hwe_marginal(0.0).is_err());
        assert!(hwe_marginal(0.6).is_err());
    }

    #[test]
    fn hwe_sampling_matches_theory() {
        let mut gen = SeededGenerator::new(7, 0);
        let n = 100_000;
        let x = sample_hwe_genotypes(0.2, n, &mut gen).unwrap();
        let counts = x.genotype_counts();
        let probs = hwe_marginal(0.2).unwrap();
        for (k, &p) in probs.iter().enumerate() {
            let got = counts[k] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (got - p).abs() < 4.0 * se,
                "genotype {k}: frequency {got} vs {p} (se {se})"
            );
        }
    }

    #[test]
    fn generator_streams_are_reproducible_and_distinct() {
        let a1 = sample_hwe_genotypes(0.3, 200, &mut SeededGenerator::new(11, 4)).unwrap();
        let a2 = sample_hwe_genotypes(0.3, 200, &mut SeededGenerator::new(11, 4)).unwrap();
        let b = sample_hwe_genotypes(0.3, 200, &mut SeededGenerator::new(11, 5)).unwrap();
        let c = sample_hwe_genotypes(0.3, 200, &mut SeededGenerator::new(12, 4)).unwrap();
        assert_eq!(a1.codes(), a2.codes());
        assert_ne!(a1.codes(), b.codes());
        assert_ne!(a1.codes(), c.codes());
        let g = SeededGenerator::new(11, 4);
        assert_eq!((g.seed(), g.stream()), (11, 4));
    }

    #[test]
    fn qexp_reduces_to_independence_at_one() {
        let t = qexp_table(0.3, 0.25, 0.4, 0.35, 1.0).unwrap();
        let indep =
            JointTernaryModel::independent([0.3, 0.25, 0.45], [0.4, 0.35, 0.25]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(
                    t.cells()[i][j],
                    indep.cells()[i][j],
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn qexp_quadratic_cell_pin() {
        let t = qexp_table(0.3, 0.3, 0.3, 0.3, 2.0).unwrap();
        assert_relative_eq!(t.cells()[1][1], 0.027, max_relative = 1e-12);
        let total: f64 = t.cells().iter().flatten().sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
        let rows = t.row_marginals();
        let cols = t.col_marginals();
        for m in [rows, cols] {
            assert_relative_eq!(m[0], 0.3, max_relative = 1e-12);
            assert_relative_eq!(m[1], 0.3, max_relative = 1e-12);
            assert_relative_eq!(m[2], 0.4, max_relative = 1e-12);
        }
    }

    #[test]
    fn qmult_reduces_to_independence_at_one_and_zeroes_the_cell_at_zero() {
        let indep = qmult_table(0.2, 0.35, 0.3, 0.4, 1.0).unwrap();
        let product =
            JointTernaryModel::independent([0.2, 0.35, 0.45], [0.3, 0.4, 0.3]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(
                    indep.cells()[i][j],
                    product.cells()[i][j],
                    epsilon = 1e-15
                );
            }
        }
        // g = 0 empties cell (1,1); feasible only while pr ≥ qs.
        let strongest = qmult_table(0.5, 0.2, 0.5, 0.2, 0.0).unwrap();
        assert_abs_diff_eq!(strongest.cells()[1][1], 0.0, epsilon = 1e-15);
        // Marginals survive the perturbation.
        assert_relative_eq!(strongest.row_marginals()[1], 0.2, max_relative = 1e-12);
        assert_relative_eq!(strongest.col_marginals()[1], 0.2, max_relative = 1e-12);
    }

    #[test]
    fn dependence_models_interpolate_continuously() {
        let dev = |m: &JointTernaryModel| -> f64 {
            let product = JointTernaryModel::independent(
                m.row_marginals(),
                m.col_marginals(),
            )
            .unwrap();
            m.cells()
                .iter()
                .flatten()
                .zip(product.cells().iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let mut last = f64::INFINITY;
        for e in [3.0, 2.0, 1.5, 1.1, 1.001] {
            let d = dev(&qexp_table(0.3, 0.3, 0.3, 0.3, e).unwrap());
            assert!(d < last, "deviation must shrink toward e = 1");
            last = d;
        }
        assert!(last < 1e-3);
        last = f64::INFINITY;
        for g in [0.0, 0.5, 0.9, 0.999] {
            let d = dev(&qmult_table(0.3, 0.3, 0.3, 0.3, g).unwrap());
            assert!(d < last, "deviation must shrink toward g = 1");
            last = d;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn infeasible_parameters_are_rejected() {
        // pr = 1e-4 cannot absorb the (q − q²)s = 0.144 drain on cell (0,0).
        assert!(qexp_table(0.01, 0.6, 0.01, 0.6, 2.0).is_err());
        assert!(qmult_table(0.01, 0.6, 0.01, 0.6, 0.0).is_err());
        assert!(qexp_table(0.3, 0.3, 0.3, 0.3, 0.5).is_err());
        assert!(qmult_table(0.3, 0.3, 0.3, 0.3, 1.5).is_err());
        assert!(qexp_table(0.7, 0.6, 0.3, 0.3, 1.0).is_err()); // p + q > 1
    }

    #[test]
    fn joint_sampling_recovers_cells() {
        let t = qexp_table(0.3, 0.3, 0.3, 0.3, 2.0).unwrap();
        let mut gen = SeededGenerator::new(42, 1);
        let n = 200_000;
        let (x, y) = t.sample_pair(n, &mut gen).unwrap();
        let mut freq = [[0usize; 3]; 3];
        for (&a, &b) in x.codes().iter().zip(y.codes()) {
            freq[a as usize][b as usize] += 1;
        }
        for i in 0..3 {
            for j in 0..3 {
                let p = t.cells()[i][j];
                let got = freq[i][j] as f64 / n as f64;
                let se = (p * (1.0 - p) / n as f64).sqrt();
                assert!(
                    (got - p).abs() < 5.0 * se.max(1e-6),
                    "cell ({i},{j}): {got} vs {p}"
                );
            }
        }
    }

    #[test]
    fn power_model_null_and_signal() {
        let mut gen = SeededGenerator::new(5, 0);
        let (_, y) = sample_power_model(0.3, 0.5, 0.0, 50_000, &mut gen).unwrap();
        let vals = y.values();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / vals.len() as f64;
        assert!(mean.abs() < 0.1, "null mean {mean}");
        assert!(
            (var - POWER_MODEL_VARIANCE).abs() < 0.5,
            "null variance {var}"
        );

        let (x, y) = sample_power_model(0.5, 1.0, 10.0, 50_000, &mut gen).unwrap();
        let mut sums = [0.0; 3];
        let mut counts = [0usize; 3];
        for (&g, &v) in x.codes().iter().zip(y.values()) {
            sums[g as usize] += v;
            counts[g as usize] += 1;
        }
        let m: Vec<f64> = (0..3).map(|k| sums[k] / counts[k] as f64).collect();
        // Dominant model at h = 1: groups 1 and 2 share the shifted mean.
        assert!(m[0].abs() < 0.5);
        assert!((m[1] - 10.0).abs() < 0.5);
        assert!((m[2] - 10.0).abs() < 0.5);
    }

    #[test]
    fn departure_model_pins() {
        let null_2s = hwe_departure(HweDepartureModel::TwoS, 0.0).unwrap();
        for (got, want) in null_2s.iter().zip([4.0 / 9.0, 4.0 / 9.0, 1.0 / 9.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
        let null_2k = hwe_departure(HweDepartureModel::TwoK, 0.0).unwrap();
        assert_eq!(null_2k, vec![0.25, 0.5, 0.25]);
        let hom_only = hwe_departure(HweDepartureModel::ThreeK, 1.0).unwrap();
        let third = 1.0 / 3.0;
        for (got, want) in hom_only.iter().zip([third, third, third, 0.0, 0.0, 0.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
        let null_3s = hwe_departure(HweDepartureModel::ThreeS, 0.0).unwrap();
        let hwe = hwe_expected(&[0.70, 0.25, 0.05]).unwrap();
        for (got, want) in null_3s.iter().zip(&hwe) {
            assert_relative_eq!(*got, *want, max_relative = 1e-12);
        }
    }

    #[test]
    fn departure_models_stay_on_simplex() {
        for model in [
            HweDepartureModel::TwoS,
            HweDepartureModel::TwoK,
            HweDepartureModel::ThreeS,
            HweDepartureModel::ThreeK,
        ] {
            let lo = if model == HweDepartureModel::TwoK {
                -1.0
            } else {
                0.0
            };
            for step in 0..=10 {
                let param = lo + (1.0 - lo) * step as f64 / 10.0;
                let p = hwe_departure(model, param).unwrap();
                assert_relative_eq!(p.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
                assert!(p.iter().all(|&v| (-1e-15..=1.0).contains(&v)));
            }
            assert!(hwe_departure(model, 1.5).is_err());
            assert!(hwe_departure(model, f64::NAN).is_err());
        }
        assert!(hwe_departure(HweDepartureModel::TwoS, -0.1).is_err());
        assert!("2K".parse::<HweDepartureModel>().is_ok());
        assert!("4s".parse::<HweDepartureModel>().is_err());
    }

    #[test]
    fn decaying_marginals_structure() {
        // eps = 0: exact product of truncated geometric marginals.
        let t = decaying_marginals(3, 4, 0.0).unwrap();
        let total: f64 = t.iter().flatten().sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
        let zi = 1.0 - 0.5f64.powi(3);
        let zj = 1.0 - 0.5f64.powi(4);
        for (i, row) in t.iter().enumerate() {
            for (j, &cell) in row.iter().enumerate() {
                let pi = 0.5f64.powi(i as i32 + 1) / zi;
                let pj = 0.5f64.powi(j as i32 + 1) / zj;
                assert_relative_eq!(cell, pi * pj, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn decaying_eps_bound_pins() {
        assert_relative_eq!(
            decaying_eps_bound(5, 8),
            1024.0 / 7905.0,
            max_relative = 1e-12
        );
        // The budget approaches 1/8 as the table grows.
        assert!((decaying_eps_bound(30, 30) - 0.125).abs() < 1e-6);
        let bound = decaying_eps_bound(5, 8);
        assert!(decaying_marginals(5, 8, bound).is_ok());
        assert!(decaying_marginals(5, 8, bound + 1e-9).is_err());
        assert!(decaying_marginals(1, 4, 0.0).is_err());
    }

    #[test]
    fn perturbation_preserves_marginals() {
        let base = decaying_marginals(5, 8, 0.0).unwrap();
        let bumped = decaying_marginals(5, 8, 0.1).unwrap();
        for i in 0..5 {
            let a: f64 = base[i].iter().sum();
            let b: f64 = bumped[i].iter().sum();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        for j in 0..8 {
            let a: f64 = base.iter().map(|r| r[j]).sum();
            let b: f64 = bumped.iter().map(|r| r[j]).sum();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        assert_relative_eq!(bumped[0][0], base[0][0] + 0.1, max_relative = 1e-12);
        assert_relative_eq!(bumped[0][1], base[0][1] - 0.1, max_relative = 1e-12);
    }

    #[test]
    fn joint_label_sampling_is_deterministic() {
        let t = decaying_marginals(4, 4, 0.05).unwrap();
        let (r1, c1) = sample_joint_labels(&t, 500, &mut SeededGenerator::new(3, 9)).unwrap();
        let (r2, c2) = sample_joint_labels(&t, 500, &mut SeededGenerator::new(3, 9)).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(c1, c2);
        assert!(r1.iter().all(|&v| v < 4) && c1.iter().all(|&v| v < 4));
    }
}
