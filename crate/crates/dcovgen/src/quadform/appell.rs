//! The first Appell hypergeometric function `F1`, summed as a double power
//! series inside the unit polydisc.

use crate::error::{Error, Result};

/// Relative accuracy target for the partial sums.
const REL_TOL: f64 = 1e-15;
/// Hard cap on the number of series terms.
const MAX_TERMS: usize = 1_000_000;

/// First Appell hypergeometric series
/// `F1(a; b1, b2; c; x, y) = Σ_{m,n} (a)_{m+n}(b1)_m(b2)_n / ((c)_{m+n} m! n!) xᵐ yⁿ`,
/// valid for `|x| < 1` and `|y| < 1`.
///
/// Terms are generated row by row (fixed `m`, increasing `n`) with exact
/// term-ratio recurrences, so no factorials or Pochhammer symbols are formed
/// explicitly. Summation stops once two consecutive rows contribute less
/// than the relative tolerance `1e-15`.
///
/// # Errors
///
/// Rejects arguments outside the open unit polydisc, a non-positive-integer
/// `c` (poles of the series), and reports non-convergence if the term cap of
/// 10⁶ is hit first.
pub fn appell_f1(a: f64, b1: f64, b2: f64, c: f64, x: f64, y: f64) -> Result<f64> {
    for (name, v) in [("a", a), ("b1", b1), ("b2", b2), ("c", c), ("x", x), ("y", y)] {
        if !v.is_finite() {
            return Err(Error::invalid(format!("appell_f1 argument {name} = {v} not finite")));
        }
    }
    if x.abs() >= 1.0 || y.abs() >= 1.0 {
        return Err(Error::invalid(format!(
            "appell_f1 series requires |x| < 1 and |y| < 1, got x = {x}, y = {y}"
        )));
    }
    if c <= 0.0 && c == c.floor() {
        return Err(Error::invalid(format!("appell_f1 pole: c = {c} is a non-positive integer")));
    }

    // Row m carries the factor (a)_m (b1)_m x^m / ((c)_m m!), and within a row
    // the n-terms follow T(m,n+1)/T(m,n) = (a+m+n)(b2+n) y / ((c+m+n)(n+1)).
    //
    // For large `a` the terms first grow before the factorial denominators
    // win, so every stopping rule below fires only once the relevant sequence
    // is decaying in magnitude.
    const OVERFLOW_GUARD: f64 = 1e290;
    let mut total = 0.0f64;
    let mut comp = 0.0f64; // Kahan compensation
    let mut row_head = 1.0f64; // T(m, 0)
    let mut terms_used = 0usize;
    let mut small_rows = 0u32;
    let mut prev_row_abs = f64::INFINITY;

    let mut m = 0usize;
    loop {
        // Sum row m.
        let mut term = row_head;
        let mut row_sum = 0.0f64;
        let mut n = 0usize;
        loop {
            row_sum += term;
            terms_used += 1;
            if terms_used >= MAX_TERMS {
                return Err(Error::NonConvergence {
                    what: "appell_f1 double series",
                    achieved: (term / total.abs().max(f64::MIN_POSITIVE)).abs(),
                    target: REL_TOL,
                });
            }
            let mn = (m + n) as f64;
            let nf = n as f64;
            let next = term * (a + mn) * (b2 + nf) / ((c + mn) * (nf + 1.0)) * y;
            if !next.is_finite() || next.abs() > OVERFLOW_GUARD {
                return Err(Error::NonConvergence {
                    what: "appell_f1 double series (term overflow)",
                    achieved: f64::INFINITY,
                    target: REL_TOL,
                });
            }
            // The row tail decays once the term ratio drops below one; only
            // then is a negligible term proof that the rest is negligible.
            if next.abs() <= REL_TOL * (total.abs() + row_sum.abs() + f64::MIN_POSITIVE)
                && next.abs() <= term.abs()
            {
                break;
            }
            term = next;
            n += 1;
        }

        // Kahan-compensated accumulation of the row.
        let yk = row_sum - comp;
        let t = total + yk;
        comp = (t - total) - yk;
        total = t;

        // Row-level termination: two consecutive negligible rows, required to
        // be part of a decaying row sequence.
        if row_sum.abs() <= REL_TOL * total.abs().max(f64::MIN_POSITIVE)
            && row_sum.abs() <= prev_row_abs
        {
            small_rows += 1;
            if small_rows >= 2 {
                return Ok(total);
            }
        } else {
            small_rows = 0;
        }
        prev_row_abs = row_sum.abs();

        // Advance the row head: T(m+1,0)/T(m,0) = (a+m)(b1+m) x / ((c+m)(m+1)).
        let mf = m as f64;
        row_head *= (a + mf) * (b1 + mf) / ((c + mf) * (mf + 1.0)) * x;
        if row_head == 0.0 {
            // b1 was a non-positive integer: the x-direction is a polynomial
            // and every remaining row vanishes.
            return Ok(total);
        }
        if !row_head.is_finite() || row_head.abs() > OVERFLOW_GUARD {
            return Err(Error::NonConvergence {
                what: "appell_f1 double series (row overflow)",
                achieved: f64::INFINITY,
                target: REL_TOL,
            });
        }
        m += 1;
    }
}
