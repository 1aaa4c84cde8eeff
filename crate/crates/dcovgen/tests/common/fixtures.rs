//! Frozen high-precision reference values.
//!
//! Generated by `tools/gen_fixtures.py` (mpmath, 40-80 significant
//! digits, each value cross-checked through at least two independent
//! evaluation routes). Do not edit by hand; regenerate with:
//!
//! ```text
//! python3 tools/gen_fixtures.py
//! ```

#![allow(clippy::excessive_precision, clippy::approx_constant, dead_code)]

/// `(a1, a2, nu, x, cdf)` for the two-weight variance-ratio CDF.
pub const GENF_CDF: &[(f64, f64, u32, f64, f64)] = &[
    (1.0, 1.0, 5, 2.0, 0.5687988496283078),
    (1.0, 1.0, 100, 0.7, 0.29445215075505127),
    (2.5, 2.5, 12, 30.0, 0.984375),
    (0.5, 0.25, 5, 0.5, 0.45672464326298595),
    (0.5, 0.25, 57, 6.0, 0.9984729514636226),
    (1.3, 0.02, 57, 0.35, 0.38290339234761345),
    (7.0, 0.001, 297, 0.9, 0.279677802983636),
    (0.37, 0.11, 297, 11.0, 0.9999998742593122),
    (1000.0, 1.0, 3, 800.0, 0.562511103648396),
    (0.9, 0.899999, 30, 4.0, 0.8740985917439423),
    (0.05, 0.049, 1, 0.2, 0.5545860824018544),
    (3.0, 1e-05, 200, 0.015, 0.05628248312440988),
    (0.8, 0.0, 7, 0.9, 0.6759365519389626),
    (2.0, 0.0, 60, 6.0, 0.9115970053771205),
    (0.341, 0.154, 997, 3.0, 0.99561091364199),
];

/// `(a1, a2, nu, x, survival)` in regimes where `1 - cdf` would cancel.
pub const GENF_SF_DEEP: &[(f64, f64, u32, f64, f64)] = &[
    (0.3416666666666667, 0.15416666666666665, 2997, 99.9, 1.7230306036009004e-62),
    (0.5, 0.25, 297, 700.0, 2.8487552629695133e-114),
    (0.45, 0.2, 997, 400.0, 4.989971518407375e-140),
    (0.47, 0.0, 297, 250.0, 3.684080176887268e-68),
    (0.45, 0.1, 47, 60.0, 2.8773621003110442e-15),
    (0.12, 0.002, 97, 30.0, 1.3586123856251886e-28),
];

/// `(l1, l2, k, n, p_covariates, tail)` for the finite-sample tail.
pub const TN_TAIL: &[(f64, f64, f64, u32, u32, f64)] = &[
    (0.5, 0.25, 30.0, 300, 0, 5.274311927432262e-16),
    (0.5, 0.25, 3.0, 300, 0, 0.022104844624736487),
    (0.45, 0.1, 2.0, 50, 3, 0.04607898336700866),
    (0.6, 0.05, 1.0, 25, 6, 0.28985422706363023),
    (0.375, 0.1875, 100.0, 3000, 0, 1.7230306036009088e-62),
    (0.5, 0.0, 9.0, 120, 0, 1.2422393202191746e-05),
    (0.7, 0.0, 25.0, 80, 4, 3.1648923515763055e-11),
    (0.4, 0.01, 8.0, 60, 0, 1.3702642296025506e-06),
    (0.3, 0.3, 5.0, 200, 0, 0.00018959494431985594),
    (0.5, 0.2, 0.0, 100, 0, 1.0),
];

/// `(l1, l2, k, n, p_star, p_star2)` for the screening bracket.
pub const PVALUE_BOUNDS: &[(f64, f64, f64, u32, f64, f64)] = &[
    (0.6478, 0.333, 9.428, 60, 7.420504960890127e-05, 0.0024234264292146406),
    (0.5, 0.25, 3.0, 300, 0.021184639951844803, 0.22115851469364547),
    (0.5, 0.25, 30.0, 300, 4.148734653483137e-16, 8.958104690799419e-12),
    (0.9, 0.85, 2.0, 40, 0.32581084289786977, 1.0),
    (0.4, 0.01, 8.0, 60, 1.3702642296025506e-06, 1.6919215976360884e-06),
    (0.7, 0.0, 25.0, 80, 1.2790950553814663e-11, 1.729897571504892e-11),
    (0.5, 0.2, 0.0, 100, 1.0, 1.0),
    (0.0, 0.0, 1.0, 50, 1.0, 1.0),
];

/// `(a, b1, b2, c, x, y, value)` for the Appell F1 double series.
pub const APPELL_F1: &[(f64, f64, f64, f64, f64, f64, f64)] = &[
    (2.0, 0.5, 1.0, 2.0, 0.3, 0.6, 2.988071523335984),
    (1.5, 0.5, 1.0, 2.0, 0.1, 0.1, 1.125549742472956),
    (3.0, 0.25, 0.75, 3.5, -0.4, 0.2, 1.070752297362103),
    (151.0, 0.5, 1.0, 2.0, 0.2, 0.35, 3.3637645770439913e+26),
    (31.0, 0.5, 1.0, 2.0, 0.85, 0.9, 1.5713469467683826e+29),
    (2.0, 0.5, 1.0, 2.0, 0.0, 0.0, 1.0),
    (5.0, 1.0, 2.0, 4.0, 0.5, -0.5, 0.9629629629629629),
    (2.5, 0.5, 1.0, 2.0, 0.0, 0.7, 4.843624947144614),
    (2.5, 0.5, 1.0, 2.0, 0.7, 0.0, 2.2620761135221157),
    (12.5, 0.5, 1.0, 2.0, 0.55, 0.62, 26819.842019063246),
];

/// `(weights, dfs, x, cdf)` for weighted chi-square CDF evaluation.
pub const WCHISQ_CDF: &[(&[f64], &[u32], f64, f64)] = &[
    (&[1.0], &[1], 3.841458820694124, 0.95),
    (&[0.5, 0.25], &[1, 1], 0.2, 0.24454752912965888),
    (&[0.5, 0.25], &[1, 1], 1.0, 0.7425336400281931),
    (&[0.5, 0.25], &[1, 1], 3.0, 0.9777341291317094),
    (&[0.5, 0.25], &[1, 1], 8.0, 0.9999074357957067),
    (&[0.5, 0.25], &[1, 1], 30.0, 0.9999999999999865),
    (&[0.375, 0.25], &[1, 1], 0.5, 0.5550048881143582),
    (&[0.375, 0.25], &[1, 1], 2.0, 0.9576698093055637),
    (&[0.375, 0.25], &[1, 1], 6.0, 0.9998812578338226),
    (&[2.0, 2.0, 2.0], &[1, 1, 1], 7.0, 0.679237879194361),
    (&[0.2, 0.12, 0.08000000000000002, 0.075, 0.045, 0.03], &[1, 1, 1, 1, 1, 1], 0.1, 0.02686204457367138),
    (&[0.2, 0.12, 0.08000000000000002, 0.075, 0.045, 0.03], &[1, 1, 1, 1, 1, 1], 0.6, 0.6529036704705391),
    (&[0.2, 0.12, 0.08000000000000002, 0.075, 0.045, 0.03], &[1, 1, 1, 1, 1, 1], 2.5, 0.9984826952561427),
    (&[2.0, 0.5], &[3, 2], 9.0, 0.7331051855744103),
    (&[1500000000.0, 2.0], &[1, 1], 3000000000.0, 0.8427007928113457),
    (&[3.0, -1.0], &[1, 1], -1.0, 0.14031830865499215),
    (&[3.0, -1.0], &[1, 1], 0.0, 0.3333333333333333),
    (&[3.0, -1.0], &[1, 1], 2.0, 0.6637590378874183),
    (&[2.0, 1.0, -0.5, -0.25], &[1, 2, 1, 3], 3.0, 0.6351197951301979),
];

/// `(d1, d2, x, survival)` for the classical F distribution.
pub const F_SF: &[(u32, u32, f64, f64)] = &[
    (1, 22, 1.0, 0.3281832618806706),
    (1, 57, 18.254, 7.420328796026571e-05),
    (2, 57, 30.49, 9.905906385509108e-10),
    (1, 118, 20.8235, 1.2422555257344576e-05),
    (2, 197, 8.9545, 0.00018960284427545492),
    (1, 297, 532.0, 3.628235718744175e-68),
    (1, 5997, 30.0, 4.49613830707519e-08),
    (1, 7997, 45.0, 2.104453974043515e-11),
    (2, 2997, 55.0, 3.481098414712691e-24),
    (1, 76, 61.29032258064516, 2.3397644476250128e-11),
];

/// `(w1, w2, t, survival)` deep tails of two-weight quadratic forms.
pub const TWO_WEIGHT_SF: &[(f64, f64, f64, f64)] = &[
    (0.5, 0.25, 350.0, 4.23184127084097e-154),
    (0.3, 0.01, 200.0, 5.39364304424892e-147),
    (0.375, 0.25, 120.0, 2.516679398597048e-71),
];
