//! Least-squares regression with classical inference and Student t-tests.
//!
//! The regression kernel is specialized to the four-column segmented design
//! `[1, i, x(i), i*x(i)]` used by the interrupted time-series fit. Solving
//! goes through a Householder QR factorization; p-values come from the
//! Student t CDF evaluated via the regularized incomplete beta function, so
//! the crate carries no external numeric dependency.

use thiserror::Error;

/// Number of design columns in the segmented regression.
pub const N_COEFS: usize = 4;

/// Condition-number threshold beyond which a design is treated as rank deficient.
pub const COND_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("design is rank deficient (condition number {cond:.3e})")]
    RankDeficient { cond: f64 },
    #[error("sample too small: got {n}, need at least {min}")]
    SampleTooSmall { n: usize, min: usize },
    #[error("degenerate sample: zero variance")]
    ZeroVariance,
    #[error("paired samples differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
}

/// Fitted segmented regression with classical (homoskedastic) inference.
///
/// When the residual sum of squares is exactly zero the standard errors are
/// zero; the t statistic is then reported as 0 for a zero coefficient
/// (p = 1) and +/-inf for a nonzero one (p = 0).
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub beta: [f64; N_COEFS],
    pub se: [f64; N_COEFS],
    pub t: [f64; N_COEFS],
    pub p: [f64; N_COEFS],
    /// Residual degrees of freedom, n - 4.
    pub df: usize,
    pub n: usize,
    /// Residual sum of squares.
    pub rss: f64,
}

/// Ordinary least squares on an n x 4 design.
///
/// Requires n >= 5 and a full-rank design (condition number below
/// [`COND_LIMIT`]). Standard errors are classical homoskedastic ones and
/// p-values are two-sided against the t distribution with n - 4 degrees of
/// freedom.
pub fn ols(design: &[[f64; N_COEFS]], y: &[f64]) -> Result<OlsFit, StatsError> {
    let n = design.len();
    assert_eq!(n, y.len(), "design and response length mismatch");
    if n < N_COEFS + 1 {
        return Err(StatsError::SampleTooSmall { n, min: N_COEFS + 1 });
    }

    // Householder QR. `a` holds the columns being triangularized; `qty`
    // accumulates Q^T y in place.
    let mut a: Vec<[f64; N_COEFS]> = design.to_vec();
    let mut qty: Vec<f64> = y.to_vec();
    let mut r = [[0.0f64; N_COEFS]; N_COEFS];

    for col in 0..N_COEFS {
        let norm: f64 = a[col..].iter().map(|row| row[col] * row[col]).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(StatsError::RankDeficient { cond: f64::INFINITY });
        }
        let alpha = if a[col][col] >= 0.0 { -norm } else { norm };
        let v0 = a[col][col] - alpha;
        // |v|^2 = 2 * norm * (norm + |a[col][col]|), via v0^2 + tail.
        let vnorm2 = v0 * v0
            + a[col + 1..].iter().map(|row| row[col] * row[col]).sum::<f64>();
        r[col][col] = alpha;
        if vnorm2 > 0.0 {
            for j in col + 1..N_COEFS {
                let dot = v0 * a[col][j]
                    + a[col + 1..].iter().map(|row| row[col] * row[j]).sum::<f64>();
                let f = 2.0 * dot / vnorm2;
                a[col][j] -= f * v0;
                for row in a[col + 1..].iter_mut() {
                    row[j] -= f * row[col];
                }
                r[col][j] = a[col][j];
            }
            let dot =
                v0 * qty[col] + a[col + 1..].iter().zip(&qty[col + 1..]).map(|(row, q)| row[col] * q).sum::<f64>();
            let f = 2.0 * dot / vnorm2;
            qty[col] -= f * v0;
            for (row, q) in a[col + 1..].iter().zip(qty[col + 1..].iter_mut()) {
                *q -= f * row[col];
            }
        } else {
            for j in col + 1..N_COEFS {
                r[col][j] = a[col][j];
            }
        }
    }

    let cond = condition_from_r(&r);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(StatsError::RankDeficient { cond });
    }

    // Back-substitution for beta.
    let mut beta = [0.0f64; N_COEFS];
    for i in (0..N_COEFS).rev() {
        let mut s = qty[i];
        for j in i + 1..N_COEFS {
            s -= r[i][j] * beta[j];
        }
        beta[i] = s / r[i][i];
    }

    let mut rss: f64 = qty[N_COEFS..].iter().map(|q| q * q).sum();
    // Cancellation in the factorization leaves O(eps^2)-relative residue even
    // for an exactly representable fit; snap that to a true zero so the
    // zero-residual inference rules below apply.
    let y_scale2: f64 = y.iter().map(|v| v * v).sum();
    if rss <= 1e-24 * y_scale2 {
        rss = 0.0;
    }
    let df = n - N_COEFS;
    let sigma2 = rss / df as f64;

    // (X'X)^-1 = R^-1 R^-T; only the diagonal is needed.
    let rinv = invert_upper(&r);
    let mut se = [0.0f64; N_COEFS];
    for i in 0..N_COEFS {
        let g: f64 = (i..N_COEFS).map(|j| rinv[i][j] * rinv[i][j]).sum();
        se[i] = (sigma2 * g).sqrt();
    }

    let beta_scale = beta.iter().fold(1.0f64, |m, b| m.max(b.abs()));
    let mut t = [0.0f64; N_COEFS];
    let mut p = [0.0f64; N_COEFS];
    for i in 0..N_COEFS {
        if se[i] > 0.0 {
            t[i] = beta[i] / se[i];
            p[i] = student_t_two_sided_p(t[i], df as f64);
        } else if beta[i].abs() <= 1e-12 * beta_scale {
            t[i] = 0.0;
            p[i] = 1.0;
        } else {
            t[i] = if beta[i] > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
            p[i] = 0.0;
        }
    }

    Ok(OlsFit { beta, se, t, p, df, n, rss })
}

/// Condition number of the design from its triangular factor, via Jacobi
/// eigenvalues of R^T R (= X^T X).
fn condition_from_r(r: &[[f64; N_COEFS]; N_COEFS]) -> f64 {
    let mut m = [[0.0f64; N_COEFS]; N_COEFS];
    for i in 0..N_COEFS {
        for j in 0..N_COEFS {
            let mut s = 0.0;
            for k in 0..=i.min(j) {
                s += r[k][i] * r[k][j];
            }
            m[i][j] = s;
        }
    }
    let eig = jacobi_eigenvalues(&mut m);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &l in &eig {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    if lo <= 0.0 {
        return f64::INFINITY;
    }
    (hi / lo).sqrt()
}

/// Cyclic Jacobi sweeps on a symmetric 4x4 matrix; returns the eigenvalues.
fn jacobi_eigenvalues(m: &mut [[f64; N_COEFS]; N_COEFS]) -> [f64; N_COEFS] {
    for _ in 0..50 {
        let mut off = 0.0;
        for i in 0..N_COEFS {
            for j in i + 1..N_COEFS {
                off += m[i][j] * m[i][j];
            }
        }
        if off < 1e-300 {
            break;
        }
        for p in 0..N_COEFS {
            for q in p + 1..N_COEFS {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N_COEFS {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..N_COEFS {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    [m[0][0], m[1][1], m[2][2], m[3][3]]
}

fn invert_upper(r: &[[f64; N_COEFS]; N_COEFS]) -> [[f64; N_COEFS]; N_COEFS] {
    let mut inv = [[0.0f64; N_COEFS]; N_COEFS];
    for i in (0..N_COEFS).rev() {
        inv[i][i] = 1.0 / r[i][i];
        for j in i + 1..N_COEFS {
            let mut s = 0.0;
            for k in i + 1..=j {
                s += r[i][k] * inv[k][j];
            }
            inv[i][j] = -s / r[i][i];
        }
    }
    inv
}

/// Result of a one-sample, paired, or Welch two-sample t-test.
#[derive(Debug, Clone)]
pub struct TTestResult {
    pub statistic: f64,
    /// Degrees of freedom; fractional for the Welch test.
    pub df: f64,
    pub p_two_sided: f64,
    pub mean_a: f64,
    pub mean_b: Option<f64>,
    pub n_a: usize,
    pub n_b: Option<usize>,
}

fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// One-sample t-test of `xs` against the hypothesized mean `mu0`.
pub fn t_test_one_sample(xs: &[f64], mu0: f64) -> Result<TTestResult, StatsError> {
    let n = xs.len();
    if n < 2 {
        return Err(StatsError::SampleTooSmall { n, min: 2 });
    }
    let (mean, var) = mean_and_var(xs);
    if var <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let se = (var / n as f64).sqrt();
    let t = (mean - mu0) / se;
    let df = (n - 1) as f64;
    Ok(TTestResult {
        statistic: t,
        df,
        p_two_sided: student_t_two_sided_p(t, df),
        mean_a: mean,
        mean_b: None,
        n_a: n,
        n_b: None,
    })
}

/// Paired t-test: a one-sample test of the differences a - b against 0.
pub fn t_test_paired(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch { a: a.len(), b: b.len() });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let base = t_test_one_sample(&diffs, 0.0)?;
    let mean_a = a.iter().sum::<f64>() / a.len() as f64;
    let mean_b = b.iter().sum::<f64>() / b.len() as f64;
    Ok(TTestResult {
        mean_a,
        mean_b: Some(mean_b),
        n_b: Some(b.len()),
        ..base
    })
}

/// Welch's unequal-variance two-sample t-test.
pub fn t_test_welch(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::SampleTooSmall { n: a.len().min(b.len()), min: 2 });
    }
    let (ma, va) = mean_and_var(a);
    let (mb, vb) = mean_and_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se2 = va / na + vb / nb;
    if se2 <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    Ok(TTestResult {
        statistic: t,
        df,
        p_two_sided: student_t_two_sided_p(t, df),
        mean_a: ma,
        mean_b: Some(mb),
        n_a: a.len(),
        n_b: Some(b.len()),
    })
}

/// Two-sided p-value for a t statistic with `df` degrees of freedom:
/// P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2).
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if t == 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

const BETA_EPS: f64 = 1e-15;
const BETA_MAX_ITER: usize = 400;

/// Regularized incomplete beta function I_x(a, b), continued-fraction
/// evaluation (Lentz's method) with the symmetry transform for convergence.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (a * x.ln() + b * (1.0 - x).ln() + ln_gamma(a + b)
        - ln_gamma(a)
        - ln_gamma(b))
    .exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;

    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;

    for m in 1..=BETA_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;

        if (del - 1.0).abs() < BETA_EPS {
            break;
        }
    }
    h
}

/// Log gamma via the Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(z: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if z < 0.5 {
        // Reflection: Γ(z) Γ(1-z) = π / sin(πz)
        let pi = std::f64::consts::PI;
        return pi.ln() - (pi * z).sin().abs().ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = 0.99999999999980993;
    for (i, &c) in COEFFS.iter().enumerate() {
        x += c / (z + i as f64 + 1.0);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}
