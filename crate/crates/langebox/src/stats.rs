//! Small statistics toolbox: standard errors, batch means, Kolmogorov-Smirnov,
//! autocorrelation times and least-squares fits.

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Mean and naive i.i.d. standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let se = (variance(xs) / xs.len().max(1) as f64).sqrt();
    (m, se)
}

/// Mean and batch-means standard error, for serially correlated series.
/// Uses at least `min_batches` batches (default caller passes 32).
pub fn batch_means_se(xs: &[f64], min_batches: usize) -> (f64, f64) {
    let n = xs.len();
    let b = min_batches.max(2);
    if n < 2 * b {
        return mean_se(xs);
    }
    let batch_len = n / b;
    let mut batch_means = Vec::with_capacity(b);
    for k in 0..b {
        let chunk = &xs[k * batch_len..(k + 1) * batch_len];
        batch_means.push(mean(chunk));
    }
    let m = mean(&batch_means);
    let se = (variance(&batch_means) / b as f64).sqrt();
    (m, se)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (xs.len(), ys.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Critical value of the two-sample KS statistic at significance `alpha`.
/// `c(0.01) = 1.628`, `c(0.05) = 1.358`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = if alpha <= 0.011 {
        1.628
    } else if alpha <= 0.051 {
        1.358
    } else {
        1.224
    };
    c * (((n + m) as f64) / ((n * m) as f64)).sqrt()
}

/// Ordinary least squares `y ~ slope * x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    if sxx == 0.0 || n < 2.0 {
        return (0.0, my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Standard normal quantile (Beasley-Springer-Moro rational approximation).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        return (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0);
    }
    if p > 1.0 - p_low {
        return -normal_quantile(1.0 - p);
    }
    let q = p - 0.5;
    let r = q * q;
    (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
        / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
}

/// Threshold with the significance of a two-sided 3-sigma test, corrected
/// for taking a supremum over `k` comparisons.
pub fn sup_threshold_3se(k: usize) -> f64 {
    if k <= 1 {
        return 3.0;
    }
    let tail = 2.0 * (1.0 - 0.998650101968370); // P(|Z| > 3)
    normal_quantile(1.0 - tail / (2.0 * k as f64))
}

/// Integrated autocorrelation time by the initial-positive-sequence rule.
pub fn integrated_autocorrelation(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 8 {
        return 1.0;
    }
    let m = mean(xs);
    let var: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..(n / 2) {
        let mut acc = 0.0;
        for i in 0..(n - lag) {
            acc += (xs[i] - m) * (xs[i + lag] - m);
        }
        let rho = acc / ((n - lag) as f64 * var);
        if rho <= 0.0 {
            break;
        }
        tau += 2.0 * rho;
    }
    tau
}
