//! Small sample statistics used by the reports.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (0 for fewer than two samples).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Nearest-rank quantile, q in [0, 1].
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = (q.clamp(0.0, 1.0) * s.len() as f64).ceil() as usize;
    s[rank.clamp(1, s.len()) - 1]
}

pub fn mean_abs(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().map(|x| x.abs()).sum::<f64>() / xs.len() as f64
}

pub fn p95_abs(xs: &[f64]) -> f64 {
    let a: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
    quantile(&a, 0.95)
}

/// Standard error of a binomial proportion.
pub fn binomial_stderr(p: f64, trials: usize) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / trials as f64).max(0.0).sqrt()
}

/// Fraction of |z| ≤ eps.
pub fn success_rate(z: &[f64], eps: f64) -> f64 {
    if z.is_empty() {
        return 0.0;
    }
    z.iter().filter(|x| x.abs() <= eps).count() as f64 / z.len() as f64
}

/// Median; averages the two middle values for even lengths.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        (s[m - 1] + s[m]) / 2.0
    }
}
