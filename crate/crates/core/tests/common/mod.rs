//! Shared helpers for integration tests, including an independent
//! binomial-tail oracle for the exact confidence bounds.
#![allow(dead_code)] // each test binary uses a different subset

/// P(Bin(n, p) >= k) by direct summation with a numerically stable
/// recurrence on the terms.
pub fn binom_upper_tail(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    // sum P(X = i) for i = k..=n in log space per term
    let ln_p = p.ln();
    let ln_q = (1.0 - p).ln();
    let mut total = 0.0;
    for i in k..=n {
        let ln_term = ln_choose(n, i) + i as f64 * ln_p + (n - i) as f64 * ln_q;
        total += ln_term.exp();
    }
    total.min(1.0)
}

/// P(Bin(n, p) <= k).
pub fn binom_lower_tail(k: u64, n: u64, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    1.0 - binom_upper_tail(k + 1, n, p)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: u64) -> f64 {
    use std::sync::OnceLock;
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![0.0; 4096];
        for i in 1..t.len() {
            t[i] = t[i - 1] + (i as f64).ln();
        }
        t
    });
    if (n as usize) < table.len() {
        table[n as usize]
    } else {
        (1..=n).map(|i| (i as f64).ln()).sum()
    }
}

/// Exact lower confidence bound by bisection on the upper tail: the p at
/// which observing >= k successes has probability exactly 1 - confidence.
pub fn oracle_binom_lower(k: u64, n: u64, confidence: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let target = 1.0 - confidence;
    // tail(p) = P(X >= k | p) is increasing in p
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if binom_upper_tail(k, n, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact upper confidence bound: the p at which observing <= k successes
/// has probability exactly 1 - confidence.
pub fn oracle_binom_upper(k: u64, n: u64, confidence: f64) -> f64 {
    if k == n {
        return 1.0;
    }
    let target = 1.0 - confidence;
    // tail(p) = P(X <= k | p) is decreasing in p
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if binom_lower_tail(k, n, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
