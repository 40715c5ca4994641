//! Binomial confidence intervals.

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959963984540054;

/// Wilson score interval for `errors` out of `n` at normal quantile `z`.
/// An empty sample gives the uninformative `[0, 1]`.
pub fn wilson_interval(errors: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The bounds touch 0 and 1 exactly at the edges; avoid rounding residue.
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if errors as f64 == n {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

/// True when the two intervals do not overlap and `a` lies below `b`.
pub fn separated_below(a: (f64, f64), b: (f64, f64)) -> bool {
    a.1 < b.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // 10 of 100, z = 1.96: 0.0552 .. 0.1744 (standard tables).
        let (lo, hi) = wilson_interval(10, 100, Z_95);
        assert!((lo - 0.05522).abs() < 1e-4, "{lo}");
        assert!((hi - 0.17437).abs() < 1e-4, "{hi}");
    }

    #[test]
    fn edges_stay_in_unit_interval() {
        let (lo, hi) = wilson_interval(0, 50, Z_95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
        let (lo, hi) = wilson_interval(50, 50, Z_95);
        assert!(lo > 0.9 && hi == 1.0);
        assert_eq!(wilson_interval(0, 0, Z_95), (0.0, 1.0));
    }
}
