//! Compensated summation. Partition identities are checked at 1e-12 over
//! 1e4 terms, which naive accumulation does not reliably meet.

/// Neumaier variant of Kahan summation.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensates_small_terms() {
        // 1 followed by 1e16 copies of 1e-16 sums to 2 exactly when
        // compensated; naive summation returns 1.
        let n = 10_000_000usize;
        let parts = std::iter::once(1.0).chain(std::iter::repeat(1e-16).take(n));
        let got = neumaier_sum(parts);
        assert!((got - (1.0 + n as f64 * 1e-16)).abs() < 1e-15);
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(neumaier_sum(std::iter::empty()), 0.0);
    }
}
