//! Log-gamma and log-factorial used by the count distributions.

use std::f64::consts::{E, PI};
use std::sync::OnceLock;

const LANCZOS_G: f64 = 10.900511;

#[allow(clippy::excessive_precision)]
const LANCZOS_COEFFS: [f64; 11] = [
    2.48574089138753565546e-5,
    1.05142378581721974210,
    -3.45687097222016235469,
    4.51227709466894823700,
    -2.98285225323576655721,
    1.05639711577126713077,
    -1.95428773191645869583e-1,
    1.70970543404441224307e-2,
    -5.71926117404305781283e-4,
    4.63399473359905636708e-6,
    -2.71994908488607703910e-9,
];

/// ln(2 * sqrt(e / pi))
const LN_2_SQRT_E_OVER_PI: f64 = 0.620_782_237_635_245_2;

/// Natural logarithm of the gamma function for `x > 0`.
///
/// Lanczos approximation (g = 10.900511, 11 terms) with the reflection
/// formula below 0.5; relative accuracy is close to machine precision.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let s = LANCZOS_COEFFS
            .iter()
            .enumerate()
            .skip(1)
            .fold(LANCZOS_COEFFS[0], |s, (i, c)| s + c / (i as f64 - x));
        PI.ln()
            - (PI * x).sin().ln()
            - s.ln()
            - LN_2_SQRT_E_OVER_PI
            - (0.5 - x) * ((0.5 - x + LANCZOS_G) / E).ln()
    } else {
        let s = LANCZOS_COEFFS
            .iter()
            .enumerate()
            .skip(1)
            .fold(LANCZOS_COEFFS[0], |s, (i, c)| s + c / (x + i as f64 - 1.0));
        s.ln() + LN_2_SQRT_E_OVER_PI + (x - 0.5) * ((x - 0.5 + LANCZOS_G) / E).ln()
    }
}

const FACTORIAL_TABLE_LEN: usize = 171;

fn ln_factorial_table() -> &'static [f64; FACTORIAL_TABLE_LEN] {
    static TABLE: OnceLock<[f64; FACTORIAL_TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [0.0; FACTORIAL_TABLE_LEN];
        let mut fact = 1.0f64;
        for (k, slot) in table.iter_mut().enumerate().skip(1) {
            fact *= k as f64;
            *slot = fact.ln();
        }
        table
    })
}

/// ln(k!), exact-product table below 171 and log-gamma above.
pub fn ln_factorial(k: u64) -> f64 {
    match ln_factorial_table().get(k as usize) {
        Some(v) => *v,
        None => ln_gamma(k as f64 + 1.0),
    }
}

/// ln(Γ(r + k) / Γ(r)), summed term by term for small `k` so that large
/// shape parameters do not cancel catastrophically.
pub fn ln_rising(r: f64, k: u64) -> f64 {
    if k <= 256 {
        (0..k).map(|i| (r + i as f64).ln()).sum()
    } else {
        ln_gamma(r + k as f64) - ln_gamma(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln_factorial_by_sum(k: u64) -> f64 {
        (1..=k).map(|i| (i as f64).ln()).sum()
    }

    #[test]
    fn ln_gamma_integers_match_log_factorial_sums() {
        for n in [1u64, 2, 5, 10, 50, 170, 500, 5000] {
            let want = ln_factorial_by_sum(n - 1);
            let got = ln_gamma(n as f64);
            assert!(
                (got - want).abs() <= 1e-13 * want.abs().max(1.0),
                "n={n}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn ln_gamma_half_integers() {
        // Γ(1/2) = sqrt(pi), Γ(3/2) = sqrt(pi)/2
        assert!((ln_gamma(0.5) - 0.5 * PI.ln()).abs() < 1e-14);
        assert!((ln_gamma(1.5) - (0.5 * PI.ln() - 2f64.ln())).abs() < 1e-14);
        // reflection branch: Γ(0.25) = 3.625609908221908...
        assert!((ln_gamma(0.25) - 3.625_609_908_221_908_f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn ln_factorial_table_and_gamma_branch_agree_at_seam() {
        let by_table = ln_factorial(170);
        let by_gamma = ln_gamma(171.0);
        assert!((by_table - by_gamma).abs() < 1e-11);
        assert!((ln_factorial(171) - ln_factorial_by_sum(171)).abs() < 1e-10);
    }

    #[test]
    fn ln_rising_branches_agree() {
        for r in [0.025, 1.0, 7.5, 1e4] {
            let k = 300;
            let summed: f64 = (0..k).map(|i| (r + i as f64).ln()).sum();
            let rel = (ln_rising(r, k) - summed).abs() / summed.abs().max(1.0);
            assert!(rel < 1e-12, "r={r}: rel {rel}");
        }
    }
}
