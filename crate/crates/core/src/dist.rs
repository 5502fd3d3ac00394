//! Normal and Student-t distribution functions.
//!
//! Quantiles are obtained by inverting the CDF numerically with a
//! bracketed Newton iteration; the CDFs themselves lean on the regularized
//! incomplete beta function from `statrs` and `erfc` from `libm`. (The
//! `statrs` erfc is only good to about 1e-11, too coarse for quantiles.)

use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Above this many degrees of freedom the t distribution is replaced by the
/// standard normal. The quantile difference there is below 1e-9.
pub const NORMAL_DF_LIMIT: f64 = 1e10;

/// Above this many degrees of freedom the incomplete beta loses digits, so
/// quantiles come from an expansion around the normal quantile instead.
pub const EXPANSION_DF: f64 = 1e5;

const X_TOL: f64 = 1e-13;
const MAX_ITER: usize = 200;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// CDF of Student's t with `df` degrees of freedom. Infinite `df` (or
/// anything past [`NORMAL_DF_LIMIT`]) gives the normal CDF.
pub fn t_cdf(x: f64, df: f64) -> f64 {
    if df > NORMAL_DF_LIMIT {
        return normal_cdf(x);
    }
    if x == 0.0 {
        return 0.5;
    }
    let x2 = x * x;
    // one-sided tail mass beyond |x|, picking the beta argument that is
    // away from 1 so the subtraction does not cancel
    let tail = if x2 < df {
        0.5 * (1.0 - beta_reg(0.5, 0.5 * df, x2 / (df + x2)))
    } else {
        0.5 * beta_reg(0.5 * df, 0.5, df / (df + x2))
    };
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

pub fn t_pdf(x: f64, df: f64) -> f64 {
    if df > NORMAL_DF_LIMIT {
        return normal_pdf(x);
    }
    let log_norm = ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * std::f64::consts::PI).ln();
    (log_norm - 0.5 * (df + 1.0) * (x * x / df).ln_1p()).exp()
}

/// Quantile of Student's t: the `x` with `t_cdf(x, df) == p`.
///
/// `df` may be `f64::INFINITY` for the standard normal.
pub fn t_quantile(p: f64, df: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) || !(df > 0.0) {
        return Err(Error::InvalidQuantile { p, df });
    }
    if df > NORMAL_DF_LIMIT {
        return Ok(invert(p, normal_cdf, normal_pdf));
    }
    if df > EXPANSION_DF {
        let z = invert(p, normal_cdf, normal_pdf);
        return Ok(large_df_quantile(z, df));
    }
    Ok(invert(p, |x| t_cdf(x, df), |x| t_pdf(x, df)))
}

/// Asymptotic expansion of the t quantile in powers of `1/df`. With
/// `df > 1e5` the first omitted term is below 1e-20.
fn large_df_quantile(z: f64, df: f64) -> f64 {
    let z2 = z * z;
    let g1 = z * (z2 + 1.0) / 4.0;
    let g2 = z * ((5.0 * z2 + 16.0) * z2 + 3.0) / 96.0;
    let g3 = z * (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) / 384.0;
    let g4 = z * ((((79.0 * z2 + 776.0) * z2 + 1482.0) * z2 - 1920.0) * z2 - 945.0) / 92160.0;
    z + (g1 + (g2 + (g3 + g4 / df) / df) / df) / df
}

/// Standard normal quantile, through the same inversion as [`t_quantile`].
pub fn normal_quantile(p: f64) -> Result<f64> {
    t_quantile(p, f64::INFINITY)
}

fn invert(p: f64, cdf: impl Fn(f64) -> f64, pdf: impl Fn(f64) -> f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = if p > 0.5 { (0.0, 1.0) } else { (-1.0, 0.0) };
    while p > 0.5 && cdf(hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    while p < 0.5 && cdf(lo) > p {
        hi = lo;
        lo *= 2.0;
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let f = cdf(x) - p;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = pdf(x);
        if d > 0.0 && (f / d).abs() <= X_TOL * x.abs().max(1.0) {
            return x - f / d;
        }
        let newton = x - f / d;
        // fall back to bisection whenever Newton leaves the bracket
        x = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= X_TOL * x.abs().max(1.0) {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // closed forms for df = 1 (Cauchy) and df = 2
    fn cauchy_quantile(p: f64) -> f64 {
        (std::f64::consts::PI * (p - 0.5)).tan()
    }

    fn t2_quantile(p: f64) -> f64 {
        (2.0 * p - 1.0) / (2.0 * p * (1.0 - p)).sqrt()
    }

    #[test]
    fn median_is_zero() {
        for df in [0.5, 1.0, 3.0, 40.0, 1e6, f64::INFINITY] {
            assert_eq!(t_quantile(0.5, df).unwrap(), 0.0);
        }
    }

    #[test]
    fn matches_closed_forms() {
        for p in [0.001, 0.025, 0.1, 0.3, 0.7, 0.9, 0.975, 0.999] {
            assert_abs_diff_eq!(t_quantile(p, 1.0).unwrap(), cauchy_quantile(p), epsilon = 1e-8 * cauchy_quantile(p).abs().max(1.0));
            assert_abs_diff_eq!(t_quantile(p, 2.0).unwrap(), t2_quantile(p), epsilon = 1e-8);
        }
    }

    #[test]
    fn table_values() {
        assert_abs_diff_eq!(t_quantile(0.975, 4.0).unwrap(), 2.776445, epsilon = 1e-4);
        assert_abs_diff_eq!(t_quantile(0.975, 1e6).unwrap(), 1.959964, epsilon = 1e-4);
        assert_abs_diff_eq!(t_quantile(0.975, 30.0).unwrap(), 2.042272, epsilon = 1e-5);
        assert_abs_diff_eq!(normal_quantile(0.975).unwrap(), 1.959963984540054, epsilon = 1e-14);
        assert_abs_diff_eq!(normal_quantile(0.95).unwrap(), 1.6448536269514722, epsilon = 1e-14);
    }

    #[test]
    fn large_df_reference_values() {
        // reference quantiles at p = 0.975 from an independent implementation
        let reference = [
            (1e3, 1.9623390808264074),
            (1e4, 1.960201239890626),
            (1e5, 1.9599877075346093),
            (1e6, 1.9599663568141066),
            (1e7, 1.959964221767205),
            (1e8, 1.9599640082627663),
            (1e9, 1.959963986912325),
        ];
        for (df, q) in reference {
            assert_abs_diff_eq!(t_quantile(0.975, df).unwrap(), q, epsilon = 1e-9);
        }
        // the two routes meet at the switch-over
        let below = t_quantile(0.975, EXPANSION_DF).unwrap();
        let above = t_quantile(0.975, EXPANSION_DF * (1.0 + 1e-12)).unwrap();
        assert!((below - above).abs() < 1e-9);
    }

    #[test]
    fn large_df_continuous_with_normal() {
        let z = normal_quantile(0.975).unwrap();
        let t = t_quantile(0.975, 1e9).unwrap();
        assert!((t - z).abs() < 1e-8);
        assert!(t > z);
    }

    #[test]
    fn cdf_round_trip() {
        for df in [1.5, 4.0, 17.0, 250.0] {
            for p in [1e-6, 0.01, 0.4, 0.6, 0.99, 1.0 - 1e-6] {
                let x = t_quantile(p, df).unwrap();
                assert_abs_diff_eq!(t_cdf(x, df), p, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(t_quantile(0.0, 3.0).is_err());
        assert!(t_quantile(1.0, 3.0).is_err());
        assert!(t_quantile(0.5, 0.0).is_err());
        assert!(t_quantile(f64::NAN, 3.0).is_err());
        assert!(t_quantile(0.5, -1.0).is_err());
    }
}
