//! Significance tests and confidence intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    /// The first sample is larger.
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub dof: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTest {
    pub z: f64,
    pub p: f64,
}

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Linear-interpolated quantile, `q` in [0, 1].
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn tail(stat: f64, alt: Alternative, sf: impl Fn(f64) -> f64) -> f64 {
    match alt {
        Alternative::Greater => sf(stat),
        Alternative::Less => sf(-stat),
        Alternative::TwoSided => (2.0 * sf(stat.abs())).min(1.0),
    }
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64], alt: Alternative) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::DegenerateSample("each sample needs at least 2 values".into()));
    }
    let (va, vb) = (sample_variance(a), sample_variance(b));
    if !(va > 0.0) || !(vb > 0.0) {
        return Err(Error::DegenerateSample("sample variance is zero".into()));
    }
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let t = (mean(a) - mean(b)) / (sa + sb).sqrt();
    let dof = (sa + sb).powi(2) / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::DegenerateSample(e.to_string()))?;
    Ok(TTest {
        t,
        dof,
        p: tail(t, alt, |x| dist.sf(x)),
    })
}

/// Two-proportion z-test with pooled standard error.
pub fn z_test_proportions(
    successes_a: u64,
    n_a: u64,
    successes_b: u64,
    n_b: u64,
    alt: Alternative,
) -> Result<ZTest> {
    if n_a == 0 || n_b == 0 || successes_a > n_a || successes_b > n_b {
        return Err(Error::DegenerateSample(format!(
            "invalid counts {successes_a}/{n_a} vs {successes_b}/{n_b}"
        )));
    }
    let (na, nb) = (n_a as f64, n_b as f64);
    let pooled = (successes_a + successes_b) as f64 / (na + nb);
    if pooled <= 0.0 || pooled >= 1.0 {
        return Err(Error::DegenerateSample(format!("pooled proportion is {pooled}")));
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt();
    let z = (successes_a as f64 / na - successes_b as f64 / nb) / se;
    let normal = Normal::standard();
    Ok(ZTest {
        z,
        p: tail(z, alt, |x| normal.sf(x)),
    })
}

/// 95% Wilson score interval for a proportion.
pub fn wilson_interval(successes: u64, n: u64) -> Option<(f64, f64)> {
    if n == 0 {
        return None;
    }
    let (n, p) = (n as f64, successes as f64 / n as f64);
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Some((centre - half, centre + half))
}

/// 95% normal-approximation interval for a mean; `None` with fewer than two
/// values.
pub fn mean_interval(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let half = Z_95 * (sample_variance(xs) / xs.len() as f64).sqrt();
    Some((m - half, m + half))
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    const A: [f64; 7] = [57.8, 61.2, 49.5, 70.1, 55.0, 63.3, 58.9];
    const B: [f64; 6] = [51.0, 47.2, 53.9, 44.1, 50.5, 49.8];

    // Reference values from scipy.stats (ttest_ind with equal_var=False,
    // norm.sf) on the same fixtures.
    #[test]
    fn welch_matches_reference() {
        let r = welch_t_test(&A, &B, Alternative::Greater).unwrap();
        assert_abs_diff_eq!(r.t, 3.545_123_524_241_388_3, epsilon = 1e-9);
        assert_abs_diff_eq!(r.dof, 9.278_173_526_690_87, epsilon = 1e-9);
        assert_abs_diff_eq!(r.p, 0.002_984_897_909_999_491, epsilon = 1e-9);
        let less = welch_t_test(&A, &B, Alternative::Less).unwrap();
        assert_abs_diff_eq!(less.p, 0.997_015_102_090_000_5, epsilon = 1e-9);
        let two = welch_t_test(&A, &B, Alternative::TwoSided).unwrap();
        assert_abs_diff_eq!(two.p, 0.005_969_795_819_998_982, epsilon = 1e-9);
    }

    #[test]
    fn welch_symmetry_and_degenerate() {
        let r = welch_t_test(&A, &A, Alternative::Greater).unwrap();
        assert_eq!(r.t, 0.0);
        assert_abs_diff_eq!(r.p, 0.5, epsilon = 1e-12);
        assert!(matches!(
            welch_t_test(&[1.0, 1.0], &B, Alternative::Greater),
            Err(Error::DegenerateSample(_))
        ));
        assert!(welch_t_test(&[1.0], &B, Alternative::Greater).is_err());
    }

    #[test]
    fn z_test_matches_reference() {
        let r = z_test_proportions(37, 68, 19, 101, Alternative::Greater).unwrap();
        assert_abs_diff_eq!(r.z, 4.821_407_479_532_045, epsilon = 1e-9);
        assert_abs_diff_eq!(r.p, 7.127_441_669_118_48e-7, epsilon = 1e-12);
        let r = z_test_proportions(90, 100, 50, 100, Alternative::Greater).unwrap();
        assert_abs_diff_eq!(r.z, 6.172_133_998_483_676, epsilon = 1e-9);
        assert!(r.p < 0.05);
        let eq = z_test_proportions(30, 60, 15, 30, Alternative::Greater).unwrap();
        assert_eq!(eq.z, 0.0);
        assert_abs_diff_eq!(eq.p, 0.5, epsilon = 1e-12);
        assert!(z_test_proportions(0, 10, 0, 10, Alternative::Greater).is_err());
        assert!(z_test_proportions(10, 10, 5, 5, Alternative::Greater).is_err());
    }

    #[test]
    fn intervals() {
        let (lo, hi) = wilson_interval(3, 5).unwrap();
        assert_abs_diff_eq!(lo, 0.230_724_281_276_012_8, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 0.882_379_225_767_352, epsilon = 1e-12);
        assert!(mean_interval(&[1.0]).is_none());
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
    }
}
