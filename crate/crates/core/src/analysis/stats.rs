//! Divergences and two-sample tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-6;

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Empty(format!("{name} has no entries")));
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidArgument(format!("{name} has entry {v}; entries must be non-negative")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidArgument(format!("{name} sums to {sum}, not 1")));
    }
    Ok(())
}

/// Jensen-Shannon divergence in bits, so the result lies in `[0, 1]`.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("distributions of length {} and {}", p.len(), q.len())));
    }
    check_distribution(p, "P")?;
    check_distribution(q, "Q")?;
    let half_kl = |a: f64, m: f64| if a > 0.0 { 0.5 * a * (a / m).log2() } else { 0.0 };
    let js: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            half_kl(a, m) + half_kl(b, m)
        })
        .sum();
    Ok(js.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn sorted(v: &[f64], name: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Empty(format!("sample {name} is empty")));
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument(format!("sample {name} contains NaN")));
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Survival function of the limiting Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        // Jacobi theta form converges fast for small arguments.
        let k = (2.0 * std::f64::consts::PI).sqrt() / lambda;
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let cdf: f64 = (1..=20).map(|j| (-((2 * j - 1) as f64).powi(2) * c).exp()).sum::<f64>() * k;
        1.0 - cdf
    } else {
        2.0 * (1..=100)
            .map(|j| {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (j * j) as f64 * lambda * lambda).exp()
            })
            .sum::<f64>()
    };
    p.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let a = sorted(a, "a")?;
    let b = sorted(b, "b")?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let lambda = (n * m / (n + m)).sqrt() * d;
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_sf(lambda),
    })
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Two-sided t-test without assuming equal variances.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Empty("t-test needs at least two values per group".into()));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("t-test input is not finite".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let (statistic, p_value) = if ma == mb {
            (0.0, 1.0)
        } else {
            ((ma - mb).signum() * f64::INFINITY, 0.0)
        };
        return Ok(WelchResult {
            statistic,
            df: f64::INFINITY,
            p_value,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(WelchResult {
        statistic: t,
        df,
        p_value: (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0),
    })
}

/// Pooled two-proportion z-test, two-sided.
pub fn two_proportion_z_test(k1: usize, n1: usize, k2: usize, n2: usize) -> Result<TestResult> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::Empty("proportion test needs non-empty groups".into()));
    }
    if k1 > n1 || k2 > n2 {
        return Err(Error::InvalidArgument("successes exceed group size".into()));
    }
    let (p1, p2) = (k1 as f64 / n1 as f64, k2 as f64 / n2 as f64);
    let pooled = (k1 + k2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
        });
    }
    let z = (p1 - p2) / se;
    let normal = Normal::standard();
    Ok(TestResult {
        statistic: z,
        p_value: (2.0 * normal.sf(z.abs())).clamp(0.0, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsd_worked_values() {
        assert_eq!(js_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(js_divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        // M = [0.75, 0.25]; KL(P||M) = 0.5·log2(2/3) + 0.5·log2(2), KL(Q||M) = log2(4/3)
        let expected = 0.5 * (0.5 * (0.5f64 / 0.75).log2() + 0.5 * (0.5f64 / 0.25).log2()) + 0.5 * (1.0f64 / 0.75).log2();
        let got = js_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn jsd_rejects_bad_input() {
        assert!(matches!(js_divergence(&[1.0], &[0.5, 0.5]), Err(Error::Shape(_))));
        assert!(js_divergence(&[1.5, -0.5], &[0.5, 0.5]).is_err());
        assert!(js_divergence(&[0.5, 0.4], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn ks_statistic() {
        assert_eq!(ks_test(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap().statistic, 0.0);
        assert_eq!(ks_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap().statistic, 1.0);
        assert_eq!(ks_test(&[1.0, 3.0], &[2.0, 4.0]).unwrap().statistic, 0.5);
        assert!(ks_test(&[], &[1.0]).is_err());
    }

    #[test]
    fn kolmogorov_tail_matches_reference_values() {
        // Tabulated critical values of the limiting distribution.
        for (lambda, p) in [(1.2238, 0.10), (1.3581, 0.05), (1.6276, 0.01)] {
            assert!((kolmogorov_sf(lambda) - p).abs() < 2e-4, "{lambda}");
        }
        // Both series agree around the switch point.
        let below = 1.0 - (2.0 * std::f64::consts::PI).sqrt() / 1.18
            * (1..=20)
                .map(|j| (-((2 * j - 1) as f64).powi(2) * std::f64::consts::PI.powi(2) / (8.0 * 1.18 * 1.18)).exp())
                .sum::<f64>();
        assert!((below - kolmogorov_sf(1.18)).abs() < 1e-12);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert!(kolmogorov_sf(5.0) < 1e-20);
    }

    #[test]
    fn welch_against_hand_computation() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0];
        // means 2.5, 4; variances 5/3, 4
        let sa: f64 = (5.0 / 3.0) / 4.0;
        let sb: f64 = 4.0 / 3.0;
        let t = -1.5 / (sa + sb).sqrt();
        let df = (sa + sb).powi(2) / (sa * sa / 3.0 + sb * sb / 2.0);
        let r = welch_t_test(&a, &b).unwrap();
        assert!((r.statistic - t).abs() < 1e-12);
        assert!((r.df - df).abs() < 1e-12);
        assert!(r.p_value > 0.2 && r.p_value < 0.5);
        let same = welch_t_test(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!((same.statistic, same.p_value), (0.0, 1.0));
    }

    #[test]
    fn proportion_test() {
        let r = two_proportion_z_test(80, 100, 20, 100).unwrap();
        assert!((r.statistic - 0.6 / (0.25f64 * 0.02).sqrt()).abs() < 1e-12);
        assert!(r.p_value < 1e-10);
        assert_eq!(two_proportion_z_test(5, 10, 5, 10).unwrap().p_value, 1.0);
        assert!(two_proportion_z_test(3, 2, 0, 1).is_err());
    }
}
