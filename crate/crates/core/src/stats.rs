//! Hypothesis tests used by the sweep comparisons.
//!
//! Welch's t-test is the default two-group comparison (no equal-variance
//! assumption); the pooled-variance variant exists for the classic
//! ANOVA-equivalence identity (k=2 one-way ANOVA has F = t² of the pooled
//! test), which doubles as a cross-check between the two code paths.
//! p-values come from the t and F survival functions.

use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};
use thiserror::Error;

/// Errors produced by the tests.
#[derive(Debug, Error)]
pub enum StatsError {
    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("degenerate data: no variance anywhere in the input")]
    DegenerateData,
}

/// Two-sample t-test result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// One-way ANOVA result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: f64,
    pub df_within: f64,
    pub p: f64,
}

fn mean_and_ss(xs: &[f64]) -> (f64, f64) {
    // Welford's online accumulation: numerically stable mean and sum of
    // squared deviations.
    let mut mean = 0.0;
    let mut ss = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        ss += delta * (x - mean);
    }
    (mean, ss)
}

fn require(samples: &[f64], needed: usize) -> Result<(), StatsError> {
    if samples.len() < needed {
        return Err(StatsError::TooFewSamples {
            needed,
            got: samples.len(),
        });
    }
    Ok(())
}

fn two_sided_t_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0 by construction");
    2.0 * dist.sf(t.abs())
}

/// Welch's t-test: unequal variances, Welch–Satterthwaite degrees of
/// freedom, two-sided p.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    require(a, 2)?;
    require(b, 2)?;
    let (ma, ssa) = mean_and_ss(a);
    let (mb, ssb) = mean_and_ss(b);
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let va = ssa / (na - 1.0);
    let vb = ssb / (nb - 1.0);
    let sea = va / na;
    let seb = vb / nb;
    if sea + seb == 0.0 {
        return Err(StatsError::DegenerateData);
    }
    let t = (ma - mb) / (sea + seb).sqrt();
    let df = (sea + seb).powi(2)
        / (sea.powi(2) / (na - 1.0) + seb.powi(2) / (nb - 1.0));
    Ok(TTestResult {
        t,
        df,
        p: two_sided_t_p(t, df),
    })
}

/// Pooled-variance two-sample t-test (equal-variance assumption), df =
/// n_a + n_b − 2.
pub fn pooled_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    require(a, 2)?;
    require(b, 2)?;
    let (ma, ssa) = mean_and_ss(a);
    let (mb, ssb) = mean_and_ss(b);
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let df = na + nb - 2.0;
    let pooled_var = (ssa + ssb) / df;
    if pooled_var == 0.0 {
        return Err(StatsError::DegenerateData);
    }
    let t = (ma - mb) / (pooled_var * (1.0 / na + 1.0 / nb)).sqrt();
    Ok(TTestResult {
        t,
        df,
        p: two_sided_t_p(t, df),
    })
}

/// One-way ANOVA over k groups: F = between-group mean square over
/// within-group mean square, df = (k−1, N−k).
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: groups.len(),
        });
    }
    for g in groups {
        require(g, 2)?;
    }
    let n_total: usize = groups.iter().map(Vec::len).sum();
    let grand_mean = groups.iter().flatten().sum::<f64>() / n_total as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let (m, ss) = mean_and_ss(g);
        ss_between += g.len() as f64 * (m - grand_mean).powi(2);
        ss_within += ss;
    }
    let df_between = (groups.len() - 1) as f64;
    let df_within = (n_total - groups.len()) as f64;
    if ss_within == 0.0 {
        if ss_between == 0.0 {
            return Err(StatsError::DegenerateData);
        }
        // All variance is between groups: F diverges.
        return Ok(AnovaResult {
            f: f64::INFINITY,
            df_between,
            df_within,
            p: 0.0,
        });
    }
    let f = (ss_between / df_between) / (ss_within / df_within);
    let dist =
        FisherSnedecor::new(df_between, df_within).expect("valid dfs by construction");
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        p: dist.sf(f),
    })
}
