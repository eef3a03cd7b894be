//! Derived analyses over experiment rows: normalized errors, switching
//! detection, and log-log slope fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ExperimentRow;

/// A mean gap divided by the variance-dependent rate `(sigma^2/n)^{1/(D+2)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRow {
    pub objective: String,
    pub optimizer: String,
    pub sigma2: f64,
    pub n: usize,
    pub normalized: f64,
}

/// Normalizes every row by the variance-dependent rate. Rows with
/// `sigma^2 = 0` are rejected; callers filter them out first.
pub fn normalized_errors(rows: &[ExperimentRow], d_eff: f64) -> Result<Vec<NormalizedRow>> {
    if !(d_eff >= 0.0) {
        return Err(Error::InvalidParameter("effective dimension must be >= 0".into()));
    }
    rows.iter()
        .map(|row| {
            if row.sigma2 <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "normalized errors are undefined for sigma^2 = {}",
                    row.sigma2
                )));
            }
            let rate = (row.sigma2 / row.n as f64).powf(1.0 / (d_eff + 2.0));
            Ok(NormalizedRow {
                objective: row.objective.clone(),
                optimizer: row.optimizer.clone(),
                sigma2: row.sigma2,
                n: row.n,
                normalized: row.mean_gap / rate,
            })
        })
        .collect()
}

/// Smallest grid budget where the noisy curve's mean gap is at least
/// `threshold` times the noiseless curve's, staying above for all larger
/// budgets; infinity when that never happens. Both curves must share the
/// budget grid.
pub fn detect_switch(
    sigma_curve: &[(usize, f64)],
    zero_curve: &[(usize, f64)],
    threshold: f64,
) -> Result<f64> {
    if sigma_curve.len() != zero_curve.len()
        || sigma_curve
            .iter()
            .zip(zero_curve.iter())
            .any(|(a, b)| a.0 != b.0)
    {
        return Err(Error::Config("switch detection requires matching budget grids".into()));
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter("threshold must be > 0".into()));
    }
    let above: Vec<bool> = sigma_curve
        .iter()
        .zip(zero_curve.iter())
        .map(|(&(_, gs), &(_, g0))| {
            let ratio = gs / g0; // g0 = 0 gives +inf, 0/0 gives NaN (not above)
            ratio >= threshold
        })
        .collect();
    // first budget from which the ratio stays above threshold
    let mut from = None;
    for (i, &a) in above.iter().enumerate() {
        if a {
            if from.is_none() {
                from = Some(i);
            }
        } else {
            from = None;
        }
    }
    Ok(match from {
        Some(i) => sigma_curve[i].0 as f64,
        None => f64::INFINITY,
    })
}

/// One switching-budget estimate per noisy curve of a (objective,
/// optimizer) group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwitchRow {
    pub objective: String,
    pub optimizer: String,
    pub sigma2: f64,
    /// Estimated switching budget; `inf` when the curves never separate.
    pub switch_budget: f64,
}

/// Runs [`detect_switch`] for every `sigma^2 > 0` curve against the
/// matching `sigma^2 = 0` curve. Groups lacking a noiseless curve are
/// skipped.
pub fn switch_table(rows: &[ExperimentRow], threshold: f64) -> Result<Vec<SwitchRow>> {
    let mut groups: Vec<(String, String)> = Vec::new();
    for row in rows {
        let key = (row.objective.clone(), row.optimizer.clone());
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    let mut out = Vec::new();
    for (objective, optimizer) in groups {
        let group: Vec<&ExperimentRow> = rows
            .iter()
            .filter(|r| r.objective == objective && r.optimizer == optimizer)
            .collect();
        let mut zero: Vec<(usize, f64)> = group
            .iter()
            .filter(|r| r.sigma2 == 0.0)
            .map(|r| (r.n, r.mean_gap))
            .collect();
        if zero.is_empty() {
            continue;
        }
        zero.sort_by_key(|p| p.0);
        let mut sigmas: Vec<f64> =
            group.iter().filter(|r| r.sigma2 > 0.0).map(|r| r.sigma2).collect();
        sigmas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sigmas.dedup();
        for sigma2 in sigmas {
            let mut curve: Vec<(usize, f64)> = group
                .iter()
                .filter(|r| r.sigma2 == sigma2)
                .map(|r| (r.n, r.mean_gap))
                .collect();
            curve.sort_by_key(|p| p.0);
            let switch_budget = detect_switch(&curve, &zero, threshold)?;
            out.push(SwitchRow {
                objective: objective.clone(),
                optimizer: optimizer.clone(),
                sigma2,
                switch_budget,
            });
        }
    }
    Ok(out)
}

/// Least-squares slope of `ln(mean gap)` against `ln(n)` over budgets in
/// `[window.0, window.1]`. Needs at least three budgets and positive gaps.
pub fn fit_loglog_slope(points: &[(usize, f64)], window: (f64, f64)) -> Result<f64> {
    let selected: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(n, _)| (n as f64) >= window.0 && (n as f64) <= window.1)
        .map(|&(n, g)| (n as f64, g))
        .collect();
    if selected.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "log-log fit needs at least 3 budgets in the window, got {}",
            selected.len()
        )));
    }
    if selected.iter().any(|&(_, g)| !(g > 0.0)) {
        return Err(Error::InvalidParameter(
            "log-log fit requires strictly positive gaps in the window".into(),
        ));
    }
    let pts: Vec<(f64, f64)> = selected.iter().map(|&(n, g)| (n.ln(), g.ln())).collect();
    let m = pts.len() as f64;
    let mu = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let num: f64 = pts.iter().map(|p| (p.0 - mu) * (p.1 - mv)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mu).powi(2)).sum();
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn row(sigma2: f64, n: usize, gap: f64) -> ExperimentRow {
        ExperimentRow {
            objective: "test1_d1".into(),
            optimizer: "stroquool".into(),
            d: 1,
            sigma2,
            n,
            replications: 10,
            mean_gap: gap,
            stderr: 0.0,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn normalized_examples() {
        // gap = 0.01, sigma^2 = 1e-2, n = 1e4, D = 0: 0.01 / 1e-3 = 10
        let rows = vec![row(1e-2, 10_000, 0.01), row(1e-2, 10_000, 0.0)];
        let out = normalized_errors(&rows, 0.0).unwrap();
        assert_relative_eq!(out[0].normalized, 10.0, max_relative = 1e-12);
        assert_eq!(out[1].normalized, 0.0);
        // sigma^2 = 0 rejected
        assert!(normalized_errors(&[row(0.0, 100, 0.1)], 0.0).is_err());
    }

    #[test]
    fn normalized_scale_invariance_d0() {
        // equal gaps with (sigma^2, n) scaled by the same factor give
        // equal normalized values in the D = 0 regime
        let rows = vec![row(1e-4, 1000, 0.02), row(1e-3, 10_000, 0.02)];
        let out = normalized_errors(&rows, 0.0).unwrap();
        assert_relative_eq!(out[0].normalized, out[1].normalized, max_relative = 1e-12);
    }

    #[test]
    fn normalized_constant_for_exact_rate_data() {
        // synthetic gaps exactly c (sigma^2/n)^{1/(D+2)} normalize to c
        let d_eff = 0.5;
        let c = 3.7;
        let mut rows = Vec::new();
        for &sigma2 in &[1e-2, 1e-6] {
            for &n in &[300usize, 1000, 30_000] {
                let gap = c * (sigma2 / n as f64).powf(1.0 / (d_eff + 2.0));
                rows.push(row(sigma2, n, gap));
            }
        }
        for nr in normalized_errors(&rows, d_eff).unwrap() {
            assert_relative_eq!(nr.normalized, c, max_relative = 1e-12);
        }
    }

    #[test]
    fn detect_switch_examples() {
        let grid = [300usize, 1000, 3000, 10_000, 30_000, 100_000, 300_000];
        // identical curves: never switches
        let zero: Vec<(usize, f64)> = grid.iter().map(|&n| (n, (n as f64).powi(-2))).collect();
        assert_eq!(detect_switch(&zero, &zero, 2.0).unwrap(), f64::INFINITY);
        // synthetic: g0 = n^-2, g1 = max(n^-2, 0.1 n^-1/2); the scan oracle
        // says the ratio exceeds 2 from the first grid point on
        let g1: Vec<(usize, f64)> = grid
            .iter()
            .map(|&n| {
                let nf = n as f64;
                (n, (nf.powi(-2)).max(0.1 * nf.powf(-0.5)))
            })
            .collect();
        let expected = grid
            .iter()
            .find(|&&n| {
                let nf = n as f64;
                0.1 * nf.powf(-0.5) >= 2.0 * nf.powi(-2)
            })
            .copied()
            .unwrap() as f64;
        assert_eq!(detect_switch(&g1, &zero, 2.0).unwrap(), expected);
        // mismatched grids rejected
        assert!(detect_switch(&g1[..3], &zero, 2.0).is_err());
    }

    #[test]
    fn detect_switch_requires_persistence() {
        // a single early blip does not count; the ratio must stay above
        let zero = vec![(10usize, 1.0), (100, 1.0), (1000, 1.0)];
        let noisy = vec![(10usize, 5.0), (100, 1.0), (1000, 5.0)];
        assert_eq!(detect_switch(&noisy, &zero, 2.0).unwrap(), 1000.0);
    }

    #[test]
    fn switch_table_monotone_in_sigma() {
        // smaller variances delay the switch
        let grid = [100usize, 1000, 10_000, 100_000];
        let mut rows = Vec::new();
        for &n in &grid {
            rows.push(row(0.0, n, (n as f64).powi(-2)));
        }
        for &s in &[1e-2, 1e-6, 1e-10] {
            for &n in &grid {
                let nf = n as f64;
                let gap = (nf.powi(-2)).max((s / nf).sqrt());
                rows.push(row(s, n, gap));
            }
        }
        let table = switch_table(&rows, 2.0).unwrap();
        assert_eq!(table.len(), 3);
        // rows sorted by sigma ascending; switches nonincreasing as sigma grows
        assert!(table[0].switch_budget >= table[1].switch_budget);
        assert!(table[1].switch_budget >= table[2].switch_budget);
    }

    #[test]
    fn loglog_slope_examples() {
        let grid = [300usize, 1000, 3000, 10_000];
        let exact_half: Vec<(usize, f64)> =
            grid.iter().map(|&n| (n, (n as f64).powf(-0.5))).collect();
        let s = fit_loglog_slope(&exact_half, (0.0, 1e9)).unwrap();
        assert_abs_diff_eq!(s, -0.5, epsilon = 1e-12);
        let exact_two: Vec<(usize, f64)> =
            grid.iter().map(|&n| (n, (n as f64).powi(-2))).collect();
        assert_abs_diff_eq!(fit_loglog_slope(&exact_two, (0.0, 1e9)).unwrap(), -2.0, epsilon = 1e-12);
        let constant: Vec<(usize, f64)> = grid.iter().map(|&n| (n, 0.3)).collect();
        assert_abs_diff_eq!(fit_loglog_slope(&constant, (0.0, 1e9)).unwrap(), 0.0, epsilon = 1e-12);
        // window too small / nonpositive gaps
        assert!(fit_loglog_slope(&exact_two, (0.0, 1000.0)).is_err());
        let with_zero = vec![(10usize, 0.0), (100, 1.0), (1000, 1.0)];
        assert!(fit_loglog_slope(&with_zero, (0.0, 1e9)).is_err());
    }
}
