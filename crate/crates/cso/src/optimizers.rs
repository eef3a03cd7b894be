//! Budget-constrained adaptive optimizers: uniform random search, a
//! Kiefer-Wolfowitz finite-difference stochastic approximation, and a
//! StroquOOL-style hierarchical tree search.
//!
//! Every optimizer consumes at most the oracle's budget, recommends a point
//! it actually visited, and is bit-reproducible for a fixed stream.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::simulation::{RngStream, SimulationOracle, Trajectory};

/// Optimizer selector plus kind-specific parameters, as it appears in run
/// config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerSpec {
    Uniform,
    Kwsa {
        /// Gain sequence scale: step sizes are `gain / k`.
        #[serde(default = "default_gain")]
        gain: f64,
        /// Finite-difference perturbation scale: `fd_step / k^{1/4}`.
        #[serde(default = "default_fd_step")]
        fd_step: f64,
    },
    Stroquool,
}

fn default_gain() -> f64 {
    1.0
}

fn default_fd_step() -> f64 {
    0.2
}

impl OptimizerSpec {
    pub fn kwsa_default() -> Self {
        OptimizerSpec::Kwsa { gain: default_gain(), fd_step: default_fd_step() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerSpec::Uniform => "uniform",
            OptimizerSpec::Kwsa { .. } => "kwsa",
            OptimizerSpec::Stroquool => "stroquool",
        }
    }

    /// Smallest budget the optimizer accepts in dimension `d`.
    pub fn min_budget(&self, d: usize) -> usize {
        match self {
            OptimizerSpec::Uniform => 1,
            OptimizerSpec::Kwsa { .. } => 2 * d + 1,
            OptimizerSpec::Stroquool => 16,
        }
    }
}

/// Optimizer output: the estimated optimal solution, the full observation
/// trajectory, and scalar diagnostics.
#[derive(Debug, Clone)]
pub struct Recommendation {
    pub x_hat: Point,
    pub trajectory: Trajectory,
    pub diagnostics: BTreeMap<String, f64>,
}

impl Recommendation {
    /// Conformance audit: the trajectory fits the budget and the
    /// recommendation is a visited point.
    pub fn audit(&self, budget: usize) -> Result<()> {
        if self.trajectory.len() > budget {
            return Err(Error::AssertionFailed(format!(
                "trajectory length {} exceeds budget {budget}",
                self.trajectory.len()
            )));
        }
        if !self.trajectory.contains_point(self.x_hat.coords()) {
            return Err(Error::AssertionFailed(
                "recommendation is not among the visited points".into(),
            ));
        }
        Ok(())
    }
}

/// Samples `n` independent uniform points, one observation each, and
/// recommends the highest observed value (earliest index on ties).
pub fn uniform_search(mut oracle: SimulationOracle, rng: &mut RngStream) -> Result<Recommendation> {
    let n = oracle.remaining();
    if n < 1 {
        return Err(Error::BudgetExhausted { budget: oracle.budget() });
    }
    let d = oracle.dim();
    let mut best_value = f64::NEG_INFINITY;
    let mut best_index = 0usize;
    let mut x = vec![0.0; d];
    for t in 0..n {
        for v in x.iter_mut() {
            *v = rng.next_uniform();
        }
        let y = oracle.observe(&x, rng)?;
        if y > best_value {
            best_value = y;
            best_index = t;
        }
    }
    let log = oracle.into_log();
    let x_hat = Point::new(log.point(best_index).to_vec())?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("best_observed".into(), best_value);
    diagnostics.insert("observations".into(), log.len() as f64);
    Ok(Recommendation { x_hat, trajectory: log, diagnostics })
}

/// Kiefer-Wolfowitz stochastic approximation with central finite
/// differences: `x_{k+1} = clip(x_k + a_k g_k)`, gains `a_k = gain/k`,
/// perturbations `c_k = fd_step / k^{1/4}`. Each iteration spends `2d`
/// observations; perturbed points are clipped into the domain, which
/// shrinks the difference step one-sidedly at the boundary. One final
/// observation is spent on the last iterate so the recommendation is a
/// visited point.
pub fn kwsa(
    mut oracle: SimulationOracle,
    rng: &mut RngStream,
    gain: f64,
    fd_step: f64,
) -> Result<Recommendation> {
    let d = oracle.dim();
    if oracle.remaining() < 2 * d + 1 {
        return Err(Error::Infeasible(format!(
            "kwsa needs at least 2d+1 = {} observations, budget leaves {}",
            2 * d + 1,
            oracle.remaining()
        )));
    }
    if !(gain > 0.0) || !(fd_step > 0.0) {
        return Err(Error::InvalidParameter("kwsa gain and fd_step must be > 0".into()));
    }
    let mut x = vec![0.5; d];
    let mut grad = vec![0.0; d];
    let mut probe = vec![0.0; d];
    let mut k = 1usize;
    while oracle.remaining() >= 2 * d + 1 {
        let c_k = fd_step / (k as f64).powf(0.25);
        for i in 0..d {
            let hi = (x[i] + c_k).min(1.0);
            let lo = (x[i] - c_k).max(0.0);
            probe.copy_from_slice(&x);
            probe[i] = hi;
            let y_hi = oracle.observe(&probe, rng)?;
            probe[i] = lo;
            let y_lo = oracle.observe(&probe, rng)?;
            grad[i] = if hi > lo { (y_hi - y_lo) / (hi - lo) } else { 0.0 };
        }
        let a_k = gain / k as f64;
        for i in 0..d {
            x[i] = (x[i] + a_k * grad[i]).clamp(0.0, 1.0);
        }
        k += 1;
    }
    oracle.observe(&x, rng)?;
    let log = oracle.into_log();
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("iterations".into(), (k - 1) as f64);
    diagnostics.insert("final_fd_step".into(), fd_step / ((k - 1).max(1) as f64).powf(0.25));
    diagnostics.insert("observations".into(), log.len() as f64);
    Ok(Recommendation { x_hat: Point::new(x)?, trajectory: log, diagnostics })
}

/// One cell of the ternary partition tree. Splitting is along coordinate
/// `depth mod d`, the middle child sharing the parent's center, so every
/// representative point nests exactly.
struct TreeCell {
    depth: u32,
    center: Vec<f64>,
    half: Vec<f64>,
    sum: f64,
    count: u64,
    opened: bool,
}

impl TreeCell {
    fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NEG_INFINITY
        } else {
            self.sum / self.count as f64
        }
    }
}

/// StroquOOL-style budget split: exploration opens, per depth `h` and
/// precision `p = floor(log2(h_max/h))..0`, the best not-yet-opened cell
/// having at least `2^p` evaluations (opening evaluates each child's
/// center `2^p` times); validation re-evaluates, per `p`, the best cell
/// with at least `2^p` evaluations and recommends the highest validation
/// mean. `h_max = max(1, floor(n / (2 (ceil(log2 n) + 1)^2)))`.
pub fn stroquool_h_max(n: usize) -> u32 {
    let log2n = (n as f64).log2().ceil() as u32;
    let denom = 2 * (log2n as usize + 1).pow(2);
    ((n / denom) as u32).max(1)
}

pub fn stroquool(mut oracle: SimulationOracle, rng: &mut RngStream) -> Result<Recommendation> {
    let n = oracle.remaining();
    if n < 16 {
        return Err(Error::Infeasible(format!(
            "stroquool needs a budget of at least 16, got {n}"
        )));
    }
    let d = oracle.dim();
    let h_max = stroquool_h_max(n);

    let mut cells: Vec<TreeCell> = vec![TreeCell {
        depth: 0,
        center: vec![0.5; d],
        half: vec![0.5; d],
        sum: 0.0,
        count: 0,
        opened: false,
    }];

    // opening a cell: create its three children and evaluate each child's
    // center `evals` times
    let open = |cells: &mut Vec<TreeCell>,
                oracle: &mut SimulationOracle,
                rng: &mut RngStream,
                idx: usize,
                evals: u64|
     -> Result<()> {
        let (depth, center, half) =
            (cells[idx].depth, cells[idx].center.clone(), cells[idx].half.clone());
        let axis = depth as usize % d;
        cells[idx].opened = true;
        for child in -1i32..=1 {
            let mut c = center.clone();
            let mut h = half.clone();
            h[axis] = half[axis] / 3.0;
            c[axis] = center[axis] + child as f64 * 2.0 * h[axis];
            let mut sum = 0.0;
            let mut count = 0u64;
            for _ in 0..evals {
                if oracle.remaining() == 0 {
                    break;
                }
                sum += oracle.observe(&c, rng)?;
                count += 1;
            }
            cells.push(TreeCell { depth: depth + 1, center: c, half: h, sum, count, opened: false });
        }
        Ok(())
    };

    // init: open the root with h_max evaluations
    open(&mut cells, &mut oracle, rng, 0, h_max as u64)?;

    // exploration
    for h in 1..=h_max {
        let p_top = (h_max / h).ilog2();
        for p in (0..=p_top).rev() {
            let need = 1u64 << p;
            let mut best: Option<usize> = None;
            for (i, cell) in cells.iter().enumerate() {
                if cell.depth == h && !cell.opened && cell.count >= need {
                    let better = match best {
                        None => true,
                        Some(b) => cell.mean() > cells[b].mean(),
                    };
                    if better {
                        best = Some(i);
                    }
                }
            }
            if let Some(idx) = best {
                if oracle.remaining() < 3 * need as usize {
                    break;
                }
                open(&mut cells, &mut oracle, rng, idx, need)?;
            }
        }
    }
    let explore_spent = oracle.spent();

    // validation: one candidate per precision class
    let p_max = h_max.ilog2();
    let val_evals = n / (2 * (p_max as usize + 1));
    let mut best_candidate: Option<(f64, u32, usize)> = None; // (val mean, depth, cell id)
    for p in 0..=p_max {
        let need = 1u64 << p;
        let mut cand: Option<usize> = None;
        for (i, cell) in cells.iter().enumerate() {
            if cell.count >= need {
                let better = match cand {
                    None => true,
                    Some(b) => cell.mean() > cells[b].mean(),
                };
                if better {
                    cand = Some(i);
                }
            }
        }
        let Some(idx) = cand else { continue };
        let evals = val_evals.min(oracle.remaining());
        if evals == 0 {
            continue;
        }
        let mut sum = 0.0;
        for _ in 0..evals {
            sum += oracle.observe(&cells[idx].center, rng)?;
        }
        let mean = sum / evals as f64;
        let key = (mean, cells[idx].depth, idx);
        let better = match &best_candidate {
            None => true,
            // ties broken toward the lowest (depth, index)
            Some((m, dep, id)) => {
                mean > *m || (mean == *m && (cells[idx].depth, idx) < (*dep, *id))
            }
        };
        if better {
            best_candidate = Some(key);
        }
    }

    let (_, _, best_idx) = best_candidate.expect("at least one candidate exists");
    let x_hat = Point::new(cells[best_idx].center.clone())?;
    let max_depth = cells.iter().map(|c| c.depth).max().unwrap_or(0);
    let log = oracle.into_log();
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("h_max".into(), h_max as f64);
    diagnostics.insert("cells".into(), cells.len() as f64);
    diagnostics.insert("max_depth".into(), max_depth as f64);
    diagnostics.insert("explore_observations".into(), explore_spent as f64);
    diagnostics.insert("observations".into(), log.len() as f64);
    Ok(Recommendation { x_hat, trajectory: log, diagnostics })
}

/// Dispatches on the optimizer spec. The oracle's budget is the run's `n`.
pub fn run_algorithm(
    spec: &OptimizerSpec,
    oracle: SimulationOracle,
    rng: &mut RngStream,
) -> Result<Recommendation> {
    match spec {
        OptimizerSpec::Uniform => uniform_search(oracle, rng),
        OptimizerSpec::Kwsa { gain, fd_step } => kwsa(oracle, rng, *gain, *fd_step),
        OptimizerSpec::Stroquool => stroquool(oracle, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_test1, Objective};
    use crate::simulation::NoiseModel;
    use approx::assert_abs_diff_eq;

    fn noiseless(obj: &Objective, budget: usize) -> SimulationOracle<'_> {
        SimulationOracle::new(obj, NoiseModel::from_sigma2(0.0).unwrap(), budget)
    }

    #[test]
    fn uniform_recommends_argmax() {
        let obj = make_test1(1, None).unwrap();
        let oracle = noiseless(&obj, 50);
        let mut rng = RngStream::from_master_seed(3);
        let rec = uniform_search(oracle, &mut rng).unwrap();
        rec.audit(50).unwrap();
        // recommendation value equals max over trajectory
        let best = rec
            .trajectory
            .values()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(obj.eval(&rec.x_hat), best);
    }

    #[test]
    fn uniform_single_point_budget() {
        let obj = make_test1(2, None).unwrap();
        let oracle = noiseless(&obj, 1);
        let mut rng = RngStream::from_master_seed(3);
        let rec = uniform_search(oracle, &mut rng).unwrap();
        assert_eq!(rec.trajectory.len(), 1);
        assert_eq!(rec.x_hat.coords(), rec.trajectory.point(0));
    }

    #[test]
    fn uniform_noiseless_picks_best_of_known_points() {
        // with sigma = 0 the recommendation is the argmax of true values:
        // y1 at {0.1, e^-1, 0.9} -> 0.9282, 1, 0.7162
        let obj = make_test1(1, None).unwrap();
        let e1 = 1.0 / std::f64::consts::E;
        let vals = [0.1, e1, 0.9].map(|x| obj.eval_slice(&[x]));
        assert!((vals[0] - 0.9282).abs() < 1e-4);
        assert!((vals[2] - 0.7162).abs() < 1e-4);
        assert!(vals[1] == 1.0 && vals[1] > vals[0] && vals[1] > vals[2]);
    }

    #[test]
    fn kwsa_gradient_estimate_is_central_difference() {
        // y = 1 - (x - 0.3)^2 at x = 0.5 with c_k = 0.1:
        // (y(0.6) - y(0.4)) / 0.2 = -0.4, the analytic -2(x - 0.3)
        let c = Point::new(vec![0.3]).unwrap();
        let obj = make_test1(1, Some(c)).unwrap();
        let g = (obj.eval_slice(&[0.6]) - obj.eval_slice(&[0.4])) / 0.2;
        assert_abs_diff_eq!(g, -0.4, epsilon = 1e-12);
        // at the optimum the symmetric difference vanishes
        let g0 = (obj.eval_slice(&[0.4]) - obj.eval_slice(&[0.2])) / 0.2;
        assert_abs_diff_eq!(g0, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn kwsa_budget_arithmetic() {
        // d=1, n=3: exactly one FD iteration plus the recommendation
        let obj = make_test1(1, None).unwrap();
        let oracle = noiseless(&obj, 3);
        let mut rng = RngStream::from_master_seed(0);
        let rec = kwsa(oracle, &mut rng, 1.0, 0.2).unwrap();
        assert_eq!(rec.trajectory.len(), 3);
        assert_eq!(rec.diagnostics["iterations"], 1.0);
        rec.audit(3).unwrap();
        // below one iteration: error
        let oracle = noiseless(&obj, 2);
        assert!(kwsa(oracle, &mut rng, 1.0, 0.2).is_err());
    }

    #[test]
    fn kwsa_converges_noiseless_quadratic() {
        let obj = make_test1(1, None).unwrap();
        let oracle = noiseless(&obj, 401);
        let mut rng = RngStream::from_master_seed(0);
        let rec = kwsa(oracle, &mut rng, 1.0, 0.2).unwrap();
        rec.audit(401).unwrap();
        assert!(obj.optimality_gap(&rec.x_hat) < 1e-3);
    }

    #[test]
    fn stroquool_h_max_example() {
        // n = 1e4: ceil(log2 1e4) = 14, h_max = floor(1e4 / (2*225)) = 22
        assert_eq!(stroquool_h_max(10_000), 22);
        assert_eq!(stroquool_h_max(16), 1);
    }

    #[test]
    fn stroquool_budget_audit_and_noiseless_gap() {
        let obj = make_test1(1, None).unwrap();
        for n in [16usize, 100, 1000, 10_000] {
            let oracle = noiseless(&obj, n);
            let mut rng = RngStream::from_master_seed(1);
            let rec = stroquool(oracle, &mut rng).unwrap();
            rec.audit(n).unwrap();
            assert!(rec.trajectory.len() <= n);
        }
        // calibration: noiseless d=1 budget 1e4 localizes the optimum well
        let oracle = noiseless(&obj, 10_000);
        let mut rng = RngStream::from_master_seed(1);
        let rec = stroquool(oracle, &mut rng).unwrap();
        assert!(obj.optimality_gap(&rec.x_hat) <= 1e-4, "gap {}", obj.optimality_gap(&rec.x_hat));
    }

    #[test]
    fn stroquool_rejects_tiny_budget() {
        let obj = make_test1(1, None).unwrap();
        let oracle = noiseless(&obj, 15);
        let mut rng = RngStream::from_master_seed(1);
        assert!(stroquool(oracle, &mut rng).is_err());
    }

    #[test]
    fn noiseless_stroquool_gap_nonincreasing_in_budget() {
        let obj = make_test1(1, None).unwrap();
        let grid = [300usize, 1000, 3000, 10_000, 30_000, 100_000];
        let mut prev = f64::INFINITY;
        for &n in &grid {
            let oracle = noiseless(&obj, n);
            let mut rng = RngStream::from_master_seed(9);
            let rec = stroquool(oracle, &mut rng).unwrap();
            let gap = obj.optimality_gap(&rec.x_hat);
            assert!(gap <= prev + 1e-12, "gap {gap} after {prev} at n={n}");
            prev = gap;
        }
    }

    #[test]
    fn seed_determinism_all_optimizers() {
        let obj = make_test1(2, None).unwrap();
        let noise = NoiseModel::from_sigma2(0.01).unwrap();
        for spec in [OptimizerSpec::Uniform, OptimizerSpec::kwsa_default(), OptimizerSpec::Stroquool] {
            let run = |seed: u64| {
                let oracle = SimulationOracle::new(&obj, noise, 200);
                let mut rng = RngStream::from_master_seed(seed);
                run_algorithm(&spec, oracle, &mut rng).unwrap().x_hat
            };
            assert_eq!(run(5), run(5), "{}", spec.name());
        }
    }

    #[test]
    fn dispatch_equals_direct_call() {
        let obj = make_test1(1, None).unwrap();
        let noise = NoiseModel::from_sigma2(0.0).unwrap();
        let direct = {
            let oracle = SimulationOracle::new(&obj, noise, 64);
            let mut rng = RngStream::from_master_seed(2);
            uniform_search(oracle, &mut rng).unwrap().x_hat
        };
        let dispatched = {
            let oracle = SimulationOracle::new(&obj, noise, 64);
            let mut rng = RngStream::from_master_seed(2);
            run_algorithm(&OptimizerSpec::Uniform, oracle, &mut rng).unwrap().x_hat
        };
        assert_eq!(direct, dispatched);
    }
}
