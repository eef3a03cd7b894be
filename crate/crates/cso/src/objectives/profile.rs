//! Near-optimality dimension profiler: counts, per level of a regular
//! L-ary refinement, the cells that remain `2 nu rho^h`-optimal.

use crate::error::{Error, Result};
use crate::objectives::Objective;

/// For `h = 0..=h_max`, the number of level-`h` cells of the `L`-ary grid
/// whose supremum of `y` (estimated by probing the center and a 3^d lattice
/// of interior points) is at least `y* - 2 nu rho^h`.
///
/// The probe estimate can only under-count cells, so a fitted growth
/// exponent from these counts is conservative.
pub fn near_opt_dimension_profile(
    obj: &Objective,
    nu: f64,
    rho: f64,
    branching: u64,
    h_max: u32,
) -> Result<Vec<u64>> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!("rho must be in (0,1), got {rho}")));
    }
    if branching < 2 {
        return Err(Error::InvalidParameter("branching must be >= 2".into()));
    }
    if nu <= 0.0 {
        return Err(Error::InvalidParameter("nu must be > 0".into()));
    }
    let d = obj.dim();
    let cells_at_max = (branching as u128).pow(h_max * d as u32);
    if cells_at_max > crate::geometry::DEFAULT_CELL_CAP as u128 {
        return Err(Error::CapExceeded {
            requested: cells_at_max,
            cap: crate::geometry::DEFAULT_CELL_CAP,
        });
    }
    let probes_per_axis = 3u64;
    let probe_count = probes_per_axis.pow(d as u32);
    let y_star = obj.y_star();

    let mut counts = Vec::with_capacity(h_max as usize + 1);
    let mut x = vec![0.0; d];
    for h in 0..=h_max {
        let per_axis = branching.pow(h);
        let width = 1.0 / per_axis as f64;
        let threshold = y_star - 2.0 * nu * rho.powi(h as i32);
        let mut passing = 0u64;
        let mut kappa = vec![0u64; d];
        'cells: loop {
            // probe lattice: center +- width/4 per axis
            let mut best = f64::NEG_INFINITY;
            for code in 0..probe_count {
                let mut c = code;
                for l in 0..d {
                    let t = (c % probes_per_axis) as f64 - 1.0; // -1, 0, 1
                    c /= probes_per_axis;
                    x[l] = (kappa[l] as f64 + 0.5) * width + t * width * 0.25;
                }
                let v = obj.eval_slice(&x);
                if v > best {
                    best = v;
                }
            }
            if best >= threshold {
                passing += 1;
            }
            let mut axis = d;
            loop {
                if axis == 0 {
                    break 'cells;
                }
                axis -= 1;
                if kappa[axis] + 1 < per_axis {
                    kappa[axis] += 1;
                    break;
                }
                kappa[axis] = 0;
            }
        }
        counts.push(passing);
    }
    Ok(counts)
}

/// Least-squares growth exponent `d'` of `N_h <= C rho^{-d' h}`: the slope
/// of `ln N_h` against `h ln(1/rho)`.
pub fn fit_profile_exponent(counts: &[u64], rho: f64) -> Result<f64> {
    if counts.len() < 2 {
        return Err(Error::InvalidParameter("need at least two levels to fit".into()));
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::InvalidParameter("cannot fit a profile with empty levels".into()));
    }
    let scale = (1.0 / rho).ln();
    let pts: Vec<(f64, f64)> = counts
        .iter()
        .enumerate()
        .map(|(h, &c)| (h as f64 * scale, (c as f64).ln()))
        .collect();
    let n = pts.len() as f64;
    let mean_u = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_v = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mean_u) * (p.1 - mean_v)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mean_u).powi(2)).sum();
    Ok(num / den)
}
