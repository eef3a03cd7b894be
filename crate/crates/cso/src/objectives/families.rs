//! Instance-family generators: the two flat-grid families (variance-scaled
//! and budget-scaled) and the hierarchical family, each pairing adversarial
//! members with a shared benchmark.
//!
//! Parameter computation (`g1_parameters` / `g2_parameters`) is exposed
//! separately from the gated family constructors: the formulas are defined
//! for any inputs, while a family is only built when the feasibility
//! inequalities hold (grid at least 4 cells per axis, plateau ball radius
//! at most 1/4, and for the budget-scaled family at least `2n` members).

use crate::error::{Error, Result};
use crate::geometry::{
    grid_cell_center, hierarchy_cell, Cell, CellIndex, HierarchyParams, Point, DEFAULT_CELL_CAP,
};
use crate::objectives::{
    make_yb, make_yc, make_yc_benchmark, make_yg, pow_shape, yg_center_condition, EnvelopeParams,
    Objective,
};

/// Which construction a family came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// Variance-scaled grid family: cells per axis of order
    /// `(sigma^2/n)^{-1/(alpha (D+2))}`.
    G1,
    /// Budget-scaled grid family: cells per axis of order `n^{1/(alpha D)}`.
    G2,
    /// Hierarchical family over the base-5 nested partition.
    C2,
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FamilyKind::G1 => write!(f, "g1"),
            FamilyKind::G2 => write!(f, "g2"),
            FamilyKind::C2 => write!(f, "c2"),
        }
    }
}

/// Derived sizing constants of a flat-grid family.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFamilyParams {
    pub psi: u64,
    pub zeta: f64,
    pub nu: f64,
    pub eta: f64,
    pub kappa0: CellIndex,
    pub c0: Point,
    /// `rho zeta^{alpha/beta}`: radius of the shared plateau ball.
    pub big_radius: f64,
}

fn kappa0_for(psi: u64, d: usize) -> CellIndex {
    CellIndex::new(vec![psi.div_ceil(2); d], 0)
}

fn grid_params(psi_real: f64, nu: f64, eta: f64, env: &EnvelopeParams, d: usize) -> Result<GridFamilyParams> {
    if !psi_real.is_finite() || psi_real <= 0.0 || psi_real > 1e15 {
        return Err(Error::Infeasible(format!(
            "grid resolution psi = {psi_real} is not a usable cell count"
        )));
    }
    let psi = psi_real.ceil() as u64;
    let zeta = 0.5 / psi as f64;
    let kappa0 = kappa0_for(psi, d);
    let c0 = Point::new(grid_cell_center(&kappa0.kappa, psi))?;
    let big_radius = env.rho() * pow_shape(zeta, env.alpha / env.beta);
    Ok(GridFamilyParams { psi, zeta, nu, eta, kappa0, c0, big_radius })
}

/// Sizing constants of the variance-scaled family:
/// `eta = 1/(2^{d - alpha(D+2) - 1} 9 M^2)`,
/// `nu = (rho^d eta sigma^2)^{-1/(alpha(D+2))}`,
/// `psi_1 = ceil(nu n^{1/(alpha(D+2))})`.
pub fn g1_parameters(
    n: usize,
    sigma2: f64,
    env: &EnvelopeParams,
    d: usize,
) -> Result<GridFamilyParams> {
    if sigma2 <= 0.0 || !sigma2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "the variance-scaled family needs sigma^2 > 0, got {sigma2}"
        )));
    }
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("need n >= 1 and d >= 1".into()));
    }
    let d_eff = d as f64 * (1.0 / env.alpha - 1.0 / env.beta);
    let expo = 1.0 / (env.alpha * (d_eff + 2.0));
    let eta = 1.0 / (2f64.powf(d as f64 - env.alpha * (d_eff + 2.0) - 1.0) * 9.0 * env.m * env.m);
    let nu = (env.rho().powi(d as i32) * eta * sigma2).powf(-expo);
    let psi_real = nu * (n as f64).powf(expo);
    grid_params(psi_real, nu, eta, env, d)
}

/// Sizing constants of the budget-scaled family: `eta = 1/4`,
/// `nu = (rho eta)^{-d/(alpha D)}`, `psi_2 = ceil(nu n^{1/(alpha D)})`.
/// Requires `alpha < beta` so the effective dimension is positive.
pub fn g2_parameters(n: usize, env: &EnvelopeParams, d: usize) -> Result<GridFamilyParams> {
    if env.alpha >= env.beta {
        return Err(Error::InvalidParameter(
            "the budget-scaled family requires alpha < beta".into(),
        ));
    }
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("need n >= 1 and d >= 1".into()));
    }
    let d_eff = d as f64 * (1.0 / env.alpha - 1.0 / env.beta);
    let eta = 0.25;
    let nu = (env.rho() * eta).powf(-(d as f64) / (env.alpha * d_eff));
    let psi_real = nu * (n as f64).powf(1.0 / (env.alpha * d_eff));
    grid_params(psi_real, nu, eta, env, d)
}

/// Summary metadata of a generated family.
#[derive(Debug, Clone)]
pub struct FamilyMeta {
    pub kind: FamilyKind,
    pub d: usize,
    pub env: EnvelopeParams,
    /// Budget the family was sized for.
    pub n: usize,
    /// Only for the variance-scaled family.
    pub sigma2: Option<f64>,
    pub grid: Option<GridFamilyParams>,
    pub a_bar: Option<u32>,
    pub delta: Option<u64>,
    pub m_hat: Option<f64>,
}

enum FamilyImpl {
    Grid {
        params: GridFamilyParams,
        env: EnvelopeParams,
        members: Vec<CellIndex>,
        prefix: &'static str,
    },
    Hierarchy { hp: HierarchyParams, env: EnvelopeParams },
}

/// A family of adversarial problems sharing one benchmark: members are
/// built lazily by index, so even combinatorially large hierarchical
/// families are usable through random access.
pub struct InstanceFamily {
    imp: FamilyImpl,
    pub meta: FamilyMeta,
}

impl InstanceFamily {
    pub fn kind(&self) -> FamilyKind {
        self.meta.kind
    }

    pub fn member_count(&self) -> u64 {
        match &self.imp {
            FamilyImpl::Grid { members, .. } => members.len() as u64,
            FamilyImpl::Hierarchy { hp, .. } => {
                3u64.pow(hp.a_bar * hp.d as u32)
            }
        }
    }

    /// The grid or hierarchy index of a member's private subregion.
    pub fn member_index(&self, i: u64) -> Result<CellIndex> {
        match &self.imp {
            FamilyImpl::Grid { members, .. } => members
                .get(i as usize)
                .cloned()
                .ok_or_else(|| Error::InvalidParameter(format!("member {i} out of range"))),
            FamilyImpl::Hierarchy { hp, .. } => {
                if i >= self.member_count() {
                    return Err(Error::InvalidParameter(format!("member {i} out of range")));
                }
                // decode base-3 digits, level 1 outermost, axes inner
                let mut digits = Vec::with_capacity((hp.a_bar as usize) * hp.d);
                let mut v = i;
                for _ in 0..(hp.a_bar as usize * hp.d) {
                    digits.push(v % 3);
                    v /= 3;
                }
                digits.reverse();
                let mut kappa = vec![1u64; hp.d];
                let mut pos = 0;
                for _level in 1..=hp.a_bar {
                    for k in kappa.iter_mut() {
                        *k = 5 * *k - 3 + digits[pos];
                        pos += 1;
                    }
                }
                Ok(CellIndex::new(kappa, hp.a_bar))
            }
        }
    }

    /// The member's private cell, where it may differ from its benchmark.
    pub fn member_cell(&self, i: u64) -> Result<Cell> {
        let idx = self.member_index(i)?;
        match &self.imp {
            FamilyImpl::Grid { params, .. } => {
                let center = Point::new(grid_cell_center(&idx.kappa, params.psi))?;
                Cell::from_center_radius(center, params.zeta)
            }
            FamilyImpl::Hierarchy { .. } => hierarchy_cell(&idx),
        }
    }

    pub fn member(&self, i: u64) -> Result<Objective> {
        let idx = self.member_index(i)?;
        match &self.imp {
            FamilyImpl::Grid { params, env, prefix, .. } => {
                let c = Point::new(grid_cell_center(&idx.kappa, params.psi))?;
                Ok(make_yg(&c, &params.c0, params.zeta, env)?
                    .with_label(format!("{prefix}_member_{i}")))
            }
            FamilyImpl::Hierarchy { hp, env } => {
                Ok(make_yc(&idx, hp, env)?.with_label(format!("c2_member_{i}")))
            }
        }
    }

    /// The family-wide benchmark: the plateau objective for grid families,
    /// the root objective for the hierarchical family.
    pub fn benchmark(&self) -> Objective {
        match &self.imp {
            FamilyImpl::Grid { params, env, prefix, .. } => {
                make_yb(&params.c0, params.zeta, env)
                    .expect("validated at family construction")
                    .with_label(format!("{prefix}_benchmark"))
            }
            FamilyImpl::Hierarchy { hp, env } => {
                make_yc_benchmark(&CellIndex::root(hp.d), hp, env)
                    .expect("validated at family construction")
                    .with_label("c2_benchmark_root")
            }
        }
    }

    /// The benchmark a member is compared against in the two-problem
    /// lemmas: for grid families the shared plateau objective, for the
    /// hierarchical family the member's direct ancestor objective — in both
    /// cases they differ from the member only inside its private cell.
    pub fn benchmark_for(&self, i: u64) -> Result<Objective> {
        match &self.imp {
            FamilyImpl::Grid { .. } => Ok(self.benchmark()),
            FamilyImpl::Hierarchy { hp, env } => {
                let leaf = self.member_index(i)?;
                let par = crate::geometry::parent(&leaf)?;
                Ok(make_yc_benchmark(&par, hp, env)?
                    .with_label(format!("c2_ancestor_of_{i}")))
            }
        }
    }

    /// Ancestor objective at an arbitrary level of a member's chain
    /// (hierarchical family only).
    pub fn ancestor(&self, i: u64, level: u32) -> Result<Objective> {
        match &self.imp {
            FamilyImpl::Grid { .. } => Err(Error::InvalidParameter(
                "ancestor objectives exist only for the hierarchical family".into(),
            )),
            FamilyImpl::Hierarchy { hp, env } => {
                let mut idx = self.member_index(i)?;
                if level > idx.level {
                    return Err(Error::InvalidParameter(format!(
                        "level {level} above the leaf level {}",
                        idx.level
                    )));
                }
                while idx.level > level {
                    idx = crate::geometry::parent(&idx)?;
                }
                Ok(make_yc_benchmark(&idx, hp, env)?
                    .with_label(format!("c2_ancestor_{level}_of_{i}")))
            }
        }
    }

    /// Iterates all members in index order. Guarded by the materialization
    /// cap so combinatorially large hierarchical families are not swept by
    /// accident.
    pub fn members(&self) -> Result<impl Iterator<Item = Objective> + '_> {
        let count = self.member_count();
        if count > DEFAULT_CELL_CAP {
            return Err(Error::CapExceeded { requested: count as u128, cap: DEFAULT_CELL_CAP });
        }
        Ok((0..count).map(move |i| self.member(i).expect("index in range")))
    }
}

fn enumerate_band_members(params: &GridFamilyParams, d: usize) -> Result<Vec<CellIndex>> {
    // cells whose center is within big_radius - zeta of the central cell
    let reach = ((params.big_radius - params.zeta) / (2.0 * params.zeta)).floor() as i64 + 2;
    let k0 = params.kappa0.kappa[0] as i64;
    let lo = (k0 - reach).max(1) as u64;
    let hi = (k0 + reach).min(params.psi as i64) as u64;
    let per_axis: Vec<u64> = (lo..=hi).collect();
    let mut count: u128 = 1;
    for _ in 0..d {
        count = count.saturating_mul(per_axis.len() as u128);
    }
    if count > DEFAULT_CELL_CAP as u128 {
        return Err(Error::CapExceeded { requested: count, cap: DEFAULT_CELL_CAP });
    }
    let mut members = Vec::new();
    let mut cursor = vec![0usize; d];
    'outer: loop {
        let kappa: Vec<u64> = cursor.iter().map(|&c| per_axis[c]).collect();
        let center = grid_cell_center(&kappa, params.psi);
        if yg_center_condition(&center, params.c0.coords(), params.zeta, params.big_radius) {
            members.push(CellIndex::new(kappa, 0));
        }
        let mut axis = d;
        loop {
            if axis == 0 {
                break 'outer;
            }
            axis -= 1;
            if cursor[axis] + 1 < per_axis.len() {
                cursor[axis] += 1;
                break;
            }
            cursor[axis] = 0;
        }
    }
    Ok(members)
}

fn check_grid_feasibility(params: &GridFamilyParams, label: &str) -> Result<()> {
    if params.psi < 4 {
        return Err(Error::Infeasible(format!(
            "{label}: psi = {} < 4; the budget is below the family's feasibility threshold",
            params.psi
        )));
    }
    if params.big_radius > 0.25 {
        return Err(Error::Infeasible(format!(
            "{label}: rho zeta^(alpha/beta) = {} > 1/4",
            params.big_radius
        )));
    }
    Ok(())
}

/// The variance-scaled grid family: one member per cell of the central
/// band, all sharing the plateau benchmark.
pub fn family_g1(
    n: usize,
    sigma2: f64,
    env: &EnvelopeParams,
    d: usize,
) -> Result<InstanceFamily> {
    env.require_grid_ratio()?;
    let params = g1_parameters(n, sigma2, env, d)?;
    check_grid_feasibility(&params, "variance-scaled family")?;
    let members = enumerate_band_members(&params, d)?;
    if members.is_empty() {
        return Err(Error::Infeasible("variance-scaled family has no members".into()));
    }
    let meta = FamilyMeta {
        kind: FamilyKind::G1,
        d,
        env: *env,
        n,
        sigma2: Some(sigma2),
        grid: Some(params.clone()),
        a_bar: None,
        delta: None,
        m_hat: None,
    };
    Ok(InstanceFamily { imp: FamilyImpl::Grid { params, env: *env, members, prefix: "g1" }, meta })
}

/// The budget-scaled grid family. Also enforces the member-count condition
/// `|family| >= 2n` required by the pigeonhole argument.
pub fn family_g2(n: usize, env: &EnvelopeParams, d: usize) -> Result<InstanceFamily> {
    env.require_grid_ratio()?;
    let params = g2_parameters(n, env, d)?;
    check_grid_feasibility(&params, "budget-scaled family")?;
    let members = enumerate_band_members(&params, d)?;
    if (members.len() as u128) < 2 * n as u128 {
        return Err(Error::Infeasible(format!(
            "budget-scaled family has {} members, fewer than 2n = {}",
            members.len(),
            2 * n
        )));
    }
    let meta = FamilyMeta {
        kind: FamilyKind::G2,
        d,
        env: *env,
        n,
        sigma2: None,
        grid: Some(params.clone()),
        a_bar: None,
        delta: None,
        m_hat: None,
    };
    Ok(InstanceFamily { imp: FamilyImpl::Grid { params, env: *env, members, prefix: "g2" }, meta })
}

/// Levels of the hierarchical family for a budget:
/// `Delta = floor(3^d/2)`, `a_bar = ceil(4(n+1)/Delta) + 2`.
pub fn c2_depth(n: usize, d: usize) -> (u64, u32) {
    let delta = 3u64.pow(d as u32) / 2;
    let a_bar = (4 * (n as u64 + 1)).div_ceil(delta) + 2;
    (delta, a_bar as u32)
}

/// The hierarchical family: members are the selected leaves at level
/// `a_bar`, materialized lazily by leaf index; ancestors provide the
/// benchmark chain. Requires `alpha = beta` and the hierarchy scale
/// condition. Depths beyond exact-index range are rejected.
pub fn family_c2(n: usize, d: usize, env: &EnvelopeParams) -> Result<InstanceFamily> {
    if env.alpha != env.beta {
        return Err(Error::InvalidParameter(
            "the hierarchical family requires alpha = beta".into(),
        ));
    }
    env.require_hierarchy_ratio()?;
    let (delta, a_bar) = c2_depth(n, d);
    let hp = HierarchyParams::new(d, a_bar)?;
    if (a_bar as u64) * (d as u64) > 40 {
        // 3^41 would overflow the member index space
        return Err(Error::CapExceeded {
            requested: 3u128.pow(a_bar * d as u32),
            cap: u64::MAX,
        });
    }
    let meta = FamilyMeta {
        kind: FamilyKind::C2,
        d,
        env: *env,
        n,
        sigma2: None,
        grid: None,
        a_bar: Some(a_bar),
        delta: Some(delta),
        m_hat: Some(env.m_hat()),
    };
    Ok(InstanceFamily { imp: FamilyImpl::Hierarchy { hp, env: *env }, meta })
}
