//! Adversarial objective-function constructions, the numerical test
//! functions, envelope certification, instance-family generators, and the
//! near-optimality-dimension profiler.
//!
//! The two grid constructions share one code path for the region outside a
//! member's private cell, so a family member and its benchmark evaluate
//! bit-identically there.

mod envelope;
mod families;
mod profile;

pub use envelope::{envelope_check, halton_points, EnvelopeReport, EnvelopeViolation, SamplePlan};
pub use families::{
    family_c2, family_g1, family_g2, g1_parameters, g2_parameters, FamilyKind, FamilyMeta,
    GridFamilyParams, InstanceFamily,
};
pub use profile::{fit_profile_exponent, near_opt_dimension_profile};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    gamma, hierarchy_cell, is_selected, max_norm_dist_slice, parent, CellIndex, HierarchyParams,
    Point,
};

/// `x^e` with fast paths for the two exponents that dominate in practice.
#[inline]
pub(crate) fn pow_shape(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else if e == 2.0 {
        x * x
    } else {
        x.powf(e)
    }
}

/// Shape-constraint parameters: envelope orders `alpha <= beta` and scale
/// constants `M` (upper) and `M~` (lower).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeParams {
    pub alpha: f64,
    pub beta: f64,
    pub m: f64,
    pub m_tilde: f64,
}

impl EnvelopeParams {
    pub fn new(alpha: f64, beta: f64, m: f64, m_tilde: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
        }
        if !(beta >= alpha) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("need alpha <= beta, got alpha={alpha}, beta={beta}")));
        }
        if !(m > 0.0) || !(m_tilde > 0.0) {
            return Err(Error::InvalidParameter("M and M~ must be > 0".into()));
        }
        Ok(EnvelopeParams { alpha, beta, m, m_tilde })
    }

    /// `rho = [M / (2^{2 beta + 1} M~)]^{1 / beta}`.
    pub fn rho(&self) -> f64 {
        (self.m / (2f64.powf(2.0 * self.beta + 1.0) * self.m_tilde)).powf(1.0 / self.beta)
    }

    /// The peaked-grid family needs `M / (2^{4 beta + 1} M~) >= 1`,
    /// equivalently `rho >= 4`.
    pub fn require_grid_ratio(&self) -> Result<()> {
        let ratio = self.m / (2f64.powf(4.0 * self.beta + 1.0) * self.m_tilde);
        if ratio >= 1.0 {
            Ok(())
        } else {
            Err(Error::Infeasible(format!(
                "grid-family scale condition violated: M/(2^(4*beta+1)*M~) = {ratio} < 1"
            )))
        }
    }

    /// Minimal `M / M~` for the hierarchical construction at a given alpha:
    /// `(1 - 5^-alpha)^-1 (1 + 1/(5^alpha - 3^alpha)) 80^alpha`.
    pub fn hierarchy_ratio_bound(alpha: f64) -> f64 {
        let p5 = 5f64.powf(alpha);
        let p3 = 3f64.powf(alpha);
        (1.0 - 1.0 / p5).recip() * (1.0 + 1.0 / (p5 - p3)) * 80f64.powf(alpha)
    }

    pub fn require_hierarchy_ratio(&self) -> Result<()> {
        let bound = Self::hierarchy_ratio_bound(self.alpha);
        let ratio = self.m / self.m_tilde;
        if ratio >= bound * (1.0 - 1e-12) {
            Ok(())
        } else {
            Err(Error::Infeasible(format!(
                "hierarchy scale condition violated: M/M~ = {ratio} < {bound}"
            )))
        }
    }

    /// `M^ = 40^alpha / (5^alpha - 3^alpha) * M~`.
    pub fn m_hat(&self) -> f64 {
        let a = self.alpha;
        40f64.powf(a) / (5f64.powf(a) - 3f64.powf(a)) * self.m_tilde
    }
}

/// One additive piece of a hierarchical objective.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Component {
    pub center: Vec<f64>,
    pub kind: ComponentKind,
    /// Constant value on the plateau (shell) or at the peak (terminal).
    pub top: f64,
    /// Base of the sloped branch: `M^ 5^alpha gamma^alpha` for shells.
    pub slope_base: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ComponentKind {
    /// Plateau within `3 g`, slope to `5 g`, zero beyond (`g` = gamma of
    /// the next level). The root component is a shell whose support covers
    /// the whole domain.
    Shell { g: f64 },
    /// Peak at the center, slope to `g`, zero beyond.
    Terminal { g: f64 },
}

impl Component {
    fn shell(center: Vec<f64>, g: f64, alpha: f64, m_hat: f64) -> Self {
        let p5 = 5f64.powf(alpha);
        let p3 = 3f64.powf(alpha);
        let ga = pow_shape(g, alpha);
        Component {
            center,
            kind: ComponentKind::Shell { g },
            top: m_hat * (p5 - p3) * ga,
            slope_base: m_hat * p5 * ga,
        }
    }

    fn terminal(center: Vec<f64>, g: f64, alpha: f64, m_hat: f64) -> Self {
        let peak = m_hat * pow_shape(g, alpha);
        Component { center, kind: ComponentKind::Terminal { g }, top: peak, slope_base: peak }
    }

    #[inline]
    fn eval(&self, x: &[f64], alpha: f64, m_hat: f64) -> f64 {
        let r = max_norm_dist_slice(x, &self.center);
        match self.kind {
            ComponentKind::Shell { g } => {
                if r <= 3.0 * g {
                    self.top
                } else if r <= 5.0 * g {
                    self.slope_base - m_hat * pow_shape(r, alpha)
                } else {
                    0.0
                }
            }
            ComponentKind::Terminal { g } => {
                if r <= g {
                    self.top - m_hat * pow_shape(r, alpha)
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Shape {
    /// The peaked grid construction: a cusp of height `(M/2) zeta^alpha` at
    /// `c`, a flat annulus inside the ball of radius `rho zeta^{alpha/beta}`
    /// around `c0`, and a polynomial fall-off outside that ball.
    PeakedGrid {
        c: Vec<f64>,
        c0: Vec<f64>,
        zeta: f64,
        alpha: f64,
        beta: f64,
        half_m: f64,
        peak: f64,
        big_radius: f64,
        outer_plateau: f64,
        outer_coef: f64,
    },
    /// The matching benchmark: zero on the whole ball, identical fall-off
    /// outside. Its maximizer set is the entire plateau.
    PlateauBenchmark {
        c0: Vec<f64>,
        zeta: f64,
        beta: f64,
        big_radius: f64,
        outer_plateau: f64,
        outer_coef: f64,
    },
    /// Sum of nested hierarchy components (shells, optionally one terminal).
    Hierarchy { components: Vec<Component>, alpha: f64, m_hat: f64 },
    /// `y1(x) = 1 - |x - c|_2^2`.
    Quadratic { c: Vec<f64> },
    /// `y2`: unit peak with an oscillation between order-1 and order-2
    /// envelopes.
    Oscillatory { c: Vec<f64> },
}

#[inline]
fn outer_value(r0: f64, outer_plateau: f64, outer_coef: f64, beta: f64) -> f64 {
    outer_plateau - outer_coef * pow_shape(r0, beta)
}

/// A deterministic objective with known maximizer, optimum value, and
/// optional certified envelope metadata. Immutable and cheap to evaluate;
/// safe to share across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    dim: usize,
    pub(crate) shape: Shape,
    x_star: Point,
    y_star: f64,
    envelope: Option<EnvelopeParams>,
    label: String,
}

impl Objective {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x_star(&self) -> &Point {
        &self.x_star
    }

    pub fn y_star(&self) -> f64 {
        self.y_star
    }

    pub fn envelope(&self) -> Option<&EnvelopeParams> {
        self.envelope.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn eval(&self, x: &Point) -> f64 {
        assert_eq!(x.dim(), self.dim, "dimension mismatch in Objective::eval");
        self.eval_slice(x.coords())
    }

    /// `y(x*) - y(x)`.
    pub fn optimality_gap(&self, x: &Point) -> f64 {
        self.y_star - self.eval(x)
    }

    pub fn eval_slice(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.shape {
            Shape::PeakedGrid {
                c,
                c0,
                zeta,
                alpha,
                beta,
                half_m,
                peak,
                big_radius,
                outer_plateau,
                outer_coef,
            } => {
                let rc = max_norm_dist_slice(x, c);
                if rc <= *zeta {
                    peak - half_m * pow_shape(rc, *alpha)
                } else {
                    let r0 = max_norm_dist_slice(x, c0);
                    if r0 <= *big_radius {
                        0.0
                    } else {
                        outer_value(r0, *outer_plateau, *outer_coef, *beta)
                    }
                }
            }
            Shape::PlateauBenchmark { c0, beta, big_radius, outer_plateau, outer_coef, .. } => {
                let r0 = max_norm_dist_slice(x, c0);
                if r0 <= *big_radius {
                    0.0
                } else {
                    outer_value(r0, *outer_plateau, *outer_coef, *beta)
                }
            }
            Shape::Hierarchy { components, alpha, m_hat } => {
                let mut sum = 0.0;
                for comp in components {
                    sum += comp.eval(x, *alpha, *m_hat);
                }
                sum
            }
            Shape::Quadratic { c } => {
                let mut s = 0.0;
                for (xi, ci) in x.iter().zip(c.iter()) {
                    let dv = xi - ci;
                    s += dv * dv;
                }
                1.0 - s
            }
            Shape::Oscillatory { c } => {
                let mut s = 0.0;
                for (xi, ci) in x.iter().zip(c.iter()) {
                    let dv = xi - ci;
                    s += dv * dv;
                }
                let r = s.sqrt();
                if r < 1e-12 {
                    1.0
                } else {
                    let theta = (1.0 - (4.0 * std::f64::consts::PI / r).cos()) / 2.0;
                    1.0 - (r - theta * (0.5 * r * r - r))
                }
            }
        }
    }

    /// Centers and radii of the branch boundaries of this shape, used to
    /// place boundary-shell sample points.
    pub(crate) fn critical_shells(&self) -> Vec<(Vec<f64>, f64)> {
        match &self.shape {
            Shape::PeakedGrid { c, c0, zeta, big_radius, .. } => {
                vec![(c.clone(), *zeta), (c0.clone(), *big_radius)]
            }
            Shape::PlateauBenchmark { c0, big_radius, .. } => vec![(c0.clone(), *big_radius)],
            Shape::Hierarchy { components, .. } => {
                let mut out = Vec::new();
                for comp in components {
                    match comp.kind {
                        ComponentKind::Shell { g } => {
                            out.push((comp.center.clone(), 3.0 * g));
                            out.push((comp.center.clone(), 5.0 * g));
                        }
                        ComponentKind::Terminal { g } => out.push((comp.center.clone(), g)),
                    }
                }
                out
            }
            Shape::Quadratic { .. } => Vec::new(),
            Shape::Oscillatory { c } => {
                // cos(4 pi / r) extrema at r = 4 / k
                (8..=64).map(|k| (c.clone(), 4.0 / k as f64)).collect()
            }
        }
    }
}

/// Shared membership condition tying a peaked-grid member center to the
/// family's plateau center: `|c - c0|_inf <= rho zeta^{alpha/beta} - zeta`.
pub(crate) fn yg_center_condition(c: &[f64], c0: &[f64], zeta: f64, big_radius: f64) -> bool {
    max_norm_dist_slice(c, c0) <= big_radius - zeta
}

fn require_ball_in_domain(c0: &[f64], big_radius: f64) -> Result<()> {
    for &v in c0 {
        if v - big_radius < 0.0 || v + big_radius > 1.0 {
            return Err(Error::Infeasible(format!(
                "ball of radius {big_radius} around plateau center is not inside [0,1]^d \
                 (center coordinate {v})"
            )));
        }
    }
    Ok(())
}

/// The peaked grid objective (member of the adversarial grid families).
///
/// Piecewise: `(M/2)(zeta^alpha - |x-c|^alpha)` within `zeta` of `c`; zero
/// on the rest of the ball of radius `rho zeta^{alpha/beta}` around `c0`;
/// `2^beta M~ (rho^beta zeta^alpha - |x-c0|^beta)` outside. The standalone
/// constructor accepts any `zeta` in `(0,1]`; the envelope guarantee was
/// established for the family generators' specific `zeta` choices, and is
/// certified numerically by [`envelope_check`] either way.
pub fn make_yg(c: &Point, c0: &Point, zeta: f64, env: &EnvelopeParams) -> Result<Objective> {
    if c.dim() != c0.dim() {
        return Err(Error::DimensionMismatch(c.dim(), c0.dim()));
    }
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::InvalidParameter(format!("zeta must be in (0,1], got {zeta}")));
    }
    env.require_grid_ratio()?;
    let rho = env.rho();
    let big_radius = rho * pow_shape(zeta, env.alpha / env.beta);
    require_ball_in_domain(c0.coords(), big_radius)?;
    if !yg_center_condition(c.coords(), c0.coords(), zeta, big_radius) {
        return Err(Error::Infeasible(format!(
            "|c - c0|_inf = {} > rho zeta^(alpha/beta) - zeta = {}",
            max_norm_dist_slice(c.coords(), c0.coords()),
            big_radius - zeta
        )));
    }
    let peak = env.m / 2.0 * pow_shape(zeta, env.alpha);
    let outer_coef = 2f64.powf(env.beta) * env.m_tilde;
    let outer_plateau = outer_coef * pow_shape(rho, env.beta) * pow_shape(zeta, env.alpha);
    Ok(Objective {
        dim: c.dim(),
        x_star: c.clone(),
        y_star: peak,
        envelope: Some(*env),
        label: "yG".into(),
        shape: Shape::PeakedGrid {
            c: c.coords().to_vec(),
            c0: c0.coords().to_vec(),
            zeta,
            alpha: env.alpha,
            beta: env.beta,
            half_m: env.m / 2.0,
            peak,
            big_radius,
            outer_plateau,
            outer_coef,
        },
    })
}

/// The benchmark objective paired with [`make_yg`]: zero on the whole ball
/// around `c0`, identical fall-off outside. Its maximizer is not unique, so
/// no envelope metadata is attached; `x_star` is set to `c0` as one
/// representative maximizer.
pub fn make_yb(c0: &Point, zeta: f64, env: &EnvelopeParams) -> Result<Objective> {
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::InvalidParameter(format!("zeta must be in (0,1], got {zeta}")));
    }
    env.require_grid_ratio()?;
    let rho = env.rho();
    let big_radius = rho * pow_shape(zeta, env.alpha / env.beta);
    require_ball_in_domain(c0.coords(), big_radius)?;
    let outer_coef = 2f64.powf(env.beta) * env.m_tilde;
    let outer_plateau = outer_coef * pow_shape(rho, env.beta) * pow_shape(zeta, env.alpha);
    Ok(Objective {
        dim: c0.dim(),
        x_star: c0.clone(),
        y_star: 0.0,
        envelope: None,
        label: "yB".into(),
        shape: Shape::PlateauBenchmark {
            c0: c0.coords().to_vec(),
            zeta,
            beta: env.beta,
            big_radius,
            outer_plateau,
            outer_coef,
        },
    })
}

fn ancestor_chain(idx: &CellIndex) -> Result<Vec<CellIndex>> {
    // root first, idx last
    let mut chain = vec![idx.clone()];
    let mut cur = idx.clone();
    while cur.level > 0 {
        cur = parent(&cur)?;
        chain.push(cur.clone());
    }
    chain.reverse();
    Ok(chain)
}

fn require_hierarchy_preconditions(
    idx: &CellIndex,
    params: &HierarchyParams,
    env: &EnvelopeParams,
) -> Result<()> {
    if idx.dim() != params.d {
        return Err(Error::DimensionMismatch(idx.dim(), params.d));
    }
    if env.alpha != env.beta {
        return Err(Error::InvalidParameter(format!(
            "hierarchical objectives require alpha = beta, got {} and {}",
            env.alpha, env.beta
        )));
    }
    env.require_hierarchy_ratio()?;
    if !is_selected(idx) {
        return Err(Error::InvalidParameter(format!(
            "index {:?} at level {} is not in its selection set",
            idx.kappa, idx.level
        )));
    }
    Ok(())
}

/// The hierarchical objective for a selected leaf at level `a_bar`: the
/// terminal peak at the leaf center plus one nested shell per ancestor
/// level. Unique maximizer at the leaf center with value
/// `M^ gamma_abar^alpha + sum_a M^ (5^alpha - 3^alpha) gamma_a^alpha`.
pub fn make_yc(
    leaf: &CellIndex,
    params: &HierarchyParams,
    env: &EnvelopeParams,
) -> Result<Objective> {
    if leaf.level != params.a_bar {
        return Err(Error::InvalidParameter(format!(
            "leaf must be at level a_bar = {}, got level {}",
            params.a_bar, leaf.level
        )));
    }
    require_hierarchy_preconditions(leaf, params, env)?;
    let m_hat = env.m_hat();
    let alpha = env.alpha;
    let chain = ancestor_chain(leaf)?;
    let mut components = Vec::with_capacity(chain.len());
    for anc in chain.iter().take(chain.len() - 1) {
        let g_next = gamma(anc.level + 1);
        let center = hierarchy_cell(anc)?.center.into_coords();
        components.push(Component::shell(center, g_next, alpha, m_hat));
    }
    let leaf_cell = hierarchy_cell(leaf)?;
    let g_bar = gamma(params.a_bar);
    components.push(Component::terminal(leaf_cell.center.coords().to_vec(), g_bar, alpha, m_hat));

    // analytic peak: terminal top plus every shell plateau
    let p5 = 5f64.powf(alpha);
    let p3 = 3f64.powf(alpha);
    let mut y_star = m_hat * pow_shape(g_bar, alpha);
    for a in 1..=params.a_bar {
        y_star += m_hat * (p5 - p3) * pow_shape(gamma(a), alpha);
    }

    Ok(Objective {
        dim: params.d,
        x_star: leaf_cell.center,
        y_star,
        envelope: Some(*env),
        label: "yC".into(),
        shape: Shape::Hierarchy { components, alpha, m_hat },
    })
}

/// The benchmark hierarchical objective for a selected cell at a level
/// below `a_bar`: nested shells only, no terminal peak. Maximized on a
/// plateau, so no envelope metadata; `x_star` is the cell center.
pub fn make_yc_benchmark(
    idx: &CellIndex,
    params: &HierarchyParams,
    env: &EnvelopeParams,
) -> Result<Objective> {
    if idx.level > params.a_bar {
        return Err(Error::InvalidParameter(format!(
            "benchmark level {} exceeds a_bar = {}",
            idx.level, params.a_bar
        )));
    }
    require_hierarchy_preconditions(idx, params, env)?;
    let m_hat = env.m_hat();
    let alpha = env.alpha;
    let chain = ancestor_chain(idx)?;
    let mut components = Vec::with_capacity(chain.len());
    for anc in &chain {
        let g_next = gamma(anc.level + 1);
        let center = hierarchy_cell(anc)?.center.into_coords();
        components.push(Component::shell(center, g_next, alpha, m_hat));
    }
    let x_star = hierarchy_cell(idx)?.center;
    let mut obj = Objective {
        dim: params.d,
        x_star: x_star.clone(),
        y_star: 0.0,
        envelope: None,
        label: "yC_benchmark".into(),
        shape: Shape::Hierarchy { components, alpha, m_hat },
    };
    obj.y_star = obj.eval(&x_star);
    Ok(obj)
}

fn default_center(d: usize) -> Point {
    Point::splat(1.0 / std::f64::consts::E, d).expect("e^-1 is interior")
}

fn require_interior(c: &Point) -> Result<()> {
    for &v in c.coords() {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "optimum location must be interior to [0,1]^d, coordinate {v}"
            )));
        }
    }
    Ok(())
}

/// Test function 1: `y1(x) = 1 - |x - c|_2^2`, maximized at `c`, with
/// max-norm envelope `alpha = beta = 2`, `M = d`, `M~ = 1`. Defaults to
/// `c = (e^-1, ..., e^-1)`.
pub fn make_test1(d: usize, c: Option<Point>) -> Result<Objective> {
    let c = c.unwrap_or_else(|| default_center(d));
    if c.dim() != d {
        return Err(Error::DimensionMismatch(c.dim(), d));
    }
    require_interior(&c)?;
    Ok(Objective {
        dim: d,
        x_star: c.clone(),
        y_star: 1.0,
        envelope: Some(EnvelopeParams::new(2.0, 2.0, d as f64, 1.0)?),
        label: format!("test1_d{d}"),
        shape: Shape::Quadratic { c: c.into_coords() },
    })
}

/// Test function 2: oscillates between polynomial envelopes of orders one
/// and two around its unit peak at `c`; envelope `alpha = 1`, `beta = 2`,
/// `M = 2 sqrt(d)`, `M~ = 1` (valid while the Euclidean domain radius
/// around `c` stays below 2). The value at `r = 0` is the continuous
/// extension `y2(c) = 1`.
pub fn make_test2(d: usize, c: Option<Point>) -> Result<Objective> {
    let c = c.unwrap_or_else(|| default_center(d));
    if c.dim() != d {
        return Err(Error::DimensionMismatch(c.dim(), d));
    }
    require_interior(&c)?;
    Ok(Objective {
        dim: d,
        x_star: c.clone(),
        y_star: 1.0,
        envelope: Some(EnvelopeParams::new(1.0, 2.0, 2.0 * (d as f64).sqrt(), 1.0)?),
        label: format!("test2_d{d}"),
        shape: Shape::Oscillatory { c: c.into_coords() },
    })
}
