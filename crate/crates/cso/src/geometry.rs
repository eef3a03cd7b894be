//! Max-norm geometry on the unit hypercube: points, cells, flat grid
//! partitions, and the base-5 nested hierarchical partition with its
//! selection sets.
//!
//! All cells are half-open boxes `[c - r, c + r)` per axis, except that a
//! face lying on the upper domain boundary is closed, so membership at the
//! top of `[0,1]^d` assigns to the last cell. Grid and hierarchy indices are
//! 1-based and kept in exact integer arithmetic; only centers and radii are
//! floating point.

use crate::error::{Error, Result};

/// Default cap on the number of cells any operation will materialize.
pub const DEFAULT_CELL_CAP: u64 = 10_000_000;

/// Highest hierarchy level for which index arithmetic stays exact in `u64`
/// (5^27 < 2^63).
pub const MAX_HIERARCHY_LEVEL: u32 = 27;

const TOP_BOUNDARY_EPS: f64 = 1e-12;

/// A point in the unit hypercube `[0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    /// Validates that every coordinate is finite and in `[0,1]`.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("point must have dimension >= 1".into()));
        }
        for &c in &coords {
            if !c.is_finite() || !(0.0..=1.0).contains(&c) {
                return Err(Error::OutOfDomain(format!("coordinate {c} not in [0,1]")));
            }
        }
        Ok(Point(coords))
    }

    /// The point `(v, v, ..., v)`.
    pub fn splat(v: f64, d: usize) -> Result<Self> {
        Point::new(vec![v; d])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }
}

/// Max-norm distance between two coordinate slices of equal length.
///
/// Callers that cannot guarantee equal dimensions should use
/// [`max_norm_dist`] instead.
#[inline]
pub fn max_norm_dist_slice(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut m = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        let v = (x - y).abs();
        if v > m {
            m = v;
        }
    }
    m
}

/// Max-norm distance `max_l |a_l - b_l|`.
pub fn max_norm_dist(a: &Point, b: &Point) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(max_norm_dist_slice(a.coords(), b.coords()))
}

/// Multi-index of a grid or hierarchy cell. Components are 1-based: for a
/// level-`a` hierarchy index each component lies in `{1, ..., 5^a}`, for a
/// flat grid of `psi` cells per axis in `{1, ..., psi}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellIndex {
    pub kappa: Vec<u64>,
    pub level: u32,
}

impl CellIndex {
    pub fn new(kappa: Vec<u64>, level: u32) -> Self {
        CellIndex { kappa, level }
    }

    pub fn dim(&self) -> usize {
        self.kappa.len()
    }

    /// The root index `(1, ..., 1)` at level 0.
    pub fn root(d: usize) -> Self {
        CellIndex { kappa: vec![1; d], level: 0 }
    }
}

/// An axis-aligned max-norm cell: the half-open box `[c - r, c + r)`
/// per axis, with faces on the upper domain boundary closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub center: Point,
    pub radius: f64,
    pub level: u32,
}

impl Cell {
    /// A free-standing cell (level 0). The half-open convention applies;
    /// faces reaching the top of the domain are closed.
    pub fn from_center_radius(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("cell radius must be positive, got {radius}")));
        }
        Ok(Cell { center, radius, level: 0 })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Half-open membership test; the upper face is treated as closed when
    /// it lies on the domain boundary.
    pub fn contains_slice(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        for (&c, &xi) in self.center.coords().iter().zip(x.iter()) {
            let lo = c - self.radius;
            let hi = c + self.radius;
            if xi < lo {
                return false;
            }
            if xi >= hi && !(hi >= 1.0 - TOP_BOUNDARY_EPS && xi <= hi) {
                return false;
            }
        }
        true
    }

    pub fn contains(&self, x: &Point) -> Result<bool> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch(x.dim(), self.dim()));
        }
        Ok(self.contains_slice(x.coords()))
    }
}

fn checked_cell_count(per_axis: u64, d: usize, cap: u64) -> Result<u64> {
    let mut total: u128 = 1;
    for _ in 0..d {
        total = total.saturating_mul(per_axis as u128);
        if total > cap as u128 {
            return Err(Error::CapExceeded { requested: total, cap });
        }
    }
    Ok(total as u64)
}

/// Center of the flat-grid cell indexed by `kappa` with `psi` cells per
/// axis: `c_l = (2 kappa_l - 1) / (2 psi)`.
pub fn grid_cell_center(kappa: &[u64], psi: u64) -> Vec<f64> {
    let zeta = 0.5 / psi as f64;
    kappa.iter().map(|&k| (2 * k - 1) as f64 * zeta).collect()
}

/// Partitions `[0,1]^d` into `psi^d` equal cells of radius `1/(2 psi)`.
///
/// Cells are returned in lexicographic index order. Fails when `psi^d`
/// exceeds [`DEFAULT_CELL_CAP`].
pub fn grid_partition(d: usize, psi: u64) -> Result<Vec<Cell>> {
    grid_partition_capped(d, psi, DEFAULT_CELL_CAP)
}

pub fn grid_partition_capped(d: usize, psi: u64, cap: u64) -> Result<Vec<Cell>> {
    if d == 0 || psi == 0 {
        return Err(Error::InvalidParameter("grid_partition requires d >= 1 and psi >= 1".into()));
    }
    let total = checked_cell_count(psi, d, cap)?;
    let zeta = 0.5 / psi as f64;
    let mut cells = Vec::with_capacity(total as usize);
    let mut kappa = vec![1u64; d];
    loop {
        let center = Point(grid_cell_center(&kappa, psi));
        cells.push(Cell { center, radius: zeta, level: 0 });
        // lexicographic increment with the last axis fastest
        let mut axis = d;
        loop {
            if axis == 0 {
                return Ok(cells);
            }
            axis -= 1;
            if kappa[axis] < psi {
                kappa[axis] += 1;
                break;
            }
            kappa[axis] = 1;
        }
    }
}

/// The 1-based index of the grid cell owning `x` along one axis, under the
/// half-open convention with the top boundary assigned to the last cell.
#[inline]
pub fn grid_owning_component(x: f64, per_axis: u64) -> u64 {
    let k = (x * per_axis as f64).floor() as i64 + 1;
    k.clamp(1, per_axis as i64) as u64
}

/// Index of the flat-grid cell owning `x` (exact partition: every point of
/// the domain belongs to exactly one cell).
pub fn grid_owning_index(x: &Point, psi: u64) -> CellIndex {
    CellIndex {
        kappa: x.coords().iter().map(|&v| grid_owning_component(v, psi)).collect(),
        level: 0,
    }
}

/// Hierarchy cells per axis at level `a`: `n_a = 5^a`.
pub fn cells_per_axis(level: u32) -> u64 {
    5u64.pow(level)
}

/// Half-width of a level-`a` hierarchy cell: `gamma_a = 5^{-a} / 2`,
/// computed as an integer power followed by one division.
pub fn gamma(level: u32) -> f64 {
    0.5 / cells_per_axis(level) as f64
}

/// Parameters of the base-5 nested hierarchical partition.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyParams {
    pub d: usize,
    pub a_bar: u32,
}

impl HierarchyParams {
    pub fn new(d: usize, a_bar: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if a_bar < 1 {
            return Err(Error::InvalidParameter("a_bar must be >= 1".into()));
        }
        if a_bar > MAX_HIERARCHY_LEVEL {
            return Err(Error::CapExceeded {
                requested: a_bar as u128,
                cap: MAX_HIERARCHY_LEVEL as u64,
            });
        }
        Ok(HierarchyParams { d, a_bar })
    }

    /// `Delta = floor(3^d / 2)`.
    pub fn delta(&self) -> u64 {
        3u64.pow(self.d as u32) / 2
    }

    /// `gamma_a = 5^{-a} / 2`.
    pub fn gamma(&self, level: u32) -> f64 {
        gamma(level)
    }

    /// Number of selected cells at a level: `|U_a| = 3^{a d}`.
    pub fn selection_count(&self, level: u32) -> u128 {
        3u128.pow(level * self.d as u32)
    }
}

/// The level-`a` hierarchy cell for a valid index: center
/// `(2 kappa_l - 1) gamma_a`, radius `gamma_a`.
pub fn hierarchy_cell(idx: &CellIndex) -> Result<Cell> {
    if idx.level > MAX_HIERARCHY_LEVEL {
        return Err(Error::CapExceeded {
            requested: idx.level as u128,
            cap: MAX_HIERARCHY_LEVEL as u64,
        });
    }
    let n = cells_per_axis(idx.level);
    let g = gamma(idx.level);
    let mut center = Vec::with_capacity(idx.dim());
    for &k in &idx.kappa {
        if k < 1 || k > n {
            return Err(Error::InvalidParameter(format!(
                "index component {k} outside 1..={n} at level {}",
                idx.level
            )));
        }
        center.push((2 * k - 1) as f64 * g);
    }
    Ok(Cell { center: Point(center), radius: g, level: idx.level })
}

/// Index of the level-`level` hierarchy cell owning `x`.
pub fn hierarchy_owning_index(x: &Point, level: u32) -> CellIndex {
    let n = cells_per_axis(level);
    CellIndex {
        kappa: x.coords().iter().map(|&v| grid_owning_component(v, n)).collect(),
        level,
    }
}

/// The unique parent index at level `a - 1` whose cell contains the child
/// cell: component-wise `ceil(kappa / 5)`.
pub fn parent(idx: &CellIndex) -> Result<CellIndex> {
    if idx.level == 0 {
        return Err(Error::InvalidParameter("the root cell has no parent".into()));
    }
    Ok(CellIndex {
        kappa: idx.kappa.iter().map(|&k| k.div_ceil(5)).collect(),
        level: idx.level - 1,
    })
}

/// Whether the index belongs to its level's selection set `U_a`.
///
/// A level-`a` index is selected iff every component of every index on its
/// ancestor chain down to level 1 is congruent to 2, 3 or 4 mod 5, i.e. the
/// chain always stays in the three central fifths of its parent.
pub fn is_selected(idx: &CellIndex) -> bool {
    let mut kappa = idx.kappa.clone();
    for _ in (1..=idx.level).rev() {
        for k in kappa.iter_mut() {
            let r = *k % 5;
            if !(2..=4).contains(&r) {
                return false;
            }
            *k = k.div_ceil(5);
        }
    }
    true
}

/// The selected children `H_{kappa_a, a}` of a selected cell: the `3^d`
/// level-`(a+1)` indices with components in
/// `{5 kappa_l - 3, 5 kappa_l - 2, 5 kappa_l - 1}`.
pub fn children_in_selection(idx: &CellIndex, params: &HierarchyParams) -> Result<Vec<CellIndex>> {
    if idx.dim() != params.d {
        return Err(Error::DimensionMismatch(idx.dim(), params.d));
    }
    if idx.level >= params.a_bar {
        return Err(Error::InvalidParameter(format!(
            "level {} has no children below a_bar = {}",
            idx.level, params.a_bar
        )));
    }
    if !is_selected(idx) {
        return Err(Error::InvalidParameter(format!(
            "index {:?} at level {} is not in its selection set",
            idx.kappa, idx.level
        )));
    }
    let d = params.d;
    let count = 3u64.pow(d as u32);
    let mut out = Vec::with_capacity(count as usize);
    for code in 0..count {
        let mut kappa = Vec::with_capacity(d);
        let mut c = code;
        for l in 0..d {
            let t = c % 3; // offset 0,1,2 -> child 5k-3, 5k-2, 5k-1
            c /= 3;
            kappa.push(5 * idx.kappa[l] - 3 + t);
        }
        out.push(CellIndex { kappa, level: idx.level + 1 });
    }
    Ok(out)
}

/// Materializes the selection sets `U_0, ..., U_{a_bar}`.
///
/// `U_0` is the root; each `U_a` holds exactly the children of `U_{a-1}`
/// members whose center lies within `2 gamma_a` of the parent center, so
/// `|U_a| = 3^{a d}`. Fails when the total size exceeds the cap.
pub fn selection_sets(params: &HierarchyParams) -> Result<Vec<Vec<CellIndex>>> {
    selection_sets_capped(params, DEFAULT_CELL_CAP)
}

pub fn selection_sets_capped(params: &HierarchyParams, cap: u64) -> Result<Vec<Vec<CellIndex>>> {
    let mut total: u128 = 0;
    for a in 0..=params.a_bar {
        total += params.selection_count(a);
        if total > cap as u128 {
            return Err(Error::CapExceeded { requested: total, cap });
        }
    }
    let mut levels = vec![vec![CellIndex::root(params.d)]];
    for a in 1..=params.a_bar {
        let prev = &levels[(a - 1) as usize];
        let mut next = Vec::with_capacity(prev.len() * 3usize.pow(params.d as u32));
        for p in prev {
            next.extend(children_in_selection(p, params)?);
        }
        levels.push(next);
    }
    Ok(levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec()).unwrap()
    }

    #[test]
    fn max_norm_examples() {
        assert_eq!(max_norm_dist(&pt(&[0.2]), &pt(&[0.2])).unwrap(), 0.0);
        assert_relative_eq!(
            max_norm_dist(&pt(&[0.1, 0.9]), &pt(&[0.4, 0.8])).unwrap(),
            0.3,
            max_relative = 1e-15
        );
        assert_eq!(max_norm_dist(&pt(&[0.0, 0.0, 0.0]), &pt(&[1.0, 1.0, 1.0])).unwrap(), 1.0);
        assert!(matches!(
            max_norm_dist(&pt(&[0.1]), &pt(&[0.1, 0.2])),
            Err(Error::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn grid_partition_examples() {
        let cells = grid_partition(1, 2).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].center.coords(), &[0.25]);
        assert_eq!(cells[1].center.coords(), &[0.75]);
        assert_eq!(cells[0].radius, 0.25);

        let cells = grid_partition(2, 3).unwrap();
        assert_eq!(cells.len(), 9);
        for c in &cells {
            assert_relative_eq!(c.radius, 1.0 / 6.0, max_relative = 1e-15);
        }

        let cells = grid_partition(1, 1).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].center.coords(), &[0.5]);
        assert_eq!(cells[0].radius, 0.5);
    }

    #[test]
    fn grid_partition_cap() {
        assert!(matches!(
            grid_partition(4, 100),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn hierarchy_cell_examples() {
        let root = hierarchy_cell(&CellIndex::new(vec![1], 0)).unwrap();
        assert_eq!(root.center.coords(), &[0.5]);
        assert_eq!(root.radius, 0.5);

        let c = hierarchy_cell(&CellIndex::new(vec![3], 1)).unwrap();
        assert_eq!(c.center.coords(), &[0.5]);
        assert_eq!(c.radius, 0.1);

        let c = hierarchy_cell(&CellIndex::new(vec![1, 1], 1)).unwrap();
        assert_eq!(c.center.coords(), &[0.1, 0.1]);
        assert_eq!(c.radius, 0.1);

        assert!(hierarchy_cell(&CellIndex::new(vec![6], 1)).is_err());
    }

    #[test]
    fn parent_examples() {
        let p = parent(&CellIndex::new(vec![3], 1)).unwrap();
        assert_eq!(p, CellIndex::new(vec![1], 0));
        let p = parent(&CellIndex::new(vec![13], 2)).unwrap();
        assert_eq!(p, CellIndex::new(vec![3], 1));
        let p = parent(&CellIndex::new(vec![6], 2)).unwrap();
        assert_eq!(p, CellIndex::new(vec![2], 1));
        assert!(parent(&CellIndex::new(vec![1], 0)).is_err());
    }

    #[test]
    fn selection_sets_examples() {
        let params = HierarchyParams::new(1, 2).unwrap();
        let sets = selection_sets(&params).unwrap();
        assert_eq!(sets[0], vec![CellIndex::root(1)]);
        let mut level1: Vec<u64> = sets[1].iter().map(|i| i.kappa[0]).collect();
        level1.sort_unstable();
        assert_eq!(level1, vec![2, 3, 4]);
        assert_eq!(sets[2].len(), 9);

        let params2 = HierarchyParams::new(2, 1).unwrap();
        let sets2 = selection_sets(&params2).unwrap();
        assert_eq!(sets2[1].len(), 9);
    }

    #[test]
    fn children_examples() {
        let params = HierarchyParams::new(1, 3).unwrap();
        let kids = children_in_selection(&CellIndex::root(1), &params).unwrap();
        assert_eq!(kids.len(), 3);

        let params2 = HierarchyParams::new(2, 2).unwrap();
        let kids2 = children_in_selection(&CellIndex::root(2), &params2).unwrap();
        assert_eq!(kids2.len(), 9);

        let params3 = HierarchyParams::new(3, 2).unwrap();
        assert_eq!(params3.delta(), 13);
        let kids3 = children_in_selection(&CellIndex::root(3), &params3).unwrap();
        assert_eq!(kids3.len(), 27);

        // unselected index rejected
        let bad = CellIndex::new(vec![1], 1);
        assert!(children_in_selection(&bad, &params).is_err());
    }

    #[test]
    fn children_nested_and_disjoint() {
        let params = HierarchyParams::new(2, 3).unwrap();
        let sets = selection_sets(&params).unwrap();
        for a in 1..=3usize {
            for idx in &sets[a] {
                assert!(is_selected(idx));
                let cell = hierarchy_cell(idx).unwrap();
                let pcell = hierarchy_cell(&parent(idx).unwrap()).unwrap();
                // child box inside parent box (interval arithmetic)
                for (cc, pc) in cell.center.coords().iter().zip(pcell.center.coords()) {
                    assert!(cc - cell.radius >= pc - pcell.radius - 1e-15);
                    assert!(cc + cell.radius <= pc + pcell.radius + 1e-15);
                }
                // selection condition: center within 2 gamma_a of parent center
                let dist = max_norm_dist(&cell.center, &pcell.center).unwrap();
                assert!(dist <= 2.0 * gamma(idx.level) + 1e-15);
            }
            // pairwise disjoint: distinct indices at one level never share a point
            let cells: Vec<Cell> = sets[a].iter().map(|i| hierarchy_cell(i).unwrap()).collect();
            for i in 0..cells.len() {
                for j in (i + 1)..cells.len() {
                    let dist = max_norm_dist(&cells[i].center, &cells[j].center).unwrap();
                    assert!(dist >= 2.0 * cells[i].radius - 1e-15);
                }
            }
        }
    }

    #[test]
    fn gamma_ratio_exact() {
        for a in 0..20 {
            assert_eq!(gamma(a + 1), gamma(a) / 5.0);
        }
    }

    #[test]
    fn grid_volume_exact() {
        for (d, psi) in [(1usize, 7u64), (2, 5), (3, 4)] {
            let cells = grid_partition(d, psi).unwrap();
            let vol: f64 = cells.iter().map(|c| (2.0 * c.radius).powi(d as i32)).sum();
            assert_relative_eq!(vol, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn top_boundary_assigns_to_last_cell() {
        let cells = grid_partition(1, 4).unwrap();
        let one = pt(&[1.0]);
        assert!(cells[3].contains(&one).unwrap());
        assert!(!cells[2].contains(&one).unwrap());
        let idx = grid_owning_index(&one, 4);
        assert_eq!(idx.kappa, vec![4]);
    }

    #[test]
    fn point_validation() {
        assert!(Point::new(vec![0.0, 1.0]).is_ok());
        assert!(Point::new(vec![-0.1]).is_err());
        assert!(Point::new(vec![1.1]).is_err());
        assert!(Point::new(vec![f64::NAN]).is_err());
        assert!(Point::new(vec![]).is_err());
    }

    proptest! {
        // exact partition: every point is owned by exactly one grid cell
        #[test]
        fn owning_index_is_a_partition(x in 0.0f64..=1.0, psi in 1u64..200) {
            let p = Point::new(vec![x]).unwrap();
            let idx = grid_owning_index(&p, psi);
            prop_assert!(idx.kappa[0] >= 1 && idx.kappa[0] <= psi);
        }

        // parent cell contains the child cell for random selected chains
        #[test]
        fn parent_contains_child(seed in 0u64..3u64.pow(12), d in 1usize..3) {
            let level = 4u32;
            // decode a selected index from base-3 digits
            let mut kappa = vec![1u64; d];
            let mut s = seed;
            for _ in 0..level {
                for k in kappa.iter_mut() {
                    let t = s % 3;
                    s /= 3;
                    *k = 5 * *k - 3 + t;
                }
            }
            let idx = CellIndex::new(kappa, level);
            prop_assert!(is_selected(&idx));
            let child = hierarchy_cell(&idx).unwrap();
            let par = hierarchy_cell(&parent(&idx).unwrap()).unwrap();
            for (cc, pc) in child.center.coords().iter().zip(par.center.coords()) {
                prop_assert!(cc - child.radius >= pc - par.radius - 1e-15);
                prop_assert!(cc + child.radius <= pc + par.radius + 1e-15);
            }
        }
    }
}
