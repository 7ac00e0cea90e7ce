//! Hierarchical meshes and the hierarchical B-spline basis on the unit square.
//!
//! Level `l` is the tensor grid with `n0 * 2^l` uniform spans per direction.
//! Every cell of every level is in exactly one of three states: active
//! (element of the current partition), refined (covered by active
//! descendants), or covered by an active ancestor. Only the first two are
//! stored; the third is implied.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::spline::KnotVector;

pub const DEFAULT_MAX_LEVEL: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("unsupported degree {0}: hierarchical plate spaces need p >= 3")]
    UnsupportedDegree(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("refining {element:?} would exceed the maximum level {max_level}")]
    LevelOverflow { element: ElementId, max_level: usize },
    #[error("element {0:?} is not active")]
    NotActive(ElementId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementId {
    pub level: usize,
    pub i: usize,
    pub j: usize,
}

impl ElementId {
    pub fn new(level: usize, i: usize, j: usize) -> Self {
        Self { level, i, j }
    }

    pub fn parent(&self) -> Option<ElementId> {
        (self.level > 0).then(|| ElementId::new(self.level - 1, self.i / 2, self.j / 2))
    }

    pub fn children(&self) -> [ElementId; 4] {
        let (l, i, j) = (self.level + 1, 2 * self.i, 2 * self.j);
        [
            ElementId::new(l, i, j),
            ElementId::new(l, i + 1, j),
            ElementId::new(l, i, j + 1),
            ElementId::new(l, i + 1, j + 1),
        ]
    }

    /// Ancestor (or self) at a coarser or equal level.
    pub fn ancestor(&self, level: usize) -> ElementId {
        debug_assert!(level <= self.level);
        let s = self.level - level;
        ElementId::new(level, self.i >> s, self.j >> s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FunctionId {
    pub level: usize,
    pub i: usize,
    pub j: usize,
}

impl FunctionId {
    pub fn new(level: usize, i: usize, j: usize) -> Self {
        Self { level, i, j }
    }
}

/// Sides of the parametric unit square, counter-clockwise from the bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Outward unit normal of the parametric square.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }

    /// 0 when the side is normal to x, 1 when normal to y.
    pub fn normal_axis(self) -> usize {
        match self {
            Side::Left | Side::Right => 0,
            Side::Bottom | Side::Top => 1,
        }
    }

    /// Whether the side sits at the high end of its normal axis.
    pub fn is_high(self) -> bool {
        matches!(self, Side::Right | Side::Top)
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Bottom => Side::Top,
            Side::Right => Side::Left,
            Side::Top => Side::Bottom,
            Side::Left => Side::Right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Active,
    Refined,
    /// Lies inside an active element of a coarser level.
    Covered,
}

#[derive(Debug, Clone)]
struct Level {
    knots: KnotVector,
    active: BTreeSet<(usize, usize)>,
    refined: BTreeSet<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct HierarchicalMesh {
    n0: usize,
    degree: usize,
    max_level: usize,
    levels: Vec<Level>,
}

/// The active hierarchical basis with its dof numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalBasis {
    active: Vec<FunctionId>,
    dof_index: HashMap<FunctionId, usize>,
}

/// Membership of a level-`l` B-spline in the partition of the active set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionClass {
    /// Support does not meet any active element of its own level.
    Inactive,
    /// Support meets a coarser active element.
    Minus,
    /// Support meets finer elements but no coarser ones.
    Plus,
    /// Support lies inside the level's own active elements.
    Equal,
}

/// A function acting on an element, with its position in the local tables
/// of the element's ancestor at the function's level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalFunction {
    pub function: FunctionId,
    pub dof: usize,
    /// Offsets into the `p + 1` nonzero univariate functions of the ancestor span.
    pub local: (usize, usize),
}

impl HierarchicalMesh {
    pub fn new(n0: usize, degree: usize) -> Result<Self, MeshError> {
        if degree < 3 {
            return Err(MeshError::UnsupportedDegree(degree));
        }
        if n0 < 1 {
            return Err(MeshError::InvalidArgument("n0 must be at least 1".into()));
        }
        let knots = KnotVector::open_uniform(n0, degree, (0.0, 1.0))
            .map_err(|e| MeshError::InvalidArgument(e.to_string()))?;
        let active = (0..n0).flat_map(|i| (0..n0).map(move |j| (i, j))).collect();
        Ok(Self {
            n0,
            degree,
            max_level: DEFAULT_MAX_LEVEL,
            levels: vec![Level {
                knots,
                active,
                refined: BTreeSet::new(),
            }],
        })
    }

    pub fn with_max_level(mut self, max_level: usize) -> Self {
        self.max_level = max_level;
        self
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// Number of levels currently allocated (including empty ones).
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn knots(&self, level: usize) -> &KnotVector {
        &self.levels[level].knots
    }

    /// Elements per direction at `level`.
    pub fn grid_size(&self, level: usize) -> usize {
        self.n0 << level
    }

    pub fn element_size(&self, level: usize) -> f64 {
        1.0 / self.grid_size(level) as f64
    }

    pub fn num_active(&self) -> usize {
        self.levels.iter().map(|l| l.active.len()).sum()
    }

    /// Active elements ordered by level, then grid position.
    pub fn active_elements(&self) -> Vec<ElementId> {
        self.levels
            .iter()
            .enumerate()
            .flat_map(|(l, lev)| lev.active.iter().map(move |&(i, j)| ElementId::new(l, i, j)))
            .collect()
    }

    pub fn active_on_level(&self, level: usize) -> Vec<ElementId> {
        self.levels
            .get(level)
            .map(|lev| {
                lev.active
                    .iter()
                    .map(|&(i, j)| ElementId::new(level, i, j))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Refined (deactivated) cells of a level.
    pub fn refined_on_level(&self, level: usize) -> Vec<ElementId> {
        self.levels
            .get(level)
            .map(|lev| {
                lev.refined
                    .iter()
                    .map(|&(i, j)| ElementId::new(level, i, j))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn is_active(&self, e: ElementId) -> bool {
        self.status(e) == CellStatus::Active
    }

    pub fn status(&self, e: ElementId) -> CellStatus {
        match self.levels.get(e.level) {
            Some(lev) if lev.active.contains(&(e.i, e.j)) => CellStatus::Active,
            Some(lev) if lev.refined.contains(&(e.i, e.j)) => CellStatus::Refined,
            _ => CellStatus::Covered,
        }
    }

    /// Active element containing the cell (the cell itself or an ancestor).
    pub fn covering_element(&self, e: ElementId) -> Option<ElementId> {
        (0..=e.level)
            .rev()
            .map(|l| e.ancestor(l))
            .find(|a| self.is_active(*a))
    }

    /// Parametric bounds `[x0, y0, x1, y1]` of a cell.
    pub fn bounds(&self, e: ElementId) -> [f64; 4] {
        let kv = self.knots_or_refined(e.level);
        let (x0, x1) = kv.element_bounds(e.i);
        let (y0, y1) = kv.element_bounds(e.j);
        [x0, y0, x1, y1]
    }

    fn knots_or_refined(&self, level: usize) -> std::borrow::Cow<'_, KnotVector> {
        match self.levels.get(level) {
            Some(l) => std::borrow::Cow::Borrowed(&l.knots),
            None => {
                let mut kv = self.levels.last().unwrap().knots.clone();
                for _ in self.levels.len()..=level {
                    kv = kv.dyadic_refine();
                }
                std::borrow::Cow::Owned(kv)
            }
        }
    }

    /// Active element containing a parametric point; points on element
    /// boundaries go to the element on the high side, except at the domain's
    /// upper end.
    pub fn locate(&self, point: [f64; 2]) -> Option<ElementId> {
        if !(0.0..=1.0).contains(&point[0]) || !(0.0..=1.0).contains(&point[1]) {
            return None;
        }
        for l in 0..self.levels.len() {
            let kv = &self.levels[l].knots;
            let i = kv.element_of(point[0]).ok()?;
            let j = kv.element_of(point[1]).ok()?;
            let e = ElementId::new(l, i, j);
            match self.status(e) {
                CellStatus::Active => return Some(e),
                CellStatus::Refined => continue,
                CellStatus::Covered => return None,
            }
        }
        None
    }

    /// Sides of the domain boundary that the element touches.
    pub fn boundary_sides(&self, e: ElementId) -> Vec<Side> {
        let n = self.grid_size(e.level);
        let mut sides = Vec::new();
        if e.j == 0 {
            sides.push(Side::Bottom);
        }
        if e.i + 1 == n {
            sides.push(Side::Right);
        }
        if e.j + 1 == n {
            sides.push(Side::Top);
        }
        if e.i == 0 {
            sides.push(Side::Left);
        }
        sides
    }

    /// Same-level active elements sharing an edge or a vertex with `e`.
    pub fn neighbors(&self, e: ElementId) -> Vec<ElementId> {
        let n = self.grid_size(e.level) as isize;
        let mut out = Vec::with_capacity(8);
        for dj in -1isize..=1 {
            for di in -1isize..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (i, j) = (e.i as isize + di, e.j as isize + dj);
                if i < 0 || j < 0 || i >= n || j >= n {
                    continue;
                }
                let nb = ElementId::new(e.level, i as usize, j as usize);
                if self.is_active(nb) {
                    out.push(nb);
                }
            }
        }
        out
    }

    /// Level-`level` cell indices in the support of a 1D function index.
    fn support_range(&self, level: usize, index: usize) -> std::ops::RangeInclusive<usize> {
        let n = self.grid_size(level);
        let lo = index.saturating_sub(self.degree);
        let hi = index.min(n - 1);
        lo..=hi
    }

    pub fn num_functions_per_dir(&self, level: usize) -> usize {
        self.grid_size(level) + self.degree
    }

    /// Classification of a level-`l` tensor B-spline against the current mesh.
    pub fn classify(&self, f: FunctionId) -> FunctionClass {
        let mut any_active = false;
        let mut any_refined = false;
        let mut any_covered = false;
        for ci in self.support_range(f.level, f.i) {
            for cj in self.support_range(f.level, f.j) {
                match self.status(ElementId::new(f.level, ci, cj)) {
                    CellStatus::Active => any_active = true,
                    CellStatus::Refined => any_refined = true,
                    CellStatus::Covered => any_covered = true,
                }
            }
        }
        if !any_active {
            FunctionClass::Inactive
        } else if any_covered {
            FunctionClass::Minus
        } else if any_refined {
            FunctionClass::Plus
        } else {
            FunctionClass::Equal
        }
    }

    /// Cells of the support (at the function's level).
    pub fn support_cells(&self, f: FunctionId) -> Vec<ElementId> {
        let mut out = Vec::new();
        for cj in self.support_range(f.level, f.j) {
            for ci in self.support_range(f.level, f.i) {
                out.push(ElementId::new(f.level, ci, cj));
            }
        }
        out
    }

    /// Builds the hierarchical basis: per level, the functions whose support
    /// meets an active element of that level and no coarser element.
    pub fn rebuild_basis(&self) -> HierarchicalBasis {
        let p = self.degree;
        let mut active = Vec::new();
        for (l, lev) in self.levels.iter().enumerate() {
            let mut candidates = BTreeSet::new();
            for &(i, j) in &lev.active {
                for a in i..=i + p {
                    for b in j..=j + p {
                        candidates.insert((a, b));
                    }
                }
            }
            for (a, b) in candidates {
                let f = FunctionId::new(l, a, b);
                if matches!(self.classify(f), FunctionClass::Equal | FunctionClass::Plus) {
                    active.push(f);
                }
            }
        }
        HierarchicalBasis::from_functions(active)
    }

    /// Active functions nonzero on an active element, ordered by level.
    pub fn connectivity(&self, basis: &HierarchicalBasis, e: ElementId) -> Vec<LocalFunction> {
        let p = self.degree;
        let mut out = Vec::new();
        for k in 0..=e.level {
            let anc = e.ancestor(k);
            for b in 0..=p {
                for a in 0..=p {
                    let f = FunctionId::new(k, anc.i + a, anc.j + b);
                    if let Some(dof) = basis.dof(f) {
                        out.push(LocalFunction {
                            function: f,
                            dof,
                            local: (a, b),
                        });
                    }
                }
            }
        }
        out
    }

    /// Every active element sees only functions of level `>= l - m + 1`.
    pub fn check_admissible(&self, basis: &HierarchicalBasis, m: usize) -> bool {
        self.active_elements().into_iter().all(|e| {
            self.connectivity(basis, e)
                .iter()
                .all(|lf| lf.function.level + m > e.level)
        })
    }

    fn ensure_level(&mut self, level: usize) {
        while self.levels.len() <= level {
            let knots = self.levels.last().unwrap().knots.dyadic_refine();
            self.levels.push(Level {
                knots,
                active: BTreeSet::new(),
                refined: BTreeSet::new(),
            });
        }
    }

    /// Replaces one active element by its four children, no closure.
    pub fn split(&mut self, e: ElementId) -> Result<(), MeshError> {
        if !self.is_active(e) {
            return Err(MeshError::NotActive(e));
        }
        if e.level + 1 > self.max_level {
            return Err(MeshError::LevelOverflow {
                element: e,
                max_level: self.max_level,
            });
        }
        self.ensure_level(e.level + 1);
        self.levels[e.level].active.remove(&(e.i, e.j));
        self.levels[e.level].refined.insert((e.i, e.j));
        for c in e.children() {
            self.levels[c.level].active.insert((c.i, c.j));
        }
        Ok(())
    }

    /// Active elements of level `<= l - m + 1` meeting the support extension
    /// of `e` at level `l - m + 1`.
    fn closure_neighborhood(&self, e: ElementId, m: usize) -> Vec<ElementId> {
        if e.level + 1 < m {
            return Vec::new();
        }
        let k = e.level + 1 - m;
        let anc = e.ancestor(k);
        let p = self.degree;
        let n = self.grid_size(k);
        let (ilo, ihi) = (anc.i.saturating_sub(p), (anc.i + p).min(n - 1));
        let (jlo, jhi) = (anc.j.saturating_sub(p), (anc.j + p).min(n - 1));
        let mut out = Vec::new();
        for l in 0..=k {
            let Some(lev) = self.levels.get(l) else { break };
            let s = k - l;
            // level-l cells overlapping [ilo, ihi] x [jlo, jhi] in level-k indices
            for ci in (ilo >> s)..=(ihi >> s) {
                for cj in (jlo >> s)..=(jhi >> s) {
                    if lev.active.contains(&(ci, cj)) {
                        out.push(ElementId::new(l, ci, cj));
                    }
                }
            }
        }
        out
    }

    fn refine_recursive(&mut self, e: ElementId, m: usize) -> Result<(), MeshError> {
        loop {
            let nb = self.closure_neighborhood(e, m);
            if nb.is_empty() {
                break;
            }
            for q in nb {
                self.refine_recursive(q, m)?;
            }
        }
        if self.is_active(e) {
            self.split(e)?;
        }
        Ok(())
    }

    /// Refines the marked elements and enough of their surroundings to keep
    /// the mesh admissible of class `m`.
    pub fn refine(&self, marked: &BTreeSet<ElementId>, m: usize) -> Result<Self, MeshError> {
        if m < 2 {
            return Err(MeshError::InvalidArgument(format!(
                "admissibility class must be at least 2, got {m}"
            )));
        }
        for e in marked {
            if !self.is_active(*e) {
                return Err(MeshError::NotActive(*e));
            }
        }
        let mut mesh = self.clone();
        for &e in marked {
            if mesh.is_active(e) {
                mesh.refine_recursive(e, m)?;
            }
        }
        Ok(mesh)
    }

    /// Refines every active element once.
    pub fn refine_uniform(&self) -> Result<Self, MeshError> {
        let mut mesh = self.clone();
        for e in self.active_elements() {
            mesh.split(e)?;
        }
        Ok(mesh)
    }

    /// One line per active element: `level x0 y0 x1 y1`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for e in self.active_elements() {
            let [x0, y0, x1, y1] = self.bounds(e);
            writeln!(s, "{} {:.16e} {:.16e} {:.16e} {:.16e}", e.level, x0, y0, x1, y1).unwrap();
        }
        s
    }

    /// Active element counts keyed by level.
    pub fn level_histogram(&self) -> BTreeMap<usize, usize> {
        self.levels
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.active.is_empty())
            .map(|(i, l)| (i, l.active.len()))
            .collect()
    }
}

impl HierarchicalBasis {
    pub fn from_functions(mut active: Vec<FunctionId>) -> Self {
        active.sort();
        active.dedup();
        let dof_index = active.iter().enumerate().map(|(k, f)| (*f, k)).collect();
        Self { active, dof_index }
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn functions(&self) -> &[FunctionId] {
        &self.active
    }

    pub fn dof(&self, f: FunctionId) -> Option<usize> {
        self.dof_index.get(&f).copied()
    }

    pub fn function(&self, dof: usize) -> FunctionId {
        self.active[dof]
    }
}

/// Mesh and basis together; the basis is always rebuilt from the mesh.
#[derive(Debug, Clone)]
pub struct HierarchicalSpace {
    pub mesh: HierarchicalMesh,
    pub basis: HierarchicalBasis,
}

impl HierarchicalSpace {
    pub fn init(n0: usize, degree: usize) -> Result<Self, MeshError> {
        Ok(Self::from_mesh(HierarchicalMesh::new(n0, degree)?))
    }

    pub fn from_mesh(mesh: HierarchicalMesh) -> Self {
        let basis = mesh.rebuild_basis();
        Self { mesh, basis }
    }

    pub fn degree(&self) -> usize {
        self.mesh.degree()
    }

    pub fn num_dofs(&self) -> usize {
        self.basis.len()
    }

    pub fn refine(&self, marked: &BTreeSet<ElementId>, m: usize) -> Result<Self, MeshError> {
        Ok(Self::from_mesh(self.mesh.refine(marked, m)?))
    }

    pub fn refine_uniform(&self) -> Result<Self, MeshError> {
        Ok(Self::from_mesh(self.mesh.refine_uniform()?))
    }

    pub fn connectivity(&self, e: ElementId) -> Vec<LocalFunction> {
        self.mesh.connectivity(&self.basis, e)
    }

    pub fn check_admissible(&self, m: usize) -> bool {
        self.mesh.check_admissible(&self.basis, m)
    }

    /// Largest element size.
    pub fn h_max(&self) -> f64 {
        self.mesh
            .active_elements()
            .iter()
            .map(|e| self.mesh.element_size(e.level))
            .fold(0.0, f64::max)
    }
}
