//! Structured quadrilateral mesh hierarchy on an axis-aligned rectangle.
//!
//! A hierarchy holds a coarse grid and its uniform refinement; every fine
//! cell nests inside exactly one coarse cell. Element and node ids are
//! lexicographic in (x-index, y-index) so all output is deterministic.
//!
//! Local node order of a cell is lexicographic as well:
//! 0 = (ix, iy), 1 = (ix, iy+1), 2 = (ix+1, iy), 3 = (ix+1, iy+1).

use crate::error::{Error, Result};

/// Boundary condition tag for a piece of the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BoundaryTag {
    Neumann,
    Robin,
    Dirichlet,
}

/// The four sides of the rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

pub const SIDES: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

/// A tagged sub-segment of one side, parameterized by t in [0, 1]
/// (increasing y on Left/Right, increasing x on Bottom/Top).
#[derive(Debug, Clone, Copy)]
pub struct TagSegment {
    pub t0: f64,
    pub t1: f64,
    pub tag: BoundaryTag,
}

/// Per-side boundary tags. Segments on each side must cover [0, 1].
/// Where segments meet, the tag resolves by precedence
/// Dirichlet > Robin > Neumann.
#[derive(Debug, Clone)]
pub struct BoundaryTags {
    pub left: Vec<TagSegment>,
    pub right: Vec<TagSegment>,
    pub bottom: Vec<TagSegment>,
    pub top: Vec<TagSegment>,
}

impl BoundaryTags {
    /// One tag per whole side.
    pub fn per_side(left: BoundaryTag, right: BoundaryTag, bottom: BoundaryTag, top: BoundaryTag) -> Self {
        let seg = |tag| vec![TagSegment { t0: 0.0, t1: 1.0, tag }];
        BoundaryTags {
            left: seg(left),
            right: seg(right),
            bottom: seg(bottom),
            top: seg(top),
        }
    }

    /// The same tag on the entire boundary.
    pub fn uniform(tag: BoundaryTag) -> Self {
        Self::per_side(tag, tag, tag, tag)
    }

    /// All-Robin boundary (the common impedance setup).
    pub fn all_robin() -> Self {
        Self::uniform(BoundaryTag::Robin)
    }

    pub fn segments(&self, side: Side) -> &[TagSegment] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
            Side::Bottom => &self.bottom,
            Side::Top => &self.top,
        }
    }

    /// Tag at parameter t on a side, closed intervals, precedence resolved.
    pub fn tag_at(&self, side: Side, t: f64) -> Option<BoundaryTag> {
        let eps = 1e-12;
        self.segments(side)
            .iter()
            .filter(|s| t >= s.t0 - eps && t <= s.t1 + eps)
            .map(|s| s.tag)
            .max()
    }

    fn validate(&self) -> Result<()> {
        for side in SIDES {
            let mut segs: Vec<TagSegment> = self.segments(side).to_vec();
            if segs.is_empty() {
                return Err(Error::InvalidMesh(format!("side {side:?} has no boundary tags")));
            }
            segs.sort_by(|a, b| a.t0.total_cmp(&b.t0));
            let mut cover = 0.0f64;
            for s in &segs {
                if s.t1 < s.t0 {
                    return Err(Error::InvalidMesh(format!("segment on {side:?} has t1 < t0")));
                }
                if s.t0 > cover + 1e-12 {
                    return Err(Error::InvalidMesh(format!("tags on side {side:?} leave a gap")));
                }
                cover = cover.max(s.t1);
            }
            if cover < 1.0 - 1e-12 {
                return Err(Error::InvalidMesh(format!("tags on side {side:?} do not reach t = 1")));
            }
        }
        Ok(())
    }

    fn robin_measure(&self, extent: [f64; 2]) -> f64 {
        let mut total = 0.0;
        for side in SIDES {
            let len = match side {
                Side::Left | Side::Right => extent[1],
                Side::Bottom | Side::Top => extent[0],
            };
            for s in self.segments(side) {
                if s.tag == BoundaryTag::Robin {
                    total += (s.t1 - s.t0).max(0.0) * len;
                }
            }
        }
        total
    }
}

/// A structured grid of congruent rectangular cells.
#[derive(Debug, Clone)]
pub struct Grid {
    pub origin: [f64; 2],
    pub extent: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn hx(&self) -> f64 {
        self.extent[0] / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.extent[1] / self.ny as f64
    }

    /// Max cell diameter (all cells congruent).
    pub fn mesh_size(&self) -> f64 {
        self.hx().hypot(self.hy())
    }

    pub fn cell_id(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nx && iy < self.ny);
        ix * self.ny + iy
    }

    pub fn cell_index(&self, id: usize) -> (usize, usize) {
        (id / self.ny, id % self.ny)
    }

    pub fn node_id(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix <= self.nx && iy <= self.ny);
        ix * (self.ny + 1) + iy
    }

    pub fn node_index(&self, id: usize) -> (usize, usize) {
        (id / (self.ny + 1), id % (self.ny + 1))
    }

    pub fn node_coords(&self, id: usize) -> [f64; 2] {
        let (ix, iy) = self.node_index(id);
        [
            self.origin[0] + ix as f64 * self.hx(),
            self.origin[1] + iy as f64 * self.hy(),
        ]
    }

    /// Lower-left corner of a cell.
    pub fn cell_origin(&self, id: usize) -> [f64; 2] {
        let (ix, iy) = self.cell_index(id);
        [
            self.origin[0] + ix as f64 * self.hx(),
            self.origin[1] + iy as f64 * self.hy(),
        ]
    }

    /// The four node ids of a cell, in local lexicographic order.
    pub fn cell_nodes(&self, id: usize) -> [usize; 4] {
        let (ix, iy) = self.cell_index(id);
        [
            self.node_id(ix, iy),
            self.node_id(ix, iy + 1),
            self.node_id(ix + 1, iy),
            self.node_id(ix + 1, iy + 1),
        ]
    }

    /// Cell containing a point (clamped to the grid at the boundary).
    pub fn locate(&self, x: f64, y: f64) -> usize {
        let ix = (((x - self.origin[0]) / self.hx()).floor() as isize).clamp(0, self.nx as isize - 1) as usize;
        let iy = (((y - self.origin[1]) / self.hy()).floor() as isize).clamp(0, self.ny as isize - 1) as usize;
        self.cell_id(ix, iy)
    }

    /// Sides of the domain a node lies on (0, 1 or 2 of them).
    pub fn node_sides(&self, id: usize) -> Vec<(Side, f64)> {
        let (ix, iy) = self.node_index(id);
        let mut out = Vec::new();
        if ix == 0 {
            out.push((Side::Left, iy as f64 / self.ny as f64));
        }
        if ix == self.nx {
            out.push((Side::Right, iy as f64 / self.ny as f64));
        }
        if iy == 0 {
            out.push((Side::Bottom, ix as f64 / self.nx as f64));
        }
        if iy == self.ny {
            out.push((Side::Top, ix as f64 / self.nx as f64));
        }
        out
    }
}

/// A boundary edge of a single cell, lying on the domain boundary.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryFace {
    pub cell: usize,
    pub side: Side,
    /// Node ids of the edge endpoints (ascending parameter order).
    pub nodes: [usize; 2],
    pub midpoint: [f64; 2],
    pub outward_normal: [f64; 2],
    pub length: f64,
    pub tag: BoundaryTag,
}

/// Which mesh of the hierarchy an operation addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshLevel {
    Coarse,
    Fine,
}

/// Nested coarse/fine structured quadrilateral meshes with boundary tags.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    coarse: Grid,
    fine: Grid,
    refinement_levels: u32,
    tags: BoundaryTags,
}

/// Closed m-th order element neighborhood of a seed, as coarse cell ids.
#[derive(Debug, Clone)]
pub struct ElementPatch {
    pub center: usize,
    pub m: usize,
    /// Inclusive coarse cell index box [cx0, cx1] x [cy0, cy1].
    pub cell_box: [usize; 4],
    pub cells: Vec<usize>,
}

/// Free/fixed classification of the nodes at one level.
#[derive(Debug, Clone)]
pub struct NodeSet {
    pub level: MeshLevel,
    pub free: Vec<bool>,
    pub node_to_dof: Vec<Option<usize>>,
    pub dof_to_node: Vec<usize>,
}

impl NodeSet {
    pub fn n_dofs(&self) -> usize {
        self.dof_to_node.len()
    }
}

/// Build the nested hierarchy: the fine grid is the coarse grid refined
/// `levels` times, each level halving the cell edges.
pub fn build_hierarchy(
    origin: [f64; 2],
    extent: [f64; 2],
    coarse_cells: (usize, usize),
    levels: u32,
    tags: BoundaryTags,
) -> Result<MeshHierarchy> {
    if extent[0] <= 0.0 || extent[1] <= 0.0 {
        return Err(Error::InvalidMesh("domain extent must be positive".into()));
    }
    if coarse_cells.0 == 0 || coarse_cells.1 == 0 {
        return Err(Error::InvalidMesh("need at least one coarse cell per axis".into()));
    }
    tags.validate()?;
    if tags.robin_measure(extent) <= 0.0 {
        return Err(Error::InvalidMesh("Robin boundary part must have positive measure".into()));
    }
    let coarse = Grid {
        origin,
        extent,
        nx: coarse_cells.0,
        ny: coarse_cells.1,
    };
    let scale = 1usize << levels;
    let fine = Grid {
        origin,
        extent,
        nx: coarse.nx * scale,
        ny: coarse.ny * scale,
    };
    Ok(MeshHierarchy {
        coarse,
        fine,
        refinement_levels: levels,
        tags,
    })
}

impl MeshHierarchy {
    pub fn coarse(&self) -> &Grid {
        &self.coarse
    }

    pub fn fine(&self) -> &Grid {
        &self.fine
    }

    pub fn grid(&self, level: MeshLevel) -> &Grid {
        match level {
            MeshLevel::Coarse => &self.coarse,
            MeshLevel::Fine => &self.fine,
        }
    }

    pub fn tags(&self) -> &BoundaryTags {
        &self.tags
    }

    pub fn refinement_levels(&self) -> u32 {
        self.refinement_levels
    }

    /// Fine cells per coarse cell edge.
    pub fn refinement_ratio(&self) -> usize {
        1 << self.refinement_levels
    }

    /// Coarse mesh size H (max cell diameter).
    pub fn coarse_size(&self) -> f64 {
        self.coarse.mesh_size()
    }

    /// Fine mesh size h = H * 2^-levels.
    pub fn fine_size(&self) -> f64 {
        self.fine.mesh_size()
    }

    /// The coarse cell containing a fine cell (index arithmetic; nesting).
    pub fn coarse_cell_of_fine(&self, fine_cell: usize) -> usize {
        let r = self.refinement_ratio();
        let (fx, fy) = self.fine.cell_index(fine_cell);
        self.coarse.cell_id(fx / r, fy / r)
    }

    /// Fine cell ids contained in a coarse cell, ascending.
    pub fn fine_cells_of_coarse(&self, coarse_cell: usize) -> Vec<usize> {
        let r = self.refinement_ratio();
        let (cx, cy) = self.coarse.cell_index(coarse_cell);
        let mut out = Vec::with_capacity(r * r);
        for fx in cx * r..(cx + 1) * r {
            for fy in cy * r..(cy + 1) * r {
                out.push(self.fine.cell_id(fx, fy));
            }
        }
        out.sort_unstable();
        out
    }

    /// Boundary faces of the mesh at a level, in ascending cell order.
    pub fn boundary_faces(&self, level: MeshLevel) -> Vec<BoundaryFace> {
        let g = self.grid(level);
        let mut faces = Vec::new();
        let mut push = |cell: usize, side: Side, nodes: [usize; 2], len: f64, normal: [f64; 2], t_mid: f64| {
            let a = g.node_coords(nodes[0]);
            let b = g.node_coords(nodes[1]);
            let tag = self
                .tags
                .tag_at(side, t_mid)
                .expect("validated tags cover the boundary");
            faces.push(BoundaryFace {
                cell,
                side,
                nodes,
                midpoint: [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0],
                outward_normal: normal,
                length: len,
                tag,
            });
        };
        for iy in 0..g.ny {
            let t = (iy as f64 + 0.5) / g.ny as f64;
            push(
                g.cell_id(0, iy),
                Side::Left,
                [g.node_id(0, iy), g.node_id(0, iy + 1)],
                g.hy(),
                [-1.0, 0.0],
                t,
            );
            push(
                g.cell_id(g.nx - 1, iy),
                Side::Right,
                [g.node_id(g.nx, iy), g.node_id(g.nx, iy + 1)],
                g.hy(),
                [1.0, 0.0],
                t,
            );
        }
        for ix in 0..g.nx {
            let t = (ix as f64 + 0.5) / g.nx as f64;
            push(
                g.cell_id(ix, 0),
                Side::Bottom,
                [g.node_id(ix, 0), g.node_id(ix + 1, 0)],
                g.hx(),
                [0.0, -1.0],
                t,
            );
            push(
                g.cell_id(ix, g.ny - 1),
                Side::Top,
                [g.node_id(ix, g.ny), g.node_id(ix + 1, g.ny)],
                g.hx(),
                [0.0, 1.0],
                t,
            );
        }
        faces.sort_by_key(|f| (f.cell, f.nodes));
        faces
    }

    /// True iff the node at this level lies on the closed Dirichlet boundary.
    pub fn is_dirichlet_node(&self, level: MeshLevel, node: usize) -> bool {
        let g = self.grid(level);
        g.node_sides(node)
            .into_iter()
            .any(|(side, t)| self.tags.tag_at(side, t) == Some(BoundaryTag::Dirichlet))
    }

    /// Free nodes (vertices not on the closed Dirichlet boundary) at a level.
    pub fn free_nodes(&self, level: MeshLevel) -> NodeSet {
        let g = self.grid(level);
        let n = g.n_nodes();
        let mut free = vec![false; n];
        let mut node_to_dof = vec![None; n];
        let mut dof_to_node = Vec::new();
        for node in 0..n {
            if !self.is_dirichlet_node(level, node) {
                free[node] = true;
                node_to_dof[node] = Some(dof_to_node.len());
                dof_to_node.push(node);
            }
        }
        NodeSet {
            level,
            free,
            node_to_dof,
            dof_to_node,
        }
    }

    /// Closed m-th order neighborhood of a coarse cell.
    pub fn patch(&self, seed: usize, m: usize) -> ElementPatch {
        self.patch_of_cells(seed, &[seed], m)
    }

    /// Closed m-th order neighborhood of a set of coarse cells.
    /// `center` is only recorded for reporting.
    pub fn patch_of_cells(&self, center: usize, seed: &[usize], m: usize) -> ElementPatch {
        assert!(m >= 1, "patch order m must be >= 1");
        assert!(!seed.is_empty());
        let g = &self.coarse;
        let mut cx0 = usize::MAX;
        let mut cx1 = 0usize;
        let mut cy0 = usize::MAX;
        let mut cy1 = 0usize;
        for &c in seed {
            let (ix, iy) = g.cell_index(c);
            cx0 = cx0.min(ix.saturating_sub(m));
            cx1 = cx1.max((ix + m).min(g.nx - 1));
            cy0 = cy0.min(iy.saturating_sub(m));
            cy1 = cy1.max((iy + m).min(g.ny - 1));
        }
        let mut cells = Vec::with_capacity((cx1 - cx0 + 1) * (cy1 - cy0 + 1));
        for ix in cx0..=cx1 {
            for iy in cy0..=cy1 {
                cells.push(g.cell_id(ix, iy));
            }
        }
        cells.sort_unstable();
        ElementPatch {
            center,
            m,
            cell_box: [cx0, cx1, cy0, cy1],
            cells,
        }
    }

    /// Fine cell ids inside a coarse patch, ascending.
    pub fn fine_cells_of_patch(&self, patch: &ElementPatch) -> Vec<usize> {
        let r = self.refinement_ratio();
        let [cx0, cx1, cy0, cy1] = patch.cell_box;
        let mut out = Vec::with_capacity((cx1 - cx0 + 1) * (cy1 - cy0 + 1) * r * r);
        for fx in cx0 * r..(cx1 + 1) * r {
            for fy in cy0 * r..(cy1 + 1) * r {
                out.push(self.fine.cell_id(fx, fy));
            }
        }
        out.sort_unstable();
        out
    }

    /// Fine nodes admissible for functions supported on the closed patch that
    /// vanish outside it: nodes strictly inside the patch, plus patch-boundary
    /// nodes that lie on the physical domain boundary.
    pub fn patch_interior_fine_nodes(&self, patch: &ElementPatch) -> Vec<usize> {
        let r = self.refinement_ratio();
        let g = &self.fine;
        let [cx0, cx1, cy0, cy1] = patch.cell_box;
        let (fx0, fx1) = (cx0 * r, (cx1 + 1) * r);
        let (fy0, fy1) = (cy0 * r, (cy1 + 1) * r);
        let mut out = Vec::new();
        for ix in fx0..=fx1 {
            for iy in fy0..=fy1 {
                let on_left = ix == fx0 && fx0 != 0;
                let on_right = ix == fx1 && fx1 != g.nx;
                let on_bottom = iy == fy0 && fy0 != 0;
                let on_top = iy == fy1 && fy1 != g.ny;
                if on_left || on_right || on_bottom || on_top {
                    continue;
                }
                out.push(g.node_id(ix, iy));
            }
        }
        out.sort_unstable();
        out
    }

    /// Debug dump: node coordinates and cell connectivity as CSV.
    pub fn dump_csv<W: std::io::Write>(&self, level: MeshLevel, w: &mut W) -> Result<()> {
        let g = self.grid(level);
        writeln!(w, "node,x,y")?;
        for n in 0..g.n_nodes() {
            let [x, y] = g.node_coords(n);
            writeln!(w, "{n},{x:.16e},{y:.16e}")?;
        }
        writeln!(w, "cell,n0,n1,n2,n3")?;
        for c in 0..g.n_cells() {
            let [a, b, cc, d] = g.cell_nodes(c);
            writeln!(w, "{c},{a},{b},{cc},{d}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn square_hierarchy(cells: usize, levels: u32, tags: BoundaryTags) -> MeshHierarchy {
        build_hierarchy([-1.0, -1.0], [2.0, 2.0], (cells, cells), levels, tags).unwrap()
    }

    #[test]
    fn paper_scale_mesh_sizes() {
        // 8x8 coarse on (-1,1)^2 with 5 refinements: fine grid is 256x256.
        let h = square_hierarchy(8, 5, BoundaryTags::all_robin());
        assert_eq!(h.fine().nx, 256);
        assert_eq!(h.fine().ny, 256);
        let cell = 2.0 / 8.0;
        assert!((h.coarse_size() - cell * 2f64.sqrt()).abs() < 1e-14);
        assert!((h.fine_size() - h.coarse_size() / 32.0).abs() < 1e-14);
    }

    #[test]
    fn zero_levels_degenerates_to_coarse() {
        let h = square_hierarchy(8, 0, BoundaryTags::all_robin());
        assert_eq!(h.fine().n_cells(), h.coarse().n_cells());
        assert_eq!(h.fine_size(), h.coarse_size());
    }

    #[test]
    fn nesting_matches_point_location() {
        let h = square_hierarchy(4, 2, BoundaryTags::all_robin());
        assert_eq!(h.fine().nx, 16);
        for fc in 0..h.fine().n_cells() {
            let o = h.fine().cell_origin(fc);
            let mid = [o[0] + h.fine().hx() / 2.0, o[1] + h.fine().hy() / 2.0];
            // brute-force point-in-cell search on the coarse grid
            let mut found = None;
            for cc in 0..h.coarse().n_cells() {
                let co = h.coarse().cell_origin(cc);
                if mid[0] >= co[0]
                    && mid[0] <= co[0] + h.coarse().hx()
                    && mid[1] >= co[1]
                    && mid[1] <= co[1] + h.coarse().hy()
                {
                    found = Some(cc);
                    break;
                }
            }
            assert_eq!(h.coarse_cell_of_fine(fc), found.unwrap());
        }
    }

    #[test]
    fn nesting_partition_counts() {
        let h = square_hierarchy(4, 2, BoundaryTags::all_robin());
        let mut seen = BTreeSet::new();
        let mut total = 0;
        for cc in 0..h.coarse().n_cells() {
            for fc in h.fine_cells_of_coarse(cc) {
                assert!(seen.insert(fc), "fine cell {fc} counted twice");
                total += 1;
            }
        }
        assert_eq!(total, h.fine().n_cells());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_hierarchy([0.0, 0.0], [1.0, -1.0], (4, 4), 1, BoundaryTags::all_robin()).is_err());
        assert!(build_hierarchy([0.0, 0.0], [1.0, 1.0], (0, 4), 1, BoundaryTags::all_robin()).is_err());
        // empty Robin part is rejected
        assert!(build_hierarchy(
            [0.0, 0.0],
            [1.0, 1.0],
            (4, 4),
            1,
            BoundaryTags::uniform(BoundaryTag::Dirichlet)
        )
        .is_err());
    }

    #[test]
    fn interior_patch_sizes() {
        let h = square_hierarchy(16, 0, BoundaryTags::all_robin());
        let center = h.coarse().cell_id(8, 8);
        assert_eq!(h.patch(center, 1).cells.len(), 9);
        assert_eq!(h.patch(center, 3).cells.len(), 49);
        let corner = h.coarse().cell_id(0, 0);
        assert_eq!(h.patch(corner, 1).cells.len(), 4);
    }

    /// One-ring set expansion, the independent oracle for patch().
    fn expand_once(h: &MeshHierarchy, cells: &BTreeSet<usize>) -> BTreeSet<usize> {
        let g = h.coarse();
        let mut out = cells.clone();
        for &c in cells {
            let (ix, iy) = g.cell_index(c);
            for dx in -1i64..=1 {
                for dy in -1i64..=1 {
                    let jx = ix as i64 + dx;
                    let jy = iy as i64 + dy;
                    if jx >= 0 && jy >= 0 && (jx as usize) < g.nx && (jy as usize) < g.ny {
                        out.insert(g.cell_id(jx as usize, jy as usize));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn patch_matches_set_expansion_oracle() {
        let h = square_hierarchy(16, 0, BoundaryTags::all_robin());
        for seed in [h.coarse().cell_id(7, 9), h.coarse().cell_id(0, 3), h.coarse().cell_id(15, 15)] {
            let mut set: BTreeSet<usize> = [seed].into_iter().collect();
            for m in 1..=3 {
                set = expand_once(&h, &set);
                let patch = h.patch(seed, m);
                let got: BTreeSet<usize> = patch.cells.iter().copied().collect();
                assert_eq!(got, set, "seed {seed} m {m}");
            }
        }
    }

    #[test]
    fn patch_monotone_and_symmetric() {
        let h = square_hierarchy(8, 0, BoundaryTags::all_robin());
        for t in 0..h.coarse().n_cells() {
            let p1: BTreeSet<usize> = h.patch(t, 1).cells.iter().copied().collect();
            let p2: BTreeSet<usize> = h.patch(t, 2).cells.iter().copied().collect();
            assert!(p1.is_subset(&p2));
            for &u in &p1 {
                let q: BTreeSet<usize> = h.patch(u, 1).cells.iter().copied().collect();
                assert!(q.contains(&t), "one-ring symmetry violated for {t}, {u}");
            }
        }
    }

    #[test]
    fn overlap_constant_bound() {
        for n in [16usize, 64] {
            let h = square_hierarchy(n, 0, BoundaryTags::all_robin());
            for m in 1..=5 {
                let max = (0..h.coarse().n_cells())
                    .map(|t| h.patch(t, m).cells.len())
                    .max()
                    .unwrap();
                assert!(max <= (2 * m + 1) * (2 * m + 1));
            }
        }
    }

    #[test]
    fn free_nodes_all_robin() {
        let h = square_hierarchy(8, 0, BoundaryTags::all_robin());
        let ns = h.free_nodes(MeshLevel::Coarse);
        assert_eq!(ns.n_dofs(), 81);
    }

    #[test]
    fn free_nodes_dirichlet_left() {
        let tags = BoundaryTags::per_side(
            BoundaryTag::Dirichlet,
            BoundaryTag::Robin,
            BoundaryTag::Robin,
            BoundaryTag::Robin,
        );
        let h = square_hierarchy(8, 0, tags);
        let ns = h.free_nodes(MeshLevel::Coarse);
        assert_eq!(ns.n_dofs(), 81 - 9);
    }

    #[test]
    fn free_nodes_match_geometric_oracle() {
        // Dirichlet on the lower half of the right side plus the whole top.
        let tags = BoundaryTags {
            left: vec![TagSegment { t0: 0.0, t1: 1.0, tag: BoundaryTag::Robin }],
            right: vec![
                TagSegment { t0: 0.0, t1: 0.5, tag: BoundaryTag::Dirichlet },
                TagSegment { t0: 0.5, t1: 1.0, tag: BoundaryTag::Neumann },
            ],
            bottom: vec![TagSegment { t0: 0.0, t1: 1.0, tag: BoundaryTag::Robin }],
            top: vec![TagSegment { t0: 0.0, t1: 1.0, tag: BoundaryTag::Dirichlet }],
        };
        let h = square_hierarchy(8, 1, tags);
        let g = h.grid(MeshLevel::Fine);
        let ns = h.free_nodes(MeshLevel::Fine);
        for node in 0..g.n_nodes() {
            let [x, y] = g.node_coords(node);
            // brute-force vertex-on-segment test in physical coordinates
            let on_right_dirichlet = (x - 1.0).abs() < 1e-14 && y <= 0.0 + 1e-14;
            let on_top_dirichlet = (y - 1.0).abs() < 1e-14;
            let expect_fixed = on_right_dirichlet || on_top_dirichlet;
            assert_eq!(!ns.free[node], expect_fixed, "node {node} at ({x}, {y})");
        }
    }

    #[test]
    fn patch_interior_nodes_counts() {
        // 4x4 coarse, one refinement: interior patch of m=1 around cell (1,1)
        // spans coarse cells [0,2]x[0,2] -> fine box [0,6]x[0,6] with the
        // left/bottom faces on the physical boundary.
        let h = square_hierarchy(4, 1, BoundaryTags::all_robin());
        let p = h.patch(h.coarse().cell_id(1, 1), 1);
        let nodes = h.patch_interior_fine_nodes(&p);
        // x: 0..=5 allowed (6 is an interior patch face), same for y
        assert_eq!(nodes.len(), 6 * 6);
    }
}
