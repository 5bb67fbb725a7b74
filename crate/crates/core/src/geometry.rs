//! Dumbbell cross-section and its voxel rasterization.
//!
//! The profile is the union of a large circle (radius `r1`, centred at the
//! origin), a small circle (radius `r2`, centred at `(center_distance, 0)`) and
//! a connecting bar spanning `x ∈ [0, center_distance]`,
//! `|y| ≤ min(h/2, r2)`. The circle centres are `r1 + w + r2` apart so the bar
//! bridges a gap of width `w` between the two circle boundaries.

use serde::{Deserialize, Serialize};

use crate::hash::Fingerprint;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileGeometry {
    /// Large-circle radius (m).
    pub r1: f64,
    /// Small-circle radius (m). Zero collapses the profile to a single circle.
    pub r2: f64,
    /// Bar height (m).
    pub h: f64,
    /// Gap between the circle boundaries bridged by the bar (m).
    pub w: f64,
    /// Axial extent of the calibration unit (m).
    pub l: f64,
}

impl Default for ProfileGeometry {
    fn default() -> Self {
        Self::dumbbell()
    }
}

impl ProfileGeometry {
    /// Dumbbell dimensions of the reference extrusion profile.
    pub fn dumbbell() -> Self {
        ProfileGeometry {
            r1: 0.006,
            r2: 0.0033,
            h: 0.01,
            w: 0.003,
            l: 1.0,
        }
    }

    /// A single circle of radius `r`.
    pub fn circle(r: f64, l: f64) -> Self {
        ProfileGeometry {
            r1: r,
            r2: 0.0,
            h: r,
            w: 0.0,
            l,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.r1, self.r2, self.h, self.w, self.l]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("geometry contains non-finite values".into()));
        }
        if self.r1 <= 0.0 || self.h <= 0.0 || self.l <= 0.0 {
            return Err(Error::Config("geometry needs r1 > 0, h > 0, l > 0".into()));
        }
        if self.r2 < 0.0 || self.w < 0.0 {
            return Err(Error::Config("geometry needs r2 >= 0, w >= 0".into()));
        }
        Ok(())
    }

    pub fn center_distance(&self) -> f64 {
        self.r1 + self.w + self.r2
    }

    /// Half height of the connecting bar; zero when there is no second circle.
    pub fn bar_half_height(&self) -> f64 {
        (self.h / 2.0).min(self.r2)
    }

    fn has_second_circle(&self) -> bool {
        self.r2 > 0.0
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        if x * x + y * y <= self.r1 * self.r1 {
            return true;
        }
        if !self.has_second_circle() {
            return false;
        }
        let cd = self.center_distance();
        let dx2 = x - cd;
        if dx2 * dx2 + y * y <= self.r2 * self.r2 {
            return true;
        }
        let hb = self.bar_half_height();
        hb > 0.0 && (0.0..=cd).contains(&x) && y.abs() <= hb
    }

    /// Smallest feature the grid must resolve.
    fn smallest_radius(&self) -> f64 {
        if self.has_second_circle() {
            self.r2
        } else {
            self.r1
        }
    }

    /// Rejects spacings coarser than half the smallest radius.
    pub fn check_resolution(&self, dx: f64) -> Result<()> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::Config(format!("grid spacing must be positive, got {dx}")));
        }
        let feature = self.smallest_radius();
        if dx > feature / 2.0 {
            return Err(Error::Resolution(format!(
                "dx = {dx:e} m does not resolve the smallest radius {feature:e} m (need dx <= {:e})",
                feature / 2.0
            )));
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> String {
        let mut f = Fingerprint::new("calibrom/geometry/v1");
        f.f64(self.r1).f64(self.r2).f64(self.h).f64(self.w).f64(self.l);
        f.finish()
    }
}

/// Outward normal of a boundary face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaceNormal {
    PosX,
    NegX,
    PosY,
    NegY,
}

impl FaceNormal {
    pub const ALL: [FaceNormal; 4] = [
        FaceNormal::PosX,
        FaceNormal::NegX,
        FaceNormal::PosY,
        FaceNormal::NegY,
    ];

    fn offset(self) -> (isize, isize) {
        match self {
            FaceNormal::PosX => (1, 0),
            FaceNormal::NegX => (-1, 0),
            FaceNormal::PosY => (0, 1),
            FaceNormal::NegY => (0, -1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFace {
    /// Compact index of the interior cell owning the face.
    pub cell: usize,
    pub normal: FaceNormal,
}

const EXTERIOR: u32 = u32::MAX;

/// Uniform cell-centred grid over the profile's bounding box.
///
/// Interior cells are numbered row-major (`j` outer, `i` inner). The grid
/// keeps at least one exterior cell on every side, so every interior cell has
/// four in-grid neighbours.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub dx: f64,
    pub nx: usize,
    pub ny: usize,
    /// x coordinate of the centre of column 0.
    pub x0: f64,
    /// y coordinate of the centre of row 0 (rows are symmetric about y = 0).
    pub y0: f64,
    cell_index: Vec<u32>,
    cells: Vec<(usize, usize)>,
    neighbors: Vec<[u32; 4]>,
    face_counts: Vec<u8>,
    boundary_faces: Vec<BoundaryFace>,
}

/// Compact JSON description of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub x0: f64,
    pub y0: f64,
    pub n_interior: usize,
    pub boundary_faces: usize,
}

pub fn rasterize(geometry: &ProfileGeometry, dx: f64) -> Result<VoxelGrid> {
    geometry.validate()?;
    geometry.check_resolution(dx)?;

    let x_min = -geometry.r1;
    let x_max = (geometry.center_distance() + geometry.r2).max(geometry.r1);
    let y_max = geometry.r1.max(geometry.r2).max(geometry.bar_half_height());

    let nx = ((x_max - x_min) / dx).ceil() as usize + 2;
    let half = (y_max / dx).ceil() as usize + 1;
    let ny = 2 * half;
    let x0 = x_min - dx + 0.5 * dx;

    let mut mask = vec![false; nx * ny];
    for j in 0..ny {
        // (j + 0.5 - half) * dx is exactly antisymmetric under j -> ny - 1 - j.
        let y = (j as f64 + 0.5 - half as f64) * dx;
        for i in 0..nx {
            let x = x0 + i as f64 * dx;
            mask[j * nx + i] = geometry.contains(x, y);
        }
    }
    VoxelGrid::from_mask(dx, nx, ny, x0, &mask)
}

impl VoxelGrid {
    /// Builds a grid from a row-major interior mask. Rows are centred on
    /// `y = (j + 0.5 - ny/2)·dx`. Interior cells may not touch the grid edge.
    pub fn from_mask(dx: f64, nx: usize, ny: usize, x0: f64, mask: &[bool]) -> Result<Self> {
        if mask.len() != nx * ny {
            return Err(Error::dim("interior mask", nx * ny, mask.len()));
        }
        let mut cell_index = vec![EXTERIOR; nx * ny];
        let mut cells = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if mask[j * nx + i] {
                    if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
                        return Err(Error::Resolution(format!(
                            "interior cell ({i}, {j}) touches the grid edge"
                        )));
                    }
                    cell_index[j * nx + i] = cells.len() as u32;
                    cells.push((i, j));
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::Resolution("no cell centre lies inside the profile".into()));
        }

        let mut neighbors = Vec::with_capacity(cells.len());
        let mut face_counts = Vec::with_capacity(cells.len());
        let mut boundary_faces = Vec::new();
        for (c, &(i, j)) in cells.iter().enumerate() {
            let mut nb = [EXTERIOR; 4];
            let mut faces = 0u8;
            for (slot, normal) in FaceNormal::ALL.iter().enumerate() {
                let (di, dj) = normal.offset();
                let ni = (i as isize + di) as usize;
                let nj = (j as isize + dj) as usize;
                let idx = cell_index[nj * nx + ni];
                if idx == EXTERIOR {
                    faces += 1;
                    boundary_faces.push(BoundaryFace {
                        cell: c,
                        normal: *normal,
                    });
                } else {
                    nb[slot] = idx;
                }
            }
            neighbors.push(nb);
            face_counts.push(faces);
        }

        let half = ny / 2;
        Ok(VoxelGrid {
            dx,
            nx,
            ny,
            x0,
            y0: (0.5 - half as f64) * dx,
            cell_index,
            cells,
            neighbors,
            face_counts,
            boundary_faces,
        })
    }

    pub fn n_interior(&self) -> usize {
        self.cells.len()
    }

    /// Compact index of cell `(i, j)`, or `None` when exterior or out of range.
    pub fn index(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.nx || j >= self.ny {
            return None;
        }
        match self.cell_index[j * self.nx + i] {
            EXTERIOR => None,
            c => Some(c as usize),
        }
    }

    pub fn cell(&self, compact: usize) -> (usize, usize) {
        self.cells[compact]
    }

    pub fn center(&self, compact: usize) -> (f64, f64) {
        let (i, j) = self.cells[compact];
        self.cell_center(i, j)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        let half = self.ny / 2;
        (
            self.x0 + i as f64 * self.dx,
            (j as f64 + 0.5 - half as f64) * self.dx,
        )
    }

    /// Interior neighbours of a cell as compact indices, in `+x, -x, +y, -y` order.
    pub fn neighbors(&self, compact: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[compact]
            .iter()
            .filter(|&&n| n != EXTERIOR)
            .map(|&n| n as usize)
    }

    /// Number of boundary faces owned by a cell.
    pub fn face_count(&self, compact: usize) -> usize {
        self.face_counts[compact] as usize
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    /// Row-major interior mask of length `nx * ny`.
    pub fn mask(&self) -> Vec<bool> {
        self.cell_index.iter().map(|&c| c != EXTERIOR).collect()
    }

    /// Interior area `n_interior * dx²`.
    pub fn area(&self) -> f64 {
        self.n_interior() as f64 * self.dx * self.dx
    }

    /// Staircase perimeter `boundary faces * dx`.
    pub fn perimeter(&self) -> f64 {
        self.boundary_faces.len() as f64 * self.dx
    }

    /// Compact index of the y-mirror image of a cell.
    pub fn mirror(&self, compact: usize) -> Option<usize> {
        let (i, j) = self.cells[compact];
        self.index(i, self.ny - 1 - j)
    }

    pub fn summary(&self) -> GridSummary {
        GridSummary {
            nx: self.nx,
            ny: self.ny,
            dx: self.dx,
            x0: self.x0,
            y0: self.y0,
            n_interior: self.n_interior(),
            boundary_faces: self.boundary_faces.len(),
        }
    }

    pub fn fingerprint(&self) -> String {
        let mut f = Fingerprint::new("calibrom/grid/v1");
        f.f64(self.dx).u64(self.nx as u64).u64(self.ny as u64);
        for &(i, j) in &self.cells {
            f.u64((j * self.nx + i) as u64);
        }
        f.finish()
    }
}

/// Cell sets used to compare the two lobes and the surface.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMasks {
    pub large_cylinder_core: Vec<usize>,
    pub small_cylinder_core: Vec<usize>,
    pub surface_ring: Vec<usize>,
}

pub fn region_masks(grid: &VoxelGrid, geometry: &ProfileGeometry) -> Result<RegionMasks> {
    let cd = geometry.center_distance();
    let within = |c: usize, cx: f64, r: f64| {
        let (x, y) = grid.center(c);
        (x - cx).powi(2) + y * y <= r * r
    };
    let n = grid.n_interior();
    let large: Vec<usize> = (0..n).filter(|&c| within(c, 0.0, geometry.r1 / 2.0)).collect();
    let small: Vec<usize> = if geometry.r2 > 0.0 {
        (0..n).filter(|&c| within(c, cd, geometry.r2 / 2.0)).collect()
    } else {
        Vec::new()
    };
    if large.is_empty() || small.is_empty() {
        return Err(Error::Resolution(
            "a cylinder core region contains no cells".into(),
        ));
    }
    let surface = (0..n).filter(|&c| grid.face_count(c) > 0).collect();
    Ok(RegionMasks {
        large_cylinder_core: large,
        small_cylinder_core: small,
        surface_ring: surface,
    })
}
