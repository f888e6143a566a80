//! Uniform-grid neighbor search.
//!
//! Particles are counting-sorted into square cells of side `cell_size`
//! (the largest interaction radius, `2h`). A query visits the 3x3 block of
//! cells around a particle; pair enumeration visits each cell pair once.

use crate::error::{Error, Result};
use crate::Vec2;

/// One neighbor of a query particle: index, `x_a - x_b` and distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dx: Vec2,
    pub r: f64,
}

/// Unordered interacting pair with `a < b` in particle index order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub a: u32,
    pub b: u32,
    /// `x_a - x_b`
    pub dx: Vec2,
    pub r: f64,
}

/// Axis-aligned box outside of which particles are considered runaway.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    /// Whether `p` lies more than ten domain widths outside the box.
    pub fn is_runaway(&self, p: Vec2) -> bool {
        let width = (self.max - self.min).max();
        let margin = 10.0 * width;
        !(p.x >= self.min.x - margin
            && p.x <= self.max.x + margin
            && p.y >= self.min.y - margin
            && p.y <= self.max.y + margin)
    }
}

#[derive(Debug, Clone, Default)]
pub struct NeighborGrid {
    cell_size: f64,
    origin: Vec2,
    nx: usize,
    ny: usize,
    /// `cell_start[c]..cell_start[c + 1]` indexes `sorted`.
    cell_start: Vec<u32>,
    sorted: Vec<u32>,
    sorted_pos: Vec<Vec2>,
    checksum: u64,
}

fn position_checksum(positions: &[Vec2]) -> u64 {
    positions.iter().fold(0xcbf2_9ce4_8422_2325u64, |acc, p| {
        let acc = (acc ^ p.x.to_bits()).wrapping_mul(0x0100_0000_01b3);
        (acc ^ p.y.to_bits()).wrapping_mul(0x0100_0000_01b3)
    })
}

impl NeighborGrid {
    pub fn new(cell_size: f64) -> Result<Self> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        Ok(Self {
            cell_size,
            ..Self::default()
        })
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Re-bins all particles. Fails if any position is non-finite or has run
    /// away from `bounds`.
    pub fn rebuild(&mut self, positions: &[Vec2], bounds: &Bounds) -> Result<()> {
        let mut min = Vec2::repeat(f64::INFINITY);
        let mut max = Vec2::repeat(f64::NEG_INFINITY);
        for (i, p) in positions.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "particle {i} has a non-finite position"
                )));
            }
            if bounds.is_runaway(*p) {
                return Err(Error::InvalidInput(format!(
                    "particle {i} ran away to ({:.4}, {:.4})",
                    p.x, p.y
                )));
            }
            min = min.inf(p);
            max = max.sup(p);
        }
        if positions.is_empty() {
            min = Vec2::zeros();
            max = Vec2::zeros();
        }
        self.origin = min;
        self.nx = ((max.x - min.x) / self.cell_size).floor() as usize + 1;
        self.ny = ((max.y - min.y) / self.cell_size).floor() as usize + 1;
        let ncell = self.nx * self.ny;

        let cells: Vec<u32> = positions.iter().map(|p| self.cell_of(*p) as u32).collect();
        self.cell_start.clear();
        self.cell_start.resize(ncell + 1, 0);
        for &c in &cells {
            self.cell_start[c as usize + 1] += 1;
        }
        for c in 0..ncell {
            self.cell_start[c + 1] += self.cell_start[c];
        }
        let mut fill = self.cell_start.clone();
        self.sorted.clear();
        self.sorted.resize(positions.len(), 0);
        for (i, &c) in cells.iter().enumerate() {
            let slot = &mut fill[c as usize];
            self.sorted[*slot as usize] = i as u32;
            *slot += 1;
        }
        self.sorted_pos.clear();
        self.sorted_pos
            .extend(self.sorted.iter().map(|&i| positions[i as usize]));
        self.checksum = position_checksum(positions);
        Ok(())
    }

    #[inline]
    fn cell_coords(&self, p: Vec2) -> (usize, usize) {
        let cx = ((p.x - self.origin.x) / self.cell_size).floor().max(0.0) as usize;
        let cy = ((p.y - self.origin.y) / self.cell_size).floor().max(0.0) as usize;
        (cx.min(self.nx - 1), cy.min(self.ny - 1))
    }

    #[inline]
    fn cell_of(&self, p: Vec2) -> usize {
        let (cx, cy) = self.cell_coords(p);
        cx + cy * self.nx
    }

    /// True if the grid was built from exactly these positions.
    pub fn is_current(&self, positions: &[Vec2]) -> bool {
        self.sorted.len() == positions.len() && self.checksum == position_checksum(positions)
    }

    /// All `b != a` with `|x_a - x_b| < radius`, in ascending index order.
    /// `radius` must not exceed the cell size.
    pub fn neighbors(&self, positions: &[Vec2], a: usize, radius: f64) -> Vec<Neighbor> {
        debug_assert!(radius <= self.cell_size);
        debug_assert!(self.is_current(positions), "neighbor grid is stale");
        let pa = positions[a];
        let (cx, cy) = self.cell_coords(pa);
        let mut out = Vec::new();
        for ny in cy.saturating_sub(1)..=(cy + 1).min(self.ny - 1) {
            for nx in cx.saturating_sub(1)..=(cx + 1).min(self.nx - 1) {
                let c = nx + ny * self.nx;
                let range = self.cell_start[c] as usize..self.cell_start[c + 1] as usize;
                for (&b, &pb) in self.sorted[range.clone()].iter().zip(&self.sorted_pos[range]) {
                    let b = b as usize;
                    if b == a {
                        continue;
                    }
                    let dx = pa - pb;
                    let r2 = dx.norm_squared();
                    if r2 < radius * radius {
                        out.push(Neighbor {
                            index: b,
                            dx,
                            r: r2.sqrt(),
                        });
                    }
                }
            }
        }
        out.sort_by_key(|n| n.index);
        out
    }

    /// Collects every pair closer than `radius` into `out` (cleared first).
    /// The order depends only on the positions, never on thread timing.
    pub fn pairs(&self, radius: f64, out: &mut Vec<Pair>) {
        debug_assert!(radius <= self.cell_size);
        out.clear();
        let r2max = radius * radius;
        let push = |ia: usize, ib: usize, out: &mut Vec<Pair>| {
            let dx = self.sorted_pos[ia] - self.sorted_pos[ib];
            let r2 = dx.norm_squared();
            if r2 < r2max {
                let (a, b) = (self.sorted[ia], self.sorted[ib]);
                let pair = if a < b {
                    Pair { a, b, dx, r: r2.sqrt() }
                } else {
                    Pair { a: b, b: a, dx: -dx, r: r2.sqrt() }
                };
                out.push(pair);
            }
        };
        // forward half of the 3x3 stencil
        const OFFSETS: [(isize, isize); 4] = [(1, 0), (-1, 1), (0, 1), (1, 1)];
        for cy in 0..self.ny {
            for cx in 0..self.nx {
                let c = cx + cy * self.nx;
                let (s0, s1) = (self.cell_start[c] as usize, self.cell_start[c + 1] as usize);
                if s0 == s1 {
                    continue;
                }
                for ia in s0..s1 {
                    for ib in ia + 1..s1 {
                        push(ia, ib, out);
                    }
                }
                for (ox, oy) in OFFSETS {
                    let (qx, qy) = (cx as isize + ox, cy as isize + oy);
                    if qx < 0 || qx >= self.nx as isize || qy >= self.ny as isize {
                        continue;
                    }
                    let q = qx as usize + qy as usize * self.nx;
                    let (t0, t1) = (self.cell_start[q] as usize, self.cell_start[q + 1] as usize);
                    for ia in s0..s1 {
                        for ib in t0..t1 {
                            push(ia, ib, out);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds() -> Bounds {
        Bounds::new(Vec2::zeros(), Vec2::new(1.0, 1.0))
    }

    #[test]
    fn close_pair_found_far_pair_not() {
        let h = 0.01;
        let mut grid = NeighborGrid::new(2.0 * h).unwrap();
        let pos = vec![
            Vec2::new(0.5, 0.5),
            Vec2::new(0.5 + 1.9 * h, 0.5),
            Vec2::new(0.2, 0.2),
            Vec2::new(0.2 + 2.1 * h, 0.2),
        ];
        grid.rebuild(&pos, &bounds()).unwrap();
        let n0 = grid.neighbors(&pos, 0, 2.0 * h);
        assert_eq!(n0.len(), 1);
        assert_eq!(n0[0].index, 1);
        assert_eq!(grid.neighbors(&pos, 1, 2.0 * h)[0].index, 0);
        assert!(grid.neighbors(&pos, 2, 2.0 * h).is_empty());
        assert!(grid.neighbors(&pos, 3, 2.0 * h).is_empty());
    }

    #[test]
    fn support_boundary_excluded() {
        let mut grid = NeighborGrid::new(2.0).unwrap();
        let pos = vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0)];
        grid.rebuild(&pos, &bounds()).unwrap();
        assert!(grid.neighbors(&pos, 0, 2.0).is_empty());
        let mut pairs = Vec::new();
        grid.pairs(2.0, &mut pairs);
        assert!(pairs.is_empty());
    }

    #[test]
    fn isolated_particle_has_no_neighbors() {
        let mut grid = NeighborGrid::new(0.1).unwrap();
        let pos = vec![Vec2::new(0.3, 0.3)];
        grid.rebuild(&pos, &bounds()).unwrap();
        assert!(grid.neighbors(&pos, 0, 0.1).is_empty());
    }

    #[test]
    fn runaway_and_nan_rejected() {
        let mut grid = NeighborGrid::new(0.1).unwrap();
        assert!(grid.rebuild(&[Vec2::new(11.5, 0.0)], &bounds()).is_err());
        assert!(grid.rebuild(&[Vec2::new(10.5, 0.0)], &bounds()).is_ok());
        assert!(grid.rebuild(&[Vec2::new(f64::NAN, 0.0)], &bounds()).is_err());
    }

    #[test]
    fn stale_detection() {
        let mut grid = NeighborGrid::new(0.1).unwrap();
        let mut pos = vec![Vec2::new(0.3, 0.3), Vec2::new(0.35, 0.3)];
        grid.rebuild(&pos, &bounds()).unwrap();
        assert!(grid.is_current(&pos));
        pos[1].x += 1e-9;
        assert!(!grid.is_current(&pos));
    }
}
