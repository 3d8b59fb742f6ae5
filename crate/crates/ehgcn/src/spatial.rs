//! Exact k-nearest-neighbour search in the scaled (x, y, t) embedding.
//!
//! Small point sets use brute force; larger ones go through a uniform grid
//! of cubic cells searched in expanding Chebyshev shells. The shell search
//! stays exact: any point in a cell at shell index `j` lies at least
//! `(j - 1) * side` away, so once the running k-th distance beats that
//! bound no further shell can contribute.

/// Point sets below this size skip the grid and use brute force.
pub const BRUTE_FORCE_LIMIT: usize = 1000;

pub type Point3 = [f64; 3];

fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

struct Grid {
    origin: Point3,
    side: f64,
    dims: [usize; 3],
    /// Point indices per cell, flattened as `(ix * dims[1] + iy) * dims[2] + iz`.
    cells: Vec<Vec<u32>>,
}

impl Grid {
    fn build(points: &[Point3]) -> Option<Grid> {
        let n = points.len();
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let extents = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let nonzero: Vec<f64> = extents.iter().copied().filter(|&e| e > 0.0).collect();
        if nonzero.is_empty() {
            return None; // all points coincide
        }
        // Aim for roughly two points per occupied cell.
        let volume: f64 = nonzero.iter().product();
        let side = (volume / (n as f64 / 2.0)).powf(1.0 / nonzero.len() as f64);
        if !(side.is_finite() && side > 0.0) {
            return None;
        }
        let mut dims = [0usize; 3];
        let mut total = 1usize;
        for a in 0..3 {
            dims[a] = (extents[a] / side) as usize + 1;
            total = total.checked_mul(dims[a])?;
        }
        if total > 16 * n {
            return None; // degenerate aspect ratio; brute force instead
        }
        let mut cells = vec![Vec::new(); total];
        for (i, p) in points.iter().enumerate() {
            let idx = Self::cell_of(p, &lo, side, &dims);
            cells[idx].push(i as u32);
        }
        Some(Grid {
            origin: lo,
            side,
            dims,
            cells,
        })
    }

    fn cell_of(p: &Point3, origin: &Point3, side: f64, dims: &[usize; 3]) -> usize {
        let mut c = [0usize; 3];
        for a in 0..3 {
            c[a] = (((p[a] - origin[a]) / side) as usize).min(dims[a] - 1);
        }
        (c[0] * dims[1] + c[1]) * dims[2] + c[2]
    }

    fn coords_of(&self, p: &Point3) -> [i64; 3] {
        let mut c = [0i64; 3];
        for a in 0..3 {
            c[a] = (((p[a] - self.origin[a]) / self.side) as usize).min(self.dims[a] - 1) as i64;
        }
        c
    }
}

/// Exact k-NN index over a fixed point set.
pub struct SpatialIndex {
    points: Vec<Point3>,
    grid: Option<Grid>,
}

impl SpatialIndex {
    pub fn new(points: Vec<Point3>) -> Self {
        let grid = if points.len() >= BRUTE_FORCE_LIMIT {
            Grid::build(&points)
        } else {
            None
        };
        SpatialIndex { points, grid }
    }

    /// Forces the grid path regardless of size (used by tests).
    pub fn with_grid(points: Vec<Point3>) -> Self {
        let grid = Grid::build(&points);
        SpatialIndex { points, grid }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &Point3 {
        &self.points[i]
    }

    /// The `min(k, n-1)` nearest neighbours of point `query` (excluding
    /// itself), as `(index, distance)` sorted by `(distance, index)`.
    /// Equal distances break toward the smaller index.
    pub fn k_nearest(&self, query: usize, k: usize) -> Vec<(usize, f64)> {
        let n = self.points.len();
        let k = k.min(n.saturating_sub(1));
        if k == 0 {
            return Vec::new();
        }
        let mut found = match &self.grid {
            Some(grid) => self.grid_nearest(grid, query, k),
            None => self.brute_nearest(query, k),
        };
        for entry in &mut found {
            entry.1 = entry.1.sqrt();
        }
        found
    }

    /// Brute-force path returning squared distances.
    fn brute_nearest(&self, query: usize, k: usize) -> Vec<(usize, f64)> {
        let q = &self.points[query];
        let mut all: Vec<(usize, f64)> = self
            .points
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != query)
            .map(|(i, p)| (i, dist2(q, p)))
            .collect();
        all.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    fn grid_nearest(&self, grid: &Grid, query: usize, k: usize) -> Vec<(usize, f64)> {
        let q = &self.points[query];
        let qc = grid.coords_of(q);
        let max_shell = (0..3)
            .map(|a| {
                let d = grid.dims[a] as i64;
                qc[a].max(d - 1 - qc[a])
            })
            .max()
            .unwrap();
        let mut cand: Vec<(usize, f64)> = Vec::new();
        let mut kth_d2 = f64::INFINITY;
        for shell in 0..=max_shell {
            // Stop once every unseen shell is provably farther than the
            // current k-th best: points in shell j are >= (j-1)*side away.
            if cand.len() >= k {
                let bound = (shell - 1) as f64 * grid.side;
                if bound * bound > kth_d2 {
                    break;
                }
            }
            self.scan_shell(grid, &qc, shell, query, q, &mut cand);
            if cand.len() >= k {
                cand.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                cand.truncate(4 * k.max(8));
                kth_d2 = cand[k - 1].1;
            }
        }
        cand.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        cand.truncate(k);
        cand
    }

    fn scan_shell(
        &self,
        grid: &Grid,
        qc: &[i64; 3],
        shell: i64,
        query: usize,
        q: &Point3,
        cand: &mut Vec<(usize, f64)>,
    ) {
        for dx in -shell..=shell {
            let ix = qc[0] + dx;
            if ix < 0 || ix >= grid.dims[0] as i64 {
                continue;
            }
            for dy in -shell..=shell {
                let iy = qc[1] + dy;
                if iy < 0 || iy >= grid.dims[1] as i64 {
                    continue;
                }
                for dz in -shell..=shell {
                    if dx.abs().max(dy.abs()).max(dz.abs()) != shell {
                        continue;
                    }
                    let iz = qc[2] + dz;
                    if iz < 0 || iz >= grid.dims[2] as i64 {
                        continue;
                    }
                    let cell = ((ix as usize) * grid.dims[1] + iy as usize) * grid.dims[2]
                        + iz as usize;
                    for &pi in &grid.cells[cell] {
                        let pi = pi as usize;
                        if pi != query {
                            cand.push((pi, dist2(q, &self.points[pi])));
                        }
                    }
                }
            }
        }
    }
}
