//! Uniform bucket grid over a square, optionally periodic.

pub(crate) struct BucketGrid {
    lo: f64,
    side: f64,
    cell: f64,
    n: usize,
    periodic: bool,
    cells: Vec<Vec<usize>>,
}

impl BucketGrid {
    /// Grid over `[lo, lo + side)²` with cells of about `target_cell`.
    pub fn new(lo: f64, side: f64, target_cell: f64, periodic: bool) -> Self {
        let n = ((side / target_cell).floor() as usize).clamp(1, 512);
        Self { lo, side, cell: side / n as f64, n, periodic, cells: vec![Vec::new(); n * n] }
    }

    fn cell_of(&self, x: f64) -> usize {
        (((x - self.lo) / self.cell).floor().max(0.0) as usize).min(self.n - 1)
    }

    pub fn insert(&mut self, id: usize, p: [f64; 2]) {
        let (cx, cy) = (self.cell_of(p[0]), self.cell_of(p[1]));
        self.cells[cy * self.n + cx].push(id);
    }

    pub fn dist2(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let mut s = 0.0;
        for k in 0..2 {
            let mut d = (a[k] - b[k]).abs();
            if self.periodic && d > self.side / 2.0 {
                d = self.side - d;
            }
            s += d * d;
        }
        s
    }

    /// Calls `visit` with every id in cells at Chebyshev ring `ring` around
    /// the cell of `p`. Returns false once the ring covers the whole grid.
    fn visit_ring(&self, p: [f64; 2], ring: usize, mut visit: impl FnMut(usize)) -> bool {
        let (cx, cy) = (self.cell_of(p[0]) as isize, self.cell_of(p[1]) as isize);
        let r = ring as isize;
        let n = self.n as isize;
        if self.periodic && 2 * r + 1 > n {
            return false;
        }
        for dy in -r..=r {
            for dx in -r..=r {
                if dx.abs() != r && dy.abs() != r {
                    continue;
                }
                let (mut x, mut y) = (cx + dx, cy + dy);
                if self.periodic {
                    x = x.rem_euclid(n);
                    y = y.rem_euclid(n);
                } else if x < 0 || y < 0 || x >= n || y >= n {
                    continue;
                }
                for &id in &self.cells[(y * n + x) as usize] {
                    visit(id);
                }
            }
        }
        self.periodic || r < n
    }

    /// Nearest stored point to `p`, by exact squared distance with ties
    /// broken toward the smaller id.
    pub fn nearest(&self, p: [f64; 2], coords: &[[f64; 2]]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let consider = |id: usize, best: &mut Option<(usize, f64)>| {
            let d = self.dist2(p, coords[id]);
            if best.map_or(true, |(bi, bd)| d < bd || (d == bd && id < bi)) {
                *best = Some((id, d));
            }
        };
        let mut ring = 0;
        loop {
            let more = self.visit_ring(p, ring, |id| consider(id, &mut best));
            if !more {
                if self.periodic {
                    // rings would start to overlap; finish with a full scan
                    self.cells.iter().flatten().for_each(|&id| consider(id, &mut best));
                }
                break;
            }
            if let Some((_, bd)) = best {
                // anything beyond this ring is at least `ring · cell` away
                let reach = ring as f64 * self.cell;
                if reach * reach > bd {
                    break;
                }
            }
            ring += 1;
        }
        best
    }

    /// Whether any stored point lies strictly within distance `r` of `p`.
    pub fn any_within(&self, p: [f64; 2], r: f64, coords: &[[f64; 2]]) -> bool {
        let rings = (r / self.cell).ceil() as usize;
        let mut hit = false;
        for ring in 0..=rings {
            let more = self.visit_ring(p, ring, |id| hit |= self.dist2(p, coords[id]) < r * r);
            if hit || !more {
                break;
            }
        }
        hit
    }
}
