use crate::linalg::C64;

/// First-difference operator on a square grid.
///
/// Row `r` computes `x[plus] − x[minus]` for one pair of horizontal or
/// vertical neighbors. Stored as index pairs; never materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceOperator {
    pub pairs: Vec<(usize, usize)>,
    pub num_cells: usize,
}

/// All horizontal pairs (row by row), then all vertical pairs:
/// `2 n_side (n_side − 1)` rows.
pub fn difference_operator(grid_side: usize) -> DifferenceOperator {
    let mut pairs = Vec::with_capacity(2 * grid_side * grid_side.saturating_sub(1));
    for row in 0..grid_side {
        for col in 0..grid_side.saturating_sub(1) {
            let k = row * grid_side + col;
            pairs.push((k + 1, k));
        }
    }
    for row in 0..grid_side.saturating_sub(1) {
        for col in 0..grid_side {
            let k = row * grid_side + col;
            pairs.push((k + grid_side, k));
        }
    }
    DifferenceOperator { pairs, num_cells: grid_side * grid_side }
}

impl DifferenceOperator {
    /// Operator with no rows: the penalty vanishes identically.
    pub fn empty(num_cells: usize) -> Self {
        Self { pairs: Vec::new(), num_cells }
    }

    pub fn num_rows(&self) -> usize {
        self.pairs.len()
    }

    /// `D x`
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.pairs.iter().map(|&(p, m)| x[p] - x[m]).collect()
    }

    /// `Dᵀ r`
    pub fn apply_transpose(&self, r: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.num_cells];
        for (&(p, m), v) in self.pairs.iter().zip(r) {
            out[p] += v;
            out[m] -= v;
        }
        out
    }

    /// `DᵀD x`
    pub fn normal_apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.num_cells];
        for &(p, m) in &self.pairs {
            let d = x[p] - x[m];
            out[p] += d;
            out[m] -= d;
        }
        out
    }

    /// `‖D x‖²`
    pub fn penalty(&self, x: &[C64]) -> f64 {
        self.pairs.iter().map(|&(p, m)| (x[p] - x[m]).norm_sqr()).sum()
    }

    /// `diag(DᵀD)`: the number of neighbors of each cell.
    pub fn normal_diagonal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_cells];
        for &(p, m) in &self.pairs {
            out[p] += 1.0;
            out[m] += 1.0;
        }
        out
    }
}
