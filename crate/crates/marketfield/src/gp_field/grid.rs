//! Test-point layouts for evaluating the field posterior.
//!
//! Low dimensions get an axis-aligned mesh over the padded data bounding
//! box; above three dimensions a full mesh is infeasible and a Halton
//! sequence fills the box instead.

use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct GridSettings {
    /// Fractional padding added to each side of the data bounding box.
    pub padding: f64,
    /// Mesh resolution per axis for one and two dimensions.
    pub per_axis_low_dim: usize,
    /// Mesh resolution per axis for three dimensions.
    pub per_axis_3d: usize,
    /// Point count of the Halton fill used above three dimensions.
    pub halton_points: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self { padding: 0.1, per_axis_low_dim: 25, per_axis_3d: 12, halton_points: 4096 }
    }
}

/// Padded bounding box of the state rows, one (lo, hi) per column. A
/// degenerate axis is widened around its single value so the box always has
/// positive volume.
pub fn padded_bbox(states: &DMatrix<f64>, padding: f64) -> Vec<(f64, f64)> {
    (0..states.ncols())
        .map(|j| {
            let col = states.column(j);
            let mn = col.min();
            let mx = col.max();
            let range = mx - mn;
            let h = if range > 0.0 {
                padding * range
            } else {
                padding.max(1e-6) * mn.abs().max(1.0)
            };
            (mn - h, mx + h)
        })
        .collect()
}

/// Builds the test grid for a model trained on `states`.
pub fn test_grid(states: &DMatrix<f64>, settings: &GridSettings) -> DMatrix<f64> {
    let m = states.ncols();
    assert!(m > 0, "states must have at least one column");
    let bbox = padded_bbox(states, settings.padding);
    if m <= 3 {
        let per = if m <= 2 { settings.per_axis_low_dim } else { settings.per_axis_3d };
        mesh(&bbox, per)
    } else {
        halton_fill(&bbox, settings.halton_points)
    }
}

fn mesh(bbox: &[(f64, f64)], per: usize) -> DMatrix<f64> {
    let m = bbox.len();
    let rows = per.pow(m as u32);
    let mut out = DMatrix::zeros(rows, m);
    for r in 0..rows {
        // Row-major: the last axis varies fastest.
        let mut rem = r;
        for j in (0..m).rev() {
            let idx = rem % per;
            rem /= per;
            let (lo, hi) = bbox[j];
            let t = if per > 1 { idx as f64 / (per - 1) as f64 } else { 0.5 };
            out[(r, j)] = lo + t * (hi - lo);
        }
    }
    out
}

fn halton_fill(bbox: &[(f64, f64)], points: usize) -> DMatrix<f64> {
    let m = bbox.len();
    let bases = first_primes(m);
    let mut out = DMatrix::zeros(points, m);
    for r in 0..points {
        for j in 0..m {
            let u = radical_inverse(r + 1, bases[j]);
            let (lo, hi) = bbox[j];
            out[(r, j)] = lo + u * (hi - lo);
        }
    }
    out
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let b = base as f64;
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn first_primes(count: usize) -> Vec<usize> {
    let mut primes = Vec::with_capacity(count);
    let mut n = 2usize;
    while primes.len() < count {
        if primes.iter().all(|&p| n % p != 0) {
            primes.push(n);
        }
        n += 1;
    }
    primes
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cloud(rows: &[f64], m: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows.len() / m, m, rows)
    }

    #[test]
    fn two_dim_mesh_spans_padded_box() {
        let states = cloud(&[0.0, 2.0, 1.0, 4.0, 0.5, 3.0], 2);
        let grid = test_grid(&states, &GridSettings::default());
        assert_eq!(grid.nrows(), 625);
        assert_relative_eq!(grid.column(0).min(), -0.1, epsilon = 1e-12);
        assert_relative_eq!(grid.column(0).max(), 1.1, epsilon = 1e-12);
        assert_relative_eq!(grid.column(1).min(), 1.8, epsilon = 1e-12);
        assert_relative_eq!(grid.column(1).max(), 4.2, epsilon = 1e-12);
    }

    #[test]
    fn three_dim_mesh_has_reduced_resolution() {
        let states = DMatrix::from_fn(5, 3, |i, j| (i * 3 + j) as f64);
        let grid = test_grid(&states, &GridSettings::default());
        assert_eq!(grid.nrows(), 12 * 12 * 12);
    }

    #[test]
    fn mesh_orders_last_axis_fastest() {
        let states = cloud(&[0.0, 0.0, 1.0, 1.0], 2);
        let s = GridSettings { padding: 0.0, per_axis_low_dim: 2, ..GridSettings::default() };
        let grid = test_grid(&states, &s);
        let rows: Vec<(f64, f64)> = (0..4).map(|r| (grid[(r, 0)], grid[(r, 1)])).collect();
        assert_eq!(rows, vec![(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn high_dim_uses_halton_fill() {
        let states = DMatrix::from_fn(7, 4, |i, j| (i + j) as f64 * 0.1);
        let grid = test_grid(&states, &GridSettings::default());
        assert_eq!(grid.nrows(), 4096);
        assert_eq!(grid.ncols(), 4);
        let bbox = padded_bbox(&states, 0.1);
        for r in 0..grid.nrows() {
            for j in 0..4 {
                assert!(grid[(r, j)] >= bbox[j].0 - 1e-12);
                assert!(grid[(r, j)] <= bbox[j].1 + 1e-12);
            }
        }
    }

    #[test]
    fn radical_inverse_base_two_and_three() {
        assert_relative_eq!(radical_inverse(1, 2), 0.5);
        assert_relative_eq!(radical_inverse(2, 2), 0.25);
        assert_relative_eq!(radical_inverse(3, 2), 0.75);
        assert_relative_eq!(radical_inverse(1, 3), 1.0 / 3.0);
        assert_relative_eq!(radical_inverse(2, 3), 2.0 / 3.0);
        assert_relative_eq!(radical_inverse(4, 3), 1.0 / 9.0 + 1.0 / 3.0);
    }

    #[test]
    fn degenerate_axis_still_gets_positive_width() {
        let states = cloud(&[5.0, 1.0, 5.0, 2.0, 5.0, 3.0], 2);
        let bbox = padded_bbox(&states, 0.1);
        assert!(bbox[0].1 > bbox[0].0);
        assert_relative_eq!(bbox[0].0, 4.5, epsilon = 1e-12);
        assert_relative_eq!(bbox[0].1, 5.5, epsilon = 1e-12);
    }

    #[test]
    fn first_primes_are_correct() {
        assert_eq!(first_primes(6), vec![2, 3, 5, 7, 11, 13]);
    }
}
