//! Chebyshev spectral collocation on [-1, 1]: Gauss-Lobatto grid,
//! first- and second-derivative differentiation matrices, boundary
//! restriction, and barycentric interpolation off the grid.
//!
//! Using the extrema grid `x_j = cos(pi j / N)` (descending from `+1` to
//! `-1`, `N + 1` points) an interpolant through nodal values differentiates
//! exactly for polynomials up to degree `N`, which makes low-dimensional
//! grids spectrally accurate for smooth fields.

use nalgebra::{DMatrix, DVector};

use crate::error::{QfeError, Result};

/// The Chebyshev-Gauss-Lobatto grid of `degree + 1` points.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationGrid {
    degree: usize,
    points: Vec<f64>,
}

impl CollocationGrid {
    /// Builds the extrema grid `x_j = cos(pi j / N)` for `N = degree >= 1`.
    pub fn new(degree: usize) -> Result<Self> {
        if degree < 1 {
            return Err(QfeError::TooSmall {
                what: "collocation degree",
                min: 1,
                got: degree,
            });
        }
        let points = (0..=degree)
            .map(|j| (std::f64::consts::PI * j as f64 / degree as f64).cos())
            .collect();
        Ok(Self { degree, points })
    }

    /// Polynomial degree `N` (one less than the point count).
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Grid points, descending from `+1` to `-1`.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of points, `N + 1`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Grids always hold at least two points.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Interior points (boundaries dropped), still descending.
    pub fn interior(&self) -> &[f64] {
        &self.points[1..self.degree]
    }

    /// Endpoint weight `c_j`: 2 at the boundaries, 1 inside.
    fn c_bar(&self, j: usize) -> f64 {
        if j == 0 || j == self.degree {
            2.0
        } else {
            1.0
        }
    }
}

/// First-derivative collocation matrix: `(D1 u)_j ~ u'(x_j)` for nodal
/// values `u`, exact for polynomials of degree at most `N`.
pub fn build_d1(grid: &CollocationGrid) -> DMatrix<f64> {
    let n = grid.degree();
    let x = grid.points();
    let size = n + 1;
    let mut d = DMatrix::zeros(size, size);
    for j in 0..size {
        for l in 0..size {
            if j == l {
                continue;
            }
            let sign = if (j + l) % 2 == 0 { 1.0 } else { -1.0 };
            d[(j, l)] = (grid.c_bar(j) / grid.c_bar(l)) * sign / (x[j] - x[l]);
        }
    }
    // Diagonals by the negative-sum trick: each row annihilates constants,
    // which is both the analytic value and the numerically stable choice.
    for j in 0..size {
        let sum: f64 = (0..size).filter(|&l| l != j).map(|l| d[(j, l)]).sum();
        d[(j, j)] = -sum;
    }
    d
}

/// Second-derivative collocation matrix from its closed-form entries
/// (boundary rows, interior rows, and corner values are distinct cases).
pub fn build_d2(grid: &CollocationGrid) -> DMatrix<f64> {
    let n = grid.degree();
    let nf = n as f64;
    let x = grid.points();
    let size = n + 1;
    let mut d = DMatrix::zeros(size, size);
    let corner = (nf.powi(4) - 1.0) / 15.0;
    for j in 0..size {
        for l in 0..size {
            let sign_l = if l % 2 == 0 { 1.0 } else { -1.0 };
            d[(j, l)] = if j == 0 {
                if l == 0 {
                    corner
                } else {
                    let num = (2.0 * nf * nf + 1.0) * (1.0 - x[l]) - 6.0;
                    (2.0 / 3.0) * (sign_l / grid.c_bar(l)) * num / (1.0 - x[l]).powi(2)
                }
            } else if j == n {
                if l == n {
                    corner
                } else {
                    let sign = if (l + n) % 2 == 0 { 1.0 } else { -1.0 };
                    let num = (2.0 * nf * nf + 1.0) * (1.0 + x[l]) - 6.0;
                    (2.0 / 3.0) * (sign / grid.c_bar(l)) * num / (1.0 + x[l]).powi(2)
                }
            } else if j == l {
                let one_minus = 1.0 - x[j] * x[j];
                -((nf * nf - 1.0) * one_minus + 3.0) / (3.0 * one_minus * one_minus)
            } else {
                let sign = if (j + l) % 2 == 0 { 1.0 } else { -1.0 };
                let num = x[j] * x[j] + x[j] * x[l] - 2.0;
                (sign / grid.c_bar(l)) * num / ((1.0 - x[j] * x[j]) * (x[j] - x[l]).powi(2))
            };
        }
    }
    d
}

/// Drops the first and last row and column of a collocation operator,
/// imposing homogeneous Dirichlet data at both boundaries.
pub fn interior_restrict(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let rows = matrix.nrows();
    if matrix.ncols() != rows {
        return Err(QfeError::NotSquare {
            rows,
            cols: matrix.ncols(),
        });
    }
    if rows < 3 {
        return Err(QfeError::TooSmall {
            what: "collocation operator size",
            min: 3,
            got: rows,
        });
    }
    Ok(matrix.view((1, 1), (rows - 2, rows - 2)).into_owned())
}

/// Evaluates the grid interpolant of nodal values at `x` by the barycentric
/// formula (exact at the nodes, stable between them).
pub fn interpolate(grid: &CollocationGrid, values: &[f64], x: f64) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(QfeError::QubitCountMismatch {
            left: values.len(),
            right: grid.len(),
        });
    }
    let points = grid.points();
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for (j, (&xj, &vj)) in points.iter().zip(values).enumerate() {
        let diff = x - xj;
        if diff.abs() < 1e-300 {
            return Ok(vj);
        }
        // Barycentric weights for the extrema grid: (-1)^j, halved at the ends.
        let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == 0 || j == grid.degree() {
            w *= 0.5;
        }
        let ratio = w / diff;
        numerator += ratio * vj;
        denominator += ratio;
    }
    Ok(numerator / denominator)
}

/// Samples a scalar field on the full grid.
pub fn sample_on_grid(grid: &CollocationGrid, f: impl Fn(f64) -> f64) -> DVector<f64> {
    DVector::from_iterator(grid.len(), grid.points().iter().map(|&x| f(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_runs_from_plus_to_minus_one() {
        let grid = CollocationGrid::new(4).unwrap();
        let p = grid.points();
        assert_eq!(p.len(), 5);
        assert_abs_diff_eq!(p[0], 1.0);
        assert_abs_diff_eq!(p[4], -1.0);
        assert_abs_diff_eq!(p[2], 0.0);
        assert!(p.windows(2).all(|w| w[0] > w[1]));
        assert_eq!(grid.interior().len(), 3);
    }

    #[test]
    fn degree_zero_is_rejected() {
        assert!(matches!(
            CollocationGrid::new(0),
            Err(QfeError::TooSmall { .. })
        ));
    }

    #[test]
    fn d1_differentiates_polynomials_exactly() {
        // Interpolation is exact for degree <= N, so D1 applied to nodal
        // samples of x^p must give the exact derivative at every node.
        let grid = CollocationGrid::new(9).unwrap();
        let d1 = build_d1(&grid);
        for p in 0..=9usize {
            let values = DVector::from_iterator(
                grid.len(),
                grid.points().iter().map(|&x| x.powi(p as i32)),
            );
            let derived = &d1 * &values;
            for (j, &x) in grid.points().iter().enumerate() {
                let exact = if p == 0 {
                    0.0
                } else {
                    p as f64 * x.powi(p as i32 - 1)
                };
                assert_abs_diff_eq!(derived[j], exact, epsilon = 1e-9 * (1.0 + exact.abs()));
            }
        }
    }

    #[test]
    fn d1_corner_matches_closed_form() {
        // The negative-sum diagonal must reproduce (2N^2 + 1) / 6 at the
        // first corner and its negative at the last.
        for n in [4usize, 9, 16] {
            let grid = CollocationGrid::new(n).unwrap();
            let d1 = build_d1(&grid);
            let corner = (2.0 * (n * n) as f64 + 1.0) / 6.0;
            assert_abs_diff_eq!(d1[(0, 0)], corner, epsilon = 1e-9 * corner);
            assert_abs_diff_eq!(d1[(n, n)], -corner, epsilon = 1e-9 * corner);
        }
    }

    #[test]
    fn d2_equals_d1_squared() {
        // The closed-form second-derivative entries must agree with the
        // square of the first-derivative operator.
        for n in [4usize, 9, 12] {
            let grid = CollocationGrid::new(n).unwrap();
            let d1 = build_d1(&grid);
            let d2 = build_d2(&grid);
            let diff = (&d1 * &d1 - &d2).abs().max();
            let scale = d2.abs().max();
            assert!(
                diff <= 1e-8 * scale,
                "N = {n}: |D1^2 - D2| = {diff} vs scale {scale}"
            );
        }
    }

    #[test]
    fn d2_corners_are_closed_form() {
        let grid = CollocationGrid::new(9).unwrap();
        let d2 = build_d2(&grid);
        let corner = (9f64.powi(4) - 1.0) / 15.0;
        assert_abs_diff_eq!(d2[(0, 0)], corner);
        assert_abs_diff_eq!(d2[(9, 9)], corner);
    }

    #[test]
    fn d2_differentiates_smooth_functions_spectrally() {
        let grid = CollocationGrid::new(16).unwrap();
        let d2 = build_d2(&grid);
        let pi = std::f64::consts::PI;
        let values = sample_on_grid(&grid, |x| (pi * x).sin());
        let second = &d2 * &values;
        for (j, &x) in grid.points().iter().enumerate() {
            let exact = -pi * pi * (pi * x).sin();
            assert_abs_diff_eq!(second[j], exact, epsilon = 1e-6);
        }
    }

    #[test]
    fn interior_restrict_drops_boundary_rows_and_columns() {
        let grid = CollocationGrid::new(9).unwrap();
        let d2 = build_d2(&grid);
        let restricted = interior_restrict(&d2).unwrap();
        assert_eq!(restricted.nrows(), 8);
        assert_eq!(restricted.ncols(), 8);
        assert_abs_diff_eq!(restricted[(0, 0)], d2[(1, 1)]);
        assert_abs_diff_eq!(restricted[(7, 7)], d2[(8, 8)]);

        let tiny = DMatrix::<f64>::zeros(2, 2);
        assert!(matches!(
            interior_restrict(&tiny),
            Err(QfeError::TooSmall { .. })
        ));
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_for_polynomials() {
        let grid = CollocationGrid::new(8).unwrap();
        let values: Vec<f64> = grid
            .points()
            .iter()
            .map(|&x| 3.0 * x * x * x - x + 0.5)
            .collect();
        for (j, &xj) in grid.points().iter().enumerate() {
            assert_abs_diff_eq!(
                interpolate(&grid, &values, xj).unwrap(),
                values[j]
            );
        }
        for &x in &[-0.9123, -0.3, 0.111, 0.77] {
            let exact = 3.0 * x * x * x - x + 0.5;
            assert_abs_diff_eq!(interpolate(&grid, &values, x).unwrap(), exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn interpolation_of_constants_is_flat_everywhere() {
        let grid = CollocationGrid::new(11).unwrap();
        let values = vec![2.5; grid.len()];
        for &x in &[-1.0, -0.5, 0.0, 0.25, 0.99] {
            assert_abs_diff_eq!(interpolate(&grid, &values, x).unwrap(), 2.5, epsilon = 1e-13);
        }
    }

    #[test]
    fn interpolation_converges_spectrally_for_sine() {
        let pi = std::f64::consts::PI;
        let mut previous = f64::INFINITY;
        for n in [4usize, 8, 16] {
            let grid = CollocationGrid::new(n).unwrap();
            let values: Vec<f64> = grid.points().iter().map(|&x| (pi * x).sin()).collect();
            let mut worst = 0.0f64;
            for k in 0..200 {
                let x = -1.0 + 2.0 * (k as f64 + 0.5) / 200.0;
                let err = (interpolate(&grid, &values, x).unwrap() - (pi * x).sin()).abs();
                worst = worst.max(err);
            }
            assert!(worst < previous / 10.0, "N = {n}: error {worst}");
            previous = worst;
        }
        assert!(previous < 1e-10);
    }
}
