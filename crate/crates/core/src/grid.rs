//! Uniform node-centered mesh on `(0, L)` and finite-difference operators.
//!
//! Boundary conditions `v_x = v_xxx = 0` are realized by even reflection about
//! the end nodes (`v[-k] = v[k]`, `v[n-1+k] = v[n-1-k]`). Boundary nodes own
//! half cells, so the conserved quantity is the trapezoid integral.

use thiserror::Error;

pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs at least {MIN_NODES} nodes (got {0})")]
    TooFewNodes(usize),
    #[error("domain length must be positive and finite (got {0})")]
    BadLength(f64),
    #[error("array has {got} entries, grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub length: f64,
    pub n: usize,
    pub dx: f64,
}

impl Grid {
    pub fn new(length: f64, n: usize) -> Result<Self, GridError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(GridError::BadLength(length));
        }
        if n < MIN_NODES {
            return Err(GridError::TooFewNodes(n));
        }
        Ok(Self {
            length,
            n,
            dx: length / (n - 1) as f64,
        })
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    /// Trapezoid integral of nodal values.
    pub fn integrate(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.n);
        let interior: f64 = v[1..self.n - 1].iter().sum();
        self.dx * (interior + 0.5 * (v[0] + v[self.n - 1]))
    }

    /// Maps a possibly out-of-range node index onto the mesh by reflection.
    #[inline]
    pub fn reflect(&self, i: isize) -> usize {
        let last = self.n as isize - 1;
        let j = if i < 0 {
            -i
        } else if i > last {
            2 * last - i
        } else {
            i
        };
        debug_assert!((0..=last).contains(&j), "index {i} reflects outside the mesh");
        j as usize
    }

    pub fn check_len(&self, v: &[f64]) -> Result<(), GridError> {
        if v.len() != self.n {
            return Err(GridError::LengthMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(())
    }
}

/// Film heights on the mesh at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl State {
    pub fn new(t: f64, f: Vec<f64>, g: Vec<f64>) -> Self {
        assert_eq!(f.len(), g.len(), "f and g must share the mesh");
        Self { t, f, g }
    }

    pub fn flat(grid: &Grid, f_star: f64, g_star: f64) -> Self {
        Self::new(0.0, vec![f_star; grid.n], vec![g_star; grid.n])
    }

    /// Samples `f0(x)` and `g0(x)` at the nodes.
    pub fn from_fn<F, G>(grid: &Grid, f0: F, g0: G) -> Self
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        let xs = grid.nodes();
        Self::new(0.0, xs.iter().map(|&x| f0(x)).collect(), xs.iter().map(|&x| g0(x)).collect())
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.f.iter().chain(&self.g).all(|v| v.is_finite())
    }

    pub fn min_f(&self) -> f64 {
        self.f.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_g(&self) -> f64 {
        self.g.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `f + g`, the height of the free surface.
    pub fn surface(&self) -> Vec<f64> {
        self.f.iter().zip(&self.g).map(|(a, b)| a + b).collect()
    }
}

/// Returns `v` with two even-reflected ghost nodes on each side.
pub fn ghost_extend(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    assert!(n >= 4, "ghost extension needs at least 4 nodes");
    let mut out = Vec::with_capacity(n + 4);
    out.push(v[2]);
    out.push(v[1]);
    out.extend_from_slice(v);
    out.push(v[n - 2]);
    out.push(v[n - 3]);
    out
}

/// Neighbour differences of a five-node window. Stencils are written in
/// terms of these so that constants map to exact zeros.
#[inline]
fn diffs(w: &[f64]) -> [f64; 4] {
    [w[1] - w[0], w[2] - w[1], w[3] - w[2], w[4] - w[3]]
}

/// Central first derivative at the nodes.
pub fn d1(v: &[f64], grid: &Grid) -> Vec<f64> {
    let e = ghost_extend(v);
    let s = 0.5 / grid.dx;
    (0..v.len()).map(|i| (e[i + 3] - e[i + 1]) * s).collect()
}

/// Central second derivative at the nodes.
pub fn d2(v: &[f64], grid: &Grid) -> Vec<f64> {
    let e = ghost_extend(v);
    let s = 1.0 / (grid.dx * grid.dx);
    (0..v.len()).map(|i| ((e[i + 3] - e[i + 2]) - (e[i + 2] - e[i + 1])) * s).collect()
}

/// Central third derivative at the nodes (five-point stencil).
pub fn d3(v: &[f64], grid: &Grid) -> Vec<f64> {
    let e = ghost_extend(v);
    let s = 0.5 / grid.dx.powi(3);
    (0..v.len())
        .map(|i| {
            let d = diffs(&e[i..i + 5]);
            ((d[3] - d[2]) - (d[1] - d[0])) * s
        })
        .collect()
}

/// Central fourth derivative at the nodes.
pub fn d4(v: &[f64], grid: &Grid) -> Vec<f64> {
    let e = ghost_extend(v);
    let s = 1.0 / grid.dx.powi(4);
    (0..v.len())
        .map(|i| {
            let d = diffs(&e[i..i + 5]);
            ((d[3] - d[0]) - 3.0 * (d[2] - d[1])) * s
        })
        .collect()
}

/// Third derivative at the `n - 1` faces `i + 1/2`, by differencing nodal
/// second derivatives.
pub fn d3_faces(v: &[f64], grid: &Grid) -> Vec<f64> {
    let second = d2(v, grid);
    second.windows(2).map(|w| (w[1] - w[0]) / grid.dx).collect()
}

/// Nodal rates `-(J_{i+1/2} - J_{i-1/2}) / dx` from face fluxes.
///
/// The flux through the domain ends is zero; the end nodes own half cells,
/// which makes `sum_i w_i rate_i` telescope to zero.
pub fn divergence_of_flux(faces: &[f64], grid: &Grid) -> Vec<f64> {
    let n = grid.n;
    assert_eq!(faces.len(), n - 1, "expected one flux per face");
    let inv = 1.0 / grid.dx;
    let mut rate = Vec::with_capacity(n);
    rate.push(-2.0 * faces[0] * inv);
    for i in 1..n - 1 {
        rate.push(-(faces[i] - faces[i - 1]) * inv);
    }
    rate.push(2.0 * faces[n - 2] * inv);
    rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn grid_construction() {
        let grid = Grid::new(2.0, 9).unwrap();
        assert_relative_eq!(grid.dx * 8.0, 2.0);
        assert!(Grid::new(1.0, 7).is_err());
        assert!(Grid::new(0.0, 16).is_err());
        assert!(Grid::new(f64::NAN, 16).is_err());
        let w: f64 = (0..grid.n).map(|i| grid.weight(i)).sum();
        assert_relative_eq!(w, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn ghost_extension() {
        assert_eq!(ghost_extend(&[3.0; 5]), vec![3.0; 9]);
        let e = ghost_extend(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e, vec![2.0, 1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 3.0, 2.0]);

        let grid = Grid::new(1.0, 17).unwrap();
        let v: Vec<f64> = grid.nodes().iter().map(|&x| (PI * x).cos()).collect();
        let e = ghost_extend(&v);
        for (k, &val) in e.iter().enumerate() {
            let x = (k as f64 - 2.0) * grid.dx;
            assert_relative_eq!(val, (PI * x).cos(), epsilon = 1e-14);
        }
    }

    #[test]
    fn reflect_indices() {
        let grid = Grid::new(1.0, 10).unwrap();
        assert_eq!(grid.reflect(-2), 2);
        assert_eq!(grid.reflect(-1), 1);
        assert_eq!(grid.reflect(4), 4);
        assert_eq!(grid.reflect(10), 8);
        assert_eq!(grid.reflect(11), 7);
    }

    #[test]
    fn linear_profile_derivatives() {
        let grid = Grid::new(1.0, 16).unwrap();
        let v: Vec<f64> = grid.nodes().iter().map(|&x| 2.0 + 3.0 * x).collect();
        let first = d1(&v, &grid);
        let second = d2(&v, &grid);
        let third = d3(&v, &grid);
        // Reflection bends the line at the boundary, so only nodes whose
        // stencils stay inside the mesh see the exact line.
        for i in 1..grid.n - 1 {
            assert_relative_eq!(first[i], 3.0, max_relative = 1e-12);
            assert!(second[i].abs() < 1e-9);
        }
        for i in 2..grid.n - 2 {
            assert!(third[i].abs() < 1e-6);
        }
    }

    #[test]
    fn boundary_first_derivative_vanishes() {
        let grid = Grid::new(1.0, 12).unwrap();
        let v: Vec<f64> = (0..grid.n).map(|i| (i as f64 * 0.37).sin() + i as f64).collect();
        let first = d1(&v, &grid);
        let third = d3(&v, &grid);
        assert_eq!(first[0], 0.0);
        assert_eq!(first[grid.n - 1], 0.0);
        assert_eq!(third[0], 0.0);
        assert_eq!(third[grid.n - 1], 0.0);
    }

    fn max_error_d2(n: usize, k: f64) -> f64 {
        let grid = Grid::new(1.0, n).unwrap();
        let xs = grid.nodes();
        let v: Vec<f64> = xs.iter().map(|&x| (k * PI * x).cos()).collect();
        let second = d2(&v, &grid);
        xs.iter()
            .zip(&second)
            .map(|(&x, &d)| (d + (k * PI).powi(2) * (k * PI * x).cos()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn second_derivative_converges_at_second_order() {
        for k in [1.0, 2.0, 3.0] {
            let e1 = max_error_d2(33, k);
            let e2 = max_error_d2(65, k);
            let e3 = max_error_d2(129, k);
            for ratio in [e1 / e2, e2 / e3] {
                assert!((3.6..4.4).contains(&ratio), "k = {k}: ratio {ratio}");
            }
        }
    }

    #[test]
    fn divergence_conserves_trapezoid_mass() {
        let grid = Grid::new(1.0, 11).unwrap();
        assert!(divergence_of_flux(&vec![0.0; 10], &grid).iter().all(|&r| r == 0.0));
        let faces: Vec<f64> = (0..10).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
        let rate = divergence_of_flux(&faces, &grid);
        let total: f64 = grid.integrate(&rate);
        assert!(total.abs() < 1e-14, "{total}");

        let mut single = vec![0.0; 10];
        single[4] = 1.5;
        let rate = divergence_of_flux(&single, &grid);
        assert_eq!(rate[4], -rate[5]);
        assert!(rate[4] < 0.0);
        assert_eq!(rate.iter().filter(|r| **r != 0.0).count(), 2);
    }

    #[test]
    fn face_third_derivative_of_cubic() {
        let grid = Grid::new(1.0, 20).unwrap();
        let v: Vec<f64> = grid.nodes().iter().map(|&x| x.powi(3)).collect();
        let faces = d3_faces(&v, &grid);
        for value in &faces[1..faces.len() - 1] {
            assert_relative_eq!(*value, 6.0, max_relative = 1e-8);
        }
    }
}
