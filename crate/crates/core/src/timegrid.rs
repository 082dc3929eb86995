//! Time grids: Chebyshev–Gauss–Lobatto nodes with spectral differentiation, and the
//! refined evolution mesh that contains every node.

use crate::error::{Error, Result};
use crate::psdo::dense::CMat;
use crate::C64;

/// `n` Chebyshev–Gauss–Lobatto nodes on `[a, b]`, ascending, endpoints included exactly.
pub fn cgl_nodes(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Dimension(format!("need at least 2 time nodes, got {n}")));
    }
    if !(a < b) {
        return Err(Error::Dimension(format!("time interval [{a}, {b}] is empty")));
    }
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let last = n - 1;
    Ok((0..n)
        .map(|j| match j {
            0 => a,
            j if j == last => b,
            // Symmetric formula so mirrored nodes are exact negatives on symmetric intervals.
            j => {
                let s = (std::f64::consts::PI * (2 * j as isize - last as isize) as f64 / (2 * last) as f64).sin();
                if 2 * j == last {
                    mid
                } else {
                    mid + half * s
                }
            }
        })
        .collect())
}

/// Spectral differentiation matrix on arbitrary distinct nodes via barycentric weights.
///
/// On CGL nodes the weights are `(−1)^j δ_j` with `δ = ½` at the ends, which is what
/// [`TimeGrid::chebyshev`] passes; general nodes fall back to the product formula.
pub fn differentiation_matrix(nodes: &[f64]) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let w: Vec<f64> = (0..n)
        .map(|j| 1.0 / (0..n).filter(|&k| k != j).map(|k| nodes[j] - nodes[k]).product::<f64>())
        .collect();
    barycentric_diff(nodes, &w)
}

fn barycentric_diff(nodes: &[f64], w: &[f64]) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                d[i][j] = (w[j] / w[i]) / (nodes[i] - nodes[j]);
                diag -= d[i][j];
            }
        }
        d[i][i] = diag;
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub nodes: Vec<f64>,
    diff: Vec<Vec<f64>>,
}

impl TimeGrid {
    pub fn chebyshev(a: f64, b: f64, n: usize) -> Result<Self> {
        let nodes = cgl_nodes(a, b, n)?;
        let w: Vec<f64> = (0..n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n - 1 {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        let diff = barycentric_diff(&nodes, &w);
        Ok(Self { nodes, diff })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn diff_matrix(&self) -> &[Vec<f64>] {
        &self.diff
    }

    /// Index of the node equal to `t` (within 1e−12), if any.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        self.nodes.iter().position(|&s| (s - t).abs() <= 1e-12 * (1.0 + t.abs()))
    }

    /// Reference slice: `t = 0` when it is a node, otherwise the first node.
    pub fn reference_index(&self) -> usize {
        self.node_index(0.0).unwrap_or(0)
    }

    pub fn differentiate(&self, f: &[f64]) -> Vec<f64> {
        self.diff.iter().map(|row| row.iter().zip(f).map(|(d, v)| d * v).sum()).collect()
    }

    /// Spectral time derivative of a matrix family sampled on the nodes.
    pub fn differentiate_family(&self, family: &[CMat]) -> Result<Vec<CMat>> {
        if family.len() != self.len() {
            return Err(Error::Dimension(format!("family has {} slices, grid has {} nodes", family.len(), self.len())));
        }
        let (r, c) = (family[0].nrows(), family[0].ncols());
        Ok(self
            .diff
            .iter()
            .map(|row| {
                let mut out = CMat::zeros(r, c);
                for (w, m) in row.iter().zip(family) {
                    if *w == 0.0 {
                        continue;
                    }
                    let w = C64::new(*w, 0.0);
                    for j in 0..c {
                        let dst = out.col_mut(j).try_as_col_major_mut().unwrap().as_slice_mut();
                        let src = m.col(j).try_as_col_major().unwrap().as_slice();
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += w * s;
                        }
                    }
                }
                out
            })
            .collect())
    }

    /// Evolution mesh: every node plus uniform substeps of length at most `max_step`.
    /// Returns the mesh and the mesh index of each node.
    pub fn refine(&self, max_step: f64) -> Result<(Vec<f64>, Vec<usize>)> {
        if !(max_step > 0.0) {
            return Err(Error::Dimension(format!("max step must be positive, got {max_step}")));
        }
        let mut mesh = vec![self.nodes[0]];
        let mut idx = vec![0];
        for w in self.nodes.windows(2) {
            let parts = ((w[1] - w[0]) / max_step).ceil().max(1.0) as usize;
            for p in 1..parts {
                mesh.push(w[0] + (w[1] - w[0]) * p as f64 / parts as f64);
            }
            mesh.push(w[1]);
            idx.push(mesh.len() - 1);
        }
        Ok((mesh, idx))
    }
}

/// Fourth-order finite-difference derivative on a uniform grid; one-sided stencils at the two
/// ends of each side keep fourth order up to the boundary.
pub fn fd4_derivative<T>(f: &[T], dt: f64) -> Vec<T>
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let n = f.len();
    assert!(n >= 5, "fourth-order stencil needs at least 5 points");
    let comb = |idx: [usize; 5], c: [f64; 5]| {
        let mut acc = f[idx[0]] * (c[0] / dt);
        for k in 1..5 {
            acc = acc + f[idx[k]] * (c[k] / dt);
        }
        acc
    };
    const FWD0: [f64; 5] = [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25];
    const FWD1: [f64; 5] = [-0.25, -5.0 / 6.0, 1.5, -0.5, 1.0 / 12.0];
    const CEN: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
    (0..n)
        .map(|i| match i {
            0 => comb([0, 1, 2, 3, 4], FWD0),
            1 => comb([0, 1, 2, 3, 4], FWD1),
            i if i == n - 1 => comb([n - 1, n - 2, n - 3, n - 4, n - 5], FWD0.map(|c| -c)),
            i if i == n - 2 => comb([n - 1, n - 2, n - 3, n - 4, n - 5], FWD1.map(|c| -c)),
            i => comb([i - 2, i - 1, i, i + 1, i + 2], CEN),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_symmetric_and_contain_zero() {
        let g = TimeGrid::chebyshev(-2.0, 2.0, 9).unwrap();
        assert_eq!(g.nodes[0], -2.0);
        assert_eq!(g.nodes[8], 2.0);
        assert_eq!(g.nodes[4], 0.0);
        for j in 0..9 {
            assert_eq!(g.nodes[j], -g.nodes[8 - j]);
        }
        assert_eq!(g.reference_index(), 4);
    }

    #[test]
    fn spectral_derivative_of_smooth_function() {
        let g = TimeGrid::chebyshev(-2.0, 2.0, 41).unwrap();
        let f: Vec<f64> = g.nodes.iter().map(|t| t.tanh()).collect();
        let d = g.differentiate(&f);
        for (t, v) in g.nodes.iter().zip(&d) {
            assert!((v - (1.0 - t.tanh().powi(2))).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn generic_weights_agree_with_cgl() {
        let g = TimeGrid::chebyshev(0.0, 1.0, 12).unwrap();
        let d = differentiation_matrix(&g.nodes);
        for i in 0..12 {
            for j in 0..12 {
                assert!((d[i][j] - g.diff_matrix()[i][j]).abs() < 1e-9 * (1.0 + d[i][j].abs()));
            }
        }
    }

    #[test]
    fn polynomial_exact() {
        let g = TimeGrid::chebyshev(-1.0, 3.0, 6).unwrap();
        let f: Vec<f64> = g.nodes.iter().map(|t| t.powi(5) - 2.0 * t).collect();
        let d = g.differentiate(&f);
        for (t, v) in g.nodes.iter().zip(&d) {
            assert!((v - (5.0 * t.powi(4) - 2.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn refine_keeps_nodes() {
        let g = TimeGrid::chebyshev(-1.0, 1.0, 5).unwrap();
        let (mesh, idx) = g.refine(0.1).unwrap();
        for (k, &i) in idx.iter().enumerate() {
            assert_eq!(mesh[i], g.nodes[k]);
        }
        assert!(mesh.windows(2).all(|w| w[1] - w[0] <= 0.1 + 1e-15 && w[1] > w[0]));
    }

    #[test]
    fn fd4_order() {
        let err = |n: usize| {
            let dt = 1.0 / (n - 1) as f64;
            let f: Vec<f64> = (0..n).map(|i| (3.0 * i as f64 * dt).sin()).collect();
            fd4_derivative(&f, dt)
                .iter()
                .enumerate()
                .map(|(i, v)| (v - 3.0 * (3.0 * i as f64 * dt).cos()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(41) / err(81);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn family_derivative_matches_scalar() {
        let g = TimeGrid::chebyshev(0.0, 1.0, 10).unwrap();
        let fam: Vec<CMat> = g.nodes.iter().map(|t| CMat::from_fn(2, 2, |i, j| C64::new(t * t * (i + 1) as f64, t * j as f64))).collect();
        let d = g.differentiate_family(&fam).unwrap();
        for (t, m) in g.nodes.iter().zip(&d) {
            assert!((m[(1, 1)] - C64::new(4.0 * t, 1.0)).norm() < 1e-11);
        }
    }
}
