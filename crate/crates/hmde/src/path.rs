//! Regulated paths: the finite data model for regulated vector-valued
//! functions.
//!
//! A `RegulatedPath` stores, at every grid node, the left limit, the value,
//! and the right limit of the function. On each open interval between
//! consecutive nodes the function is the straight line from the left node's
//! right limit to the right node's left limit, so it is continuous there and
//! every discontinuity sits on a node. Any regulated function can be
//! approximated in sup norm by such paths, and the class is closed under the
//! pointwise operations the solver needs.
//!
//! Conventions baked into the representation:
//! * at the first node the left limit equals the value (no limit exists
//!   inside the domain, so the stored triple is degenerate there);
//! * symmetrically, at the last node the right limit equals the value;
//! * a path is *left-continuous* when the left limit equals the value at
//!   every node.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Euclidean norm of a state vector.
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean distance between two state vectors of equal dimension.
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Finite representation of a regulated function `[t0, t0+a] -> R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegulatedPath {
    grid: TimeGrid,
    dim: usize,
    // Flat storage, node-major with stride `dim`.
    left: Vec<f64>,
    value: Vec<f64>,
    right: Vec<f64>,
}

impl RegulatedPath {
    /// Full-control constructor. `left`, `value`, `right` are node-major flat
    /// vectors of length `grid.len() * dim`. Enforces the endpoint
    /// conventions exactly: `left == value` at node 0 and `right == value`
    /// at the last node.
    pub fn from_nodes(
        grid: TimeGrid,
        dim: usize,
        left: Vec<f64>,
        value: Vec<f64>,
        right: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPath("dimension must be positive".into()));
        }
        let want = grid.len() * dim;
        for (name, v) in [("left", &left), ("value", &value), ("right", &right)] {
            if v.len() != want {
                return Err(Error::InvalidPath(format!(
                    "{name} has length {}, expected {want}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidPath(format!("{name} contains a non-finite entry")));
            }
        }
        let last = grid.len() - 1;
        if left[..dim] != value[..dim] {
            return Err(Error::InvalidPath(
                "left limit at the first node must equal its value".into(),
            ));
        }
        if right[last * dim..] != value[last * dim..] {
            return Err(Error::InvalidPath(
                "right limit at the last node must equal its value".into(),
            ));
        }
        Ok(Self {
            grid,
            dim,
            left,
            value,
            right,
        })
    }

    /// Continuous path through the given node values (left = value = right).
    pub fn continuous_from_values(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        Self::from_nodes(grid, dim, values.clone(), values.clone(), values)
    }

    /// Constant path.
    pub fn constant(grid: TimeGrid, value: &[f64]) -> Result<Self> {
        let n = grid.len();
        let flat: Vec<f64> = value
            .iter()
            .copied()
            .cycle()
            .take(n * value.len())
            .collect();
        Self::continuous_from_values(grid, value.len(), flat)
    }

    /// Zero path of the given dimension.
    pub fn zero(grid: TimeGrid, dim: usize) -> Result<Self> {
        let n = grid.len();
        Self::continuous_from_values(grid, dim, vec![0.0; n * dim])
    }

    /// Continuous scalar path sampled from a function of time.
    pub fn sample_scalar(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = grid.times().iter().map(|&t| f(t)).collect();
        Self::continuous_from_values(grid, 1, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn span(&self) -> (f64, f64) {
        self.grid.span()
    }

    pub fn left_at_node(&self, i: usize) -> &[f64] {
        &self.left[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value_at_node(&self, i: usize) -> &[f64] {
        &self.value[i * self.dim..(i + 1) * self.dim]
    }

    pub fn right_at_node(&self, i: usize) -> &[f64] {
        &self.right[i * self.dim..(i + 1) * self.dim]
    }

    /// True iff the left limit equals the value at every node.
    pub fn is_left_continuous(&self) -> bool {
        self.left == self.value
    }

    /// True iff left = value = right at every node, i.e. the path has no
    /// discontinuity anywhere.
    pub fn is_continuous(&self) -> bool {
        self.left == self.value && self.right == self.value
    }

    fn interpolate_into(&self, cell: usize, t: f64, out: &mut [f64]) {
        let times = self.grid.times();
        let (t0, t1) = (times[cell], times[cell + 1]);
        let w = (t - t0) / (t1 - t0);
        let a = self.right_at_node(cell);
        let b = self.left_at_node(cell + 1);
        for k in 0..self.dim {
            out[k] = a[k] * (1.0 - w) + b[k] * w;
        }
    }

    /// Value at `t`. Node times return the stored node value; interior times
    /// return the segment's linear interpolant.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        if let Some(i) = self.grid.node_index(t) {
            return Ok(self.value_at_node(i).to_vec());
        }
        let cell = self.grid.cell_containing(t)?;
        let mut out = vec![0.0; self.dim];
        self.interpolate_into(cell, t, &mut out);
        Ok(out)
    }

    /// One-sided limits `(x(t-), x(t+))`. At nodes these are the stored
    /// limits, with the endpoint conventions standing in where the limit
    /// does not exist inside the domain. At interior points both coincide
    /// with the value.
    pub fn one_sided_limits(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if let Some(i) = self.grid.node_index(t) {
            return Ok((self.left_at_node(i).to_vec(), self.right_at_node(i).to_vec()));
        }
        let v = self.eval(t)?;
        Ok((v.clone(), v))
    }

    /// Re-express the path on a superset grid. Evaluation is unchanged: new
    /// interior nodes get left = value = right = interpolant.
    pub fn regrid_to(&self, grid: &TimeGrid) -> Result<Self> {
        if !grid.is_superset_of(&self.grid) {
            return Err(Error::InvalidGrid(
                "regrid target must be a superset of the path grid".into(),
            ));
        }
        if grid == &self.grid {
            return Ok(self.clone());
        }
        let n = grid.len();
        let mut left = vec![0.0; n * self.dim];
        let mut value = vec![0.0; n * self.dim];
        let mut right = vec![0.0; n * self.dim];
        for (i, &t) in grid.times().iter().enumerate() {
            let dst = i * self.dim..(i + 1) * self.dim;
            if let Some(j) = self.grid.node_index(t) {
                left[dst.clone()].copy_from_slice(self.left_at_node(j));
                value[dst.clone()].copy_from_slice(self.value_at_node(j));
                right[dst].copy_from_slice(self.right_at_node(j));
            } else {
                let cell = self.grid.cell_containing(t)?;
                let mut v = vec![0.0; self.dim];
                self.interpolate_into(cell, t, &mut v);
                left[dst.clone()].copy_from_slice(&v);
                value[dst.clone()].copy_from_slice(&v);
                right[dst].copy_from_slice(&v);
            }
        }
        Self::from_nodes(grid.clone(), self.dim, left, value, right)
    }

    /// Both paths re-expressed on the union of their grids.
    pub fn on_common_grid(&self, other: &Self) -> Result<(Self, Self)> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let union = self.grid.union(&other.grid)?;
        Ok((self.regrid_to(&union)?, other.regrid_to(&union)?))
    }

    /// Sup-norm distance. Because both paths are piecewise linear on the
    /// union grid, the supremum over the whole span is attained among node
    /// values and one-sided limits (which are also the segment endpoints),
    /// so this is exact for the representation.
    pub fn uniform_dist(&self, other: &Self) -> Result<f64> {
        let (p, q) = self.on_common_grid(other)?;
        let mut sup: f64 = 0.0;
        for i in 0..p.grid.len() {
            sup = sup
                .max(dist(p.left_at_node(i), q.left_at_node(i)))
                .max(dist(p.value_at_node(i), q.value_at_node(i)))
                .max(dist(p.right_at_node(i), q.right_at_node(i)));
        }
        Ok(sup)
    }

    /// Sup norm over the span; exact for the representation.
    pub fn sup_norm(&self) -> f64 {
        let mut sup: f64 = 0.0;
        for i in 0..self.grid.len() {
            sup = sup
                .max(norm(self.left_at_node(i)))
                .max(norm(self.value_at_node(i)))
                .max(norm(self.right_at_node(i)));
        }
        sup
    }

    /// Pointwise combination of two paths on their union grid. The
    /// combination is applied separately to left limits, values, and right
    /// limits, which is exact for affine `op`.
    pub fn zip_with(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let (p, q) = self.on_common_grid(other)?;
        let zip = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(&x, &y)| op(x, y)).collect()
        };
        Self::from_nodes(
            p.grid.clone(),
            p.dim,
            zip(&p.left, &q.left),
            zip(&p.value, &q.value),
            zip(&p.right, &q.right),
        )
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x - y)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mul = |v: &Vec<f64>| v.iter().map(|x| x * c).collect();
        Self {
            grid: self.grid.clone(),
            dim: self.dim,
            left: mul(&self.left),
            value: mul(&self.value),
            right: mul(&self.right),
        }
    }

    /// Adds a constant vector to the whole path.
    pub fn offset(&self, c: &[f64]) -> Result<Self> {
        if c.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: c.len(),
            });
        }
        let shift = |v: &Vec<f64>| {
            v.iter()
                .enumerate()
                .map(|(i, x)| x + c[i % self.dim])
                .collect()
        };
        Ok(Self {
            grid: self.grid.clone(),
            dim: self.dim,
            left: shift(&self.left),
            value: shift(&self.value),
            right: shift(&self.right),
        })
    }

    /// True when every open interval carries a constant segment, i.e. the
    /// path is a step function (node values may still differ from the
    /// neighbouring plateaus).
    pub fn is_step(&self) -> bool {
        (0..self.grid.len() - 1)
            .all(|i| self.right_at_node(i) == self.left_at_node(i + 1))
    }

    /// Piecewise-constant approximation within `eps` in sup norm.
    ///
    /// Each segment is split into enough subintervals that replacing the
    /// linear piece by its midpoint value stays within `eps`; node values of
    /// the input are kept exactly, so the output grid refines the input grid
    /// and `uniform_dist(output, input) <= eps` holds by construction. A path
    /// that is already a step function is returned unchanged.
    pub fn approximate_by_steps(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidPath(format!("eps must be positive, got {eps}")));
        }
        if self.is_step() {
            return Ok(self.clone());
        }
        let times = self.grid.times();
        let mut new_times: Vec<f64> = Vec::new();
        // For every refined cell, the constant taken on its open interior.
        let mut plateaus: Vec<Vec<f64>> = Vec::new();
        for i in 0..times.len() - 1 {
            new_times.push(times[i]);
            let a = self.right_at_node(i);
            let b = self.left_at_node(i + 1);
            let rise = dist(a, b);
            let pieces = ((rise / (2.0 * eps)).ceil() as usize).max(1);
            for k in 0..pieces {
                if k > 0 {
                    let w = k as f64 / pieces as f64;
                    new_times.push(times[i] * (1.0 - w) + times[i + 1] * w);
                }
                let mid = (k as f64 + 0.5) / pieces as f64;
                plateaus.push(
                    a.iter()
                        .zip(b)
                        .map(|(&x, &y)| x * (1.0 - mid) + y * mid)
                        .collect(),
                );
            }
        }
        new_times.push(times[times.len() - 1]);

        let grid = TimeGrid::new(new_times)?;
        let n = grid.len();
        let dim = self.dim;
        let mut left = vec![0.0; n * dim];
        let mut value = vec![0.0; n * dim];
        let mut right = vec![0.0; n * dim];
        for (i, &t) in grid.times().iter().enumerate() {
            let dst = i * dim..(i + 1) * dim;
            // Keep the input's exact value at every refined node.
            let v = self.eval(t)?;
            value[dst.clone()].copy_from_slice(&v);
            if i == 0 {
                left[dst.clone()].copy_from_slice(&v);
            } else {
                left[dst.clone()].copy_from_slice(&plateaus[i - 1]);
            }
            if i == n - 1 {
                right[dst].copy_from_slice(&v);
            } else {
                right[dst].copy_from_slice(&plateaus[i]);
            }
        }
        Self::from_nodes(grid, dim, left, value, right)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(times: &[f64]) -> TimeGrid {
        TimeGrid::new(times.to_vec()).unwrap()
    }

    #[test]
    fn eval_constant() {
        let p = RegulatedPath::constant(grid(&[0.0, 1.0, 2.0]), &[3.5, -1.0]).unwrap();
        assert_eq!(p.eval(0.7).unwrap(), vec![3.5, -1.0]);
        assert_eq!(p.eval(2.0).unwrap(), vec![3.5, -1.0]);
        assert!(p.eval(2.1).is_err());
    }

    #[test]
    fn eval_interpolates_segment_limits() {
        // Segment from right limit 0 at node 0 to left limit 2 at node 1.
        let g = grid(&[0.0, 1.0]);
        let p = RegulatedPath::from_nodes(
            g,
            1,
            vec![5.0, 2.0],
            vec![5.0, 7.0],
            vec![0.0, 7.0],
        )
        .unwrap();
        assert_eq!(p.eval(0.5).unwrap(), vec![1.0]);
        assert_eq!(p.eval(0.0).unwrap(), vec![5.0]);
        assert_eq!(p.eval(1.0).unwrap(), vec![7.0]);
        let (l, r) = p.one_sided_limits(1.0).unwrap();
        assert_eq!(l, vec![2.0]);
        assert_eq!(r, vec![7.0]);
        let (l, r) = p.one_sided_limits(0.25).unwrap();
        assert_eq!(l, vec![0.5]);
        assert_eq!(r, vec![0.5]);
    }

    #[test]
    fn step_path_limits() {
        // Left-continuous unit step at t = 1: value 0 up to and at 1, then 1.
        let g = grid(&[0.0, 1.0, 2.0]);
        let p = RegulatedPath::from_nodes(
            g,
            1,
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0],
        )
        .unwrap();
        assert!(p.is_left_continuous());
        let (l, r) = p.one_sided_limits(1.0).unwrap();
        assert_eq!(l, vec![0.0]);
        assert_eq!(r, vec![1.0]);
        assert_eq!(p.eval(1.0).unwrap(), vec![0.0]);
        assert_eq!(p.eval(1.5).unwrap(), vec![1.0]);
    }

    #[test]
    fn endpoint_conventions_enforced() {
        let g = grid(&[0.0, 1.0]);
        let bad = RegulatedPath::from_nodes(
            g,
            1,
            vec![1.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn uniform_dist_translation_and_linear() {
        let g = grid(&[0.0, 1.0]);
        let p = RegulatedPath::sample_scalar(g.clone(), |t| t).unwrap();
        let q = RegulatedPath::zero(g.clone(), 1).unwrap();
        assert_eq!(p.uniform_dist(&q).unwrap(), 1.0);
        let shifted = p.offset(&[2.5]).unwrap();
        assert_eq!(p.uniform_dist(&shifted).unwrap(), 2.5);
        assert_eq!(p.uniform_dist(&p).unwrap(), 0.0);
    }

    #[test]
    fn uniform_dist_rejects_dim_mismatch() {
        let g = grid(&[0.0, 1.0]);
        let p = RegulatedPath::zero(g.clone(), 1).unwrap();
        let q = RegulatedPath::zero(g, 2).unwrap();
        assert!(matches!(
            p.uniform_dist(&q),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn regrid_preserves_evaluation() {
        let g = grid(&[0.0, 1.0, 2.0]);
        let p = RegulatedPath::from_nodes(
            g.clone(),
            1,
            vec![0.0, 1.0, 4.0],
            vec![0.0, 2.0, 4.0],
            vec![0.0, 3.0, 4.0],
        )
        .unwrap();
        let fine = g.refine_with(&[0.5, 1.25, 1.75], 1e-12).unwrap();
        let q = p.regrid_to(&fine).unwrap();
        // Node values of the original grid are preserved bit for bit.
        for &t in g.times() {
            assert_eq!(p.eval(t).unwrap(), q.eval(t).unwrap());
        }
        for &t in &[0.1, 0.5, 0.9, 1.1, 1.6, 1.9] {
            let a = p.eval(t).unwrap()[0];
            let b = q.eval(t).unwrap()[0];
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0), "{a} vs {b}");
        }
        assert_eq!(p.uniform_dist(&q).unwrap(), 0.0);
    }

    #[test]
    fn step_approximation_meets_bound() {
        let g = grid(&[0.0, 1.0]);
        let p = RegulatedPath::sample_scalar(g, |t| t).unwrap();
        let s = p.approximate_by_steps(0.25).unwrap();
        assert!(s.is_step());
        assert!(s.grid().is_superset_of(p.grid()));
        assert!(p.uniform_dist(&s).unwrap() <= 0.25 + 1e-15);
    }

    #[test]
    fn step_approximation_vector_path() {
        let g = grid(&[0.0, 1.0, 2.0]);
        let p = RegulatedPath::continuous_from_values(
            g,
            2,
            vec![0.0, 1.0, 2.0, -1.0, 0.0, 3.0],
        )
        .unwrap();
        let eps = 0.3;
        let s = p.approximate_by_steps(eps).unwrap();
        assert!(s.is_step());
        assert_eq!(s.dim(), 2);
        assert!(p.uniform_dist(&s).unwrap() <= eps + 1e-15);
    }

    #[test]
    fn step_approximation_is_identity_on_steps() {
        let g = grid(&[0.0, 1.0, 2.0]);
        let p = RegulatedPath::from_nodes(
            g,
            1,
            vec![1.0, 1.0, 2.0],
            vec![1.0, 1.0, 2.0],
            vec![1.0, 2.0, 2.0],
        )
        .unwrap();
        let s = p.approximate_by_steps(0.05).unwrap();
        assert_eq!(p.uniform_dist(&s).unwrap(), 0.0);
        assert_eq!(s, p);
        // A constant path is a step function too.
        let c = RegulatedPath::constant(grid(&[0.0, 1.0]), &[4.0]).unwrap();
        assert_eq!(c.approximate_by_steps(1e-9).unwrap(), c);
    }
}
