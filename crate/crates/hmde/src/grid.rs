//! Time grids: strictly increasing finite node sets spanning a compact
//! interval. Every path and integrator in the crate lives on one of these.

use crate::error::{Error, Result};

/// A strictly increasing, finite sequence of time points spanning
/// `[start, end]`. At least two nodes. All discontinuities of paths and
/// integrators must sit on grid nodes, so the grid doubles as the set of
/// admissible breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    /// Builds a grid from explicit node times. Rejects non-finite values,
    /// fewer than two nodes, and any non-increasing pair.
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 nodes, got {}",
                times.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("non-finite node time".into()));
        }
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidGrid(format!(
                    "nodes must be strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { times })
    }

    /// Uniform grid with `cells` equal cells on `[start, end]`. Endpoints are
    /// reproduced exactly; interior nodes are computed by convex combination
    /// so refinements of the same span share node values bit for bit.
    pub fn uniform(start: f64, end: f64, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidGrid("need at least one cell".into()));
        }
        if !(start.is_finite() && end.is_finite()) || end <= start {
            return Err(Error::InvalidGrid(format!(
                "bad span [{start}, {end}]"
            )));
        }
        let n = cells;
        let times = (0..=n)
            .map(|i| {
                if i == 0 {
                    start
                } else if i == n {
                    end
                } else {
                    let w = i as f64 / n as f64;
                    start * (1.0 - w) + end * w
                }
            })
            .collect();
        Ok(Self { times })
    }

    /// Uniform grid whose cell width is at most `step`.
    pub fn with_step(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidGrid(format!("bad step {step}")));
        }
        let cells = ((end - start) / step).ceil().max(1.0) as usize;
        Self::uniform(start, end, cells)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of nodes (always at least 2).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// Grids are never empty by construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.start(), self.end())
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start() && t <= self.end()
    }

    /// Index of the node exactly equal to `t`, if any.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()).ok()
    }

    /// Index `i` of the cell `[t_i, t_{i+1}]` containing `t`, with interior
    /// points resolving to their enclosing cell and `end` to the last cell.
    pub fn cell_containing(&self, t: f64) -> Result<usize> {
        if !self.contains(t) {
            return Err(Error::OutOfDomain {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        // partition_point: first index with times[i] > t, so t lives in cell i-1.
        let i = self.times.partition_point(|&x| x <= t);
        Ok(if i == self.times.len() { i - 2 } else { i - 1 })
    }

    /// True when every node of `other` is a node of `self`.
    pub fn is_superset_of(&self, other: &TimeGrid) -> bool {
        other
            .times
            .iter()
            .all(|&t| self.node_index(t).is_some())
    }

    /// Merge with another grid over the same span. Node times are compared
    /// exactly; callers that want coincident nodes must construct them from
    /// the same arithmetic.
    pub fn union(&self, other: &TimeGrid) -> Result<TimeGrid> {
        if self.span() != other.span() {
            let (a_start, a_end) = self.span();
            let (b_start, b_end) = other.span();
            return Err(Error::SpanMismatch {
                a_start,
                a_end,
                b_start,
                b_end,
            });
        }
        let mut merged = Vec::with_capacity(self.len() + other.len());
        let (a, b) = (&self.times, &other.times);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let next = match (a.get(i), b.get(j)) {
                (Some(&x), Some(&y)) => {
                    if x < y {
                        i += 1;
                        x
                    } else if y < x {
                        j += 1;
                        y
                    } else {
                        i += 1;
                        j += 1;
                        x
                    }
                }
                (Some(&x), None) => {
                    i += 1;
                    x
                }
                (None, Some(&y)) => {
                    j += 1;
                    y
                }
                (None, None) => break,
            };
            merged.push(next);
        }
        TimeGrid::new(merged)
    }

    /// Returns a grid containing all existing nodes plus `extra` times.
    /// Times already present are deduplicated; times closer than `tol` to an
    /// existing node without being equal are rejected as collisions.
    pub fn refine_with(&self, extra: &[f64], tol: f64) -> Result<TimeGrid> {
        let mut times = self.times.clone();
        for &t in extra {
            if !t.is_finite() {
                return Err(Error::InvalidGrid(format!("non-finite extra node {t}")));
            }
            match times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
                Ok(_) => {}
                Err(pos) => {
                    let near_prev = pos > 0 && (t - times[pos - 1]).abs() < tol;
                    let near_next = pos < times.len() && (times[pos] - t).abs() < tol;
                    if near_prev || near_next {
                        return Err(Error::InvalidGrid(format!(
                            "node {t} collides with an existing node within {tol:e}"
                        )));
                    }
                    times.insert(pos, t);
                }
            }
        }
        TimeGrid::new(times)
    }

    /// Sub-grid on `[c, d]`; both must be existing nodes.
    pub fn restrict(&self, c: f64, d: f64) -> Result<TimeGrid> {
        let i = self.node_index(c).ok_or(Error::InvalidGrid(format!(
            "restriction endpoint {c} is not a grid node"
        )))?;
        let j = self.node_index(d).ok_or(Error::InvalidGrid(format!(
            "restriction endpoint {d} is not a grid node"
        )))?;
        if j <= i {
            return Err(Error::ReversedInterval { c, d });
        }
        TimeGrid::new(self.times[i..=j].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, -1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn uniform_hits_endpoints_exactly() {
        let g = TimeGrid::uniform(0.0, 1.0, 1000).unwrap();
        assert_eq!(g.start(), 0.0);
        assert_eq!(g.end(), 1.0);
        assert_eq!(g.len(), 1001);
        assert_eq!(g.times()[250], 0.25);
    }

    #[test]
    fn cell_lookup() {
        let g = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(g.cell_containing(0.0).unwrap(), 0);
        assert_eq!(g.cell_containing(0.5).unwrap(), 0);
        assert_eq!(g.cell_containing(1.0).unwrap(), 1);
        assert_eq!(g.cell_containing(2.0).unwrap(), 1);
        assert!(g.cell_containing(2.5).is_err());
    }

    #[test]
    fn union_merges_exactly() {
        let a = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let b = TimeGrid::new(vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        let u = a.union(&b).unwrap();
        assert_eq!(u.times(), &[0.0, 0.25, 0.5, 1.0]);
        assert!(u.is_superset_of(&a));
        assert!(u.is_superset_of(&b));
    }

    #[test]
    fn refine_detects_collisions() {
        let g = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        let refined = g.refine_with(&[0.5], 1e-12).unwrap();
        assert_eq!(refined.times(), &[0.0, 0.5, 1.0]);
        // Re-inserting an existing node is a no-op.
        assert_eq!(refined.refine_with(&[0.5], 1e-12).unwrap().len(), 3);
        // A near-coincident node is a collision.
        assert!(refined.refine_with(&[0.5 + 1e-13], 1e-12).is_err());
    }

    #[test]
    fn restrict_needs_nodes() {
        let g = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(g.restrict(0.0, 0.5).unwrap().times(), &[0.0, 0.5]);
        assert!(g.restrict(0.0, 0.7).is_err());
        assert!(g.restrict(0.5, 0.0).is_err());
    }
}
