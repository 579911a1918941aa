//! Nondecreasing left-continuous integrators of bounded variation.
//!
//! An integrator `g` is stored as a piecewise-linear continuous part
//! (samples at the grid nodes, linearly interpolated in between) plus a
//! finite list of positive jumps located at grid nodes. Evaluation follows
//! the left-continuity convention
//!
//! ```text
//! g(t) = cont(t) + sum of jumps strictly before t,
//! ```
//!
//! so `g(tau)` excludes the jump at `tau` and `g(tau+) = g(tau) + delta`.
//! The left jump is identically zero, which is exactly what makes the
//! indefinite integral of anything against `g` left-continuous.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Nondecreasing, left-continuous scalar integrator on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StieltjesIntegrator {
    grid: TimeGrid,
    cont: Vec<f64>,
    /// Jump size at each node; zero where there is no jump. The last node
    /// never carries a jump (it could not contribute to any integral on the
    /// span, so it is rejected at construction).
    jump: Vec<f64>,
    /// `prefix[k]` = sum of jumps at the first `k` nodes, for O(log n) eval.
    prefix: Vec<f64>,
}

fn jump_prefix(jump: &[f64]) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(jump.len() + 1);
    let mut acc = 0.0;
    prefix.push(0.0);
    for &d in jump {
        acc += d;
        prefix.push(acc);
    }
    prefix
}

impl StieltjesIntegrator {
    /// Builds an integrator from continuous-part samples and a jump list.
    /// `cont` must be nondecreasing with one sample per node; each jump time
    /// must be a grid node strictly before the end, with positive size and
    /// no duplicates.
    pub fn new(grid: TimeGrid, cont: Vec<f64>, jumps: &[(f64, f64)]) -> Result<Self> {
        if cont.len() != grid.len() {
            return Err(Error::InvalidIntegrator(format!(
                "continuous part has {} samples for {} nodes",
                cont.len(),
                grid.len()
            )));
        }
        if cont.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidIntegrator("non-finite continuous sample".into()));
        }
        for w in cont.windows(2) {
            if w[1] < w[0] {
                return Err(Error::InvalidIntegrator(format!(
                    "continuous part must be nondecreasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        let mut jump = vec![0.0; grid.len()];
        for &(tau, delta) in jumps {
            if !(delta.is_finite() && delta > 0.0) {
                return Err(Error::InvalidIntegrator(format!(
                    "jump at {tau} must be positive and finite, got {delta}"
                )));
            }
            let i = grid.node_index(tau).ok_or_else(|| {
                Error::InvalidIntegrator(format!("jump time {tau} is not a grid node"))
            })?;
            if i == grid.len() - 1 {
                return Err(Error::InvalidIntegrator(format!(
                    "jump at the right endpoint {tau} cannot contribute to any integral"
                )));
            }
            if jump[i] != 0.0 {
                return Err(Error::InvalidIntegrator(format!(
                    "duplicate jump at {tau}"
                )));
            }
            jump[i] = delta;
        }
        let prefix = jump_prefix(&jump);
        Ok(Self {
            grid,
            cont,
            jump,
            prefix,
        })
    }

    /// The identity integrator `g(t) = t` (Lebesgue case).
    pub fn identity(grid: TimeGrid) -> Self {
        let cont = grid.times().to_vec();
        let n = cont.len();
        Self {
            grid,
            cont,
            jump: vec![0.0; n],
            prefix: vec![0.0; n + 1],
        }
    }

    /// Pure-jump integrator: constant continuous part plus the given jumps.
    pub fn pure_jumps(grid: TimeGrid, jumps: &[(f64, f64)]) -> Result<Self> {
        let cont = vec![0.0; grid.len()];
        Self::new(grid, cont, jumps)
    }

    /// Continuous integrator sampled from a nondecreasing function.
    pub fn from_samples(grid: TimeGrid, g: impl Fn(f64) -> f64) -> Result<Self> {
        let cont: Vec<f64> = grid.times().iter().map(|&t| g(t)).collect();
        Self::new(grid, cont, &[])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn span(&self) -> (f64, f64) {
        self.grid.span()
    }

    pub fn cont_values(&self) -> &[f64] {
        &self.cont
    }

    /// Iterator over `(time, size)` of the actual jumps.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid
            .times()
            .iter()
            .zip(&self.jump)
            .filter(|(_, &d)| d > 0.0)
            .map(|(&t, &d)| (t, d))
    }

    pub fn has_jumps(&self) -> bool {
        self.jump.iter().any(|&d| d > 0.0)
    }

    /// Jump size at node index `i` (zero when none).
    pub fn jump_at_index(&self, i: usize) -> f64 {
        self.jump[i]
    }

    /// Right jump at time `t`: positive only at jump nodes.
    pub fn jump_at(&self, t: f64) -> f64 {
        self.grid.node_index(t).map_or(0.0, |i| self.jump[i])
    }

    /// Value of the continuous part at `t`.
    pub fn cont_at(&self, t: f64) -> Result<f64> {
        if let Some(i) = self.grid.node_index(t) {
            return Ok(self.cont[i]);
        }
        let cell = self.grid.cell_containing(t)?;
        let times = self.grid.times();
        let w = (t - times[cell]) / (times[cell + 1] - times[cell]);
        Ok(self.cont[cell] * (1.0 - w) + self.cont[cell + 1] * w)
    }

    /// `g(t)`: continuous part plus all jumps strictly before `t`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let c = self.cont_at(t)?;
        let k = self.grid.times().partition_point(|&x| x < t);
        Ok(c + self.prefix[k])
    }

    /// `g(t+) = g(t) + jump at t`.
    pub fn right_limit(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)? + self.jump_at(t))
    }

    /// Total variation: the rise of the continuous part plus all jump sizes.
    /// For a nondecreasing integrator this equals `g(end+) - g(start)` and is
    /// computed exactly from the representation.
    pub fn total_variation(&self) -> f64 {
        let rise = self.cont[self.cont.len() - 1] - self.cont[0];
        rise + self.jump.iter().sum::<f64>()
    }

    /// Re-express on a superset grid; evaluation is unchanged.
    pub fn regrid_to(&self, grid: &TimeGrid) -> Result<Self> {
        if !grid.is_superset_of(&self.grid) {
            return Err(Error::InvalidGrid(
                "regrid target must be a superset of the integrator grid".into(),
            ));
        }
        if grid == &self.grid {
            return Ok(self.clone());
        }
        let mut cont = Vec::with_capacity(grid.len());
        let mut jump = vec![0.0; grid.len()];
        for (i, &t) in grid.times().iter().enumerate() {
            cont.push(self.cont_at(t)?);
            if let Some(j) = self.grid.node_index(t) {
                jump[i] = self.jump[j];
            }
        }
        let prefix = jump_prefix(&jump);
        Ok(Self {
            grid: grid.clone(),
            cont,
            jump,
            prefix,
        })
    }

    /// Restriction to `[c, d]` (both grid nodes). A jump exactly at `d` is
    /// dropped: by the left-continuity convention it cannot contribute to
    /// any integral inside `[c, d]`.
    pub fn restrict(&self, c: f64, d: f64) -> Result<Self> {
        let sub = self.grid.restrict(c, d)?;
        let i0 = self.grid.node_index(c).unwrap();
        let i1 = self.grid.node_index(d).unwrap();
        let cont = self.cont[i0..=i1].to_vec();
        let mut jump = self.jump[i0..=i1].to_vec();
        *jump.last_mut().unwrap() = 0.0;
        let prefix = jump_prefix(&jump);
        Ok(Self {
            grid: sub,
            cont,
            jump,
            prefix,
        })
    }
}
