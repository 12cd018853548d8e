//! Bounded-variable least squares in three unknowns:
//!
//! ```text
//! minimize ½‖H v − y‖²   subject to   lower ≤ v ≤ upper  (elementwise)
//! ```
//!
//! Solved with a primal active-set method on the normal equations. The method
//! starts from the unconstrained minimizer clipped to the box, takes Newton
//! steps on the free coordinates with a ratio test against the bounds, and
//! releases the bound whose multiplier has the wrong sign until the KKT
//! conditions hold. Rank-deficient `H` is handled by walking along null-space
//! descent directions, and ties among minimizers are broken by minimum norm.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{all_finite, Vec3};

/// Absolute tolerance on gradient components in the KKT test.
pub const KKT_TOL: f64 = 1e-9;
/// Allowed slack on box feasibility of the returned point.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Cap on the number of working-set changes.
pub const MAX_ACTIVE_SET_CHANGES: usize = 64;

/// Relative eigenvalue cutoff below which a direction is treated as null.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxConstraint {
    pub lower: Vec3,
    pub upper: Vec3,
}

impl BoxConstraint {
    pub fn new(lower: Vec3, upper: Vec3) -> Result<Self> {
        if !all_finite(&lower) || !all_finite(&upper) {
            return Err(Error::InvalidInput("non-finite box bound".into()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::InvalidInput(format!(
                "box lower bound {:?} exceeds upper bound {:?}",
                lower.as_slice(),
                upper.as_slice()
            )));
        }
        Ok(Self { lower, upper })
    }

    /// Box `center ± half_width`.
    pub fn centered(center: Vec3, half_width: Vec3) -> Result<Self> {
        Self::new(center - half_width, center + half_width)
    }

    pub fn center(&self) -> Vec3 {
        0.5 * (self.lower + self.upper)
    }

    /// Exact elementwise containment (no tolerance).
    pub fn contains(&self, v: &Vec3) -> bool {
        (0..3).all(|i| v[i] >= self.lower[i] && v[i] <= self.upper[i])
    }

    pub fn clip(&self, v: &Vec3) -> Vec3 {
        Vec3::from_fn(|i, _| v[i].clamp(self.lower[i], self.upper[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundState {
    Interior,
    AtLower,
    AtUpper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxLsqSolution {
    pub velocity: Vec3,
    pub active_set: [BoundState; 3],
    /// Number of working-set changes taken.
    pub iterations: usize,
    /// Largest KKT violation at the returned point.
    pub kkt_residual: f64,
    /// `HᵀH` is rank deficient; the minimizer was picked by minimum norm.
    pub degenerate: bool,
}

/// Value of `½‖H v − y‖²`.
pub fn objective(rows: &[Vec3], y: &[f64], v: &Vec3) -> f64 {
    0.5 * rows
        .iter()
        .zip(y)
        .map(|(h, yi)| (h.dot(v) - yi).powi(2))
        .sum::<f64>()
}

/// Solves the box-constrained least-squares problem. `rows` are the rows of `H`.
pub fn solve_box_lsq(rows: &[Vec3], y: &[f64], c: &BoxConstraint) -> Result<BoxLsqSolution> {
    if rows.is_empty() || rows.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "H has {} rows but y has {} entries",
            rows.len(),
            y.len()
        )));
    }
    if !rows.iter().all(all_finite) || !y.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("non-finite entry in H or y".into()));
    }
    BoxConstraint::new(c.lower, c.upper)?;

    let mut q = Matrix3::zeros();
    let mut b = Vec3::zeros();
    for (h, &yi) in rows.iter().zip(y) {
        q += h * h.transpose();
        b += h * yi;
    }
    ActiveSet::new(q, b, c).solve()
}

struct ActiveSet<'a> {
    q: Matrix3<f64>,
    b: Vec3,
    bounds: &'a BoxConstraint,
    /// Eigenvalue cutoff for numerical rank decisions.
    null_tol: f64,
    x: Vec3,
    state: [BoundState; 3],
}

impl<'a> ActiveSet<'a> {
    fn new(q: Matrix3<f64>, b: Vec3, bounds: &'a BoxConstraint) -> Self {
        let null_tol = RANK_TOL * q.abs().max().max(f64::MIN_POSITIVE);
        let mut s = Self {
            q,
            b,
            bounds,
            null_tol,
            x: Vec3::zeros(),
            state: [BoundState::Interior; 3],
        };
        // warm start: unconstrained (minimum-norm) minimizer clipped to the box
        let (p, _) = s.face_step(&[true; 3], &(-b));
        s.x = bounds.clip(&p);
        for i in 0..3 {
            if s.fixed(i) || s.x[i] <= bounds.lower[i] {
                s.set_bound(i, BoundState::AtLower);
            } else if s.x[i] >= bounds.upper[i] {
                s.set_bound(i, BoundState::AtUpper);
            }
        }
        s
    }

    fn fixed(&self, i: usize) -> bool {
        self.bounds.lower[i] == self.bounds.upper[i]
    }

    fn set_bound(&mut self, i: usize, state: BoundState) {
        self.state[i] = state;
        match state {
            BoundState::AtLower => self.x[i] = self.bounds.lower[i],
            BoundState::AtUpper => self.x[i] = self.bounds.upper[i],
            BoundState::Interior => {}
        }
    }

    fn gradient(&self) -> Vec3 {
        self.q * self.x - self.b
    }

    fn free_mask(&self) -> [bool; 3] {
        self.state.map(|s| s == BoundState::Interior)
    }

    /// Solves `Q_FF p_F = rhs_F` in the least-squares sense and returns
    /// `(range part, null-space part of rhs)`, both zero off the free set.
    fn face_step(&self, free: &[bool; 3], rhs: &Vec3) -> (Vec3, Vec3) {
        // decouple the fixed coordinates with a unit diagonal
        let mut m = self.q;
        let mut r = *rhs;
        for i in (0..3).filter(|&i| !free[i]) {
            m.row_mut(i).fill(0.0);
            m.column_mut(i).fill(0.0);
            m[(i, i)] = 1.0;
            r[i] = 0.0;
        }
        let eig = SymmetricEigen::new(m);
        let mut range = Vec3::zeros();
        let mut null = Vec3::zeros();
        for j in 0..3 {
            let u = eig.eigenvectors.column(j);
            let proj = u.dot(&r);
            if eig.eigenvalues[j] > self.null_tol {
                range += u * (proj / eig.eigenvalues[j]);
            } else {
                null += u * proj;
            }
        }
        for i in (0..3).filter(|&i| !free[i]) {
            range[i] = 0.0;
            null[i] = 0.0;
        }
        (range, null)
    }

    /// Moves along `d` as far as the free bounds allow, up to `max_step`.
    /// Returns the index of the blocking coordinate, if any.
    fn line_move(&mut self, d: &Vec3, max_step: f64) -> Option<(usize, BoundState)> {
        let mut alpha = max_step;
        let mut blocking = None;
        for i in 0..3 {
            if self.state[i] != BoundState::Interior || d[i] == 0.0 {
                continue;
            }
            let (limit, side) = if d[i] < 0.0 {
                ((self.bounds.lower[i] - self.x[i]) / d[i], BoundState::AtLower)
            } else {
                ((self.bounds.upper[i] - self.x[i]) / d[i], BoundState::AtUpper)
            };
            let limit = limit.max(0.0);
            if limit < alpha {
                alpha = limit;
                blocking = Some((i, side));
            }
        }
        for i in 0..3 {
            if self.state[i] == BoundState::Interior {
                self.x[i] = (self.x[i] + alpha * d[i]).clamp(self.bounds.lower[i], self.bounds.upper[i]);
            }
        }
        if let Some((i, side)) = blocking {
            self.set_bound(i, side);
        }
        blocking
    }

    /// Bound coordinate with the most violated multiplier sign.
    fn worst_multiplier(&self, g: &Vec3) -> Option<usize> {
        let mut worst = None;
        let mut worst_violation = KKT_TOL;
        for i in 0..3 {
            if self.fixed(i) {
                continue;
            }
            let violation = match self.state[i] {
                BoundState::AtLower => -g[i],
                BoundState::AtUpper => g[i],
                BoundState::Interior => continue,
            };
            if violation > worst_violation {
                worst_violation = violation;
                worst = Some(i);
            }
        }
        worst
    }

    fn kkt_residual(&self, g: &Vec3) -> f64 {
        (0..3)
            .map(|i| match self.state[i] {
                _ if self.fixed(i) => 0.0,
                BoundState::Interior => g[i].abs(),
                BoundState::AtLower => (-g[i]).max(0.0),
                BoundState::AtUpper => g[i].max(0.0),
            })
            .fold(0.0, f64::max)
    }

    fn solve(mut self) -> Result<BoxLsqSolution> {
        let grad_scale = 1.0 + self.b.amax();
        let mut changes = 0usize;
        let mut face_optimal = false;
        loop {
            let g = self.gradient();
            if !face_optimal {
                let free = self.free_mask();
                if !free.contains(&true) {
                    face_optimal = true;
                    continue;
                }
                let (p, null) = self.face_step(&free, &(-g));
                if null.amax() > RANK_TOL * grad_scale {
                    // objective is linear and decreasing along the null direction
                    if self.line_move(&null, f64::INFINITY).is_some() {
                        changes += 1;
                    } else {
                        face_optimal = true;
                    }
                } else if self.line_move(&p, 1.0).is_some() {
                    changes += 1;
                } else {
                    face_optimal = true;
                }
            } else {
                match self.worst_multiplier(&g) {
                    None => break,
                    Some(i) => {
                        self.state[i] = BoundState::Interior;
                        changes += 1;
                        face_optimal = false;
                    }
                }
            }
            if changes > MAX_ACTIVE_SET_CHANGES {
                return Err(Error::Convergence {
                    iterations: changes,
                    kkt_residual: self.kkt_residual(&self.gradient()),
                });
            }
        }

        let degenerate = SymmetricEigen::new(self.q).eigenvalues.min() <= self.null_tol;
        if degenerate {
            self.reduce_norm();
        }
        let g = self.gradient();
        Ok(BoxLsqSolution {
            velocity: self.x,
            active_set: self.state,
            iterations: changes,
            kkt_residual: self.kkt_residual(&g),
            degenerate,
        })
    }

    /// Slides along directions that leave `Hv` unchanged to shrink `‖v‖`
    /// while staying inside the box.
    fn reduce_norm(&mut self) {
        for _ in 0..3 {
            let free = self.free_mask();
            if !free.contains(&true) {
                return;
            }
            let mut m = self.q;
            for i in (0..3).filter(|&i| !free[i]) {
                m[(i, i)] += 1.0;
            }
            let eig = SymmetricEigen::new(m);
            let mut d = Vec3::zeros();
            for j in 0..3 {
                if eig.eigenvalues[j] <= self.null_tol {
                    let u = eig.eigenvectors.column(j);
                    d -= u * u.dot(&self.x);
                }
            }
            if d.amax() <= f64::EPSILON * (1.0 + self.x.amax()) {
                return;
            }
            if self.line_move(&d, 1.0).is_none() {
                return;
            }
        }
    }
}
