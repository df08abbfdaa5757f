//! Damped Newton iteration for two equations in two unknowns.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Newton2 {
    pub max_iter: usize,
    /// Absolute finite-difference step per coordinate.
    pub fd_step: [f64; 2],
    /// Smallest damping factor tried before accepting a non-improving step.
    pub min_damping: f64,
}

impl Default for Newton2 {
    fn default() -> Self {
        Self {
            max_iter: 50,
            fd_step: [1e-7, 1e-7],
            min_damping: 1.0 / 1024.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOutcome {
    pub x: [f64; 2],
    pub residual: [f64; 2],
    pub iterations: usize,
    pub converged: bool,
}

fn norm(r: &[f64; 2]) -> f64 {
    r[0].hypot(r[1])
}

impl Newton2 {
    /// Drives `f` towards zero from `x0` until `done(residual)` holds.
    ///
    /// The Jacobian is estimated by forward differences. Each Newton step is
    /// halved until the residual norm decreases.
    pub fn solve<F, D>(&self, mut f: F, x0: [f64; 2], done: D) -> Result<NewtonOutcome>
    where
        F: FnMut([f64; 2]) -> Result<[f64; 2]>,
        D: Fn(&[f64; 2]) -> bool,
    {
        let mut x = x0;
        let mut r = f(x)?;
        for it in 0..self.max_iter {
            if done(&r) {
                return Ok(NewtonOutcome {
                    x,
                    residual: r,
                    iterations: it,
                    converged: true,
                });
            }
            let mut jac = [[0.0; 2]; 2];
            for j in 0..2 {
                let mut xp = x;
                xp[j] += self.fd_step[j];
                let rp = f(xp)?;
                for i in 0..2 {
                    jac[i][j] = (rp[i] - r[i]) / self.fd_step[j];
                }
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det == 0.0 || !det.is_finite() {
                break;
            }
            let dx = [
                -(jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
                -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
            ];
            let mut lambda = 1.0;
            loop {
                let xt = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
                match f(xt) {
                    Ok(rt) if norm(&rt) < norm(&r) || lambda <= self.min_damping => {
                        x = xt;
                        r = rt;
                        break;
                    }
                    Err(e) if lambda <= self.min_damping => return Err(e),
                    _ => {}
                }
                lambda *= 0.5;
            }
        }
        Ok(NewtonOutcome {
            x,
            residual: r,
            iterations: self.max_iter,
            converged: done(&r),
        })
    }
}
