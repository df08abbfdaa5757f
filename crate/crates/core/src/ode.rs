//! Explicit Runge-Kutta integration.
//!
//! [`Dopri5`] is the Dormand-Prince 5(4) pair with step-size control and the
//! standard fourth-order continuous extension. Accepted steps are handed to an
//! observer as [`DenseStep`]s so callers choose what to keep; a million-step
//! nutation run never has to live in memory at once.
//!
//! [`velocity_verlet`] is a fixed-step symplectic scheme used as an
//! independent cross-check for second-order scalar equations.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            h_max: f64::INFINITY,
            h_min: 0.0,
            h_init: None,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl std::ops::AddAssign for Stats {
    fn add_assign(&mut self, o: Self) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.evaluations += o.evaluations;
    }
}

/// One accepted step with its interpolant.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    rcont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn y0(&self) -> [f64; N] {
        self.rcont[0]
    }

    pub fn y1(&self) -> [f64; N] {
        let mut y = [0.0; N];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.rcont[0][i] + self.rcont[1][i];
        }
        y
    }

    /// Interpolated state at `t` in `[t0, t0 + h]`.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let r = &self.rcont;
        let mut y = [0.0; N];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * r[4][i])));
        }
        y
    }
}

/// A piecewise interpolant assembled from accepted steps.
#[derive(Debug, Clone, Default)]
pub struct DenseSeries<const N: usize> {
    steps: Vec<DenseStep<N>>,
}

impl<const N: usize> DenseSeries<N> {
    pub fn new() -> Self {
        Self { steps: Vec::new() }
    }

    pub fn push(&mut self, step: &DenseStep<N>) {
        self.steps.push(*step);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[DenseStep<N>] {
        &self.steps
    }

    pub fn t_start(&self) -> Option<f64> {
        self.steps.first().map(|s| s.t0)
    }

    pub fn t_end(&self) -> Option<f64> {
        self.steps.last().map(|s| s.t1())
    }

    /// Value at `t`. A time shared by two steps resolves to the later step,
    /// matching the half-open stage convention. Times outside the covered
    /// range are clamped to the nearest end.
    pub fn eval(&self, t: f64) -> [f64; N] {
        assert!(!self.steps.is_empty(), "empty dense series");
        let idx = self.steps.partition_point(|s| s.t0 <= t);
        let step = &self.steps[idx.saturating_sub(1)];
        let tc = t.clamp(step.t0, step.t1());
        step.eval(tc)
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn combine<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

impl Dopri5 {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn h_max(mut self, h: f64) -> Self {
        self.h_max = h;
        self
    }

    fn initial_step<const N: usize, F>(
        &self,
        f: &mut F,
        t0: f64,
        y0: &[f64; N],
        k1: &[f64; N],
        span: f64,
    ) -> Result<f64>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        let sc = |i: usize| self.atol + self.rtol * y0[i].abs();
        let d0 = (0..N).map(|i| (y0[i] / sc(i)).powi(2)).sum::<f64>().sqrt() / (N as f64).sqrt();
        let d1 = (0..N).map(|i| (k1[i] / sc(i)).powi(2)).sum::<f64>().sqrt() / (N as f64).sqrt();
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(self.h_max).min(span);
        let y1 = combine(y0, h0, &[(1.0, k1)]);
        let k2 = f(t0 + h0, &y1)?;
        let d2 = (0..N)
            .map(|i| ((k2[i] - k1[i]) / sc(i)).powi(2))
            .sum::<f64>()
            .sqrt()
            / (N as f64).sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        Ok((100.0 * h0).min(h1).min(self.h_max).min(span))
    }

    /// Integrates from `t0` to `t1` (`t1 > t0`), calling `observer` after each
    /// accepted step. Returns the state at `t1` exactly.
    pub fn integrate<const N: usize, F, O>(
        &self,
        mut f: F,
        t0: f64,
        y0: [f64; N],
        t1: f64,
        mut observer: O,
    ) -> Result<([f64; N], Stats)>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
        O: FnMut(&DenseStep<N>),
    {
        let mut stats = Stats::default();
        if t1 <= t0 {
            return Ok((y0, stats));
        }
        let span = t1 - t0;
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y)?;
        stats.evaluations += 1;
        let mut h = match self.h_init {
            Some(h) => h.min(self.h_max).min(span),
            None => {
                stats.evaluations += 1;
                self.initial_step(&mut f, t, &y, &k1, span)?
            }
        };
        let mut last_rejected = false;

        loop {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::Integration {
                    t,
                    reason: format!("exceeded {} steps", self.max_steps),
                });
            }
            let remaining = t1 - t;
            let finishing = h >= remaining * (1.0 - 1e-12);
            if finishing {
                h = remaining;
            }

            let k2 = f(t + C2 * h, &combine(&y, h, &[(A21, &k1)]))?;
            let k3 = f(t + C3 * h, &combine(&y, h, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(
                t + C4 * h,
                &combine(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            )?;
            let k5 = f(
                t + C5 * h,
                &combine(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = f(
                t + h,
                &combine(
                    &y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            )?;
            let y_new = combine(
                &y,
                h,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let t_new = if finishing { t1 } else { t + h };
            let k7 = f(t_new, &y_new)?;
            stats.evaluations += 6;

            let mut err = 0.0;
            for i in 0..N {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / N as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration {
                    t,
                    reason: "non-finite error estimate".into(),
                });
            }

            if err <= 1.0 {
                let mut rcont = [[0.0; N]; 5];
                for i in 0..N {
                    let ydiff = y_new[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    rcont[0][i] = y[i];
                    rcont[1][i] = ydiff;
                    rcont[2][i] = bspl;
                    rcont[3][i] = ydiff - h * k7[i] - bspl;
                    rcont[4][i] = h
                        * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]);
                }
                observer(&DenseStep { t0: t, h, rcont });
                stats.accepted += 1;
                t = t_new;
                y = y_new;
                k1 = k7;
                if finishing {
                    return Ok((y, stats));
                }
                let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
                fac = fac.clamp(0.2, 10.0);
                if last_rejected {
                    fac = fac.min(1.0);
                }
                h = (h * fac).min(self.h_max);
                last_rejected = false;
            } else {
                stats.rejected += 1;
                last_rejected = true;
                h *= (0.9 * err.powf(-0.2)).max(0.2);
            }
            if h < self.h_min || h <= f64::EPSILON * t.abs().max(1.0) {
                return Err(Error::Integration {
                    t,
                    reason: format!("step size underflow (h = {h:.3e})"),
                });
            }
        }
    }

    /// Integrates and keeps every step as a [`DenseSeries`].
    pub fn integrate_dense<const N: usize, F>(
        &self,
        f: F,
        t0: f64,
        y0: [f64; N],
        t1: f64,
        series: &mut DenseSeries<N>,
    ) -> Result<([f64; N], Stats)>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        self.integrate(f, t0, y0, t1, |s| series.push(s))
    }
}

/// Collects interpolated states at prescribed, sorted times while an
/// integration runs.
#[derive(Debug, Clone)]
pub struct GridSampler<'g, const N: usize> {
    grid: &'g [f64],
    next: usize,
    pub samples: Vec<(f64, [f64; N])>,
}

impl<'g, const N: usize> GridSampler<'g, N> {
    pub fn new(grid: &'g [f64]) -> Self {
        Self {
            grid,
            next: 0,
            samples: Vec::with_capacity(grid.len()),
        }
    }

    /// Records every pending grid time inside `[step.t0, step.t1]`.
    pub fn observe(&mut self, step: &DenseStep<N>) {
        let t1 = step.t1();
        while self.next < self.grid.len() && self.grid[self.next] <= t1 {
            let t = self.grid[self.next].max(step.t0);
            self.samples.push((self.grid[self.next], step.eval(t)));
            self.next += 1;
        }
    }

    /// Grid times not reached by any step, e.g. `t = t0` of an empty run.
    pub fn pending(&self) -> &[f64] {
        &self.grid[self.next..]
    }

    pub fn push_initial(&mut self, t0: f64, y0: [f64; N]) {
        while self.next < self.grid.len() && self.grid[self.next] <= t0 {
            self.samples.push((self.grid[self.next], y0));
            self.next += 1;
        }
    }
}

/// Fixed-step velocity Verlet for `x'' = a(t, x)`.
pub fn velocity_verlet<A>(
    mut accel: A,
    t0: f64,
    x0: f64,
    v0: f64,
    t1: f64,
    steps: usize,
) -> (f64, f64)
where
    A: FnMut(f64, f64) -> f64,
{
    let h = (t1 - t0) / steps as f64;
    let (mut x, mut v) = (x0, v0);
    let mut a = accel(t0, x);
    for n in 0..steps {
        let t = t0 + n as f64 * h;
        let v_half = v + 0.5 * h * a;
        x += h * v_half;
        a = accel(t + h, x);
        v = v_half + 0.5 * h * a;
    }
    (x, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn harmonic(w: f64) -> impl FnMut(f64, &[f64; 2]) -> Result<[f64; 2]> {
        move |_t, y| Ok([y[1], -w * w * y[0]])
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let w = 3.0;
        let s = Dopri5::with_tolerances(1e-11, 1e-14);
        let (y, stats) = s
            .integrate(harmonic(w), 0.0, [1.0, 0.0], 10.0, |_| {})
            .unwrap();
        assert_relative_eq!(y[0], (w * 10.0).cos(), epsilon = 1e-9);
        assert_relative_eq!(y[1], -w * (w * 10.0).sin(), epsilon = 1e-8);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn dense_output_matches_solution() {
        let w = 2.0;
        let s = Dopri5::with_tolerances(1e-10, 1e-13);
        let mut series = DenseSeries::new();
        s.integrate_dense(harmonic(w), 0.0, [0.0, w], 5.0, &mut series)
            .unwrap();
        for k in 0..=200 {
            let t = 5.0 * k as f64 / 200.0;
            let y = series.eval(t);
            assert!((y[0] - (w * t).sin()).abs() < 1e-8, "t = {t}");
        }
        assert_eq!(series.t_end(), Some(5.0));
    }

    #[test]
    fn fifth_order_convergence() {
        // halving a fixed step must shrink the global error by ~2^5
        let run = |h: f64| {
            let s = Dopri5 {
                rtol: 1.0,
                atol: 1.0,
                h_init: Some(h),
                h_max: h,
                ..Dopri5::default()
            };
            let (y, _) = s
                .integrate(harmonic(1.0), 0.0, [1.0, 0.0], 4.0, |_| {})
                .unwrap();
            (y[0] - 4f64.cos()).abs()
        };
        let e1 = run(0.2);
        let e2 = run(0.1);
        let order = (e1 / e2).log2();
        assert!(order > 4.5 && order < 6.5, "order {order}");
    }

    #[test]
    fn step_cap_respected() {
        let s = Dopri5::with_tolerances(1e-3, 1e-3).h_max(0.01);
        let mut max_h: f64 = 0.0;
        s.integrate(harmonic(1.0), 0.0, [1.0, 0.0], 1.0, |st| {
            max_h = max_h.max(st.h)
        })
        .unwrap();
        assert!(max_h <= 0.01 + 1e-15);
    }

    #[test]
    fn rhs_error_propagates() {
        let s = Dopri5::default();
        let r = s.integrate(
            |t, _y: &[f64; 1]| {
                if t > 0.5 {
                    Err(Error::Integration {
                        t,
                        reason: "boom".into(),
                    })
                } else {
                    Ok([1.0])
                }
            },
            0.0,
            [0.0],
            1.0,
            |_| {},
        );
        assert!(r.is_err());
    }

    #[test]
    fn verlet_is_second_order() {
        let w: f64 = 1.5;
        let exact = (w * 3.0).cos();
        let e1 = (velocity_verlet(|_, x| -w * w * x, 0.0, 1.0, 0.0, 3.0, 200).0 - exact).abs();
        let e2 = (velocity_verlet(|_, x| -w * w * x, 0.0, 1.0, 0.0, 3.0, 400).0 - exact).abs();
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
    }
}
