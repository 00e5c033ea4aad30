//! The Lagrangian hierarchy `L_j` dual to the Cabbatonian on the `e^{-E/mλ²}`
//! branch, realised with nested exponential kernels and a velocity quadrature
//! for the momentum.
//!
//! With `E(q, x) = m q²/2 + V(x)` and `Ω_i = m λ_i²` the kernels are
//!
//! ```text
//! E_1 = exp(-E / Ω_1)
//! E_i = exp(Ω_{i-1} E_{i-1} / Ω_i)            i >= 2
//! p_j = m ∫_0^v Π_{i<=j} E_i(q, x) dq
//! L_j = Ω_j E_j(v, x) + v p_j                 L_0 = m v²/2 - V(x)
//! ```
//!
//! and `v p_j - L_j = -Ω_j E_j(v, x)`, the Cabbatonian evaluated on the
//! energy shell `H0 = E(v, x)`.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Result, ZooError};
use crate::exec::Exec;
use crate::expr::Potential;
use crate::quad::{adaptive_simpson, QuadTolerance};
use crate::zoo::{eval_derivs, HamiltonianSpec, PhasePoint, Sign, SystemParams, EXPONENT_GUARD};

/// Step used for every finite difference of `L_j` in this module.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityPoint {
    pub x: f64,
    pub v: f64,
}

impl VelocityPoint {
    pub fn new(x: f64, v: f64) -> Self {
        VelocityPoint { x, v }
    }
}

#[derive(Debug, Clone)]
pub struct LagrangianSpec {
    lambdas: Vec<f64>,
    params: SystemParams,
    pot: Potential,
    quad: QuadTolerance,
}

impl LagrangianSpec {
    pub fn new(lambdas: &[f64], params: SystemParams, pot: Potential) -> Result<Self> {
        if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(ZooError::InvalidSpec(format!("lambda must be positive, got {l}")));
        }
        Ok(LagrangianSpec {
            lambdas: lambdas.to_vec(),
            params,
            pot,
            quad: QuadTolerance::default(),
        })
    }

    pub fn with_quadrature(mut self, quad: QuadTolerance) -> Self {
        self.quad = quad;
        self
    }

    pub fn level(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn potential(&self) -> &Potential {
        &self.pot
    }

    /// The same hierarchy cut back to its first `level` lambdas.
    pub fn truncated(&self, level: usize) -> Self {
        let mut s = self.clone();
        s.lambdas.truncate(level);
        s
    }

    pub fn with_lambdas(&self, lambdas: &[f64]) -> Result<Self> {
        LagrangianSpec::new(lambdas, self.params, self.pot.clone()).map(|s| s.with_quadrature(self.quad))
    }

    /// The Cabbatonian this hierarchy is dual to.
    pub fn hamiltonian(&self) -> Result<HamiltonianSpec> {
        if self.lambdas.is_empty() {
            Ok(HamiltonianSpec::standard())
        } else {
            HamiltonianSpec::cabbatonian(&self.lambdas, Sign::Minus)
        }
    }

    fn omega(&self, i: usize) -> f64 {
        self.params.m * self.lambdas[i] * self.lambdas[i]
    }

    fn energy(&self, q: f64, x: f64) -> Result<f64> {
        Ok(0.5 * self.params.m * q * q + self.pot.value(x)?)
    }

    /// `(E_j, Π_{i<=j} E_i)` at `(q, x)` for `j = level`.
    fn kernels(&self, q: f64, x: f64, level: usize) -> Result<(f64, f64)> {
        let e = self.energy(q, x)?;
        self.kernels_at_energy(e, level)
    }

    fn kernels_at_energy(&self, e: f64, level: usize) -> Result<(f64, f64)> {
        let mut last = f64::NAN;
        let mut product = 1.0;
        for i in 0..level {
            let arg = if i == 0 {
                -e / self.omega(0)
            } else {
                self.omega(i - 1) * last / self.omega(i)
            };
            if arg.abs() > EXPONENT_GUARD {
                return Err(ZooError::OverflowRisk {
                    level: i + 1,
                    argument: arg,
                    limit: EXPONENT_GUARD,
                });
            }
            last = arg.exp();
            product *= last;
        }
        Ok((last, product))
    }

    /// Nested kernel `E_level(q, x)` for `1 <= level <= j`.
    pub fn energy_kernel(&self, level: usize, x: f64, q: f64) -> Result<f64> {
        if level == 0 || level > self.level() {
            return Err(ZooError::InvalidSpec(format!(
                "kernel level must be in 1..={}, got {level}",
                self.level()
            )));
        }
        Ok(self.kernels(q, x, level)?.0)
    }

    fn kernel_integral(&self, pt: VelocityPoint) -> Result<f64> {
        let j = self.level();
        let failure = RefCell::new(None);
        let value = adaptive_simpson(
            |q| match self.kernels(q, pt.x, j) {
                Ok((_, prod)) => prod,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            },
            0.0,
            pt.v,
            self.quad,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        value
    }

    /// Canonical momentum `p_j = m ∫_0^v Π E_i dq`.
    pub fn momentum(&self, pt: VelocityPoint) -> Result<f64> {
        if self.level() == 0 {
            return Ok(self.params.m * pt.v);
        }
        Ok(self.params.m * self.kernel_integral(pt)?)
    }

    pub fn lagrangian(&self, pt: VelocityPoint) -> Result<f64> {
        let j = self.level();
        if j == 0 {
            return Ok(0.5 * self.params.m * pt.v * pt.v - self.pot.value(pt.x)?);
        }
        let (top, _) = self.kernels(pt.v, pt.x, j)?;
        Ok(self.omega(j - 1) * top + pt.v * self.momentum(pt)?)
    }

    /// Energy function `v p_j - L_j` predicted by the dual Hamiltonian: the
    /// Cabbatonian evaluated at `H0 = E(v, x)`.
    pub fn dual_energy(&self, pt: VelocityPoint) -> Result<f64> {
        let e = self.energy(pt.v, pt.x)?;
        Ok(self.hamiltonian()?.energy_jet(&self.params, e)?.value)
    }

    /// `L_j - (p_j v - H_j)` with `H_j` taken on the shell `H0 = E(v, x)`.
    pub fn legendre_residual(&self, pt: VelocityPoint) -> Result<f64> {
        let l = self.lagrangian(pt)?;
        let p = self.momentum(pt)?;
        Ok(l - (p * pt.v - self.dual_energy(pt)?))
    }

    /// `|legendre_residual| / (1 + |L_j|)`.
    pub fn legendre_relative_residual(&self, pt: VelocityPoint) -> Result<f64> {
        let l = self.lagrangian(pt)?;
        Ok(self.legendre_residual(pt)?.abs() / (1.0 + l.abs()))
    }

    /// `L_j - (p_j v - H_j(p_j, x))` with `H_j` evaluated at the canonical
    /// momentum through `H0 = p_j²/2m + V`. Only zero for `j = 0`: the
    /// hierarchy's energy function depends on velocity through `E(v, x)`,
    /// not through `p_j`.
    pub fn canonical_legendre_gap(&self, pt: VelocityPoint) -> Result<f64> {
        let l = self.lagrangian(pt)?;
        let p = self.momentum(pt)?;
        let h = crate::zoo::eval_h(&self.hamiltonian()?, &self.params, &self.pot, PhasePoint::new(pt.x, p))?;
        Ok(l - (p * pt.v - h))
    }

    /// `∂L_j/∂v` by central differences.
    pub fn momentum_fd(&self, pt: VelocityPoint) -> Result<f64> {
        let h = FD_STEP;
        let up = self.lagrangian(VelocityPoint::new(pt.x, pt.v + h))?;
        let down = self.lagrangian(VelocityPoint::new(pt.x, pt.v - h))?;
        Ok((up - down) / (2.0 * h))
    }

    /// `∂L_j/∂x` by central differences.
    pub fn force_fd(&self, pt: VelocityPoint) -> Result<f64> {
        let h = FD_STEP;
        let up = self.lagrangian(VelocityPoint::new(pt.x + h, pt.v))?;
        let down = self.lagrangian(VelocityPoint::new(pt.x - h, pt.v))?;
        Ok((up - down) / (2.0 * h))
    }

    /// Largest Euler–Lagrange residual `∂L/∂x - d/dt ∂L/∂v` along `traj`.
    ///
    /// A zoo flow runs `f'(E)` times faster than the standard clock, so the
    /// trajectory's time axis is first mapped to standard time
    /// `t0 = f'(E) t` with `f'` the trajectory's own chain factor. Velocities
    /// come from the exact vector field; both partials of `L_j` and the time
    /// derivative are central differences.
    pub fn euler_lagrange_residual(&self, traj: &Trajectory, exec: Exec) -> Result<f64> {
        let n = traj.samples.len();
        if n < 5 {
            return Err(ZooError::Config(format!("need at least 5 samples, got {n}")));
        }
        let h = traj
            .uniform_step()
            .ok_or_else(|| ZooError::Config("Euler-Lagrange check needs a uniform grid".into()))?;
        let c = traj.chain_factor(&self.pot)?;
        let dt0 = c * h;
        let partials: Vec<Result<(f64, f64)>> = exec.map(&traj.samples, |s| {
            let d = eval_derivs(&traj.spec, &traj.params, &self.pot, PhasePoint::new(s.x, s.p))?;
            let pt = VelocityPoint::new(s.x, d.hp / c);
            Ok((self.force_fd(pt)?, self.momentum_fd(pt)?))
        });
        let partials: Vec<(f64, f64)> = partials.into_iter().collect::<Result<_>>()?;
        let worst = partials
            .windows(3)
            .map(|w| (w[1].0 - (w[2].1 - w[0].1) / (2.0 * dt0)).abs())
            .fold(0.0, f64::max);
        Ok(worst)
    }

    /// `|L_j - Ω_j - L_{j-1}|` as the outermost `λ_j` runs over `grid`, with
    /// the inner lambdas of `self` held fixed. `self` supplies `λ_1..λ_{j-1}`.
    pub fn limit_errors(&self, pt: VelocityPoint, grid: &[f64]) -> Result<Vec<f64>> {
        let inner = self.lagrangian(pt)?;
        grid.iter()
            .map(|&lambda| {
                let mut lambdas = self.lambdas.clone();
                lambdas.push(lambda);
                let outer = self.with_lambdas(&lambdas)?;
                let omega = self.params.m * lambda * lambda;
                Ok((outer.lagrangian(pt)? - omega - inner).abs())
            })
            .collect()
    }
}

/// Closed-form `k`-th harmonic-oscillator Lagrangian of the series expansion:
/// `Σ_{i=0}^{k} k! T^{k-i} V^i / ((k-i)! i! (2k - 2i - 1))`.
pub fn sho_series_lagrangian(k: usize, m: f64, spring: f64, pt: VelocityPoint) -> Result<f64> {
    if k == 0 {
        return Err(ZooError::InvalidSpec("series Lagrangian is defined for k >= 1".into()));
    }
    let t = 0.5 * m * pt.v * pt.v;
    let v = 0.5 * spring * pt.x * pt.x;
    let mut binom = 1.0;
    let mut sum = 0.0;
    for i in 0..=k {
        if i > 0 {
            binom *= (k - i + 1) as f64 / i as f64;
        }
        let denom = (2 * k) as f64 - (2 * i + 1) as f64;
        sum += binom * t.powi((k - i) as i32) * v.powi(i as i32) / denom;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_potential;

    fn sho_spec(lambdas: &[f64]) -> LagrangianSpec {
        LagrangianSpec::new(lambdas, SystemParams::default(), parse_potential("0.5*x^2").unwrap()).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let free = LagrangianSpec::new(&[2.0], SystemParams::default(), parse_potential("0").unwrap()).unwrap();
        assert_eq!(free.energy_kernel(1, 0.3, 0.0).unwrap(), 1.0);
        let s = sho_spec(&[2.0]);
        assert!((s.energy_kernel(1, 1.0, 1.0).unwrap() - 0.778_800_783_071_404_9).abs() < 1e-15);
        let s2 = sho_spec(&[2.0, 3.0]);
        // e^{(4/9) e^{-1/4}} at E = 1
        assert!((s2.energy_kernel(2, 1.0, 1.0).unwrap() - 1.413_591_574_038_566_5).abs() < 1e-14);
        assert!(s2.energy_kernel(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn momentum_and_lagrangian_examples() {
        let s0 = sho_spec(&[]);
        assert_eq!(s0.momentum(VelocityPoint::new(1.0, 0.7)).unwrap(), 0.7);
        assert_eq!(s0.lagrangian(VelocityPoint::new(1.0, 1.0)).unwrap(), 0.0);

        let s = sho_spec(&[2.0]);
        let pt = VelocityPoint::new(1.0, 1.0);
        // mpmath quadrature: ∫_0^1 e^{-(q²/2 + 1/2)/4} dq
        assert!((s.momentum(pt).unwrap() - 0.847_065_038_408_663_1).abs() < 1e-11);
        assert!((s.lagrangian(pt).unwrap() - 3.962_268_170_694_282_6).abs() < 1e-11);
        assert_eq!(s.momentum(VelocityPoint::new(0.4, 0.0)).unwrap(), 0.0);
        let at_rest = s.lagrangian(VelocityPoint::new(0.8, 0.0)).unwrap();
        assert!((at_rest - 4.0 * (-0.32f64 / 4.0).exp()).abs() < 1e-14);
    }

    #[test]
    fn legendre_identity_and_canonical_gap() {
        let s0 = sho_spec(&[]);
        assert!(s0.legendre_residual(VelocityPoint::new(0.3, -1.2)).unwrap().abs() < 1e-15);
        assert!(s0.canonical_legendre_gap(VelocityPoint::new(0.3, -1.2)).unwrap().abs() < 1e-15);

        let s2 = sho_spec(&[2.0, 3.0]);
        let pt = VelocityPoint::new(0.5, 0.8);
        assert!(s2.legendre_relative_residual(pt).unwrap() < 1e-8);
        assert!((s2.lagrangian(pt).unwrap() - 14.314_276_725_972_167).abs() < 1e-10);

        let s1 = sho_spec(&[2.0]);
        let gap = s1.canonical_legendre_gap(VelocityPoint::new(1.0, 1.0)).unwrap();
        assert!((gap + 0.111_963_225_912_015_68).abs() < 1e-10, "{gap}");
    }

    #[test]
    fn momentum_is_velocity_derivative() {
        let s = sho_spec(&[2.0, 3.0]);
        for (x, v) in [(0.1, 0.5), (-1.2, 1.7), (0.9, -0.6)] {
            let pt = VelocityPoint::new(x, v);
            let p = s.momentum(pt).unwrap();
            assert!((s.momentum_fd(pt).unwrap() - p).abs() <= 1e-6 * p.abs().max(1.0));
        }
    }

    #[test]
    fn series_lagrangians_low_orders() {
        let pt = VelocityPoint::new(0.7, 1.3);
        let t = 0.5 * 1.3f64 * 1.3;
        let v = 0.5 * 2.0 * 0.7f64 * 0.7;
        assert!((sho_series_lagrangian(1, 1.0, 2.0, pt).unwrap() - (t - v)).abs() < 1e-15);
        let l2 = t * t / 3.0 + 2.0 * t * v - v * v;
        assert!((sho_series_lagrangian(2, 1.0, 2.0, pt).unwrap() - l2).abs() < 1e-14);
        assert!(sho_series_lagrangian(0, 1.0, 2.0, pt).is_err());
    }

    #[test]
    fn guard_applies_to_kernels() {
        let s = LagrangianSpec::new(&[0.1], SystemParams::default(), parse_potential("0.5*x^2").unwrap()).unwrap();
        assert!(matches!(s.lagrangian(VelocityPoint::new(2.0, 0.0)), Err(ZooError::OverflowRisk { .. })));
    }
}
