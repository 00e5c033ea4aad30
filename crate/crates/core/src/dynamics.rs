//! Phase flows of zoo members and the time-rescaling relation between them.
//!
//! Each member is `f(H0)`, so its flow is the standard flow sped up by the
//! constant `f'(E)` on the energy shell `H0 = E`. [`compare_flows`] checks
//! that directly: it rescales one trajectory's clock and overlays it on the
//! other.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZooError};
use crate::expr::Potential;
use crate::zoo::{chain_factor, eval_derivs, eval_h, standard_energy, HamiltonianSpec, PhasePoint, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
    Rk45,
    ImplicitMidpoint,
}

impl std::str::FromStr for Method {
    type Err = ZooError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "rk45" => Ok(Method::Rk45),
            "implicit_midpoint" | "midpoint" => Ok(Method::ImplicitMidpoint),
            other => Err(ZooError::Config(format!("unknown integrator `{other}`"))),
        }
    }
}

/// Integrator settings. `step` drives the fixed-step methods, `tol` the
/// adaptive one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integrator {
    pub method: Method,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_step() -> f64 {
    1e-3
}

fn default_tol() -> f64 {
    1e-10
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::rk4(default_step())
    }
}

impl Integrator {
    pub fn rk4(step: f64) -> Self {
        Integrator {
            method: Method::Rk4,
            step,
            tol: default_tol(),
        }
    }

    pub fn rk45(tol: f64) -> Self {
        Integrator {
            method: Method::Rk45,
            step: default_step(),
            tol,
        }
    }

    pub fn implicit_midpoint(step: f64) -> Self {
        Integrator {
            method: Method::ImplicitMidpoint,
            step,
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub p: f64,
    /// Value of the generating Hamiltonian at this sample.
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub spec: HamiltonianSpec,
    pub params: SystemParams,
    pub integrator: Integrator,
}

/// Result of overlaying two flows after rescaling time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaleReport {
    /// Predicted speed ratio `c_B / c_A` of flow B relative to flow A.
    pub factor: f64,
    /// Predicted `T_B / T_A`, the reciprocal of `|factor|`.
    pub predicted_period_ratio: f64,
    /// Measured `T_B / T_A` from zero crossings of `p`, when both orbits
    /// close often enough to measure.
    pub measured_period_ratio: Option<f64>,
    /// Largest `max(|Δx|, |Δp|)` between B and the rescaled A.
    pub max_deviation: f64,
}

fn vector_field(
    spec: &HamiltonianSpec,
    params: &SystemParams,
    pot: &Potential,
    x: f64,
    p: f64,
) -> Result<[f64; 2]> {
    let d = eval_derivs(spec, params, pot, PhasePoint::new(x, p))?;
    Ok([d.hp, -d.hx])
}

struct Flow<'a> {
    spec: &'a HamiltonianSpec,
    params: &'a SystemParams,
    pot: &'a Potential,
}

impl Flow<'_> {
    fn f(&self, t: f64, y: [f64; 2]) -> Result<[f64; 2]> {
        vector_field(self.spec, self.params, self.pot, y[0], y[1]).map_err(|e| match e {
            e if e.is_overflow_risk() => ZooError::IntegrationOverflow {
                t,
                source: Box::new(e),
            },
            other => other,
        })
    }

    fn sample(&self, t: f64, y: [f64; 2]) -> Result<Sample> {
        let h = eval_h(self.spec, self.params, self.pot, PhasePoint::new(y[0], y[1]))?;
        Ok(Sample {
            t,
            x: y[0],
            p: y[1],
            h,
        })
    }

    fn rk4_step(&self, t: f64, y: [f64; 2], h: f64) -> Result<[f64; 2]> {
        let k1 = self.f(t, y)?;
        let k2 = self.f(t + 0.5 * h, axpy(y, 0.5 * h, k1))?;
        let k3 = self.f(t + 0.5 * h, axpy(y, 0.5 * h, k2))?;
        let k4 = self.f(t + h, axpy(y, h, k3))?;
        Ok([
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ])
    }

    /// `y1 = y0 + h f((y0 + y1)/2)` by fixed-point iteration.
    fn midpoint_step(&self, t: f64, y: [f64; 2], h: f64) -> Result<[f64; 2]> {
        const TOL: f64 = 1e-12;
        const MAX_ITER: usize = 50;
        let mut next = axpy(y, h, self.f(t, y)?);
        for _ in 0..MAX_ITER {
            let mid = [0.5 * (y[0] + next[0]), 0.5 * (y[1] + next[1])];
            let cand = axpy(y, h, self.f(t + 0.5 * h, mid)?);
            let delta = (cand[0] - next[0]).abs().max((cand[1] - next[1]).abs());
            let scale = 1.0 + cand[0].abs().max(cand[1].abs());
            next = cand;
            if delta <= TOL * scale {
                return Ok(next);
            }
        }
        Err(ZooError::StepFailure {
            t,
            msg: format!("implicit midpoint did not converge in {MAX_ITER} iterations"),
        })
    }
}

fn axpy(y: [f64; 2], a: f64, k: [f64; 2]) -> [f64; 2] {
    [y[0] + a * k[0], y[1] + a * k[1]]
}

// Dormand–Prince 5(4) tableau.
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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn lin(y: [f64; 2], h: f64, terms: &[(f64, [f64; 2])]) -> [f64; 2] {
    let mut out = y;
    for (a, k) in terms {
        out[0] += h * a * k[0];
        out[1] += h * a * k[1];
    }
    out
}

fn integrate_adaptive(flow: &Flow, start: [f64; 2], t_end: f64, tol: f64) -> Result<Vec<Sample>> {
    let mut samples = vec![flow.sample(0.0, start)?];
    let mut t = 0.0;
    let mut y = start;
    let mut k1 = flow.f(t, y)?;
    let mut h = (t_end * 1e-3).clamp(1e-6, 0.01);
    while t < t_end {
        if t + h > t_end {
            h = t_end - t;
        }
        let k2 = flow.f(t + C2 * h, lin(y, h, &[(A21, k1)]))?;
        let k3 = flow.f(t + C3 * h, lin(y, h, &[(A31, k1), (A32, k2)]))?;
        let k4 = flow.f(t + C4 * h, lin(y, h, &[(A41, k1), (A42, k2), (A43, k3)]))?;
        let k5 = flow.f(
            t + C5 * h,
            lin(y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]),
        )?;
        let k6 = flow.f(
            t + h,
            lin(y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]),
        )?;
        let next = lin(y, h, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
        let k7 = flow.f(t + h, next)?;
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            // error per unit step, so the global error stays near tol over long spans
            let scale = (tol + tol * y[i].abs().max(next[i].abs())) * h.min(1.0);
            err = err.max((e / scale).abs());
        }
        if err <= 1.0 {
            t = if t_end - (t + h) <= 1e-14 * t_end { t_end } else { t + h };
            y = next;
            k1 = k7;
            samples.push(flow.sample(t, y)?);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.25)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(ZooError::StepFailure {
                t,
                msg: format!("adaptive step underflow (h = {h:e})"),
            });
        }
    }
    Ok(samples)
}

/// Integrates `dx/dt = ∂H/∂p, dp/dt = -∂H/∂x` from `start` over `[0, t_end]`.
///
/// Fixed-step methods use a uniform grid that lands exactly on `t_end`.
pub fn integrate(
    spec: &HamiltonianSpec,
    params: &SystemParams,
    pot: &Potential,
    start: PhasePoint,
    t_end: f64,
    integrator: Integrator,
) -> Result<Trajectory> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(ZooError::Config(format!("t_end must be finite and >= 0, got {t_end}")));
    }
    let flow = Flow { spec, params, pot };
    let y0 = [start.x, start.p];
    // validates the start point against the guard before any stepping
    let first = flow.sample(0.0, y0)?;
    let samples = if t_end == 0.0 {
        vec![first]
    } else {
        match integrator.method {
            Method::Rk45 => {
                if integrator.tol.is_nan() || integrator.tol <= 0.0 {
                    return Err(ZooError::Config("tolerance must be positive".into()));
                }
                integrate_adaptive(&flow, y0, t_end, integrator.tol)?
            }
            Method::Rk4 | Method::ImplicitMidpoint => {
                if integrator.step.is_nan() || integrator.step <= 0.0 {
                    return Err(ZooError::Config("step must be positive".into()));
                }
                let n = (t_end / integrator.step).ceil().max(1.0) as usize;
                let h = t_end / n as f64;
                let mut samples = Vec::with_capacity(n + 1);
                samples.push(first);
                let mut y = y0;
                for i in 0..n {
                    let t = i as f64 * h;
                    y = match integrator.method {
                        Method::Rk4 => flow.rk4_step(t, y, h)?,
                        _ => flow.midpoint_step(t, y, h)?,
                    };
                    let t_next = if i + 1 == n { t_end } else { (i + 1) as f64 * h };
                    samples.push(flow.sample(t_next, y)?);
                }
                samples
            }
        }
    };
    Ok(Trajectory {
        samples,
        spec: spec.clone(),
        params: *params,
        integrator,
    })
}

impl Trajectory {
    pub fn start(&self) -> PhasePoint {
        let s = self.samples[0];
        PhasePoint::new(s.x, s.p)
    }

    pub fn end(&self) -> PhasePoint {
        let s = self.samples[self.samples.len() - 1];
        PhasePoint::new(s.x, s.p)
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }

    /// Largest `|H - H(start)| / max(1, |H(start)|)` over all samples.
    pub fn max_relative_drift(&self) -> f64 {
        let h0 = self.samples[0].h;
        let scale = h0.abs().max(1.0);
        self.samples
            .iter()
            .map(|s| (s.h - h0).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// Same drift measure for the standard energy `H0`.
    pub fn max_standard_energy_drift(&self, pot: &Potential) -> Result<f64> {
        let e = |s: &Sample| standard_energy(&self.params, pot, PhasePoint::new(s.x, s.p));
        let e0 = e(&self.samples[0])?;
        let scale = e0.abs().max(1.0);
        let mut worst: f64 = 0.0;
        for s in &self.samples {
            worst = worst.max((e(s)? - e0).abs() / scale);
        }
        Ok(worst)
    }

    /// Chain factor `f'(E)` at the standard energy of the first sample.
    pub fn chain_factor(&self, pot: &Potential) -> Result<f64> {
        let e = standard_energy(&self.params, pot, self.start())?;
        chain_factor(&self.spec, &self.params, e)
    }

    /// Uniform step size, or `None` if the grid is not uniform.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.samples.len() < 2 {
            return None;
        }
        let h = self.samples[1].t - self.samples[0].t;
        let uniform = self
            .samples
            .windows(2)
            .all(|w| ((w[1].t - w[0].t) - h).abs() <= 1e-9 * h);
        uniform.then_some(h)
    }

    /// Cubic Hermite interpolation in `t`, with end slopes taken from the
    /// exact vector field.
    pub fn interpolate(&self, pot: &Potential, t: f64) -> Result<PhasePoint> {
        let n = self.samples.len();
        let (first, last) = (self.samples[0].t, self.samples[n - 1].t);
        if n == 1 || t < first || t > last {
            if n >= 1 && t == first {
                return Ok(self.start());
            }
            return Err(ZooError::Config(format!(
                "t = {t} outside trajectory range [{first}, {last}]"
            )));
        }
        let i = self
            .samples
            .partition_point(|s| s.t <= t)
            .clamp(1, n - 1);
        let (a, b) = (self.samples[i - 1], self.samples[i]);
        let fa = vector_field(&self.spec, &self.params, pot, a.x, a.p)?;
        let fb = vector_field(&self.spec, &self.params, pot, b.x, b.p)?;
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        Ok(PhasePoint::new(
            hermite(s, h, a.x, b.x, fa[0], fb[0]),
            hermite(s, h, a.p, b.p, fa[1], fb[1]),
        ))
    }

    /// Times where `p` changes sign, located on the Hermite cubic.
    pub fn momentum_zero_crossings(&self, pot: &Potential) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (i, w) in self.samples.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let crosses = (a.p < 0.0 && b.p > 0.0) || (a.p > 0.0 && b.p < 0.0);
            // exact zeros at interior samples count once; the start point never does
            let exact = b.p == 0.0 && i + 2 < self.samples.len() && {
                let c = self.samples[i + 2].p;
                (a.p < 0.0 && c > 0.0) || (a.p > 0.0 && c < 0.0)
            };
            if exact {
                out.push(b.t);
                continue;
            }
            if !crosses {
                continue;
            }
            let fa = vector_field(&self.spec, &self.params, pot, a.x, a.p)?;
            let fb = vector_field(&self.spec, &self.params, pot, b.x, b.p)?;
            let h = b.t - a.t;
            let p_at = |s: f64| hermite(s, h, a.p, b.p, fa[1], fb[1]);
            let (mut lo, mut hi) = (0.0, 1.0);
            let lo_sign = a.p.signum();
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if p_at(mid).signum() == lo_sign {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(a.t + 0.5 * (lo + hi) * h);
        }
        Ok(out)
    }

    /// Orbit period from zero crossings of `p`: crossings alternate in
    /// direction, so consecutive ones are half a period apart.
    pub fn measure_period(&self, pot: &Potential) -> Result<Option<f64>> {
        let c = self.momentum_zero_crossings(pot)?;
        if c.len() < 3 {
            return Ok(None);
        }
        let half = (c[c.len() - 1] - c[0]) / (c.len() - 1) as f64;
        Ok(Some(2.0 * half))
    }

    /// Writes `t,x,p,H` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x,p,H")?;
        for s in &self.samples {
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", s.t, s.x, s.p, s.h)?;
        }
        Ok(())
    }
}

/// Reads rows written by [`Trajectory::write_csv`].
pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<Sample>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| ZooError::Config(e.to_string()))?
        .unwrap_or_default();
    if header.trim() != "t,x,p,H" {
        return Err(ZooError::Config(format!("unexpected CSV header `{header}`")));
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| ZooError::Config(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        match vals.as_deref() {
            Ok([t, x, p, h]) => out.push(Sample {
                t: *t,
                x: *x,
                p: *p,
                h: *h,
            }),
            _ => return Err(ZooError::Config(format!("bad CSV row {}: `{line}`", n + 2))),
        }
    }
    Ok(out)
}

fn hermite(s: f64, h: f64, ya: f64, yb: f64, da: f64, db: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * ya
        + (s3 - 2.0 * s2 + s) * h * da
        + (-2.0 * s3 + 3.0 * s2) * yb
        + (s3 - s2) * h * db
}

/// Largest `|ẍ - c²(-V'(x)/m)|` over interior samples, with `ẍ` from second
/// differences and `c` the trajectory's chain factor.
pub fn newton_residual(traj: &Trajectory, pot: &Potential) -> Result<f64> {
    let n = traj.samples.len();
    if n < 5 {
        return Err(ZooError::Config(format!("need at least 5 samples, got {n}")));
    }
    let h = traj
        .uniform_step()
        .ok_or_else(|| ZooError::Config("newton residual needs a uniform grid".into()))?;
    let c = traj.chain_factor(pot)?;
    let m = traj.params.m;
    let mut worst: f64 = 0.0;
    for w in traj.samples.windows(3) {
        let acc = (w[2].x - 2.0 * w[1].x + w[0].x) / (h * h);
        let target = -c * c * pot.force_gradient(w[1].x)? / m;
        worst = worst.max((acc - target).abs());
    }
    Ok(worst)
}

/// Integrates both flows from `start` and overlays B on A after mapping
/// B's clock through the predicted speed ratio.
pub fn compare_flows(
    spec_a: &HamiltonianSpec,
    spec_b: &HamiltonianSpec,
    params: &SystemParams,
    pot: &Potential,
    start: PhasePoint,
    t_end: f64,
    integrator: Integrator,
) -> Result<RescaleReport> {
    let e = standard_energy(params, pot, start)?;
    let ca = chain_factor(spec_a, params, e)?;
    let cb = chain_factor(spec_b, params, e)?;
    if ca == 0.0 {
        return Err(ZooError::Config("flow A is stationary on this energy shell".into()));
    }
    let factor = cb / ca;
    let traj_b = integrate(spec_b, params, pot, start, t_end, integrator)?;
    // every zoo member is even in p, so A run backwards is A from (x, -p)
    // with the momentum flipped
    let flip = if factor < 0.0 { -1.0 } else { 1.0 };
    let a_start = PhasePoint::new(start.x, flip * start.p);
    let traj_a = integrate(spec_a, params, pot, a_start, t_end * factor.abs().max(1.0), integrator)?;
    let mut worst: f64 = 0.0;
    for s in &traj_b.samples {
        let a = traj_a.interpolate(pot, s.t * factor.abs())?;
        worst = worst.max((a.x - s.x).abs()).max((flip * a.p - s.p).abs());
    }
    let measured = match (traj_a.measure_period(pot)?, traj_b.measure_period(pot)?) {
        (Some(ta), Some(tb)) => Some(tb / ta),
        _ => None,
    };
    Ok(RescaleReport {
        factor,
        predicted_period_ratio: 1.0 / factor.abs(),
        measured_period_ratio: measured,
        max_deviation: worst,
    })
}

/// `E^(k-1) / ((k-1)! (m λ^2)^(k-1))`: speed of the `k`-th term's clock
/// relative to the standard one in the series flow decomposition.
pub fn dt_k_factor(k: usize, energy: f64, m: f64, lambda: f64) -> Result<f64> {
    if k == 0 {
        return Err(ZooError::Config("dt_k is defined for k >= 1".into()));
    }
    let ratio = energy / (m * lambda * lambda);
    Ok((1..k).fold(1.0, |acc, i| acc * ratio / i as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_potential;
    use crate::zoo::Sign;
    use std::f64::consts::PI;

    fn sho() -> Potential {
        parse_potential("0.5*x^2").unwrap()
    }

    #[test]
    fn sho_one_period_rk4() {
        let p = SystemParams::default();
        let t = integrate(
            &HamiltonianSpec::standard(),
            &p,
            &sho(),
            PhasePoint::new(1.0, 0.0),
            2.0 * PI,
            Integrator::rk4(1e-3),
        )
        .unwrap();
        let end = t.end();
        assert!((end.x - 1.0).abs() < 1e-6 && end.p.abs() < 1e-6, "{end:?}");
        assert_eq!(t.samples.last().unwrap().t, 2.0 * PI);
        assert!(t.uniform_step().is_some());
    }

    #[test]
    fn free_particle() {
        let free = parse_potential("0").unwrap();
        let p = SystemParams::default();
        for integ in [Integrator::rk4(0.01), Integrator::rk45(1e-10), Integrator::implicit_midpoint(0.01)] {
            let t = integrate(
                &HamiltonianSpec::standard(),
                &p,
                &free,
                PhasePoint::new(0.0, 1.0),
                1.0,
                integ,
            )
            .unwrap();
            assert!((t.end().x - 1.0).abs() < 1e-12, "{integ:?}");
        }
        let t = integrate(
            &HamiltonianSpec::standard(),
            &p,
            &free,
            PhasePoint::new(0.0, 1.0),
            1.0,
            Integrator::rk4(0.01),
        )
        .unwrap();
        assert!(newton_residual(&t, &free).unwrap() < 1e-9);
    }

    #[test]
    fn zero_duration_gives_one_sample() {
        let t = integrate(
            &HamiltonianSpec::standard(),
            &SystemParams::default(),
            &sho(),
            PhasePoint::new(1.0, 0.0),
            0.0,
            Integrator::rk4(1e-3),
        )
        .unwrap();
        assert_eq!(t.samples.len(), 1);
        assert!(integrate(
            &HamiltonianSpec::standard(),
            &SystemParams::default(),
            &sho(),
            PhasePoint::new(1.0, 0.0),
            -1.0,
            Integrator::rk4(1e-3),
        )
        .is_err());
    }

    #[test]
    fn multiplicative_period_is_stretched() {
        let spec = HamiltonianSpec::cabbatonian(&[2.0], Sign::Minus).unwrap();
        let t = integrate(
            &spec,
            &SystemParams::default(),
            &sho(),
            PhasePoint::new(1.0, 0.0),
            30.0,
            Integrator::rk45(1e-11),
        )
        .unwrap();
        let period = t.measure_period(&sho()).unwrap().unwrap();
        assert!((period - 2.0 * PI * (0.125f64).exp()).abs() < 1e-6, "{period}");
    }

    #[test]
    fn newton_residual_standard_and_rescaled() {
        let p = SystemParams::default();
        let t = integrate(
            &HamiltonianSpec::standard(),
            &p,
            &sho(),
            PhasePoint::new(1.0, 0.0),
            2.0 * PI,
            Integrator::rk4(1e-3),
        )
        .unwrap();
        assert!(newton_residual(&t, &sho()).unwrap() < 1e-5);

        let spec = HamiltonianSpec::cabbatonian(&[2.0], Sign::Minus).unwrap();
        let t1 = integrate(&spec, &p, &sho(), PhasePoint::new(1.0, 0.0), 8.0, Integrator::rk4(1e-3)).unwrap();
        assert!((t1.chain_factor(&sho()).unwrap() - (-0.125f64).exp()).abs() < 1e-15);
        assert!(newton_residual(&t1, &sho()).unwrap() < 1e-4);
    }

    #[test]
    fn power_base_factor() {
        // E = 1 at (1, 1) on the oscillator
        let r = compare_flows(
            &HamiltonianSpec::standard(),
            &HamiltonianSpec::power_base(2),
            &SystemParams::default(),
            &sho(),
            PhasePoint::new(1.0, 1.0),
            3.0,
            Integrator::rk45(1e-10),
        )
        .unwrap();
        assert!((r.factor - 2.0).abs() < 1e-15);
        assert!(r.max_deviation < 1e-6, "{r:?}");
    }

    #[test]
    fn identity_comparison() {
        let r = compare_flows(
            &HamiltonianSpec::standard(),
            &HamiltonianSpec::standard(),
            &SystemParams::default(),
            &sho(),
            PhasePoint::new(1.0, 0.0),
            15.0,
            Integrator::rk45(1e-10),
        )
        .unwrap();
        assert_eq!(r.factor, 1.0);
        assert!(r.max_deviation < 1e-12);
        assert!((r.measured_period_ratio.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dt_k_examples() {
        assert_eq!(dt_k_factor(1, 7.0, 1.0, 2.0).unwrap(), 1.0);
        assert_eq!(dt_k_factor(2, 1.0, 1.0, 2.0).unwrap(), 0.25);
        assert_eq!(dt_k_factor(3, 2.0, 1.0, 2.0).unwrap(), 0.125);
        assert!(dt_k_factor(0, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn overflow_mid_integration_reports_time() {
        // start just inside the guard; the huge speed throws the first RK
        // stage off the energy shell and past it
        let spec = HamiltonianSpec::cabbatonian(&[1.0], Sign::Plus).unwrap();
        let pot = sho();
        let err = integrate(
            &spec,
            &SystemParams::default(),
            &pot,
            PhasePoint::new(0.0, 9.99),
            100.0,
            Integrator::rk4(1e-3),
        )
        .unwrap_err();
        assert!(matches!(err, ZooError::IntegrationOverflow { .. }), "{err:?}");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = integrate(
            &HamiltonianSpec::cabbatonian(&[2.0], Sign::Minus).unwrap(),
            &SystemParams::default(),
            &sho(),
            PhasePoint::new(0.3, -1.1),
            1.0,
            Integrator::rk45(1e-9),
        )
        .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t.samples);
    }
}
