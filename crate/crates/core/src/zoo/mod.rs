//! The Newton-equivalent Hamiltonian families.
//!
//! Every member of the zoo is a scalar function `f` of the standard energy
//! `H0 = p^2/2m + V(x)`. The families differ only in how `f` is built, so
//! each one is evaluated as a second-order jet `(f, f', f'')` at `H0` and
//! the phase-space partials follow from the chain rule:
//!
//! ```text
//! dH/dx   = f' V'            d2H/dp2  = f'' (p/m)^2 + f'/m
//! dH/dp   = f' p/m           d2H/dpdx = f'' (p/m) V'
//! ```

mod pascal;
mod series;

pub use pascal::{pascal_row, sierpinski_mask, ParityMask, PASCAL_MAX_ROW};
pub use series::{compose_series, series_coeffs, CoeffTable};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZooError};
use crate::expr::Potential;

/// Largest magnitude any nested exponent argument may take.
pub const EXPONENT_GUARD: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub m: f64,
}

impl SystemParams {
    pub fn new(m: f64) -> Result<Self> {
        if m > 0.0 && m.is_finite() {
            Ok(SystemParams { m })
        } else {
            Err(ZooError::InvalidSpec(format!("mass must be positive, got {m}")))
        }
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams { m: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Standard,
    Cabbatonian,
    Sigma,
    TruncatedSeries,
    PowerBase,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Standard => "standard",
            Family::Cabbatonian => "cabbatonian",
            Family::Sigma => "sigma",
            Family::TruncatedSeries => "truncated_series",
            Family::PowerBase => "power_base",
        }
    }
}

/// Branch selector for the `±` in the nested exponentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Sign {
    #[default]
    Minus,
    Plus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }

    fn from_int(s: i64) -> Result<Self> {
        match s {
            -1 => Ok(Sign::Minus),
            1 => Ok(Sign::Plus),
            other => Err(ZooError::InvalidSpec(format!("sign must be +1 or -1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(x: f64, p: f64) -> Self {
        PhasePoint { x, p }
    }
}

/// Value and first/second partials of a Hamiltonian at one phase point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HDerivs {
    pub h: f64,
    pub hx: f64,
    pub hp: f64,
    pub hpp: f64,
    pub hpx: f64,
}

/// `(f, f', f'')` of an energy map at a given standard energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    fn identity(e: f64) -> Self {
        Jet {
            value: e,
            d1: 1.0,
            d2: 0.0,
        }
    }
}

/// One member of the zoo. Construct through [`HamiltonianSpec::new`] or the
/// family shortcuts so the invariants are checked once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecJson", into = "SpecJson")]
pub struct HamiltonianSpec {
    family: Family,
    lambdas: Vec<f64>,
    sigma: Option<f64>,
    sign: Sign,
    order: Option<usize>,
    exponent: Option<u32>,
}

impl HamiltonianSpec {
    pub fn new(
        family: Family,
        lambdas: Vec<f64>,
        sigma: Option<f64>,
        sign: Sign,
        order: Option<usize>,
        exponent: Option<u32>,
    ) -> Result<Self> {
        let spec = HamiltonianSpec {
            family,
            lambdas,
            sigma,
            sign,
            order,
            exponent,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn standard() -> Self {
        HamiltonianSpec {
            family: Family::Standard,
            lambdas: Vec::new(),
            sigma: None,
            sign: Sign::Minus,
            order: None,
            exponent: None,
        }
    }

    pub fn cabbatonian(lambdas: &[f64], sign: Sign) -> Result<Self> {
        Self::new(Family::Cabbatonian, lambdas.to_vec(), None, sign, None, None)
    }

    pub fn sigma(lambdas: &[f64], sigma: f64, sign: Sign) -> Result<Self> {
        Self::new(Family::Sigma, lambdas.to_vec(), Some(sigma), sign, None, None)
    }

    pub fn truncated_series(lambdas: &[f64], order: usize, sign: Sign) -> Result<Self> {
        Self::new(
            Family::TruncatedSeries,
            lambdas.to_vec(),
            None,
            sign,
            Some(order),
            None,
        )
    }

    pub fn power_base(exponent: u32) -> Self {
        HamiltonianSpec {
            family: Family::PowerBase,
            lambdas: Vec::new(),
            sigma: None,
            sign: Sign::Minus,
            order: None,
            exponent: Some(exponent),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ZooError::InvalidSpec(msg));
        if let Some(l) = self.lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return bad(format!("lambda must be positive and finite, got {l}"));
        }
        match self.family {
            Family::Standard | Family::PowerBase if !self.lambdas.is_empty() => {
                return bad(format!("{} takes no lambdas", self.family.name()))
            }
            Family::TruncatedSeries if self.lambdas.is_empty() => {
                return bad("truncated_series needs at least one lambda".into())
            }
            _ => {}
        }
        match (self.family, self.sigma) {
            (Family::Sigma, Some(s)) if !(s.is_finite() && s > 0.0) => {
                return bad(format!("sigma must be positive and finite, got {s}"))
            }
            (Family::Sigma, None) => return bad("sigma family needs sigma".into()),
            (Family::Sigma, _) | (_, None) => {}
            (f, Some(_)) => return bad(format!("{} takes no sigma", f.name())),
        }
        match (self.family, self.order) {
            (Family::TruncatedSeries, None) => return bad("truncated_series needs order".into()),
            (Family::TruncatedSeries, _) | (_, None) => {}
            (f, Some(_)) => return bad(format!("{} takes no order", f.name())),
        }
        match (self.family, self.exponent) {
            (Family::PowerBase, None) => return bad("power_base needs exponent".into()),
            (Family::PowerBase, _) | (_, None) => {}
            (f, Some(_)) => return bad(format!("{} takes no exponent", f.name())),
        }
        Ok(())
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Nesting level `j`, the number of lambdas.
    pub fn level(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn sigma_value(&self) -> Option<f64> {
        self.sigma
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn order(&self) -> Option<usize> {
        self.order
    }

    pub fn exponent(&self) -> Option<u32> {
        self.exponent
    }

    /// Same family with the lambdas replaced.
    pub fn with_lambdas(&self, lambdas: &[f64]) -> Result<Self> {
        let mut s = self.clone();
        s.lambdas = lambdas.to_vec();
        s.validate()?;
        Ok(s)
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        let mut s = self.clone();
        s.sigma = Some(sigma);
        s.validate()?;
        Ok(s)
    }

    /// Short human-readable tag, e.g. `cabbatonian(j=2, lambdas=[2, 3], sign=-1)`.
    pub fn describe(&self) -> String {
        let sign = if self.sign == Sign::Minus { -1 } else { 1 };
        match self.family {
            Family::Standard => "standard".to_string(),
            Family::PowerBase => format!("power_base(k={})", self.exponent.unwrap_or(0)),
            Family::Cabbatonian => format!(
                "cabbatonian(j={}, lambdas={:?}, sign={sign})",
                self.level(),
                self.lambdas
            ),
            Family::Sigma => format!(
                "sigma(j={}, lambdas={:?}, sigma={}, sign={sign})",
                self.level(),
                self.lambdas,
                self.sigma.unwrap_or(f64::NAN)
            ),
            Family::TruncatedSeries => format!(
                "truncated_series(j={}, lambdas={:?}, K={}, sign={sign})",
                self.level(),
                self.lambdas,
                self.order.unwrap_or(0)
            ),
        }
    }

    /// `(f, f', f'')` of this member's energy map at `H0 = energy0`.
    pub fn energy_jet(&self, params: &SystemParams, energy0: f64) -> Result<Jet> {
        let m = params.m;
        let s = self.sign.value();
        match self.family {
            Family::Standard => Ok(Jet::identity(energy0)),
            Family::Cabbatonian => nested_jet(&self.lambdas, m, s, energy0),
            Family::Sigma => {
                let inner = nested_jet(&self.lambdas, m, s, energy0)?;
                let scale = m * self.sigma.unwrap_or(f64::INFINITY).powi(2);
                let arg = -inner.value / scale;
                guard(self.level() + 1, arg)?;
                // F e^{-F/S}, differentiated in F and composed with the inner jet
                let damp = arg.exp();
                let g1 = (1.0 - inner.value / scale) * damp;
                let g2 = (-2.0 / scale + inner.value / (scale * scale)) * damp;
                Ok(Jet {
                    value: inner.value * damp,
                    d1: g1 * inner.d1,
                    d2: g2 * inner.d1 * inner.d1 + g1 * inner.d2,
                })
            }
            Family::TruncatedSeries => {
                let order = self.order.unwrap_or(0);
                let table = self.series_table(params, order)?;
                Ok(table.jet(energy0))
            }
            Family::PowerBase => Ok(power_jet(self.exponent.unwrap_or(0), energy0)),
        }
    }

    /// Taylor coefficients in `H0` of this member's Cabbatonian core,
    /// truncated at `order`.
    pub fn series_table(&self, params: &SystemParams, order: usize) -> Result<CoeffTable> {
        let s = self.sign;
        let mut lambdas = self.lambdas.iter();
        let first = lambdas
            .next()
            .ok_or_else(|| ZooError::InvalidSpec("series needs at least one lambda".into()))?;
        let mut table = series_coeffs(1, *first, params.m, s, order)?;
        for l in lambdas {
            table = compose_series(&table, *l, params.m, s, order);
        }
        Ok(table)
    }
}

fn guard(level: usize, argument: f64) -> Result<()> {
    if argument.abs() <= EXPONENT_GUARD {
        Ok(())
    } else {
        Err(ZooError::OverflowRisk {
            level,
            argument,
            limit: EXPONENT_GUARD,
        })
    }
}

/// The iterated map `H -> s Ω e^{s H / Ω}`, `Ω = m λ^2`, applied once per
/// lambda and carried as a jet.
fn nested_jet(lambdas: &[f64], m: f64, s: f64, energy0: f64) -> Result<Jet> {
    let mut jet = Jet::identity(energy0);
    for (i, lambda) in lambdas.iter().enumerate() {
        let omega = m * lambda * lambda;
        let arg = s * jet.value / omega;
        guard(i + 1, arg)?;
        let factor = arg.exp();
        jet = Jet {
            value: s * omega * factor,
            d1: factor * jet.d1,
            d2: factor * (s / omega * jet.d1 * jet.d1 + jet.d2),
        };
    }
    Ok(jet)
}

fn power_jet(k: u32, e: f64) -> Jet {
    let kf = k as f64;
    let pw = |n: i64| if n < 0 { 0.0 } else { e.powi(n as i32) };
    let k = k as i64;
    Jet {
        value: pw(k),
        d1: kf * pw(k - 1),
        d2: kf * (kf - 1.0) * pw(k - 2),
    }
}

/// Standard energy `p^2/2m + V(x)`.
pub fn standard_energy(params: &SystemParams, pot: &Potential, pt: PhasePoint) -> Result<f64> {
    Ok(pt.p * pt.p / (2.0 * params.m) + pot.value(pt.x)?)
}

pub fn eval_h(
    spec: &HamiltonianSpec,
    params: &SystemParams,
    pot: &Potential,
    pt: PhasePoint,
) -> Result<f64> {
    let e0 = standard_energy(params, pot, pt)?;
    Ok(spec.energy_jet(params, e0)?.value)
}

pub fn eval_derivs(
    spec: &HamiltonianSpec,
    params: &SystemParams,
    pot: &Potential,
    pt: PhasePoint,
) -> Result<HDerivs> {
    let e0 = standard_energy(params, pot, pt)?;
    let dv = pot.force_gradient(pt.x)?;
    let jet = spec.energy_jet(params, e0)?;
    let vel = pt.p / params.m;
    Ok(HDerivs {
        h: jet.value,
        hx: jet.d1 * dv,
        hp: jet.d1 * vel,
        hpp: jet.d2 * vel * vel + jet.d1 / params.m,
        hpx: jet.d2 * vel * dv,
    })
}

/// `dH/dH0` at `H0 = energy0`: the constant factor between this member's
/// flow and the standard flow on the energy shell.
pub fn chain_factor(spec: &HamiltonianSpec, params: &SystemParams, energy0: f64) -> Result<f64> {
    Ok(spec.energy_jet(params, energy0)?.d1)
}

/// JSON form of a spec, e.g.
/// `{"family": "cabbatonian", "j": 2, "lambdas": [2.0, 3.0], "sign": -1, "m": 1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecJson {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default = "default_sign")]
    pub sign: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<u32>,
}

fn default_sign() -> i64 {
    -1
}

impl SpecJson {
    pub fn params(&self) -> Result<Option<SystemParams>> {
        self.m.map(SystemParams::new).transpose()
    }
}

impl TryFrom<SpecJson> for HamiltonianSpec {
    type Error = ZooError;

    fn try_from(doc: SpecJson) -> Result<Self> {
        if let Some(j) = doc.j {
            if j != doc.lambdas.len() {
                return Err(ZooError::InvalidSpec(format!(
                    "j = {j} but {} lambdas given",
                    doc.lambdas.len()
                )));
            }
        }
        HamiltonianSpec::new(
            doc.family,
            doc.lambdas,
            doc.sigma,
            Sign::from_int(doc.sign)?,
            doc.order,
            doc.exponent,
        )
    }
}

impl From<HamiltonianSpec> for SpecJson {
    fn from(spec: HamiltonianSpec) -> Self {
        SpecJson {
            family: spec.family,
            j: Some(spec.lambdas.len()),
            lambdas: spec.lambdas,
            sigma: spec.sigma,
            sign: spec.sign.value() as i64,
            m: None,
            order: spec.order,
            exponent: spec.exponent,
        }
    }
}

/// Parses one spec object, returning the mass when the object carries one.
pub fn parse_spec_json(text: &str) -> Result<(HamiltonianSpec, Option<SystemParams>)> {
    let doc: SpecJson =
        serde_json::from_str(text).map_err(|e| ZooError::InvalidSpec(e.to_string()))?;
    let params = doc.params()?;
    Ok((HamiltonianSpec::try_from(doc)?, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_potential;

    fn sho() -> Potential {
        parse_potential("0.5*x^2").unwrap()
    }

    fn m1() -> SystemParams {
        SystemParams::new(1.0).unwrap()
    }

    /// Central difference of `eval_h` in one phase coordinate.
    fn fd(spec: &HamiltonianSpec, pot: &Potential, pt: PhasePoint, dx: f64, dp: f64) -> f64 {
        let h = 1e-5;
        let f = |s: f64| {
            eval_h(
                spec,
                &m1(),
                pot,
                PhasePoint::new(pt.x + s * dx, pt.p + s * dp),
            )
            .unwrap()
        };
        (f(h) - f(-h)) / (2.0 * h)
    }

    #[test]
    fn standard_value_and_partials() {
        let pt = PhasePoint::new(1.0, 1.0);
        let spec = HamiltonianSpec::standard();
        assert_eq!(eval_h(&spec, &m1(), &sho(), pt).unwrap(), 1.0);
        let d = eval_derivs(&spec, &m1(), &sho(), pt).unwrap();
        assert_eq!((d.hp, d.hpp, d.hpx, d.hx), (1.0, 1.0, 0.0, 1.0));
    }

    #[test]
    fn multiplicative_value() {
        let pt = PhasePoint::new(1.0, 1.0);
        let spec = HamiltonianSpec::cabbatonian(&[2.0], Sign::Minus).unwrap();
        let h = eval_h(&spec, &m1(), &sho(), pt).unwrap();
        assert!((h - (-4.0 * (-0.25f64).exp())).abs() < 1e-14);
        assert!((h + 3.115_203_132_285_619).abs() < 1e-12);

        let d = eval_derivs(&spec, &m1(), &sho(), pt).unwrap();
        assert!((d.hp - 0.778_800_783_071_404_9).abs() < 1e-12);
        assert!((d.hp - fd(&spec, &sho(), pt, 0.0, 1.0)).abs() < 1e-9);
    }

    #[test]
    fn large_lambda_approaches_standard() {
        let spec = HamiltonianSpec::cabbatonian(&[10.0], Sign::Minus).unwrap();
        let jet = spec.energy_jet(&m1(), 1.0).unwrap();
        let shifted = jet.value + 100.0;
        assert!((shifted - 0.995_016_625_083_194_6).abs() < 1e-10);
    }

    #[test]
    fn power_base_partials() {
        let pt = PhasePoint::new(1.0, 1.0);
        let spec = HamiltonianSpec::power_base(2);
        let d = eval_derivs(&spec, &m1(), &sho(), pt).unwrap();
        assert_eq!(d.hp, 2.0);
        assert!((d.hp - fd(&spec, &sho(), pt, 0.0, 1.0)).abs() < 1e-8);
        let zero = HamiltonianSpec::power_base(0);
        let d0 = eval_derivs(&zero, &m1(), &sho(), pt).unwrap();
        assert_eq!((d0.h, d0.hx, d0.hp, d0.hpp), (1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn chain_factor_examples() {
        let p = m1();
        assert_eq!(chain_factor(&HamiltonianSpec::standard(), &p, 3.7).unwrap(), 1.0);
        let one = HamiltonianSpec::cabbatonian(&[2.0], Sign::Minus).unwrap();
        assert!((chain_factor(&one, &p, 1.0).unwrap() - (-0.25f64).exp()).abs() < 1e-15);

        let two = HamiltonianSpec::cabbatonian(&[2.0, 3.0], Sign::Minus).unwrap();
        let c2 = chain_factor(&two, &p, 1.0).unwrap();
        // mpmath: e^{-1/4} e^{(4/9) e^{-1/4}}
        assert!((c2 - 1.100_906_224_804_375_4).abs() < 1e-13);
        // finite difference of H2 in H0
        let h = 1e-6;
        let fdv = (two.energy_jet(&p, 1.0 + h).unwrap().value
            - two.energy_jet(&p, 1.0 - h).unwrap().value)
            / (2.0 * h);
        assert!((c2 - fdv).abs() < 1e-8);
    }

    #[test]
    fn iterated_map_matches_one_more_level() {
        let p = m1();
        let inner = HamiltonianSpec::cabbatonian(&[2.0, 3.0], Sign::Minus).unwrap();
        let outer = HamiltonianSpec::cabbatonian(&[2.0, 3.0, 4.0], Sign::Minus).unwrap();
        for e in [-1.0, 0.0, 0.3, 2.5] {
            let h2 = inner.energy_jet(&p, e).unwrap().value;
            let omega = -16.0;
            let mapped = omega * (h2 / omega).exp();
            assert_eq!(outer.energy_jet(&p, e).unwrap().value, mapped);
        }
    }

    #[test]
    fn guard_trips_on_plus_branch() {
        let spec = HamiltonianSpec::cabbatonian(&[1.0], Sign::Plus).unwrap();
        let err = spec.energy_jet(&m1(), 60.0).unwrap_err();
        assert!(matches!(err, ZooError::OverflowRisk { level: 1, .. }));
        let nested = HamiltonianSpec::cabbatonian(&[1.0, 1.0], Sign::Plus).unwrap();
        // e^{5} ~ 148 at level 1 trips the second level
        let err = nested.energy_jet(&m1(), 5.0).unwrap_err();
        assert!(matches!(err, ZooError::OverflowRisk { level: 2, .. }));
    }

    #[test]
    fn spec_validation() {
        assert!(HamiltonianSpec::cabbatonian(&[2.0, -1.0], Sign::Minus).is_err());
        assert!(HamiltonianSpec::sigma(&[2.0], 0.0, Sign::Minus).is_err());
        assert!(HamiltonianSpec::truncated_series(&[], 4, Sign::Minus).is_err());
        assert!(HamiltonianSpec::new(Family::Standard, vec![1.0], None, Sign::Minus, None, None)
            .is_err());
        assert!(HamiltonianSpec::new(
            Family::Cabbatonian,
            vec![1.0],
            Some(2.0),
            Sign::Minus,
            None,
            None
        )
        .is_err());
    }

    #[test]
    fn spec_json_forms() {
        let (spec, params) = parse_spec_json(
            r#"{"family": "cabbatonian", "j": 2, "lambdas": [2.0, 3.0], "sign": -1, "m": 1.0}"#,
        )
        .unwrap();
        assert_eq!(spec, HamiltonianSpec::cabbatonian(&[2.0, 3.0], Sign::Minus).unwrap());
        assert_eq!(params, Some(m1()));

        let (sig, _) =
            parse_spec_json(r#"{"family": "sigma", "lambdas": [2.0], "sigma": 5.0}"#).unwrap();
        assert_eq!(sig.sign(), Sign::Minus);
        assert_eq!(sig.sigma_value(), Some(5.0));

        let text = serde_json::to_string(&sig).unwrap();
        assert_eq!(
            text,
            r#"{"family":"sigma","j":1,"lambdas":[2.0],"sigma":5.0,"sign":-1}"#
        );
        let back: HamiltonianSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, sig);

        for bad in [
            r#"{"family": "cabbatonian", "j": 3, "lambdas": [2.0]}"#,
            r#"{"family": "cabbatonian", "lambdas": [2.0], "sign": 0}"#,
            r#"{"family": "dragon"}"#,
            r#"{"family": "standard", "m": -1}"#,
            r#"{"family": "power_base"}"#,
            "not json",
        ] {
            assert!(parse_spec_json(bad).is_err(), "{bad}");
        }
    }
}
