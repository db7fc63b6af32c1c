//! Model parameters, admissible force laws and the radially symmetric resting state.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("force law violates `{property}` at x = {at}")]
    InadmissibleLaw { property: &'static str, at: f64 },
    #[error("force law family {family} cannot serve as {kind:?} law")]
    WrongKind { family: &'static str, kind: LawKind },
    #[error("degenerate threshold: {0}")]
    DegenerateThreshold(&'static str),
}

/// Physical and model constants. All quantities are dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Adsorbed fraction of markers, in (0, 1].
    pub a: f64,
    /// Effective surface tension.
    pub gamma: f64,
    /// Active strength.
    pub chi_c: f64,
    /// Undercooling strength.
    pub chi_u: f64,
    /// Rest radius.
    #[serde(rename = "r0")]
    pub r0: f64,
    /// Total marker mass.
    #[serde(rename = "mass")]
    pub mass: f64,
}

impl ModelParams {
    pub fn new(a: f64, gamma: f64, chi_c: f64, chi_u: f64, r0: f64, mass: f64) -> Result<Self, ModelError> {
        let params = Self { a, gamma, chi_c, chi_u, r0, mass };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<(), ModelError> {
            if value.is_finite() && ok {
                Ok(())
            } else {
                Err(ModelError::InvalidParameter { name, value, reason })
            }
        }
        check("a", self.a, self.a > 0.0 && self.a <= 1.0, "must lie in (0, 1]")?;
        check("gamma", self.gamma, self.gamma > 0.0, "must be positive")?;
        check("chi_c", self.chi_c, self.chi_c >= 0.0, "must be non-negative")?;
        check("chi_u", self.chi_u, self.chi_u >= 0.0, "must be non-negative")?;
        check("r0", self.r0, self.r0 > 0.0, "must be positive")?;
        check("mass", self.mass, self.mass > 0.0, "must be positive")?;
        Ok(())
    }

    /// Same parameters with a different active strength.
    pub fn with_chi_c(&self, chi_c: f64) -> Result<Self, ModelError> {
        let mut p = *self;
        p.chi_c = chi_c;
        p.validate()?;
        Ok(p)
    }

    pub fn area(&self) -> f64 {
        PI * self.r0 * self.r0
    }

    /// Uniform resting concentration `M / (pi R0^2)`.
    pub fn c0(&self) -> f64 {
        self.mass / self.area()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawKind {
    Active,
    Undercooling,
}

/// Built-in force-law families with analytic derivatives up to third order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum ForceFamily {
    /// `L c^n / (K^n + c^n)`, saturating at `L`.
    Hill {
        saturation: f64,
        half_max: f64,
        exponent: f64,
    },
    /// `slope * v`.
    Linear { slope: f64 },
    /// `beta * tanh(v / beta)`.
    Tanh { beta: f64 },
}

impl ForceFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ForceFamily::Hill { .. } => "hill",
            ForceFamily::Linear { .. } => "linear",
            ForceFamily::Tanh { .. } => "tanh",
        }
    }

    /// Value and first three derivatives at `x`.
    pub fn jet(&self, x: f64) -> [f64; 4] {
        match *self {
            ForceFamily::Hill {
                saturation: l,
                half_max: k,
                exponent: n,
            } => hill_jet(l, k, n, x),
            ForceFamily::Linear { slope } => [slope * x, slope, 0.0, 0.0],
            ForceFamily::Tanh { beta } => {
                let u = x / beta;
                let t = u.tanh();
                let e = (-2.0 * u.abs()).exp();
                // sech^2 without the cancellation in 1 - t^2
                let s = 4.0 * e / ((1.0 + e) * (1.0 + e));
                [
                    beta * t,
                    s,
                    -2.0 * t * s / beta,
                    -2.0 * s * (1.0 - 3.0 * t * t) / (beta * beta),
                ]
            }
        }
    }
}

// c^e scaled by coef, with 0 * c^(negative) treated as 0.
fn power_term(coef: f64, c: f64, e: f64) -> f64 {
    if coef == 0.0 {
        0.0
    } else {
        coef * c.powf(e)
    }
}

fn hill_jet(l: f64, k: f64, n: f64, c: f64) -> [f64; 4] {
    let q = k.powf(n);
    let g = c.powf(n);
    let g1 = power_term(n, c, n - 1.0);
    let g2 = power_term(n * (n - 1.0), c, n - 2.0);
    let g3 = power_term(n * (n - 1.0) * (n - 2.0), c, n - 3.0);
    let d = q + g;
    [
        l * g / d,
        l * q * g1 / (d * d),
        l * q * (g2 * d - 2.0 * g1 * g1) / d.powi(3),
        l * q * (g3 * d * d - 6.0 * g1 * g2 * d + 6.0 * g1.powi(3)) / d.powi(4),
    ]
}

/// Sampling grid used to check monotonicity and oddness at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingGrid {
    pub points: usize,
    pub range: f64,
}

impl Default for SamplingGrid {
    fn default() -> Self {
        Self { points: 256, range: 10.0 }
    }
}

/// A validated scalar force law tagged with the role it plays in the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForceLaw {
    family: ForceFamily,
    kind: LawKind,
}

impl ForceLaw {
    pub fn new(family: ForceFamily, kind: LawKind) -> Result<Self, ModelError> {
        Self::with_grid(family, kind, SamplingGrid::default())
    }

    pub fn with_grid(family: ForceFamily, kind: LawKind, grid: SamplingGrid) -> Result<Self, ModelError> {
        match (family, kind) {
            (ForceFamily::Hill { .. }, LawKind::Active) => {}
            (ForceFamily::Linear { .. } | ForceFamily::Tanh { .. }, LawKind::Undercooling) => {}
            _ => {
                return Err(ModelError::WrongKind {
                    family: family.name(),
                    kind,
                })
            }
        }
        match family {
            ForceFamily::Hill {
                saturation,
                half_max,
                exponent,
            } => {
                for (name, v) in [("saturation", saturation), ("half_max", half_max)] {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(ModelError::InvalidParameter {
                            name,
                            value: v,
                            reason: "must be positive",
                        });
                    }
                }
                if !(exponent.is_finite() && exponent >= 1.0) {
                    return Err(ModelError::InvalidParameter {
                        name: "exponent",
                        value: exponent,
                        reason: "must be at least 1",
                    });
                }
            }
            ForceFamily::Linear { slope } => {
                if !(slope.is_finite() && slope > 0.0) {
                    return Err(ModelError::InvalidParameter {
                        name: "slope",
                        value: slope,
                        reason: "must be positive",
                    });
                }
            }
            ForceFamily::Tanh { beta } => {
                if !(beta.is_finite() && beta > 0.0) {
                    return Err(ModelError::InvalidParameter {
                        name: "beta",
                        value: beta,
                        reason: "must be positive",
                    });
                }
            }
        }
        let law = Self { family, kind };
        law.check_admissible(grid)?;
        Ok(law)
    }

    pub fn hill(saturation: f64, half_max: f64, exponent: f64) -> Result<Self, ModelError> {
        Self::new(
            ForceFamily::Hill {
                saturation,
                half_max,
                exponent,
            },
            LawKind::Active,
        )
    }

    pub fn linear(slope: f64) -> Result<Self, ModelError> {
        Self::new(ForceFamily::Linear { slope }, LawKind::Undercooling)
    }

    pub fn tanh(beta: f64) -> Result<Self, ModelError> {
        Self::new(ForceFamily::Tanh { beta }, LawKind::Undercooling)
    }

    fn check_admissible(&self, grid: SamplingGrid) -> Result<(), ModelError> {
        let n = grid.points.max(2);
        let samples = (1..=n).map(|i| grid.range * i as f64 / n as f64);
        match self.kind {
            LawKind::Active => {
                if self.eval(0.0) != 0.0 {
                    return Err(ModelError::InadmissibleLaw { property: "f(0) = 0", at: 0.0 });
                }
                if self.d1(0.0) < 0.0 {
                    return Err(ModelError::InadmissibleLaw { property: "increasing", at: 0.0 });
                }
                let cap = self.saturation().unwrap_or(f64::INFINITY);
                for x in samples {
                    if !(self.d1(x) > 0.0) {
                        return Err(ModelError::InadmissibleLaw { property: "increasing", at: x });
                    }
                    if self.eval(x) > cap {
                        return Err(ModelError::InadmissibleLaw { property: "bounded by L_c", at: x });
                    }
                }
            }
            LawKind::Undercooling => {
                if !(self.d1(0.0) > 0.0) {
                    return Err(ModelError::InadmissibleLaw { property: "f'(0) > 0", at: 0.0 });
                }
                for x in samples {
                    let (fp, fm) = (self.eval(x), self.eval(-x));
                    if (fp + fm).abs() > 1e-14 * fp.abs().max(1.0) {
                        return Err(ModelError::InadmissibleLaw { property: "odd", at: x });
                    }
                    if !(self.d1(x) > 0.0) {
                        return Err(ModelError::InadmissibleLaw { property: "increasing", at: x });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn family(&self) -> ForceFamily {
        self.family
    }

    pub fn kind(&self) -> LawKind {
        self.kind
    }

    /// Upper bound `L_c` of an active law.
    pub fn saturation(&self) -> Option<f64> {
        match self.family {
            ForceFamily::Hill { saturation, .. } => Some(saturation),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.family.jet(x)[0]
    }

    pub fn d1(&self, x: f64) -> f64 {
        self.family.jet(x)[1]
    }

    pub fn d2(&self, x: f64) -> f64 {
        self.family.jet(x)[2]
    }

    pub fn d3(&self, x: f64) -> f64 {
        self.family.jet(x)[3]
    }

    pub fn jet(&self, x: f64) -> [f64; 4] {
        self.family.jet(x)
    }
}

/// Stationary disk solution with zero velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestingState {
    pub c0: f64,
    pub p0: f64,
    pub r0: f64,
}

fn require_kind(law: &ForceLaw, kind: LawKind) -> Result<(), ModelError> {
    if law.kind() == kind {
        Ok(())
    } else {
        Err(ModelError::WrongKind {
            family: law.family.name(),
            kind,
        })
    }
}

pub fn resting_state(params: &ModelParams, f_act: &ForceLaw) -> Result<RestingState, ModelError> {
    params.validate()?;
    require_kind(f_act, LawKind::Active)?;
    let c0 = params.c0();
    Ok(RestingState {
        c0,
        p0: params.gamma / params.r0 + params.chi_c * f_act.eval(c0),
        r0: params.r0,
    })
}

/// Critical active strength above which the disk loses stability:
/// `(R0 + chi_u f_und'(0)) / (R0 a c0 f_act'(c0))`.
pub fn chi_c_star(params: &ModelParams, f_act: &ForceLaw, f_und: &ForceLaw) -> Result<f64, ModelError> {
    params.validate()?;
    require_kind(f_act, LawKind::Active)?;
    require_kind(f_und, LawKind::Undercooling)?;
    let c0 = params.c0();
    let slope = f_act.d1(c0);
    if !(slope > 0.0) {
        return Err(ModelError::DegenerateThreshold("f_act'(c0) must be positive"));
    }
    if !(params.a > 0.0) {
        return Err(ModelError::DegenerateThreshold("a must be positive"));
    }
    Ok((params.r0 + params.chi_u * f_und.d1(0.0)) / (params.r0 * params.a * c0 * slope))
}

/// Traveling-wave marker concentration `c1 exp(-a V x)`.
pub fn tw_concentration(params: &ModelParams, v: f64, c1: f64, point: (f64, f64)) -> f64 {
    c1 * (-params.a * v * point.0).exp()
}

/// Traveling-wave pressure `p1 - V x`; its gradient is `(-V, 0)`.
pub fn tw_pressure(v: f64, p1: f64, point: (f64, f64)) -> f64 {
    p1 - v * point.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit() -> ModelParams {
        ModelParams::new(1.0, 1.0, 0.0, 0.0, 1.0, PI).unwrap()
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ModelParams::new(0.0, 1.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.1, 1.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 0.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, -1.0, 0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.0, -0.1, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.0, 0.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.0, 0.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn resting_state_examples() {
        let f = ForceLaw::hill(1.0, 1.0, 2.0).unwrap();
        let rs = resting_state(&unit(), &f).unwrap();
        assert_relative_eq!(rs.c0, 1.0, epsilon = 1e-15);
        assert_relative_eq!(rs.p0, 1.0, epsilon = 1e-15);

        let p = ModelParams::new(1.0, 3.0, 0.0, 0.0, 2.0, 4.0 * PI).unwrap();
        let rs = resting_state(&p, &f).unwrap();
        assert_relative_eq!(rs.c0, 1.0, epsilon = 1e-15);
        assert_relative_eq!(rs.p0, 1.5, epsilon = 1e-15);

        // Hill L=2, K=1, n=3 at c = 1: 2 * 1 / (1 + 1) = 1.
        let f = ForceLaw::hill(2.0, 1.0, 3.0).unwrap();
        let p = unit().with_chi_c(1.0).unwrap();
        let rs = resting_state(&p, &f).unwrap();
        assert_relative_eq!(rs.p0, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn threshold_examples() {
        // f'(1) = L K / (K + 1)^2 = 1 for L = 4, K = 1, n = 1.
        let f_act = ForceLaw::hill(4.0, 1.0, 1.0).unwrap();
        let lin = ForceLaw::linear(1.0).unwrap();
        assert_relative_eq!(chi_c_star(&unit(), &f_act, &lin).unwrap(), 1.0, epsilon = 1e-14);

        let p = ModelParams::new(1.0, 1.0, 0.0, 2.0, 1.0, PI).unwrap();
        assert_relative_eq!(chi_c_star(&p, &f_act, &lin).unwrap(), 3.0, epsilon = 1e-14);

        // c0 = 2 with R0 = 2 requires M = 8 pi; f'(2) = 2*2/16 = 0.25.
        let p = ModelParams::new(0.5, 1.0, 0.0, 1.0, 2.0, 8.0 * PI).unwrap();
        let f_act = ForceLaw::hill(2.0, 2.0, 1.0).unwrap();
        let half = ForceLaw::linear(0.5).unwrap();
        assert_relative_eq!(f_act.d1(2.0), 0.25, epsilon = 1e-15);
        assert_relative_eq!(chi_c_star(&p, &f_act, &half).unwrap(), 5.0, epsilon = 1e-14);
    }

    #[test]
    fn threshold_rejects_swapped_laws() {
        let f_act = ForceLaw::hill(1.0, 1.0, 2.0).unwrap();
        let lin = ForceLaw::linear(1.0).unwrap();
        assert!(chi_c_star(&unit(), &lin, &f_act).is_err());
    }

    #[test]
    fn law_kinds_are_enforced() {
        assert!(ForceLaw::new(ForceFamily::Linear { slope: 1.0 }, LawKind::Active).is_err());
        assert!(ForceLaw::new(
            ForceFamily::Hill {
                saturation: 1.0,
                half_max: 1.0,
                exponent: 2.0
            },
            LawKind::Undercooling
        )
        .is_err());
        assert!(ForceLaw::hill(1.0, 1.0, 0.5).is_err());
        assert!(ForceLaw::tanh(-1.0).is_err());
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let laws = [
            ForceLaw::hill(1.3, 0.7, 2.5).unwrap(),
            ForceLaw::hill(2.0, 1.5, 1.0).unwrap(),
            ForceLaw::tanh(0.8).unwrap(),
            ForceLaw::linear(0.4).unwrap(),
        ];
        let h = 1e-4;
        for law in laws {
            for &x in &[0.3, 0.9, 1.7] {
                let j = law.jet(x);
                for order in 0..3 {
                    let fd = (law.jet(x + h)[order] - law.jet(x - h)[order]) / (2.0 * h);
                    assert!(
                        (fd - j[order + 1]).abs() < 1e-6 * (1.0 + j[order + 1].abs()),
                        "{law:?} order {} at {x}: {fd} vs {}",
                        order + 1,
                        j[order + 1]
                    );
                }
            }
        }
    }

    #[test]
    fn closed_forms() {
        let p = ModelParams::new(0.5, 1.0, 0.0, 0.0, 1.0, PI).unwrap();
        assert_eq!(tw_concentration(&p, 0.0, 3.0, (0.7, -0.2)), 3.0);
        let p1 = ModelParams::new(1.0, 1.0, 0.0, 0.0, 1.0, PI).unwrap();
        assert_eq!(tw_concentration(&p1, 1.0, 1.0, (0.0, 0.4)), 1.0);
        assert_relative_eq!(tw_concentration(&p, 2.0, 1.0, (1.0, 0.0)), (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(tw_pressure(0.0, 5.0, (3.0, 1.0)), 5.0);
        assert_eq!(tw_pressure(1.0, 0.0, (2.0, 0.0)), -2.0);
        assert_relative_eq!(tw_pressure(0.3, 1.2, (-1.0, 0.0)), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn resting_state_solves_curvature_equation() {
        let f = ForceLaw::hill(1.5, 0.8, 2.0).unwrap();
        let p = ModelParams::new(0.7, 2.0, 1.3, 0.5, 1.4, 3.0).unwrap();
        let rs = resting_state(&p, &f).unwrap();
        let lhs = p.gamma / p.r0;
        let rhs = rs.p0 - p.chi_c * f.eval(rs.c0);
        assert_relative_eq!(lhs, rhs, epsilon = 1e-14);
        assert_relative_eq!(rs.c0 * p.area(), p.mass, max_relative = 1e-15);
    }

    proptest! {
        #[test]
        fn threshold_monotonicity(
            a in 0.1f64..1.0, r0 in 0.5f64..2.0, mass in 0.5f64..10.0,
            chi_u in 0.0f64..3.0, slope in 0.2f64..3.0, bump in 0.01f64..1.0,
        ) {
            let f_act = ForceLaw::hill(1.0, 1.0, 2.0).unwrap();
            let g = ForceLaw::linear(slope).unwrap();
            let g_steeper = ForceLaw::linear(slope + bump).unwrap();
            let p = ModelParams::new(a, 1.0, 0.0, chi_u, r0, mass).unwrap();
            let base = chi_c_star(&p, &f_act, &g).unwrap();
            let mut more_u = p;
            more_u.chi_u += bump;
            prop_assert!(chi_c_star(&more_u, &f_act, &g).unwrap() > base);
            prop_assert!(chi_c_star(&p, &f_act, &g_steeper).unwrap() > base || chi_u == 0.0);
            let mut more_a = p;
            more_a.a = (a + bump).min(1.0);
            if more_a.a > a {
                prop_assert!(chi_c_star(&more_a, &f_act, &g).unwrap() < base);
            }
        }
    }
}
