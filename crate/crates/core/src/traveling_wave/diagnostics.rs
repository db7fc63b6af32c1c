//! Local structure at the bifurcation point and the expansion of `chi_c(V)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::residual::TwProblem;
use super::solve::{solve_signed, solver_options};
use super::{TravelingWaveState, TwError, DEFAULT_ORDER};
use crate::model::{chi_c_star, tw_concentration, tw_pressure, ForceLaw, ModelParams};
use crate::special::newton::{jacobian_fd, NewtonOptions, Vector};

const JACOBIAN_STEP: f64 = 6e-6;

/// Sup over the collocation nodes of
/// `|gamma kappa + chi_c f_act(c) + chi_u f_und(V n_1) - P|`, with `c` and `P`
/// rebuilt from the closed-form bulk fields.
pub fn curvature_equation_residual(
    state: &TravelingWaveState,
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
) -> Result<f64, TwError> {
    let n_c = 2 * state.shape.order();
    let theta = super::collocation_nodes(n_c);
    let b = state.shape.sample(&theta);
    let p_const = state.pressure_constant(params, f_act);
    let mut worst = 0.0f64;
    for (j, &t) in theta.iter().enumerate() {
        let r = b.radius[j];
        if !(r > 0.0) {
            return Err(TwError::Geometry { theta: t, radius: r });
        }
        let point = (r * t.cos(), r * t.sin());
        let c = tw_concentration(params, state.v, state.c1, point);
        let p = tw_pressure(state.v, p_const, point);
        let n1 = b.normal(j).0;
        let res = params.gamma * b.mean_curvature(j)
            + state.chi_c * f_act.eval(c)
            + params.chi_u * f_und.eval(state.v * n1)
            - p;
        worst = worst.max(res.abs());
    }
    Ok(worst)
}

/// Linearisation of `F` in `(rho, V, p1)` at `(chi_c*, disk, 0, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationStructure {
    pub chi_c_star: f64,
    /// Singular values in ascending order.
    pub singular_values: Vec<f64>,
    /// Singular values below `1e-8 sigma_max`.
    pub kernel_dimension: usize,
    /// Angle between the computed null vector and the `V` axis.
    pub kernel_angle: f64,
    /// Largest `|cos theta|` coefficient of the first block over columns with zero `V` component.
    pub range_cos_leak: f64,
    /// `int (d_chi d_V F) cos theta dtheta`.
    pub transversality: f64,
    /// `-a c0 f_act'(c0) R0 pi`.
    pub transversality_predicted: f64,
}

pub fn bifurcation_structure(
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
    order: usize,
) -> Result<BifurcationStructure, TwError> {
    let chi = chi_c_star(params, f_act, f_und)?;
    let problem = TwProblem::new(params, f_act, f_und, order)?;
    let n = order;
    let size = n + 3;
    let eval = |u: &Vector, chi_c: f64| -> Vector {
        problem
            .residual(&u.as_slice()[..=n], u[n + 1], u[n + 2], chi_c)
            .unwrap_or_else(|_| Vector::from_element(size, f64::NAN))
    };
    let f = |u: &Vector| eval(u, chi);
    let u0 = Vector::zeros(size);
    // Richardson-extrapolated central differences
    let f0 = f(&u0);
    let coarse = jacobian_fd(&f, &u0, &f0, JACOBIAN_STEP, true);
    let fine = jacobian_fd(&f, &u0, &f0, 0.5 * JACOBIAN_STEP, true);
    let jac = (fine * 4.0 - coarse) / 3.0;

    let svd = jac.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested");
    let mut order_idx: Vec<usize> = (0..size).collect();
    order_idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let singular_values: Vec<f64> = order_idx.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma_max = singular_values[size - 1];
    let kernel_dimension = singular_values.iter().filter(|&&s| s <= 1e-8 * sigma_max).count();
    let null = v_t.row(order_idx[0]).transpose();
    let off: f64 = null.iter().enumerate().filter(|(i, _)| *i != n + 1).map(|(_, x)| x * x).sum();
    let kernel_angle = off.sqrt().atan2(null[n + 1].abs());

    let range_cos_leak = (0..size)
        .filter(|&col| col != n + 1)
        .map(|col| jac[(1, col)].abs())
        .fold(0.0, f64::max);

    let (dc, dv) = (1e-2, 1e-4);
    let at = |chi_c: f64, v: f64| {
        let mut u = u0.clone();
        u[n + 1] = v;
        eval(&u, chi_c)[1]
    };
    let mixed = (at(chi + dc, dv) - at(chi - dc, dv) - at(chi + dc, -dv) + at(chi - dc, -dv)) / (4.0 * dc * dv);
    let c0 = params.c0();
    Ok(BifurcationStructure {
        chi_c_star: chi,
        singular_values,
        kernel_dimension,
        kernel_angle,
        range_cos_leak,
        transversality: PI * mixed,
        transversality_predicted: -params.a * c0 * f_act.d1(c0) * params.r0 * PI,
    })
}

/// Closed-form values of `chi_c''(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCandidates {
    /// `-((R0 + chi_u g1) a R0 / (2 f1^2)) (f2 + c0 f3 / 2)`.
    pub shared: f64,
    /// Shared term plus `chi_u g3 / (3 a c0 R0 f1)`.
    pub one_third: f64,
    /// Shared term plus `chi_u g3 / (4 a c0 R0 f1)`.
    pub one_quarter: f64,
    /// Quarter form plus the contribution of the second-order shape mode,
    /// `chi_u g1 chi_c* a R0^2 (f1 + c0 f2) / (4 gamma f1)`.
    pub with_shape_term: f64,
    /// Predicted `lim rho_2(V) / V^2 = -chi_c* c0 a^2 R0^4 (f1 + c0 f2) / (12 gamma)`.
    pub rho2_coefficient: f64,
}

/// Here `f1..f3` are derivatives of `f_act` at `c0` and `g1, g3` of `f_und` at 0.
pub fn candidate_second_derivatives(
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
) -> Result<ExpansionCandidates, TwError> {
    let chi = chi_c_star(params, f_act, f_und)?;
    let (a, r, c0, gamma, chi_u) = (params.a, params.r0, params.c0(), params.gamma, params.chi_u);
    let [_, f1, f2, f3] = f_act.jet(c0);
    let [_, g1, _, g3] = f_und.jet(0.0);
    let shared = -((r + chi_u * g1) * a * r / (2.0 * f1 * f1)) * (f2 + 0.5 * c0 * f3);
    let und = chi_u * g3 / (a * c0 * r * f1);
    let one_quarter = shared + und / 4.0;
    Ok(ExpansionCandidates {
        shared,
        one_third: shared + und / 3.0,
        one_quarter,
        with_shape_term: one_quarter + chi_u * g1 * chi * a * r * r * (f1 + c0 * f2) / (4.0 * gamma * f1),
        rho2_coefficient: -chi * c0 * a * a * r.powi(4) * (f1 + c0 * f2) / (12.0 * gamma),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// `f_und''' = 0`: the two forms agree.
    Coincident,
    OneThird,
    OneQuarter,
    /// Both forms are more than 25% away from the numerics.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub order: usize,
    /// Finite-difference steps in `V`, each half the previous.
    pub steps: [f64; 3],
    pub newton: NewtonOptions,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            steps: [0.04, 0.02, 0.01],
            newton: solver_options(),
        }
    }
}

/// Decay of the shape as `V -> 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeDecay {
    pub v: f64,
    /// `max_k |rho_k(V)| / V`.
    pub rho_over_v: f64,
    /// `rho_2(V) / V^2`.
    pub rho2_over_v2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationReport {
    pub chi_c_star: f64,
    /// `(4 chi(h) - chi(2h)) / 3` at the smallest step.
    pub chi_c_star_numeric: f64,
    /// Richardson-extrapolated central difference.
    pub d_chi_ds_at_0: f64,
    /// `|chi'(0)| / (|chi_c*| + |chi''(0)|)`.
    pub d_chi_ds_scaled: f64,
    pub d2_chi_ds2_at_0: f64,
    /// Plain second differences `(chi(h) + chi(-h) - 2 chi*) / h^2` per step.
    pub second_differences: Vec<(f64, f64)>,
    /// Difference between the two Richardson estimates.
    pub d2_error_estimate: f64,
    pub candidates: ExpansionCandidates,
    pub rel_error_shared: f64,
    pub rel_error_one_third: f64,
    pub rel_error_one_quarter: f64,
    pub rel_error_with_shape_term: f64,
    pub verdict: Verdict,
    /// Largest deviation between `chi(-V)` and `chi(V)` or between `rho(-V)` and
    /// the reflection of `rho(V)`, over independently solved states.
    pub reflection_error: f64,
    pub shape_decay: Vec<ShapeDecay>,
}

fn rel(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs()
}

/// Estimates `chi_c'(0)` and `chi_c''(0)` along the branch by central
/// differences in `V` with one Richardson pass and compares with the closed forms.
pub fn bifurcation_report(params: &ModelParams, f_act: &ForceLaw, f_und: &ForceLaw) -> Result<BifurcationReport, TwError> {
    bifurcation_report_with(params, f_act, f_und, &ReportOptions::default())
}

pub fn bifurcation_report_with(
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
    opts: &ReportOptions,
) -> Result<BifurcationReport, TwError> {
    let [h0, h1, h2] = opts.steps;
    if !(h0 > 0.0 && (h1 - 0.5 * h0).abs() <= 1e-14 * h0 && (h2 - 0.5 * h1).abs() <= 1e-14 * h0) {
        return Err(TwError::Resolution(format!("steps must halve: {:?}", opts.steps)));
    }
    let chi = chi_c_star(params, f_act, f_und)?;
    let problem = TwProblem::new(params, f_act, f_und, opts.order)?;
    let rest = problem.pack(&TravelingWaveState::resting(params, chi, opts.order));

    // ascending |V| so each solve starts from the previous one
    let ascending = [h2, h1, h0];
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for sign in [1.0, -1.0] {
        let mut guess = rest.clone();
        for &h in &ascending {
            let s = solve_signed(&problem, sign * h, guess, &opts.newton)?;
            guess = problem.pack(&s);
            if sign > 0.0 {
                plus.push(s);
            } else {
                minus.push(s);
            }
        }
    }
    let mut reflection_error = 0.0f64;
    for (p, m) in plus.iter().zip(&minus) {
        let r = p.reflected();
        reflection_error = reflection_error.max((r.chi_c - m.chi_c).abs());
        for (a, b) in r.shape.rho_cos.iter().zip(&m.shape.rho_cos) {
            reflection_error = reflection_error.max((a - b).abs());
        }
    }

    let d1: Vec<f64> = (0..3).map(|i| (plus[i].chi_c - minus[i].chi_c) / (2.0 * ascending[i])).collect();
    let d2: Vec<f64> = (0..3)
        .map(|i| (plus[i].chi_c + minus[i].chi_c - 2.0 * chi) / ascending[i].powi(2))
        .collect();
    // index 0 is the smallest step
    let d1_rich = (4.0 * d1[0] - d1[1]) / 3.0;
    let fine = (4.0 * d2[0] - d2[1]) / 3.0;
    let coarse = (4.0 * d2[1] - d2[2]) / 3.0;
    let chi_numeric = (4.0 * plus[0].chi_c - plus[1].chi_c) / 3.0;

    let candidates = candidate_second_derivatives(params, f_act, f_und)?;
    let rel_error_one_third = rel(fine, candidates.one_third);
    let rel_error_one_quarter = rel(fine, candidates.one_quarter);
    let spread = (candidates.one_third - candidates.one_quarter).abs();
    let verdict = if spread <= 1e-12 * candidates.one_quarter.abs().max(candidates.one_third.abs()) {
        Verdict::Coincident
    } else if rel_error_one_third.min(rel_error_one_quarter) > 0.25 {
        Verdict::Inconclusive
    } else if rel_error_one_third < rel_error_one_quarter {
        Verdict::OneThird
    } else {
        Verdict::OneQuarter
    };

    let shape_decay = plus
        .iter()
        .map(|s| ShapeDecay {
            v: s.v,
            rho_over_v: s.shape.rho_cos.iter().fold(0.0f64, |m, x| m.max(x.abs())) / s.v,
            rho2_over_v2: s.shape.rho_cos[2] / (s.v * s.v),
        })
        .collect();

    Ok(BifurcationReport {
        chi_c_star: chi,
        chi_c_star_numeric: chi_numeric,
        d_chi_ds_at_0: d1_rich,
        d_chi_ds_scaled: d1_rich.abs() / (chi.abs() + fine.abs()),
        d2_chi_ds2_at_0: fine,
        second_differences: ascending.iter().copied().zip(d2.iter().copied()).collect(),
        d2_error_estimate: (fine - coarse).abs(),
        candidates,
        rel_error_shared: rel(fine, candidates.shared),
        rel_error_one_third,
        rel_error_one_quarter,
        rel_error_with_shape_term: rel(fine, candidates.with_shape_term),
        verdict,
        reflection_error,
        shape_decay,
    })
}

/// Relative change of `chi_c(v)` between truncation orders `n_lo` and `n_hi`.
pub fn order_sensitivity(
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
    v: f64,
    n_lo: usize,
    n_hi: usize,
) -> Result<f64, TwError> {
    let chi = chi_c_star(params, f_act, f_und)?;
    let mut out = [0.0; 2];
    for (slot, order) in out.iter_mut().zip([n_lo, n_hi]) {
        let problem = TwProblem::new(params, f_act, f_und, order)?;
        let mut guess = problem.pack(&TravelingWaveState::resting(params, chi, order));
        let steps = 4;
        let mut state = None;
        for i in 1..=steps {
            let s = solve_signed(&problem, v * i as f64 / steps as f64, guess, &solver_options())?;
            guess = problem.pack(&s);
            state = Some(s);
        }
        *slot = state.expect("steps > 0").chi_c;
    }
    Ok(rel(out[0], out[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ModelParams, ForceLaw, ForceLaw) {
        (
            ModelParams::new(1.0, 1.0, 2.0, 0.5, 1.0, 3.0).unwrap(),
            ForceLaw::hill(1.0, 1.0, 2.0).unwrap(),
            ForceLaw::linear(1.0).unwrap(),
        )
    }

    #[test]
    fn kernel_is_the_speed_direction() {
        let (p, fa, fu) = setup();
        let s = bifurcation_structure(&p, &fa, &fu, 16).unwrap();
        assert_eq!(s.kernel_dimension, 1);
        assert!(s.kernel_angle < 1e-8);
        assert!(s.range_cos_leak < 1e-10);
        assert!(rel(s.transversality, s.transversality_predicted) < 1e-6);
    }

    #[test]
    fn solved_states_satisfy_the_curvature_equation() {
        let (p, fa, fu) = setup();
        let chi = chi_c_star(&p, &fa, &fu).unwrap();
        let problem = TwProblem::new(&p, &fa, &fu, 16).unwrap();
        let g = problem.pack(&TravelingWaveState::resting(&p, chi, 16));
        let s = solve_signed(&problem, 0.1, g, &solver_options()).unwrap();
        assert!(curvature_equation_residual(&s, &p, &fa, &fu).unwrap() < 1e-10);
    }

    #[test]
    fn candidates_coincide_without_cubic_undercooling() {
        let (p, fa, fu) = setup();
        let c = candidate_second_derivatives(&p, &fa, &fu).unwrap();
        assert_eq!(c.one_third, c.one_quarter);
        assert_eq!(c.one_third, c.shared);
    }
}
