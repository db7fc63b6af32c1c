//! End-to-end acceptance checks with independent oracles.
//!
//! Every check is seeded and prints only deterministic quantities, so two runs
//! produce byte-identical reports.

pub mod oracle;

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{chi_c_star, ForceLaw, ModelParams};
use crate::special::bessel::bessel_i;
use crate::special::roots::Rect;
use crate::stability::{default_region, locate_crossing, mode_spectrum, zero_eigenspace_dimension};
use crate::traveling_wave::{
    bifurcation_report, bifurcation_structure, continue_branch, curvature_equation_residual, residual_f,
    BifurcationReport, Shape, TravelingWaveState, Verdict,
};

pub const DEFAULT_SEED: u64 = 20_240_611;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<28} {}  {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceReport {
    pub seed: u64,
    pub outcomes: Vec<CriterionOutcome>,
}

impl AcceptanceReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        for o in &self.outcomes {
            s.push_str(&o.line());
            s.push('\n');
        }
        s
    }
}

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "threshold agreement"),
    (2, "m=0 spectrum"),
    (3, "neutral modes"),
    (4, "non-positive spectrum"),
    (5, "bifurcation-point structure"),
    (6, "branch verification"),
    (7, "expansion coefficients"),
    (8, "linearization consistency"),
    (9, "special-function floor"),
    (10, "determinism"),
];

/// Runs the selected criteria (all when `only` is empty) in order. Criterion
/// 10 re-runs the other selected criteria and compares the serialized outcomes.
pub fn run(seed: u64, only: &[u8]) -> AcceptanceReport {
    let selected: Vec<u8> = if only.is_empty() {
        CRITERIA.iter().map(|c| c.0).collect()
    } else {
        CRITERIA.iter().map(|c| c.0).filter(|id| only.contains(id)).collect()
    };
    let mut outcomes: Vec<CriterionOutcome> =
        selected.iter().filter(|&&id| id != 10).map(|&id| run_one(seed, id)).collect();
    if selected.contains(&10) {
        let ids: Vec<u8> = outcomes.iter().map(|o| o.id).collect();
        let result = if ids.is_empty() {
            determinism(seed, &[2, 3, 5, 8], None)
        } else {
            determinism(seed, &ids, Some(&outcomes))
        };
        outcomes.push(outcome(10, result));
    }
    AcceptanceReport { seed, outcomes }
}

fn outcome(id: u8, result: Check) -> CriterionOutcome {
    let name = CRITERIA.iter().find(|c| c.0 == id).map(|c| c.1).unwrap_or("unknown");
    let (passed, detail) = match result {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionOutcome { id, name, passed, detail }
}

/// A single criterion; criterion 10 runs on criteria 2, 3, 5 and 8.
pub fn run_one(seed: u64, id: u8) -> CriterionOutcome {
    let result = match id {
        1 => threshold_agreement(seed),
        2 => m0_spectrum(seed),
        3 => neutral_modes(seed),
        4 => non_positive_spectrum(seed),
        5 => bifurcation_point(seed),
        6 => branch_verification(),
        7 => expansion_coefficients(),
        8 => linearization_consistency(seed),
        9 => special_function_floor(seed),
        10 => determinism(seed, &[2, 3, 5, 8], None),
        _ => Err(format!("no criterion {id}")),
    };
    outcome(id, result)
}

type Check = Result<(bool, String), String>;

fn rng_for(seed: u64, id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (id.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Random parameter set with a Hill active law and a linear undercooling law.
fn random_setup(rng: &mut ChaCha8Rng) -> Result<(ModelParams, ForceLaw, ForceLaw), String> {
    let a = rng.random_range(0.2..1.0);
    let gamma = rng.random_range(0.5..3.0);
    let r0 = rng.random_range(0.5..2.0);
    let chi_u = rng.random_range(0.0..2.0);
    let c0 = rng.random_range(0.3..2.0);
    let mass = std::f64::consts::PI * r0 * r0 * c0;
    let f_act = ForceLaw::hill(rng.random_range(0.5..2.0), rng.random_range(0.5..2.0), rng.random_range(1.0..3.0))
        .map_err(|e| e.to_string())?;
    let f_und = ForceLaw::linear(rng.random_range(0.5..2.0)).map_err(|e| e.to_string())?;
    let params = ModelParams::new(a, gamma, 0.0, chi_u, r0, mass).map_err(|e| e.to_string())?;
    Ok((params, f_act, f_und))
}

fn with_chi(p: &ModelParams, chi_c: f64) -> Result<ModelParams, String> {
    p.with_chi_c(chi_c).map_err(|e| e.to_string())
}

fn threshold_agreement(seed: u64) -> Check {
    let mut rng = rng_for(seed, 1);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (p, fa, fu) = random_setup(&mut rng)?;
        let star = chi_c_star(&p, &fa, &fu).map_err(|e| e.to_string())?;
        let region = default_region(p.r0);
        let crossing =
            locate_crossing(1, &p, &fa, &fu, 0.7 * star, 1.3 * star, 1e-8, &region).map_err(|e| e.to_string())?;
        worst = worst.max((crossing - star).abs() / star);
    }
    Ok((worst <= 1e-6, format!("max relative deviation {worst:.2e} over 10 sets (tol 1e-6)")))
}

fn m0_spectrum(seed: u64) -> Check {
    let mut rng = rng_for(seed, 2);
    let zeros = oracle::j1_zeros_reference(4);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let (p, fa, fu) = random_setup(&mut rng)?;
        let r2 = p.r0 * p.r0;
        let region = Rect::new(-200.0 / r2, 0.0, -1.0, 1.0);
        let s = mode_spectrum(0, &p, &fa, &fu, &region).map_err(|e| e.to_string())?;
        let mut roots: Vec<Complex64> = s.roots.iter().copied().filter(|z| z.norm() > 1e-8).collect();
        roots.sort_by(|a, b| b.re.total_cmp(&a.re));
        if roots.len() < 4 {
            return Ok((false, format!("only {} roots located at R0 = {:.3}", roots.len(), p.r0)));
        }
        for (z, x) in roots.iter().zip(&zeros) {
            worst = worst.max((z - Complex64::new(-x * x / r2, 0.0)).norm());
        }
    }
    Ok((
        worst <= 1e-9,
        format!("max |lambda + x_1k^2 / R0^2| = {worst:.2e} for k = 1..4 over 3 radii, region [-200/R0^2, 0] (tol 1e-9)"),
    ))
}

fn neutral_modes(seed: u64) -> Check {
    let mut rng = rng_for(seed, 3);
    let mut ok = true;
    let mut dims = Vec::new();
    for _ in 0..5 {
        let (p, fa, fu) = random_setup(&mut rng)?;
        let star = chi_c_star(&p, &fa, &fu).map_err(|e| e.to_string())?;
        let p = with_chi(&p, rng.random_range(0.2..0.95) * star)?;
        let mut d = Vec::new();
        for m in 0..=8 {
            d.push(zero_eigenspace_dimension(m, &p, &fa, &fu).map_err(|e| e.to_string())?);
        }
        ok &= d[0] + d[1] == 3 && d[2..].iter().all(|&x| x == 0);
        dims.push(format!("{}+{}|{}", d[0], d[1], d[2..].iter().sum::<usize>()));
    }
    Ok((ok, format!("dim(m=0)+dim(m=1)|dim(m=2..8) per set: {}", dims.join(" "))))
}

fn non_positive_spectrum(seed: u64) -> Check {
    let mut rng = rng_for(seed, 4);
    let mut worst = f64::NEG_INFINITY;
    let mut located = 0usize;
    for _ in 0..20 {
        let (p, fa, fu) = random_setup(&mut rng)?;
        let c0 = p.c0();
        let bound = 1.0 / (p.a * c0 * fa.d1(c0));
        let p = with_chi(&p, rng.random_range(0.1..=1.0) * bound)?;
        let region = default_region(p.r0);
        for m in 1..=6 {
            let s = mode_spectrum(m, &p, &fa, &fu, &region).map_err(|e| e.to_string())?;
            located += s.roots.len();
            for z in &s.roots {
                worst = worst.max(z.re);
            }
        }
    }
    Ok((
        worst <= 1e-9,
        format!("max Re(lambda) = {worst:.2e} over {located} roots, 20 sets, m = 1..6 (tol 1e-9)"),
    ))
}

fn bifurcation_point(seed: u64) -> Check {
    let mut rng = rng_for(seed, 5);
    let (mut angle, mut leak, mut trans) = (0.0f64, 0.0f64, 0.0f64);
    let mut kernel_ok = true;
    for _ in 0..3 {
        let (p, fa, fu) = random_setup(&mut rng)?;
        let s = bifurcation_structure(&p, &fa, &fu, 64).map_err(|e| e.to_string())?;
        kernel_ok &= s.kernel_dimension == 1;
        angle = angle.max(s.kernel_angle);
        leak = leak.max(s.range_cos_leak);
        trans = trans.max((s.transversality - s.transversality_predicted).abs() / s.transversality_predicted.abs());
    }
    Ok((
        kernel_ok && angle <= 1e-8 && leak <= 1e-10 && trans <= 1e-6,
        format!(
            "kernel dim 1: {kernel_ok}, angle to (0,1,0) {angle:.2e}, range cos leak {leak:.2e}, transversality rel err {trans:.2e} (3 sets, N = 64)"
        ),
    ))
}

/// Fixed parameter sets used by the branch and expansion checks.
fn reference_setup(chi_u: f64, mass: f64, f_und: ForceLaw) -> Result<(ModelParams, ForceLaw, ForceLaw), String> {
    Ok((
        ModelParams::new(1.0, 1.0, 0.0, chi_u, 1.0, mass).map_err(|e| e.to_string())?,
        ForceLaw::hill(1.0, 1.0, 2.0).map_err(|e| e.to_string())?,
        f_und,
    ))
}

fn branch_verification() -> Check {
    let started = Instant::now();
    let setups = [
        reference_setup(0.5, 3.0, ForceLaw::linear(1.0).map_err(|e| e.to_string())?)?,
        (
            ModelParams::new(0.6, 2.0, 0.0, 1.0, 1.3, 4.0).map_err(|e| e.to_string())?,
            ForceLaw::hill(1.5, 0.8, 3.0).map_err(|e| e.to_string())?,
            ForceLaw::tanh(0.5).map_err(|e| e.to_string())?,
        ),
    ];
    let (mut curv, mut area, mut cent, mut mass) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut states = 0usize;
    let mut reached = f64::INFINITY;
    for (p, fa, fu) in &setups {
        let branch = continue_branch(p, fa, fu, 0.3, 0.02).map_err(|e| e.to_string())?;
        reached = reached.min(branch.v_max());
        for s in &branch.states {
            curv = curv.max(curvature_equation_residual(s, p, fa, fu).map_err(|e| e.to_string())?);
            area = area.max(s.shape.area_defect().abs());
            cent = cent.max(s.shape.centering().abs());
            mass = mass.max((oracle::marker_mass(s, p) - p.mass).abs() / p.mass);
            states += 1;
        }
    }
    let elapsed = started.elapsed();
    log::info!("branch verification took {elapsed:?}");
    let in_budget = elapsed <= Duration::from_secs(300);
    Ok((
        reached >= 0.3 - 1e-12 && curv <= 1e-9 && area <= 1e-10 && cent <= 1e-10 && mass <= 1e-9 && in_budget,
        format!(
            "{states} states to V = {reached:.2}: curvature {curv:.1e}, area {area:.1e}, centering {cent:.1e}, mass rel {mass:.1e}, runtime within 5 min: {in_budget}"
        ),
    ))
}

fn report_for(chi_u: f64, mass: f64, f_act: ForceLaw, f_und: ForceLaw) -> Result<BifurcationReport, String> {
    let p = ModelParams::new(1.0, 1.0, 0.0, chi_u, 1.0, mass).map_err(|e| e.to_string())?;
    bifurcation_report(&p, &f_act, &f_und).map_err(|e| e.to_string())
}

fn expansion_coefficients() -> Check {
    use std::f64::consts::PI;
    let hill2 = ForceLaw::hill(1.0, 1.0, 2.0).map_err(|e| e.to_string())?;
    let hill3 = ForceLaw::hill(1.0, 1.0, 3.0).map_err(|e| e.to_string())?;
    let linear = ForceLaw::linear(1.0).map_err(|e| e.to_string())?;
    let tanh = ForceLaw::tanh(0.5).map_err(|e| e.to_string())?;
    // chi_u = 0, or c0 at the Hill half-maximum where f1 + c0 f2 = 0
    let linear_panel = [
        ("chi_u=0 n=2", report_for(0.0, 3.0, hill2, linear)?),
        ("chi_u=0 n=3", report_for(0.0, 0.8 * PI, hill3, linear)?),
        ("chi_u=1 c0=K", report_for(1.0, PI, hill2, linear)?),
    ];
    let tanh_report = report_for(1.0, PI, hill2, tanh)?;
    let generic = report_for(1.0, 3.0, hill2, linear)?;

    let mut d1 = tanh_report.d_chi_ds_scaled;
    let mut worst_linear = 0.0f64;
    let mut parts = Vec::new();
    for (name, r) in &linear_panel {
        d1 = d1.max(r.d_chi_ds_scaled);
        worst_linear = worst_linear.max(r.rel_error_shared);
        parts.push(format!("{name} {:.1e}", r.rel_error_shared));
    }
    let verdict_ok = matches!(tanh_report.verdict, Verdict::OneThird | Verdict::OneQuarter);
    let verdict = match tanh_report.verdict {
        Verdict::OneThird => "1/3",
        Verdict::OneQuarter => "1/4",
        Verdict::Coincident => "coincident",
        Verdict::Inconclusive => "inconclusive",
    };
    Ok((
        d1 <= 1e-4 && worst_linear <= 0.05 && verdict_ok,
        format!(
            "scaled |chi'(0)| {d1:.1e}; linear f_und rel err [{}]; tanh verdict {verdict} (1/3 off {:.1e}, 1/4 off {:.1e}); generic chi_u=1 c0!=K: printed form off {:.1e}, with shape term {:.1e}",
            parts.join(", "),
            tanh_report.rel_error_one_third,
            tanh_report.rel_error_one_quarter,
            generic.rel_error_shared,
            generic.rel_error_with_shape_term,
        ),
    ))
}

fn remainder_orders(
    p: &ModelParams,
    fa: &ForceLaw,
    fu: &ForceLaw,
    chi: f64,
    dir: &(Vec<f64>, f64, f64),
    with_pi: bool,
) -> Result<Vec<f64>, String> {
    let mut rems = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let rho: Vec<f64> = dir.0.iter().map(|x| eps * x).collect();
        let state = TravelingWaveState {
            shape: Shape::new(p.r0, rho.clone()),
            v: eps * dir.1,
            p1: eps * dir.2,
            chi_c: chi,
            c1: 0.0,
        };
        let f = residual_f(&state, p, fa, fu).map_err(|e| e.to_string())?;
        let l = oracle::linearized_operator(p, fa, fu, chi, &rho, eps * dir.1, eps * dir.2, with_pi);
        let r = f.iter().zip(&l).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        rems.push(r);
    }
    Ok(rems.windows(2).map(|w| (w[0] / w[1]).log10()).collect())
}

fn linearization_consistency(seed: u64) -> Check {
    let mut rng = rng_for(seed, 8);
    let (p, fa, fu) = random_setup(&mut rng)?;
    let star = chi_c_star(&p, &fa, &fu).map_err(|e| e.to_string())?;
    let chi = rng.random_range(0.5..1.5) * star;
    let n = 32;
    let rho: Vec<f64> = (0..=n)
        .map(|k| if k <= 8 { rng.random_range(-1.0..1.0) / (1.0 + k as f64).powi(2) } else { 0.0 })
        .collect();
    let dir = (rho, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let orders = remainder_orders(&p, &fa, &fu, chi, &dir, true)?;
    let literal = remainder_orders(&p, &fa, &fu, chi, &dir, false)?;
    let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((
        min >= 1.9,
        format!(
            "observed orders {:.3}, {:.3} over eps = 1e-2, 1e-3, 1e-4 (tol 1.9); without the 1/pi in the mass term: {:.3}, {:.3}",
            orders[0], orders[1], literal[0], literal[1]
        ),
    ))
}

fn special_function_floor(seed: u64) -> Check {
    let mut rng = rng_for(seed, 9);
    let sample = |rng: &mut ChaCha8Rng| {
        let r = 20.0 * rng.random_range(0.0f64..1.0).sqrt();
        let phi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        (rng.random_range(0..=8u32), Complex64::from_polar(r, phi))
    };
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let (m, z) = sample(&mut rng);
        let got = bessel_i(m, z).map_err(|e| e.to_string())?;
        let want = oracle::bessel_i_reference(m, z);
        worst = worst.max((got - want).norm() / want.norm());
    }
    let (mut parity, mut recurrence) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (m, z) = sample(&mut rng);
        let m = m.max(1);
        let i = |k: u32, z: Complex64| bessel_i(k, z).map_err(|e| e.to_string());
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let im = i(m, z)?;
        parity = parity.max((i(m, -z)? - im * sign).norm() / (1.0 + im.norm()));
        let (lo, hi) = (i(m - 1, z)?, i(m + 1, z)?);
        let lhs = lo - hi;
        let rhs = im * (2.0 * m as f64) / z;
        recurrence = recurrence.max((lhs - rhs).norm() / lo.norm().max(hi.norm()));
    }
    let mut wronskian = 0.0f64;
    for _ in 0..50 {
        let x = rng.random_range(-20.0..20.0);
        let i0 = |x: f64| bessel_i(0, Complex64::new(x, 0.0)).map(|v| v.re).map_err(|e| e.to_string());
        // divide by the realised step (x + h) - (x - h)
        let d = |h: f64| -> Result<f64, String> {
            let (xp, xm) = (x + h, x - h);
            Ok((i0(xp)? - i0(xm)?) / (xp - xm))
        };
        let h = 1e-6;
        let rich = (4.0 * d(h)? - d(2.0 * h)?) / 3.0;
        let i1 = bessel_i(1, Complex64::new(x, 0.0)).map_err(|e| e.to_string())?.re;
        wronskian = wronskian.max((rich - i1).abs() / i1.abs().max(i0(x)?.abs()));
    }
    Ok((
        worst <= 1e-12 && parity <= 1e-12 && recurrence <= 1e-10 && wronskian <= 1e-10,
        format!(
            "I_m vs oracle {worst:.1e} (500 samples, tol 1e-12); parity {parity:.1e}; recurrence {recurrence:.1e}; I_0' = I_1 by Richardson differences at h = 1e-6 {wronskian:.1e} (tol 1e-10)"
        ),
    ))
}

fn determinism(seed: u64, ids: &[u8], first: Option<&[CriterionOutcome]>) -> Check {
    let rerun = |ids: &[u8]| -> Result<String, String> {
        let outcomes: Vec<CriterionOutcome> = ids.iter().map(|&id| run_one(seed, id)).collect();
        serde_json::to_string(&outcomes).map_err(|e| e.to_string())
    };
    let first = match first {
        Some(o) => serde_json::to_string(o).map_err(|e| e.to_string())?,
        None => rerun(ids)?,
    };
    let second = rerun(ids)?;
    let same = first == second;
    Ok((
        same,
        format!("criteria {ids:?} run twice, {} report bytes, identical: {same}", first.len()),
    ))
}
