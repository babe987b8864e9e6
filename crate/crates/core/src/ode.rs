//! Scalar second-order problems of concavity type
//!
//! ```text
//! ψ'' ψ − γ ψ'² = α ψ² − β ψ + H(t)
//! ```
//!
//! (`α = β = 0` gives the pure form with forcing `Q`). Near blow-up the
//! integration switches to `z = ψ^{1−γ}`, which reaches zero linearly.

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::expr::Expr;

/// `ψ` above which the transformed variable is used.
pub const SWITCH_PSI: f64 = 1e3;
/// Time tolerance of the blow-up estimate.
pub const BLOWUP_TIME_TOL: f64 = 1e-6;

const RTOL: f64 = 1e-11;
const ATOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Constant(f64),
    Expression(Expr),
}

impl Forcing {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Forcing::Constant(c) => *c,
            Forcing::Expression(e) => e.eval(t),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Forcing::Constant(c) => format!("{c}"),
            Forcing::Expression(e) => e.source().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeProblem {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub forcing: Forcing,
    pub psi0: f64,
    pub dpsi0: f64,
}

impl OdeProblem {
    /// `ψ''ψ − γψ'² = Q(t)`.
    pub fn pure(gamma: f64, forcing: Forcing, psi0: f64, dpsi0: f64) -> Self {
        Self { gamma, alpha: 0.0, beta: 0.0, forcing, psi0, dpsi0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) {
            return Err(argument(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(argument("alpha and beta must be nonnegative"));
        }
        if !(self.psi0 >= 0.0 && self.psi0.is_finite() && self.dpsi0.is_finite()) {
            return Err(argument("initial value must be finite and nonnegative"));
        }
        Ok(())
    }

    fn psi_rhs(&self, t: f64, psi: f64, dpsi: f64) -> f64 {
        (self.gamma * dpsi * dpsi + self.alpha * psi * psi - self.beta * psi + self.forcing.eval(t)) / psi
    }

    fn z_rhs(&self, t: f64, z: f64) -> f64 {
        let g = self.gamma;
        let spow = |x: f64, r: f64| x.abs().powf(r) * x.signum();
        (1.0 - g)
            * (self.alpha * z - self.beta * spow(z, g / (g - 1.0))
                + self.forcing.eval(t) * spow(z, (g + 1.0) / (g - 1.0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeOutcome {
    ReachedEnd,
    BlowUp,
    /// `ψ` reached zero, where the equation is singular.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub psi: Vec<f64>,
    pub dpsi: Vec<f64>,
    pub outcome: OdeOutcome,
    pub blowup_time: Option<f64>,
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Psi,
    Z,
}

/// One Dormand–Prince 5(4) step of `y'' = f(t, y)` written as a first
/// order system. Returns the fifth-order solution and an error estimate.
fn dopri_step(f: &dyn Fn(f64, [f64; 2]) -> [f64; 2], t: f64, y: [f64; 2], h: f64) -> ([f64; 2], f64) {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut k = [[0.0; 2]; 7];
    for s in 0..7 {
        let mut ys = y;
        for (j, kj) in k.iter().enumerate().take(s) {
            ys[0] += h * A[s][j] * kj[0];
            ys[1] += h * A[s][j] * kj[1];
        }
        k[s] = f(t + C[s] * h, ys);
    }
    let mut y5 = y;
    let mut err = 0.0f64;
    for i in 0..2 {
        let mut d5 = 0.0;
        let mut d4 = 0.0;
        for s in 0..7 {
            d5 += B5[s] * k[s][i];
            d4 += B4[s] * k[s][i];
        }
        y5[i] += h * d5;
        let sc = ATOL + RTOL * y[i].abs().max(y5[i].abs());
        err = err.max((h * (d5 - d4)).abs() / sc);
    }
    (y5, err)
}

fn field(p: &OdeProblem, mode: Mode) -> impl Fn(f64, [f64; 2]) -> [f64; 2] + '_ {
    move |t, y| match mode {
        Mode::Psi => [y[1], p.psi_rhs(t, y[0], y[1])],
        Mode::Z => [y[1], p.z_rhs(t, y[0])],
    }
}

struct Integrator<'a> {
    p: &'a OdeProblem,
    mode: Mode,
    t: f64,
    y: [f64; 2],
    h: f64,
    root: Option<f64>,
}

impl Integrator<'_> {
    fn psi_state(&self) -> (f64, f64) {
        match self.mode {
            Mode::Psi => (self.y[0], self.y[1]),
            Mode::Z => {
                let g = self.p.gamma;
                let psi = self.y[0].powf(1.0 / (1.0 - g));
                (psi, self.y[1] * psi.powf(g) / (1.0 - g))
            }
        }
    }

    fn enter_z(&mut self) {
        let g = self.p.gamma;
        let (psi, dpsi) = (self.y[0], self.y[1]);
        self.y = [psi.powf(1.0 - g), (1.0 - g) * psi.powf(-g) * dpsi];
        self.mode = Mode::Z;
    }

    fn enter_psi(&mut self) {
        let (psi, dpsi) = self.psi_state();
        self.y = [psi, dpsi];
        self.mode = Mode::Psi;
    }

    fn valid(&self, y: [f64; 2]) -> bool {
        y[0].is_finite() && y[1].is_finite() && y[0] > 0.0
    }

    /// Advances to `t_target`; returns the event that stopped it early.
    fn advance(&mut self, t_target: f64) -> Option<OdeOutcome> {
        let h_floor = 1e-14 * (1.0 + t_target.abs());
        while self.t < t_target {
            match self.mode {
                Mode::Psi if self.y[0] > SWITCH_PSI => self.enter_z(),
                Mode::Z if self.y[0] > (0.5 * SWITCH_PSI).powf(1.0 - self.p.gamma) => self.enter_psi(),
                _ => {}
            }
            let h = self.h.min(t_target - self.t);
            let (y_new, err) = dopri_step(&field(self.p, self.mode), self.t, self.y, h);
            if self.mode == Mode::Z && y_new[0].is_finite() && y_new[0] <= 0.0 && err <= 1.0 {
                return Some(self.locate_root(h));
            }
            if !self.valid(y_new) || err > 1.0 {
                if self.mode == Mode::Psi && (!self.valid(y_new)) && h <= h_floor {
                    return Some(OdeOutcome::Degenerate);
                }
                let factor = if err.is_finite() && err > 1.0 { (0.9 * err.powf(-0.2)).max(0.1) } else { 0.25 };
                self.h = h * factor;
                if self.h < h_floor {
                    return Some(if self.mode == Mode::Psi && self.y[0] < 1.0 {
                        OdeOutcome::Degenerate
                    } else {
                        OdeOutcome::BlowUp
                    });
                }
                continue;
            }
            self.t += h;
            self.y = y_new;
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            self.h = (h * grow).max(h_floor);
            if self.mode == Mode::Psi && self.y[0] <= 1e-300 {
                return Some(OdeOutcome::Degenerate);
            }
        }
        None
    }

    /// Bisection on the step length for the root of `z`.
    fn locate_root(&mut self, h: f64) -> OdeOutcome {
        let (mut lo, mut hi) = (0.0, h);
        let f = field(self.p, self.mode);
        while hi - lo > 0.25 * BLOWUP_TIME_TOL {
            let mid = 0.5 * (lo + hi);
            let (y, _) = dopri_step(&f, self.t, self.y, mid);
            if y[0] > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (y, _) = dopri_step(&f, self.t, self.y, lo);
        self.y = y;
        self.t += lo;
        self.root = Some(self.t + 0.5 * (hi - lo));
        OdeOutcome::BlowUp
    }
}

fn integrate(p: &OdeProblem, t_max: f64, dt: f64) -> Result<OdeTrajectory> {
    p.validate()?;
    if !(dt > 0.0 && t_max >= 0.0) {
        return Err(argument("output step must be positive and horizon nonnegative"));
    }
    let mut out = OdeTrajectory {
        times: vec![0.0],
        psi: vec![p.psi0],
        dpsi: vec![p.dpsi0],
        outcome: OdeOutcome::ReachedEnd,
        blowup_time: None,
    };
    if p.psi0 == 0.0 {
        out.outcome = OdeOutcome::Degenerate;
        return Ok(out);
    }
    let mut it = Integrator { p, mode: Mode::Psi, t: 0.0, y: [p.psi0, p.dpsi0], h: dt.min(1e-3), root: None };
    let n = (t_max / dt).round() as usize;
    for k in 1..=n {
        let target = (k as f64 * dt).min(t_max);
        if let Some(ev) = it.advance(target) {
            out.outcome = ev;
            if ev == OdeOutcome::BlowUp {
                out.blowup_time = Some(it.root.unwrap_or(it.t));
            }
            break;
        }
        let (psi, dpsi) = it.psi_state();
        out.times.push(target);
        out.psi.push(psi);
        out.dpsi.push(dpsi);
    }
    Ok(out)
}

/// Integrates `ψ''ψ − γψ'² = Q(t)` on `[0, t_max]` with outputs every `dt`.
pub fn integrate_power_ode(p: &OdeProblem, t_max: f64, dt: f64) -> Result<OdeTrajectory> {
    let pure = OdeProblem { alpha: 0.0, beta: 0.0, ..p.clone() };
    integrate(&pure, t_max, dt)
}

/// Integrates `ψ''ψ − γψ'² = αψ² − βψ + H(t)`.
pub fn integrate_shifted_ode(p: &OdeProblem, t_max: f64, dt: f64) -> Result<OdeTrajectory> {
    if !(p.alpha > 0.0 && p.beta > 0.0) {
        return Err(argument("alpha and beta must be positive"));
    }
    integrate(p, t_max, dt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub passed: bool,
    /// Largest second difference of `z = ψ^{1−γ}` (divided by the step product).
    pub max_second_difference: f64,
    pub violations: usize,
    pub n_checked: usize,
}

/// Checks that `z = ψ^{1−γ}` has nonpositive discrete second differences,
/// up to a rounding tolerance scaled by the local step.
pub fn concavity_check(times: &[f64], psi: &[f64], gamma: f64) -> Result<ConcavityReport> {
    if times.len() != psi.len() {
        return Err(argument("times and samples differ in length"));
    }
    if !(gamma > 1.0) {
        return Err(argument(format!("gamma must exceed 1, got {gamma}")));
    }
    if psi.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::Precondition("concavity check needs positive samples".into()));
    }
    let z: Vec<f64> = psi.iter().map(|p| p.powf(1.0 - gamma)).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut n = 0;
    for k in 1..z.len().saturating_sub(1) {
        let (h1, h2) = (times[k] - times[k - 1], times[k + 1] - times[k]);
        let dd = 2.0 * ((z[k + 1] - z[k]) / h2 - (z[k] - z[k - 1]) / h1) / (h1 + h2);
        let tol = 1e-8 * (z[k - 1].abs() + 2.0 * z[k].abs() + z[k + 1].abs()) / (h1 * h2);
        worst = worst.max(dd);
        if dd > tol {
            violations += 1;
        }
        n += 1;
    }
    Ok(ConcavityReport { passed: violations == 0, max_second_difference: worst, violations, n_checked: n })
}

/// Closed-form solution of `ψ'' = αψ − β` used as a lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearComparison {
    pub alpha: f64,
    pub beta: f64,
    pub psi0: f64,
    pub dpsi0: f64,
}

impl LinearComparison {
    pub fn new(alpha: f64, beta: f64, psi0: f64, dpsi0: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(argument(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { alpha, beta, psi0, dpsi0 })
    }

    /// Coefficient of `e^{√α t}`.
    pub fn growth_coefficient(&self) -> f64 {
        0.5 * (self.psi0 + self.dpsi0 / self.alpha.sqrt() - self.beta / self.alpha)
    }

    pub fn decay_coefficient(&self) -> f64 {
        0.5 * (self.psi0 - self.dpsi0 / self.alpha.sqrt() - self.beta / self.alpha)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let r = self.alpha.sqrt();
        self.growth_coefficient() * (r * t).exp() + self.decay_coefficient() * (-r * t).exp() + self.beta / self.alpha
    }
}

pub fn linear_comparison_solution(alpha: f64, beta: f64, psi0: f64, dpsi0: f64) -> Result<LinearComparison> {
    LinearComparison::new(alpha, beta, psi0, dpsi0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn zero() -> Forcing {
        Forcing::Constant(0.0)
    }

    #[test]
    fn pure_closed_forms() {
        let r = integrate_power_ode(&OdeProblem::pure(2.0, zero(), 1.0, 1.0), 2.0, 1e-3).unwrap();
        assert_eq!(r.outcome, OdeOutcome::BlowUp);
        assert!((r.blowup_time.unwrap() - 1.0).abs() <= 1e-3);
        assert!((r.blowup_time.unwrap() - 1.0).abs() <= 1e-5);

        let r = integrate_power_ode(&OdeProblem::pure(1.5, zero(), 1.0, 2.0), 2.0, 1e-3).unwrap();
        assert_eq!(r.outcome, OdeOutcome::BlowUp);
        assert!((r.blowup_time.unwrap() - 1.0).abs() <= 1e-5);

        let r = integrate_power_ode(&OdeProblem::pure(2.0, zero(), 1.0, 0.0), 2.0, 1e-2).unwrap();
        assert_eq!(r.outcome, OdeOutcome::ReachedEnd);
        assert!(r.psi.iter().all(|&p| (p - 1.0).abs() < 1e-12));
    }

    #[test]
    fn degenerate_start_and_collapse() {
        let r = integrate_power_ode(&OdeProblem::pure(2.0, zero(), 0.0, 1.0), 1.0, 1e-2).unwrap();
        assert_eq!(r.outcome, OdeOutcome::Degenerate);
        // z = 1 + t grows without bound, ψ decays but never vanishes
        let r = integrate_power_ode(&OdeProblem::pure(2.0, zero(), 1.0, -1.0), 1.0, 1e-2).unwrap();
        assert_eq!(r.outcome, OdeOutcome::ReachedEnd);
        assert_relative_eq!(*r.psi.last().unwrap(), 0.5, epsilon = 1e-9);
        assert!(integrate_power_ode(&OdeProblem::pure(1.0, zero(), 1.0, 0.0), 1.0, 1e-2).is_err());
    }

    #[test]
    fn transform_equivalence() {
        for (g, p0, d0) in [(2.0, 1.0, 1.0), (1.5, 2.0, 0.7), (3.0, 0.5, 0.2)] {
            let r = integrate_power_ode(&OdeProblem::pure(g, zero(), p0, d0), 10.0, 1e-3).unwrap();
            let z0: f64 = f64::powf(p0, 1.0 - g);
            let dz0 = (1.0 - g) * f64::powf(p0, -g) * d0;
            for (t, psi) in r.times.iter().zip(&r.psi) {
                if *psi > 1e6 {
                    break;
                }
                let exact = (z0 + dz0 * t).powf(1.0 / (1.0 - g));
                assert!((psi - exact).abs() <= 1e-6 * exact, "g={g} t={t}: {psi} vs {exact}");
            }
            assert!((r.blowup_time.unwrap() - (-z0 / dz0)).abs() < 1e-5);
        }
    }

    #[test]
    fn shifted_ode_examples() {
        let eq = OdeProblem { gamma: 2.0, alpha: 2.0, beta: 1.0, forcing: zero(), psi0: 0.5, dpsi0: 0.0 };
        let r = integrate_shifted_ode(&eq, 5.0, 1e-2).unwrap();
        assert_eq!(r.outcome, OdeOutcome::ReachedEnd);
        assert!(r.psi.iter().all(|&p| (p - 0.5).abs() < 1e-12));

        let p = OdeProblem { gamma: 2.0, alpha: 1.0, beta: 1.0, forcing: zero(), psi0: 2.0, dpsi0: 1.0 };
        let r = integrate_shifted_ode(&p, 10.0, 1e-3).unwrap();
        assert_eq!(r.outcome, OdeOutcome::BlowUp);
        let tb = r.blowup_time.unwrap();
        let lin = linear_comparison_solution(1.0, 1.0, 2.0, 1.0).unwrap();
        assert!(lin.growth_coefficient() > 0.0);
        for (t, psi) in r.times.iter().zip(&r.psi) {
            assert!(*psi >= lin.eval(*t) * (1.0 - 1e-9));
        }

        let h1 = OdeProblem { forcing: Forcing::Constant(1.0), ..p.clone() };
        let h2 = OdeProblem { forcing: Forcing::Constant(2.0), ..p.clone() };
        let t1 = integrate_shifted_ode(&h1, 10.0, 1e-3).unwrap().blowup_time.unwrap();
        let t2 = integrate_shifted_ode(&h2, 10.0, 1e-3).unwrap().blowup_time.unwrap();
        assert!(t2 <= t1 && t1 <= tb);
        assert!(integrate_shifted_ode(&OdeProblem { alpha: 0.0, ..p }, 1.0, 1e-2).is_err());
    }

    #[test]
    fn concavity_examples() {
        let r = integrate_power_ode(&OdeProblem::pure(2.0, zero(), 1.0, 1.0), 2.0, 1e-3).unwrap();
        let c = concavity_check(&r.times, &r.psi, 2.0).unwrap();
        assert!(c.passed, "{c:?}");

        let q = Forcing::Expression(Expr::parse("1", "t").unwrap());
        let r = integrate_power_ode(&OdeProblem::pure(2.0, q, 1.0, 0.0), 2.0, 1e-2).unwrap();
        let c = concavity_check(&r.times, &r.psi, 2.0).unwrap();
        assert!(c.passed && c.max_second_difference < 0.0);

        let times: Vec<f64> = (0..100).map(|k| k as f64 * 0.01).collect();
        let psi: Vec<f64> = times.iter().map(|t| PI / 2.0 * t.cos().powi(2)).collect();
        assert!(!concavity_check(&times, &psi, 2.0).unwrap().passed);
    }

    #[test]
    fn comparison_examples() {
        let c = linear_comparison_solution(2.0, 1.0, 0.5, 0.0).unwrap();
        for t in [0.0, 1.0, 3.0] {
            assert_relative_eq!(c.eval(t), 0.5, epsilon = 1e-15);
        }
        let c = linear_comparison_solution(1.0, 2.0, 3.0, 0.0).unwrap();
        for t in [0.0, 0.5, 2.0] {
            assert_relative_eq!(c.eval(t), t.cosh() + 2.0, epsilon = 1e-14);
        }
        assert!(linear_comparison_solution(0.0, 1.0, 1.0, 1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn raising_slope_keeps_blowup(g in 1.2f64..3.0, p0 in 0.5f64..2.0, d0 in 0.05f64..2.0, extra in 0.0f64..2.0, q in 0.0f64..1.0) {
            let base = OdeProblem::pure(g, Forcing::Constant(q), p0, d0);
            let a = integrate_power_ode(&base, 20.0, 1e-2).unwrap();
            let b = integrate_power_ode(&OdeProblem { dpsi0: d0 + extra, ..base }, 20.0, 1e-2).unwrap();
            if a.outcome == OdeOutcome::BlowUp {
                prop_assert_eq!(b.outcome, OdeOutcome::BlowUp);
                prop_assert!(b.blowup_time.unwrap() <= a.blowup_time.unwrap() + 1e-6);
            }
        }
    }
}
