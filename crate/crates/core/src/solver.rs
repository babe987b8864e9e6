//! Störmer–Verlet integration of the Galerkin system
//! `γ̈_j + λ_j γ_j = ∫ f(x, u) w_j` with blow-up detection.

use serde::{Deserialize, Serialize};

use crate::basis::{Domain, GridFunction, SpectralField};
use crate::error::{argument, Error, Result};
use crate::functionals::{FunctionalSnapshot, State, TermIntegrals};
use crate::nonlinearity::Nonlinearity;
use crate::well::WellReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Initial and maximal step.
    pub dt: f64,
    pub t_end: f64,
    pub dt_min: f64,
    pub psi_cap: f64,
    /// Tolerated energy drift `|E(t) − E(0)|`, relative to the larger of
    /// `max(1, |E(0)|)` and the current size of the terms making up `E`.
    pub energy_drift_tol: f64,
    /// Accepted steps between records.
    pub record_every: usize,
    /// Largest single-step relative growth of `ψ` before the step is halved.
    pub growth_limit: f64,
    /// Accepted steps without halving before the step is doubled.
    pub quiet_steps: usize,
    /// Relative band around zero inside which the sign of `I` is kept.
    pub sign_tol: f64,
    /// Fraction of `psi_cap` above which the drift check is suspended.
    pub drift_suspend_fraction: f64,
    pub max_steps: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 10.0,
            dt_min: 1e-10,
            psi_cap: 1e6,
            energy_drift_tol: 1e-5,
            record_every: 10,
            growth_limit: 0.1,
            quiet_steps: 100,
            sign_tol: 1e-9,
            drift_suspend_fraction: 0.01,
            max_steps: 200_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(argument(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt) {
            return Err(argument(format!("step floor {} must lie in (0, dt)", self.dt_min)));
        }
        if !(self.psi_cap > 0.0) {
            return Err(argument("psi cap must be positive"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(argument(format!("end time must be finite and nonnegative, got {}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(argument("record interval must be at least one step"));
        }
        if !(self.energy_drift_tol > 0.0) {
            return Err(argument("energy drift tolerance must be positive"));
        }
        let lk = domain.eigenvalues()[domain.n_modes() - 1];
        let limit = 2.0 / lk.sqrt();
        if self.dt > limit {
            return Err(Error::Precondition(format!(
                "dt = {} exceeds the stability limit 2/sqrt(lambda_K) = {limit}",
                self.dt
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    RanToTEnd,
    BlowupDetected,
    EnergyFault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub snapshots: Vec<FunctionalSnapshot>,
    /// Step that produced each record (the initial record carries `dt`).
    pub steps: Vec<f64>,
    pub verdict: Verdict,
    /// First time `ψ` crossed the cap, linearly interpolated within the step.
    pub t_blowup_est: Option<f64>,
    pub i_sign_changes: usize,
    /// Last time at which the energy drift was checked and within tolerance.
    pub last_trusted_time: f64,
    /// Time at which the drift check was suspended near blow-up.
    pub drift_suspended_at: Option<f64>,
    /// Largest relative drift seen while the check was active.
    pub max_trusted_drift: f64,
    pub max_trusted_abs_drift: f64,
    pub e0: f64,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub final_state: State,
    pub leading_exponent: Option<f64>,
    pub well_theory: bool,
}

impl TrajectoryRecord {
    /// Records with `t ≤ last_trusted_time`.
    pub fn trusted_len(&self) -> usize {
        self.times.iter().take_while(|&&t| t <= self.last_trusted_time).count()
    }
}

struct Evaluation {
    accel: SpectralField,
    integrals: TermIntegrals,
}

fn evaluate(domain: &Domain, nl: &Nonlinearity, u: &SpectralField) -> Result<Evaluation> {
    let grad_sq = domain.grad_norm_sq(u);
    let lambda = domain.eigenvalues();
    let mut accel: Vec<f64> = u.coeffs().iter().zip(lambda).map(|(c, l)| -l * c).collect();
    if nl.is_empty() {
        if !accel.iter().all(|a| a.is_finite()) {
            return Err(Error::Overflow("acceleration is not finite".into()));
        }
        return Ok(Evaluation {
            accel: SpectralField::new(accel).map_err(|_| Error::Overflow("acceleration".into()))?,
            integrals: TermIntegrals::assemble(nl, grad_sq, vec![], vec![]),
        });
    }
    let g = domain.synthesize(u)?;
    let mut f = vec![0.0; g.len()];
    let mut integral = |terms: &[crate::nonlinearity::PowerTerm]| -> Vec<f64> {
        terms
            .iter()
            .map(|t| {
                let mut s = 0.0;
                for ((fm, &c), &um) in f.iter_mut().zip(t.values()).zip(g.values()) {
                    if c != 0.0 {
                        let v = c * t.shape(um);
                        *fm += v;
                        s += v * um;
                    }
                }
                s * domain.weight()
            })
            .collect()
    };
    let a = integral(nl.a_terms());
    let b = integral(nl.b_terms());
    let h = domain.analyze(&GridFunction::new(f))?;
    for (acc, hj) in accel.iter_mut().zip(h.coeffs()) {
        *acc += hj;
    }
    if !accel.iter().all(|a| a.is_finite()) || !a.iter().chain(&b).all(|v| v.is_finite()) {
        return Err(Error::Overflow("nonlinear force is not finite".into()));
    }
    Ok(Evaluation {
        accel: SpectralField::new(accel).expect("checked finite"),
        integrals: TermIntegrals::assemble(nl, grad_sq, a, b),
    })
}

/// Acceleration `−λ_j γ_j + ∫ f(x, u) w_j`.
pub fn rhs(domain: &Domain, nl: &Nonlinearity, state: &State) -> Result<SpectralField> {
    domain.check_field(&state.u)?;
    nl.check_grid(domain)?;
    Ok(evaluate(domain, nl, &state.u)?.accel)
}

/// One kick-drift-kick step.
pub fn step_verlet(domain: &Domain, nl: &Nonlinearity, state: &State, dt: f64) -> Result<State> {
    domain.check_field(&state.u)?;
    domain.check_field(&state.v)?;
    nl.check_grid(domain)?;
    let a0 = evaluate(domain, nl, &state.u)?.accel;
    Ok(kdk(domain, nl, state, &a0, dt)?.0)
}

fn kdk(
    domain: &Domain,
    nl: &Nonlinearity,
    state: &State,
    a0: &SpectralField,
    dt: f64,
) -> Result<(State, Evaluation)> {
    let v_half = state.v.axpy(0.5 * dt, a0);
    let u = state.u.axpy(dt, &v_half);
    if !u.is_finite() {
        return Err(Error::Overflow("displacement is not finite".into()));
    }
    let e = evaluate(domain, nl, &u)?;
    let v = v_half.axpy(0.5 * dt, &e.accel);
    if !v.is_finite() {
        return Err(Error::Overflow("velocity is not finite".into()));
    }
    Ok((State { u, v }, e))
}

fn make_snapshot(domain: &Domain, state: &State, t: &TermIntegrals) -> FunctionalSnapshot {
    FunctionalSnapshot::from_integrals(
        t,
        domain.l2_norm_sq(&state.v),
        domain.l2_norm_sq(&state.u),
        2.0 * domain.inner(&state.u, &state.v),
    )
}

/// `½‖u_t‖² + ½‖∇u‖² + Σ |∫ c|u|^{p+1}| / (p+1)`.
fn magnitude(s: &FunctionalSnapshot, t: &TermIntegrals) -> f64 {
    let a = t.a.iter().zip(t.a_exponents()).map(|(m, p)| m.abs() / (p + 1.0));
    let b = t.b.iter().zip(t.b_exponents()).map(|(m, q)| m.abs() / (q + 1.0));
    0.5 * (s.kinetic_sq + s.grad_sq) + a.chain(b).sum::<f64>()
}

fn sign_of(i: f64, grad_sq: f64, tol: f64) -> i8 {
    let band = tol * (1.0 + grad_sq);
    if i > band {
        1
    } else if i < -band {
        -1
    } else {
        0
    }
}

/// Integrates from `state0` until `t_end`, confirmed blow-up, or an energy
/// fault.
///
/// Steps are halved when `ψ` grows by more than `growth_limit` in one step
/// or when the energy drift would exceed its tolerance, and doubled (up to
/// `dt`) after `quiet_steps` accepted steps. Once `ψ` exceeds
/// `drift_suspend_fraction · psi_cap` the drift check is suspended. After
/// `ψ` crosses the cap, integration continues until the step falls below
/// `dt_min` or the state overflows while `ψ` is still growing.
pub fn simulate(domain: &Domain, nl: &Nonlinearity, state0: &State, config: &SolverConfig) -> Result<TrajectoryRecord> {
    config.validate(domain)?;
    domain.check_field(&state0.u)?;
    domain.check_field(&state0.v)?;
    nl.check_grid(domain)?;
    if !state0.is_finite() {
        return Err(argument("initial state is not finite"));
    }

    let mut eval = evaluate(domain, nl, &state0.u)?;
    let mut state = state0.clone();
    let snap0 = make_snapshot(domain, &state, &eval.integrals);
    let e0 = snap0.energy;
    let drift_scale = e0.abs().max(1.0);
    let growth_floor = snap0.psi.max(1e-12);

    let mut rec = TrajectoryRecord {
        times: vec![0.0],
        snapshots: vec![snap0],
        steps: vec![config.dt],
        verdict: Verdict::RanToTEnd,
        t_blowup_est: None,
        i_sign_changes: 0,
        last_trusted_time: 0.0,
        drift_suspended_at: None,
        max_trusted_drift: 0.0,
        max_trusted_abs_drift: 0.0,
        e0,
        accepted_steps: 0,
        rejected_steps: 0,
        final_state: state0.clone(),
        leading_exponent: nl.leading_exponent(),
        well_theory: nl.validate().supports_well_theory(),
    };

    let mut t = 0.0;
    let mut dt = config.dt;
    let mut quiet = 0usize;
    let mut since_record = 0usize;
    let mut last = snap0;
    let mut sign = sign_of(last.nehari, last.grad_sq, config.sign_tol);
    let mut last_recorded = true;
    let drift_threshold = config.drift_suspend_fraction * config.psi_cap;

    'outer: loop {
        if t >= config.t_end {
            break;
        }
        if rec.accepted_steps + rec.rejected_steps >= config.max_steps {
            return Err(Error::Resolution(format!("step budget of {} exhausted at t = {t}", config.max_steps)));
        }
        let h = dt.min(config.t_end - t);
        let drift_active = last.psi <= drift_threshold;
        let attempt = kdk(domain, nl, &state, &eval.accel, h);

        let reject = |dt: &mut f64, rec: &mut TrajectoryRecord| {
            rec.rejected_steps += 1;
            *dt *= 0.5;
        };

        let (new_state, new_eval) = match attempt {
            Ok(x) => x,
            Err(Error::Overflow(_)) => {
                if rec.t_blowup_est.is_some() {
                    rec.verdict = Verdict::BlowupDetected;
                    break 'outer;
                }
                reject(&mut dt, &mut rec);
                quiet = 0;
                if dt < config.dt_min {
                    rec.verdict = Verdict::EnergyFault;
                    break 'outer;
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let snap = make_snapshot(domain, &new_state, &new_eval.integrals);
        if !(snap.energy.is_finite() && snap.psi.is_finite()) {
            if rec.t_blowup_est.is_some() {
                rec.verdict = Verdict::BlowupDetected;
                break 'outer;
            }
            reject(&mut dt, &mut rec);
            quiet = 0;
            if dt < config.dt_min {
                rec.verdict = Verdict::EnergyFault;
                break 'outer;
            }
            continue;
        }

        let too_fast = last.psi >= growth_floor && snap.psi > (1.0 + config.growth_limit) * last.psi;
        let abs_drift = (snap.energy - e0).abs();
        let drift = abs_drift / drift_scale.max(magnitude(&snap, &new_eval.integrals));
        let drifted = drift_active && drift > config.energy_drift_tol;
        if too_fast || drifted {
            reject(&mut dt, &mut rec);
            quiet = 0;
            if dt < config.dt_min {
                if rec.t_blowup_est.is_some() && snap.psi > last.psi {
                    rec.verdict = Verdict::BlowupDetected;
                } else if drifted {
                    rec.verdict = Verdict::EnergyFault;
                } else {
                    // fast growth below the cap that cannot be resolved
                    rec.verdict = Verdict::EnergyFault;
                }
                break 'outer;
            }
            continue;
        }

        // accept
        let t_new = t + h;
        if drift_active {
            rec.max_trusted_drift = rec.max_trusted_drift.max(drift);
            rec.max_trusted_abs_drift = rec.max_trusted_abs_drift.max(abs_drift);
            rec.last_trusted_time = t_new;
        } else if rec.drift_suspended_at.is_none() {
            rec.drift_suspended_at = Some(t);
        }
        if snap.psi >= config.psi_cap {
            if rec.t_blowup_est.is_none() {
                let frac = ((config.psi_cap - last.psi) / (snap.psi - last.psi)).clamp(0.0, 1.0);
                rec.t_blowup_est = Some(t + frac * h);
            }
        } else if rec.t_blowup_est.is_some() {
            rec.t_blowup_est = None;
        }
        let s = sign_of(snap.nehari, snap.grad_sq, config.sign_tol);
        if s != 0 {
            if sign != 0 && s != sign {
                rec.i_sign_changes += 1;
            }
            sign = s;
        }

        t = t_new;
        state = new_state;
        eval = new_eval;
        last = snap;
        rec.accepted_steps += 1;
        since_record += 1;
        last_recorded = false;
        if since_record >= config.record_every {
            rec.times.push(t);
            rec.snapshots.push(snap);
            rec.steps.push(h);
            since_record = 0;
            last_recorded = true;
        }
        quiet += 1;
        if quiet >= config.quiet_steps && dt < config.dt {
            dt = (2.0 * dt).min(config.dt);
            quiet = 0;
        }
        if rec.t_blowup_est.is_some() && dt < config.dt_min {
            rec.verdict = Verdict::BlowupDetected;
            break;
        }
    }

    if rec.verdict == Verdict::RanToTEnd && rec.t_blowup_est.is_some() {
        // crossed the cap but reached t_end before confirmation
        rec.t_blowup_est = None;
    }
    if !last_recorded {
        rec.times.push(t);
        rec.snapshots.push(last);
        rec.steps.push(*rec.steps.last().unwrap_or(&config.dt));
        if let Some(h) = rec.steps.last_mut() {
            *h = h.min(dt.max(config.dt_min));
        }
    }
    rec.final_state = state;
    Ok(rec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorCase {
    /// `0 < E(0) < d`, `I(u_0) > 0`
    StableSet,
    /// `0 < E(0) < d`, `I(u_0) < 0`
    UnstableSet,
    /// `E(0) < 0`, or `E(0) = 0` with `∇u_0 ≠ 0`
    NonpositiveEnergy,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorCheck {
    pub name: String,
    pub passed: bool,
    /// Smallest slack of the inequality over the checked records.
    pub worst_margin: f64,
    pub n_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorVerdicts {
    pub case: MonitorCase,
    pub checks: Vec<MonitorCheck>,
    pub note: Option<String>,
}

impl MonitorVerdicts {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, margins: impl Iterator<Item = f64>) -> MonitorCheck {
    let mut worst = f64::INFINITY;
    let mut n = 0;
    for m in margins {
        worst = worst.min(m);
        n += 1;
    }
    MonitorCheck { name: name.to_string(), passed: worst >= 0.0 || n == 0, worst_margin: worst, n_checked: n }
}

/// Checks the invariance and bound statements that apply to the initial
/// energy of `record`, over the records up to the last trusted time.
pub fn monitor_invariants(record: &TrajectoryRecord, well: &WellReport) -> MonitorVerdicts {
    let not_applicable = |note: &str| MonitorVerdicts {
        case: MonitorCase::NotApplicable,
        checks: vec![],
        note: Some(note.to_string()),
    };
    let Some(p) = record.leading_exponent else {
        return not_applicable("nonlinearity has no leading term");
    };
    if !record.well_theory {
        return not_applicable("nonlinearity does not satisfy the potential well hypotheses");
    }
    let e0 = record.e0;
    let first = record.snapshots[0];
    let n = record.trusted_len().max(1);
    let snaps = &record.snapshots[..n];
    let times = &record.times[..n];
    let drift_abs = record.max_trusted_abs_drift;
    let d = well.d_lower;

    let sign_tol = |s: &FunctionalSnapshot| 1e-9 * (1.0 + s.grad_sq);

    if e0 < 0.0 || (e0 == 0.0 && first.grad_sq > 0.0) {
        return MonitorVerdicts {
            case: MonitorCase::NonpositiveEnergy,
            checks: vec![check("unstable-set-membership", snaps.iter().map(|s| -s.nehari - sign_tol(s)))],
            note: None,
        };
    }
    if !(e0 > 0.0 && e0 < d) {
        return not_applicable("initial energy is not below the certified well depth");
    }
    if first.nehari > sign_tol(&first) {
        let bound = 2.0 * (p + 1.0) * e0 / (p - 1.0);
        let slack = 2.0 * (p + 1.0) / (p - 1.0) * drift_abs + 1e-12 * (1.0 + bound);
        MonitorVerdicts {
            case: MonitorCase::StableSet,
            checks: vec![
                check("nehari-positive", snaps.iter().map(|s| s.nehari + sign_tol(s))),
                check("gradient-bound", snaps.iter().map(|s| bound + slack - s.grad_sq)),
            ],
            note: None,
        }
    } else if first.nehari < -sign_tol(&first) {
        let m = 2.0 * (p + 1.0) * (d - e0);
        let tol = 1e-6 * (1.0 + m.abs());
        let formula = snaps.iter().map(|s| s.psi_ddot() - m + tol);
        let discrete = (1..n.saturating_sub(1)).map(|k| {
            let (h1, h2) = (times[k] - times[k - 1], times[k + 1] - times[k]);
            let (a, b, c) = (snaps[k - 1].psi, snaps[k].psi, snaps[k + 1].psi);
            let dd = 2.0 * ((c - b) / h2 - (b - a) / h1) / (h1 + h2);
            dd - m + tol + 1e-3 * snaps[k].psi_ddot().abs()
        });
        MonitorVerdicts {
            case: MonitorCase::UnstableSet,
            checks: vec![
                check("nehari-negative", snaps.iter().map(|s| -s.nehari - sign_tol(s))),
                check("psi-convexity-floor", formula),
                check("psi-convexity-floor-discrete", discrete),
            ],
            note: None,
        }
    } else {
        not_applicable("initial datum lies on the Nehari manifold")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{energy, snapshot};
    use crate::oracle::simpson;
    use crate::well::{depth_estimate, DepthOptions};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cubic(d: &Domain) -> Nonlinearity {
        Nonlinearity::single(d, 3.0, |_| 1.0, "1").unwrap()
    }

    #[test]
    fn rhs_examples() {
        let d = Domain::with_modes(PI, 8).unwrap();
        let nl = cubic(&d);
        assert_eq!(rhs(&d, &nl, &State::zeros(8)).unwrap(), SpectralField::zeros(8));
        let e1 = SpectralField::unit(8, 1).unwrap();
        let st = State::new(e1.clone(), SpectralField::zeros(8)).unwrap();
        assert_eq!(rhs(&d, &Nonlinearity::zero(), &st).unwrap(), e1.scaled(-1.0));

        let st = State::new(d.project(f64::sin), SpectralField::zeros(8)).unwrap();
        let a = rhs(&d, &nl, &st).unwrap();
        let h1 = (2.0 / PI).sqrt() * simpson(|x| x.sin().powi(4), 0.0, PI, 2000);
        let lin = -(PI / 2.0).sqrt();
        assert_abs_diff_eq!(a.coeffs()[0], lin + h1, epsilon = 1e-12);
        assert_abs_diff_eq!(h1, (2.0 / PI).sqrt() * 3.0 * PI / 8.0, epsilon = 1e-12);
    }

    #[test]
    fn single_mode_period() {
        let d = Domain::with_modes(PI, 4).unwrap();
        let nl = Nonlinearity::zero();
        let s0 = State::new(SpectralField::unit(4, 1).unwrap(), SpectralField::zeros(4)).unwrap();
        let n = (2.0 * PI / 1e-3).round() as usize;
        let dt = 2.0 * PI / n as f64;
        let mut s = s0.clone();
        for _ in 0..n {
            s = step_verlet(&d, &nl, &s, dt).unwrap();
        }
        for (a, b) in s.u.coeffs().iter().zip(s0.u.coeffs()) {
            assert!((a - b).abs() < 1e-5);
        }
        for (a, b) in s.v.coeffs().iter().zip(s0.v.coeffs()) {
            assert!((a - b).abs() < 1e-5);
        }
        let z = step_verlet(&d, &nl, &State::zeros(4), 0.1).unwrap();
        assert_eq!(z, State::zeros(4));
    }

    #[test]
    fn linear_wave_simulation() {
        let d = Domain::with_modes(PI, 16).unwrap();
        let nl = Nonlinearity::zero();
        let s0 = State::new(d.project(f64::sin), SpectralField::zeros(16)).unwrap();
        let cfg = SolverConfig { dt: 1e-3, t_end: 3.0, record_every: 50, ..Default::default() };
        let rec = simulate(&d, &nl, &s0, &cfg).unwrap();
        assert_eq!(rec.verdict, Verdict::RanToTEnd);
        assert!(rec.times.windows(2).all(|w| w[1] > w[0]));
        assert_abs_diff_eq!(*rec.times.last().unwrap(), 3.0, epsilon = 1e-12);
        for (t, s) in rec.times.iter().zip(&rec.snapshots) {
            assert_abs_diff_eq!(s.energy, PI / 4.0, epsilon = 1e-6);
            assert_abs_diff_eq!(s.psi, PI / 2.0 * t.cos().powi(2), epsilon = 1e-5);
        }
        let well = depth_estimate(&d, &cubic(&d), &DepthOptions::default()).unwrap();
        assert_eq!(monitor_invariants(&rec, &well).case, MonitorCase::NotApplicable);
    }

    #[test]
    fn zero_state_stays_zero() {
        let d = Domain::with_modes(PI, 8).unwrap();
        let rec = simulate(&d, &cubic(&d), &State::zeros(8), &SolverConfig { t_end: 1.0, ..Default::default() }).unwrap();
        assert_eq!(rec.verdict, Verdict::RanToTEnd);
        assert!(rec.snapshots.iter().all(|s| s.psi == 0.0 && s.energy == 0.0));
    }

    #[test]
    fn config_is_checked() {
        let d = Domain::with_modes(PI, 64).unwrap();
        let s0 = State::zeros(64);
        let nl = Nonlinearity::zero();
        let bad = SolverConfig { dt: 0.05, ..Default::default() };
        assert!(matches!(simulate(&d, &nl, &s0, &bad), Err(Error::Precondition(_))));
        let bad = SolverConfig { dt_min: 1.0, ..Default::default() };
        assert!(simulate(&d, &nl, &s0, &bad).is_err());
    }

    #[test]
    fn negative_energy_blows_up() {
        let d = Domain::with_modes(PI, 16).unwrap();
        let nl = cubic(&d);
        let s0 = State::new(d.project(|x| 3.0 * x.sin()), SpectralField::zeros(16)).unwrap();
        assert!(energy(&d, &nl, &s0).unwrap() < 0.0);
        let cfg = SolverConfig { dt: 1e-3, t_end: 10.0, ..Default::default() };
        let rec = simulate(&d, &nl, &s0, &cfg).unwrap();
        assert_eq!(rec.verdict, Verdict::BlowupDetected);
        let tb = rec.t_blowup_est.unwrap();
        assert!(tb <= cfg.t_end);
        assert!(rec.snapshots.last().unwrap().psi >= cfg.psi_cap);
        // increasing after the start
        let n = rec.trusted_len();
        assert!(rec.snapshots[1..n].windows(2).all(|w| w[1].psi > w[0].psi));
        let well = depth_estimate(&d, &nl, &DepthOptions::default()).unwrap();
        let v = monitor_invariants(&rec, &well);
        assert_eq!(v.case, MonitorCase::NonpositiveEnergy);
        assert!(v.passed(), "{v:?}");
    }

    #[test]
    fn records_match_independent_snapshots() {
        let d = Domain::with_modes(PI, 16).unwrap();
        let nl = cubic(&d);
        let s0 = State::new(d.project(|x| 0.3 * x.sin()), d.project(|x| 0.1 * (2.0 * x).sin())).unwrap();
        let cfg = SolverConfig { dt: 1e-3, t_end: 0.5, record_every: 1, ..Default::default() };
        let rec = simulate(&d, &nl, &s0, &cfg).unwrap();
        let fin = snapshot(&d, &nl, &rec.final_state).unwrap();
        let last = rec.snapshots.last().unwrap();
        assert_abs_diff_eq!(fin.psi_dot, last.psi_dot, epsilon = 1e-12);
        assert_abs_diff_eq!(fin.energy, last.energy, epsilon = 1e-12);
        // second difference of ψ agrees with the formula to O(dt²)
        for k in 1..rec.snapshots.len() - 1 {
            let h = rec.times[k + 1] - rec.times[k];
            let dd = (rec.snapshots[k + 1].psi - 2.0 * rec.snapshots[k].psi + rec.snapshots[k - 1].psi) / (h * h);
            assert!((dd - rec.snapshots[k].psi_ddot()).abs() < 1e-4, "k={k}");
        }
    }

    #[test]
    fn small_data_stays_in_well() {
        let d = Domain::with_modes(PI, 16).unwrap();
        let nl = cubic(&d);
        let s0 = State::new(d.project(|x| 0.5 * x.sin()), SpectralField::zeros(16)).unwrap();
        let cfg = SolverConfig { dt: 1e-3, t_end: 5.0, ..Default::default() };
        let rec = simulate(&d, &nl, &s0, &cfg).unwrap();
        assert_eq!(rec.verdict, Verdict::RanToTEnd);
        assert_eq!(rec.i_sign_changes, 0);
        let well = depth_estimate(&d, &nl, &DepthOptions::default()).unwrap();
        let v = monitor_invariants(&rec, &well);
        assert_eq!(v.case, MonitorCase::StableSet);
        assert!(v.passed(), "{v:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn verlet_is_reversible(c in prop::collection::vec(-0.5f64..0.5, 12), w in prop::collection::vec(-0.5f64..0.5, 12)) {
            let d = Domain::with_modes(PI, 12).unwrap();
            let nl = cubic(&d);
            let decay = |v: Vec<f64>| SpectralField::new(v.iter().enumerate().map(|(j, x)| x / ((j + 1) * (j + 1)) as f64).collect()).unwrap();
            let s0 = State::new(decay(c), decay(w)).unwrap();
            let s1 = step_verlet(&d, &nl, &s0, 1e-3).unwrap();
            let back = step_verlet(&d, &nl, &s1, -1e-3).unwrap();
            for (a, b) in back.u.coeffs().iter().chain(back.v.coeffs()).zip(s0.u.coeffs().iter().chain(s0.v.coeffs())) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
