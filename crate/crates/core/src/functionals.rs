//! Energy, potential, Nehari and remainder functionals.
//!
//! For a field `z` and nonlinearity `f`:
//!
//! * `J(z) = ½‖∇z‖² − ∫ F(x, z)` with `F` the primitive of `f` in `u`,
//! * `I(z) = ‖∇z‖² − ∫ z f(x, z)`,
//! * `B(z) = Σ_{i≥2} (p_i−p_1)/((p_1+1)(p_i+1)) ∫ a_i|z|^{p_i+1}
//!          + Σ_j (q_j−p_1)/((p_1+1)(q_j+1)) ∫ b_j|z|^{q_j+1}`,
//!
//! related by `J = I/(p_1+1) + (p_1−1)/(2(p_1+1))‖∇z‖² + B`. Every term
//! integral is computed from a single synthesis so the identity holds to
//! rounding error.

use serde::{Deserialize, Serialize};

use crate::basis::{Domain, SpectralField};
use crate::error::{argument, Error, Result};
use crate::nonlinearity::{Nonlinearity, TermKind};

/// Absolute and relative tolerance for the `J`/`I`/`B` identity residual.
pub const IDENTITY_TOL: f64 = 1e-8;

/// Phase point `(u, u_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub u: SpectralField,
    pub v: SpectralField,
}

impl State {
    pub fn new(u: SpectralField, v: SpectralField) -> Result<Self> {
        if u.len() != v.len() {
            return Err(argument(format!(
                "displacement has {} modes, velocity has {}",
                u.len(),
                v.len()
            )));
        }
        if !(u.is_finite() && v.is_finite()) {
            return Err(argument("state has non-finite coefficients"));
        }
        Ok(Self { u, v })
    }

    pub fn zeros(n_modes: usize) -> Self {
        Self { u: SpectralField::zeros(n_modes), v: SpectralField::zeros(n_modes) }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// Per-term integrals `∫ c(x) z g(z)` together with `‖∇z‖²`.
///
/// For odd-power terms the integrand is `c|z|^{p+1}`, for the
/// absolute-power term it is `c|z|^p z`.
#[derive(Debug, Clone, PartialEq)]
pub struct TermIntegrals {
    pub grad_sq: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    a_exp: Vec<f64>,
    b_exp: Vec<f64>,
    a_kind: Vec<TermKind>,
}

impl TermIntegrals {
    /// `∫ z f(x, z)`.
    pub fn moment(&self) -> f64 {
        self.a.iter().chain(&self.b).sum()
    }

    /// `∫ F(x, z)`.
    pub fn primitive(&self) -> f64 {
        let a: f64 = self.a.iter().zip(&self.a_exp).map(|(m, p)| m / (p + 1.0)).sum();
        let b: f64 = self.b.iter().zip(&self.b_exp).map(|(m, q)| m / (q + 1.0)).sum();
        a + b
    }

    pub fn nehari(&self) -> f64 {
        self.grad_sq - self.moment()
    }

    pub fn potential(&self) -> f64 {
        0.5 * self.grad_sq - self.primitive()
    }

    /// Remainder `B`; zero when there is no leading term.
    pub fn remainder(&self) -> f64 {
        let Some(&p1) = self.a_exp.first() else {
            return 0.0;
        };
        let a: f64 = self
            .a
            .iter()
            .zip(&self.a_exp)
            .skip(1)
            .map(|(m, p)| (p - p1) / ((p1 + 1.0) * (p + 1.0)) * m)
            .sum();
        let b: f64 = self
            .b
            .iter()
            .zip(&self.b_exp)
            .map(|(m, q)| (q - p1) / ((p1 + 1.0) * (q + 1.0)) * m)
            .sum();
        a + b
    }

    /// Integrals of the field `λz`, obtained by exact rescaling.
    pub fn scaled(&self, lambda: f64) -> Self {
        let l = lambda.abs();
        let scale = |m: f64, p: f64, kind: TermKind| match kind {
            TermKind::OddPower => m * l.powf(p + 1.0),
            TermKind::AbsPower => m * l.powf(p) * lambda,
        };
        Self {
            grad_sq: self.grad_sq * lambda * lambda,
            a: self
                .a
                .iter()
                .zip(&self.a_exp)
                .zip(&self.a_kind)
                .map(|((&m, &p), &k)| scale(m, p, k))
                .collect(),
            b: self
                .b
                .iter()
                .zip(&self.b_exp)
                .map(|(&m, &q)| scale(m, q, TermKind::OddPower))
                .collect(),
            a_exp: self.a_exp.clone(),
            b_exp: self.b_exp.clone(),
            a_kind: self.a_kind.clone(),
        }
    }

    pub(crate) fn assemble(nl: &Nonlinearity, grad_sq: f64, a: Vec<f64>, b: Vec<f64>) -> Self {
        Self {
            grad_sq,
            a,
            b,
            a_exp: nl.a_terms().iter().map(|t| t.exponent()).collect(),
            b_exp: nl.b_terms().iter().map(|t| t.exponent()).collect(),
            a_kind: nl.a_terms().iter().map(|t| t.kind()).collect(),
        }
    }

    pub fn a_exponents(&self) -> &[f64] {
        &self.a_exp
    }

    pub fn b_exponents(&self) -> &[f64] {
        &self.b_exp
    }

    pub fn a_kinds(&self) -> &[TermKind] {
        &self.a_kind
    }
}

pub fn term_integrals(domain: &Domain, nl: &Nonlinearity, field: &SpectralField) -> Result<TermIntegrals> {
    nl.check_grid(domain)?;
    let g = domain.synthesize(field)?;
    let integral = |t: &crate::nonlinearity::PowerTerm| {
        let s: f64 = t
            .values()
            .iter()
            .zip(g.values())
            .map(|(&c, &u)| if c == 0.0 { 0.0 } else { c * t.moment(u) })
            .sum();
        s * domain.weight()
    };
    Ok(TermIntegrals::assemble(
        nl,
        domain.grad_norm_sq(field),
        nl.a_terms().iter().map(integral).collect(),
        nl.b_terms().iter().map(integral).collect(),
    ))
}

/// `E(u, v) = ½(‖v‖² + ‖∇u‖²) − ∫ F(x, u)`.
pub fn energy(domain: &Domain, nl: &Nonlinearity, state: &State) -> Result<f64> {
    domain.check_field(&state.v)?;
    let t = term_integrals(domain, nl, &state.u)?;
    Ok(0.5 * domain.l2_norm_sq(&state.v) + t.potential())
}

pub fn nehari_i(domain: &Domain, nl: &Nonlinearity, field: &SpectralField) -> Result<f64> {
    Ok(term_integrals(domain, nl, field)?.nehari())
}

pub fn potential_j(domain: &Domain, nl: &Nonlinearity, field: &SpectralField) -> Result<f64> {
    Ok(term_integrals(domain, nl, field)?.potential())
}

pub fn remainder_b(domain: &Domain, nl: &Nonlinearity, field: &SpectralField) -> Result<f64> {
    Ok(term_integrals(domain, nl, field)?.remainder())
}

/// All scalar diagnostics of a phase point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSnapshot {
    pub energy: f64,
    pub potential: f64,
    pub nehari: f64,
    pub remainder: f64,
    /// `ψ = ‖u‖²`
    pub psi: f64,
    /// `ψ' = 2(u, u_t)`
    pub psi_dot: f64,
    pub grad_sq: f64,
    /// `‖u_t‖²`
    pub kinetic_sq: f64,
}

impl FunctionalSnapshot {
    /// Assembles a snapshot without checking the identity residual.
    pub fn from_integrals(t: &TermIntegrals, kinetic_sq: f64, psi: f64, psi_dot: f64) -> Self {
        Self {
            energy: 0.5 * kinetic_sq + t.potential(),
            potential: t.potential(),
            nehari: t.nehari(),
            remainder: t.remainder(),
            psi,
            psi_dot,
            grad_sq: t.grad_sq,
            kinetic_sq,
        }
    }

    /// `ψ'' = 2‖u_t‖² − 2I(u)`.
    pub fn psi_ddot(&self) -> f64 {
        2.0 * self.kinetic_sq - 2.0 * self.nehari
    }

    /// Residual of `J − I/(p_1+1) − (p_1−1)/(2(p_1+1))‖∇u‖² − B`.
    pub fn identity_residual(&self, p1: f64) -> f64 {
        self.potential
            - self.nehari / (p1 + 1.0)
            - (p1 - 1.0) / (2.0 * (p1 + 1.0)) * self.grad_sq
            - self.remainder
    }
}

pub fn snapshot(domain: &Domain, nl: &Nonlinearity, state: &State) -> Result<FunctionalSnapshot> {
    domain.check_field(&state.v)?;
    let t = term_integrals(domain, nl, &state.u)?;
    let kinetic_sq = domain.l2_norm_sq(&state.v);
    let s = FunctionalSnapshot::from_integrals(
        &t,
        kinetic_sq,
        domain.l2_norm_sq(&state.u),
        2.0 * domain.inner(&state.u, &state.v),
    );
    let values = [s.energy, s.potential, s.nehari, s.remainder, s.psi, s.psi_dot, s.grad_sq];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("functional snapshot is not finite".into()));
    }
    if let Some(p1) = nl.leading_exponent() {
        let scale = t.a.iter().chain(&t.b).map(|m| m.abs()).sum::<f64>() + t.grad_sq;
        let r = s.identity_residual(p1);
        if r.abs() > IDENTITY_TOL * (1.0 + scale) {
            return Err(Error::Resolution(format!(
                "identity residual {r:e} exceeds tolerance at scale {scale:e}"
            )));
        }
    }
    Ok(s)
}

/// `ψ''` from the conserved energy:
/// `(p_1+3)‖u_t‖² − 2(p_1+1)E_0 + (p_1−1)‖∇u‖² + 2(p_1+1)B(u)`.
pub fn psi_ddot(domain: &Domain, nl: &Nonlinearity, state: &State, e0: f64) -> Result<f64> {
    let p1 = nl
        .leading_exponent()
        .ok_or_else(|| argument("nonlinearity has no leading term"))?;
    domain.check_field(&state.v)?;
    let t = term_integrals(domain, nl, &state.u)?;
    let k = domain.l2_norm_sq(&state.v);
    Ok((p1 + 3.0) * k - 2.0 * (p1 + 1.0) * e0 + (p1 - 1.0) * t.grad_sq + 2.0 * (p1 + 1.0) * t.remainder())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{Form, PowerTerm};
    use crate::oracle::simpson;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn dom() -> Domain {
        Domain::with_modes(PI, 16).unwrap()
    }

    fn cubic(d: &Domain) -> Nonlinearity {
        Nonlinearity::single(d, 3.0, |_| 1.0, "1").unwrap()
    }

    fn sin_field(d: &Domain, a: f64) -> SpectralField {
        d.project(|x| a * x.sin())
    }

    #[test]
    fn energy_examples() {
        let d = dom();
        let nl = cubic(&d);
        assert_eq!(energy(&d, &nl, &State::zeros(16)).unwrap(), 0.0);

        let zero_coeff = Nonlinearity::single(&d, 3.0, |_| 0.0, "0").unwrap();
        let st = State::new(sin_field(&d, 1.0), SpectralField::zeros(16)).unwrap();
        assert_abs_diff_eq!(energy(&d, &zero_coeff, &st).unwrap(), PI / 4.0, epsilon = 1e-12);

        let sin4 = simpson(|x| x.sin().powi(4), 0.0, PI, 4000);
        let expected = 0.5 * simpson(|x| x.cos().powi(2), 0.0, PI, 4000) - 0.25 * sin4;
        assert_abs_diff_eq!(energy(&d, &nl, &st).unwrap(), expected, epsilon = 1e-10);
        assert_abs_diff_eq!(expected, 5.0 * PI / 32.0, epsilon = 1e-10);
    }

    #[test]
    fn nehari_examples() {
        let d = dom();
        let nl = cubic(&d);
        assert_eq!(nehari_i(&d, &nl, &SpectralField::zeros(16)).unwrap(), 0.0);
        let sin4 = simpson(|x| x.sin().powi(4), 0.0, PI, 4000);
        let grad = simpson(|x| x.cos().powi(2), 0.0, PI, 4000);
        assert_abs_diff_eq!(nehari_i(&d, &nl, &sin_field(&d, 1.0)).unwrap(), grad - sin4, epsilon = 1e-10);
        assert_abs_diff_eq!(grad - sin4, PI / 8.0, epsilon = 1e-10);
        assert_abs_diff_eq!(
            nehari_i(&d, &nl, &sin_field(&d, 2.0)).unwrap(),
            4.0 * grad - 16.0 * sin4,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(4.0 * grad - 16.0 * sin4, -4.0 * PI, epsilon = 1e-9);
    }

    #[test]
    fn potential_and_remainder_examples() {
        let d = dom();
        let nl = cubic(&d);
        let z = SpectralField::zeros(16);
        assert_eq!(potential_j(&d, &nl, &z).unwrap(), 0.0);
        assert_eq!(remainder_b(&d, &nl, &z).unwrap(), 0.0);
        assert_eq!(remainder_b(&d, &nl, &sin_field(&d, 1.3)).unwrap(), 0.0);

        let two = Nonlinearity::new(
            Form::Odd,
            vec![PowerTerm::constant(&d, 3.0, 1.0).unwrap(), PowerTerm::constant(&d, 5.0, 1.0).unwrap()],
            vec![],
        );
        let sin6 = simpson(|x| x.sin().powi(6), 0.0, PI, 4000);
        let b = remainder_b(&d, &two, &sin_field(&d, 1.0)).unwrap();
        assert_abs_diff_eq!(b, (5.0 - 3.0) / (4.0 * 6.0) * sin6, epsilon = 1e-10);
        assert_abs_diff_eq!(b, 5.0 * PI / 16.0 / 12.0, epsilon = 1e-10);
    }

    #[test]
    fn snapshot_examples() {
        let d = dom();
        let nl = cubic(&d);
        let s0 = snapshot(&d, &nl, &State::zeros(16)).unwrap();
        assert_eq!(s0.energy, 0.0);
        assert_eq!(s0.psi, 0.0);
        assert_eq!(s0.psi_dot, 0.0);

        let st = State::new(sin_field(&d, 1.0), sin_field(&d, 1.0)).unwrap();
        let s = snapshot(&d, &nl, &st).unwrap();
        let l2 = simpson(|x| x.sin().powi(2), 0.0, PI, 4000);
        assert_abs_diff_eq!(s.psi, l2, epsilon = 1e-10);
        assert_abs_diff_eq!(s.psi_dot, 2.0 * l2, epsilon = 1e-10);
        assert_abs_diff_eq!(s.psi_dot, PI, epsilon = 1e-10);
    }

    #[test]
    fn psi_ddot_examples() {
        let d = dom();
        let nl = cubic(&d);
        assert_eq!(psi_ddot(&d, &nl, &State::zeros(16), 0.0).unwrap(), 0.0);
        let st = State::new(sin_field(&d, 1.0), SpectralField::zeros(16)).unwrap();
        let e0 = energy(&d, &nl, &st).unwrap();
        assert_abs_diff_eq!(e0, 5.0 * PI / 32.0, epsilon = 1e-10);
        assert_abs_diff_eq!(psi_ddot(&d, &nl, &st, e0).unwrap(), -PI / 4.0, epsilon = 1e-10);
        assert!(psi_ddot(&d, &Nonlinearity::zero(), &st, 0.0).is_err());
    }

    #[test]
    fn energy_is_even_in_velocity() {
        let d = dom();
        let nl = cubic(&d);
        let st = State::new(sin_field(&d, 0.7), d.project(|x| x * (PI - x))).unwrap();
        let flipped = State::new(st.u.clone(), st.v.scaled(-1.0)).unwrap();
        assert_eq!(energy(&d, &nl, &st).unwrap(), energy(&d, &nl, &flipped).unwrap());
    }

    fn mixed(d: &Domain) -> Nonlinearity {
        Nonlinearity::new(
            Form::Odd,
            vec![
                PowerTerm::sampled(d, 2.5, |x| (2.0 * x).cos(), "cos2x").unwrap(),
                PowerTerm::sampled(d, 4.0, |x| 1.0 + x.sin(), "1+sin").unwrap(),
            ],
            vec![PowerTerm::sampled(d, 1.5, |x| -x.sin(), "-sin").unwrap()],
        )
    }

    proptest! {
        #[test]
        fn identity_and_remainder_sign(c in prop::collection::vec(-2.0f64..2.0, 16), v in prop::collection::vec(-2.0f64..2.0, 16), f2 in any::<bool>()) {
            let d = dom();
            let base = mixed(&d);
            let nl = if f2 { Nonlinearity::new(Form::AbsLeading, base.a_terms().to_vec(), base.b_terms().to_vec()) } else { base };
            let st = State::new(SpectralField::new(c).unwrap(), SpectralField::new(v).unwrap()).unwrap();
            let s = snapshot(&d, &nl, &st).unwrap();
            prop_assert!(s.identity_residual(2.5).abs() <= 1e-10 * (1.0 + s.grad_sq));
            prop_assert!(s.remainder >= 0.0);
            let e0 = s.energy;
            let a = psi_ddot(&d, &nl, &st, e0).unwrap();
            prop_assert!((a - s.psi_ddot()).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }
}
