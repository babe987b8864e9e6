//! Combined power nonlinearities with variable coefficients.
//!
//! Two shapes are supported:
//!
//! * odd: `f(x,u) = Σ a_i(x)|u|^{p_i-1}u + Σ b_j(x)|u|^{q_j-1}u`
//! * absolute leading: same, except the leading term is `a_1(x)|u|^{p_1}`.
//!
//! Coefficients are sampled once onto the quadrature grid of a [`Domain`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::basis::{Domain, GridFunction};
use crate::error::{argument, Result};
use crate::expr::Expr;

/// Threshold used to decide that the leading coefficient changes sign on the
/// grid. Grid sampling cannot see sign changes between nodes.
pub const SIGN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    /// `c(x)|u|^{p-1}u`
    OddPower,
    /// `c(x)|u|^p`
    AbsPower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    /// Every term is an odd power.
    Odd,
    /// The leading term is `a_1(x)|u|^{p_1}`.
    AbsLeading,
}

/// One power term `c(x) · g(u)` with its coefficient sampled on the grid.
#[derive(Debug, Clone)]
pub struct PowerTerm {
    values: Vec<f64>,
    exponent: f64,
    int_exponent: Option<i32>,
    kind: TermKind,
    bound: f64,
    label: String,
}

impl PowerTerm {
    /// Samples `coeff` on the domain grid. The bound defaults to the grid
    /// maximum of `|coeff|`.
    pub fn sampled(
        domain: &Domain,
        exponent: f64,
        coeff: impl Fn(f64) -> f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        Self::from_values(domain.sample(coeff).into_values(), exponent, label)
    }

    pub fn constant(domain: &Domain, exponent: f64, c: f64) -> Result<Self> {
        Self::sampled(domain, exponent, |_| c, format!("{c}"))
    }

    pub fn from_expr(domain: &Domain, exponent: f64, expr: &Expr) -> Result<Self> {
        Self::sampled(domain, exponent, |x| expr.eval(x), expr.source())
    }

    pub fn from_values(values: Vec<f64>, exponent: f64, label: impl Into<String>) -> Result<Self> {
        if !exponent.is_finite() {
            return Err(argument(format!("exponent must be finite, got {exponent}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(argument(format!("coefficient is not finite at node {i}")));
        }
        let bound = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let int_exponent = (exponent.fract() == 0.0 && exponent.abs() < 64.0).then_some(exponent as i32);
        Ok(Self {
            values,
            exponent,
            int_exponent,
            kind: TermKind::OddPower,
            bound,
            label: label.into(),
        })
    }

    /// Overrides the coefficient bound with a certified analytic one.
    pub fn with_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound.is_finite() && bound >= self.bound) {
            return Err(argument(format!(
                "bound {bound} is below the sampled maximum {}",
                self.bound
            )));
        }
        self.bound = bound;
        Ok(self)
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn kind(&self) -> TermKind {
        self.kind
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    #[inline]
    fn abs_pow(&self, a: f64, e: f64, ie: Option<i32>) -> f64 {
        match ie {
            Some(k) => a.powi(k),
            None => a.powf(e),
        }
    }

    /// `g(u)` without the coefficient.
    #[inline]
    pub fn shape(&self, u: f64) -> f64 {
        let a = u.abs();
        match self.kind {
            TermKind::OddPower => self.abs_pow(a, self.exponent - 1.0, self.int_exponent.map(|k| k - 1)) * u,
            TermKind::AbsPower => self.abs_pow(a, self.exponent, self.int_exponent),
        }
    }

    /// `u · g(u)`, the integrand of the term's contribution to `∫ u f`.
    #[inline]
    pub fn moment(&self, u: f64) -> f64 {
        u * self.shape(u)
    }
}

/// A validated-or-not nonlinearity. Use [`Nonlinearity::validate`] to check
/// the structural hypotheses.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    form: Form,
    a_terms: Vec<PowerTerm>,
    b_terms: Vec<PowerTerm>,
}

impl Nonlinearity {
    /// Assembles a nonlinearity. Term kinds are assigned from `form`.
    pub fn new(form: Form, mut a_terms: Vec<PowerTerm>, mut b_terms: Vec<PowerTerm>) -> Self {
        for (i, t) in a_terms.iter_mut().enumerate() {
            t.kind = if i == 0 && form == Form::AbsLeading {
                TermKind::AbsPower
            } else {
                TermKind::OddPower
            };
        }
        for t in &mut b_terms {
            t.kind = TermKind::OddPower;
        }
        Self { form, a_terms, b_terms }
    }

    /// `f ≡ 0`, the linear wave equation.
    pub fn zero() -> Self {
        Self { form: Form::Odd, a_terms: Vec::new(), b_terms: Vec::new() }
    }

    /// Single odd power `a(x)|u|^{p-1}u`.
    pub fn single(domain: &Domain, exponent: f64, coeff: impl Fn(f64) -> f64, label: &str) -> Result<Self> {
        Ok(Self::new(
            Form::Odd,
            vec![PowerTerm::sampled(domain, exponent, coeff, label)?],
            Vec::new(),
        ))
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn a_terms(&self) -> &[PowerTerm] {
        &self.a_terms
    }

    pub fn b_terms(&self) -> &[PowerTerm] {
        &self.b_terms
    }

    pub fn terms(&self) -> impl Iterator<Item = &PowerTerm> {
        self.a_terms.iter().chain(&self.b_terms)
    }

    pub fn is_empty(&self) -> bool {
        self.a_terms.is_empty() && self.b_terms.is_empty()
    }

    /// `p_1`, the exponent of the leading sign-changing term.
    pub fn leading_exponent(&self) -> Option<f64> {
        self.a_terms.first().map(|t| t.exponent)
    }

    pub(crate) fn check_grid(&self, domain: &Domain) -> Result<()> {
        for t in self.terms() {
            if t.values.len() != domain.n_quad() {
                return Err(argument(format!(
                    "term '{}' sampled on {} nodes, domain has {}",
                    t.label,
                    t.values.len(),
                    domain.n_quad()
                )));
            }
        }
        Ok(())
    }

    fn check_len(&self, u: &GridFunction) -> Result<()> {
        for t in self.terms() {
            if t.values.len() != u.len() {
                return Err(argument(format!(
                    "grid function has {} values, coefficients have {}",
                    u.len(),
                    t.values.len()
                )));
            }
        }
        Ok(())
    }

    /// Pointwise `f(x, u(x))`.
    pub fn eval_f(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check_len(u)?;
        let mut out = vec![0.0; u.len()];
        for t in self.terms() {
            for ((o, &c), &v) in out.iter_mut().zip(&t.values).zip(u.values()) {
                if c != 0.0 {
                    *o += c * t.shape(v);
                }
            }
        }
        Ok(GridFunction::new(out))
    }

    /// Pointwise `∫_0^{u(x)} f(x, w) dw`.
    pub fn eval_primitive(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check_len(u)?;
        let mut out = vec![0.0; u.len()];
        for t in self.terms() {
            let inv = 1.0 / (t.exponent + 1.0);
            for ((o, &c), &v) in out.iter_mut().zip(&t.values).zip(u.values()) {
                if c != 0.0 {
                    *o += c * t.moment(v) * inv;
                }
            }
        }
        Ok(GridFunction::new(out))
    }

    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();

        // 1 < q_1 < ... < q_s < p_1 < ... < p_r
        let chain: Vec<f64> = self
            .b_terms
            .iter()
            .chain(&self.a_terms)
            .map(|t| t.exponent)
            .collect();
        let order = if self.a_terms.is_empty() {
            Err("no leading a-term".to_string())
        } else if let Some(e) = chain.first().filter(|&&e| e <= 1.0) {
            Err(format!("smallest exponent {e} is not above 1"))
        } else if let Some(k) = chain.windows(2).position(|w| w[0] >= w[1]) {
            Err(format!(
                "exponents {} and {} at chain positions {} and {} are not strictly increasing",
                chain[k],
                chain[k + 1],
                k + 1,
                k + 2
            ))
        } else {
            Ok(())
        };
        checks.push(ConditionCheck::from(Condition::ExponentOrder, order));

        let growth = match chain.iter().position(|e| !e.is_finite()) {
            Some(k) => Err(format!("exponent at chain position {} is not finite", k + 1)),
            None => Ok(()),
        };
        checks.push(ConditionCheck::from(Condition::GrowthCap, growth));

        let mut signs = Ok(());
        for (i, t) in self.a_terms.iter().enumerate().skip(1) {
            if let Some(n) = t.values.iter().position(|&c| c < 0.0) {
                signs = Err(format!("a_{} is negative at node {n}", i + 1));
                break;
            }
        }
        if signs.is_ok() {
            for (j, t) in self.b_terms.iter().enumerate() {
                if let Some(n) = t.values.iter().position(|&c| c > 0.0) {
                    signs = Err(format!("b_{} is positive at node {n}", j + 1));
                    break;
                }
            }
        }
        checks.push(ConditionCheck::from(Condition::SignConditions, signs));

        let (lo, hi) = self
            .a_terms
            .first()
            .map(|t| (t.min_value(), t.max_value()))
            .unwrap_or((0.0, 0.0));
        let change = if lo < -SIGN_EPS && hi > SIGN_EPS {
            Ok(())
        } else {
            Err(format!("a_1 ranges over [{lo}, {hi}] on the grid"))
        };
        checks.push(ConditionCheck::from(Condition::LeadingSignChange, change));

        let positive = if hi > SIGN_EPS {
            Ok(())
        } else {
            Err(format!("a_1 has maximum {hi} on the grid"))
        };
        checks.push(ConditionCheck::from(Condition::LeadingPositivePart, positive));

        let kinds_ok = self.a_terms.iter().enumerate().all(|(i, t)| {
            let want = if i == 0 && self.form == Form::AbsLeading {
                TermKind::AbsPower
            } else {
                TermKind::OddPower
            };
            t.kind == want
        }) && self.b_terms.iter().all(|t| t.kind == TermKind::OddPower);
        let kinds = if kinds_ok {
            Ok(())
        } else {
            Err(format!("term kinds do not match form {:?}", self.form))
        };
        checks.push(ConditionCheck::from(Condition::FormKinds, kinds));

        ValidationReport { checks }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// `1 < q_1 < … < q_s < p_1 < … < p_r`
    ExponentOrder,
    /// `p_r < ∞` (the only growth restriction in one space dimension)
    GrowthCap,
    /// `a_i ≥ 0` for `i ≥ 2`, `b_j ≤ 0`
    SignConditions,
    /// `a_1` takes both signs
    LeadingSignChange,
    /// `a_1 > 0` somewhere, so the Nehari manifold is not empty
    LeadingPositivePart,
    /// term kinds agree with the declared form
    FormKinds,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::ExponentOrder => "exponent-order",
            Condition::GrowthCap => "growth-cap",
            Condition::SignConditions => "sign-conditions",
            Condition::LeadingSignChange => "leading-sign-change",
            Condition::LeadingPositivePart => "leading-positive-part",
            Condition::FormKinds => "form-kinds",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub condition: Condition,
    pub passed: bool,
    pub detail: Option<String>,
}

impl ConditionCheck {
    fn from(condition: Condition, r: std::result::Result<(), String>) -> Self {
        match r {
            Ok(()) => Self { condition, passed: true, detail: None },
            Err(d) => Self { condition, passed: false, detail: Some(d) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    fn ok(&self, c: Condition) -> bool {
        self.checks.iter().any(|k| k.condition == c && k.passed)
    }

    /// Every condition holds.
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Exponent ordering, growth, sign conditions and form kinds hold. These
    /// are the hypotheses behind the nonnegativity of the remainder `B`.
    pub fn structural_ok(&self) -> bool {
        [
            Condition::ExponentOrder,
            Condition::GrowthCap,
            Condition::SignConditions,
            Condition::FormKinds,
        ]
        .into_iter()
        .all(|c| self.ok(c))
    }

    /// Structural conditions plus a positive part of `a_1`: enough for the
    /// well depth and the sign-invariance results. The sign change of `a_1`
    /// is the setting of interest but not used by those arguments.
    pub fn supports_well_theory(&self) -> bool {
        self.structural_ok() && self.ok(Condition::LeadingPositivePart)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn dom() -> Domain {
        Domain::with_modes(PI, 8).unwrap()
    }

    fn point(v: f64, n: usize) -> GridFunction {
        GridFunction::new(vec![v; n])
    }

    #[test]
    fn minimal_f1_passes() {
        let d = dom();
        let nl = Nonlinearity::single(&d, 3.0, f64::cos, "cos(x)").unwrap();
        let r = nl.validate();
        assert!(r.passes(), "{r:?}");
    }

    #[test]
    fn equal_exponents_fail_order() {
        let d = dom();
        let nl = Nonlinearity::new(
            Form::Odd,
            vec![PowerTerm::sampled(&d, 2.0, f64::cos, "cos").unwrap()],
            vec![PowerTerm::constant(&d, 2.0, -1.0).unwrap()],
        );
        let r = nl.validate();
        assert!(!r.passes());
        let bad: Vec<_> = r.failures().map(|c| c.condition).collect();
        assert_eq!(bad, vec![Condition::ExponentOrder]);
        assert!(!r.structural_ok());
    }

    #[test]
    fn positive_b_term_fails_signs() {
        let d = dom();
        let nl = Nonlinearity::new(
            Form::Odd,
            vec![PowerTerm::sampled(&d, 3.0, f64::cos, "cos").unwrap()],
            vec![PowerTerm::constant(&d, 2.0, 1.0).unwrap()],
        );
        let r = nl.validate();
        let bad: Vec<_> = r.failures().map(|c| c.condition).collect();
        assert_eq!(bad, vec![Condition::SignConditions]);
    }

    #[test]
    fn constant_leading_coefficient_is_structural_only() {
        let d = dom();
        let nl = Nonlinearity::single(&d, 3.0, |_| 1.0, "1").unwrap();
        let r = nl.validate();
        assert!(!r.passes());
        assert!(r.structural_ok());
        assert!(r.supports_well_theory());
        assert!(!Nonlinearity::zero().validate().structural_ok());
    }

    #[test]
    fn eval_examples() {
        let d = dom();
        let n = d.n_quad();
        let f1 = Nonlinearity::single(&d, 3.0, |_| 1.0, "1").unwrap();
        assert!(f1.eval_f(&point(0.0, n)).unwrap().values().iter().all(|&v| v == 0.0));
        assert_eq!(f1.eval_f(&point(2.0, n)).unwrap().values()[3], 8.0);
        assert_eq!(f1.eval_primitive(&point(2.0, n)).unwrap().values()[3], 4.0);
        assert_eq!(f1.eval_primitive(&point(0.0, n)).unwrap().values()[0], 0.0);

        let f2 = Nonlinearity::new(Form::AbsLeading, vec![PowerTerm::constant(&d, 3.0, 1.0).unwrap()], vec![]);
        assert_eq!(f2.a_terms()[0].kind(), TermKind::AbsPower);
        assert_eq!(f2.eval_f(&point(-2.0, n)).unwrap().values()[0], 8.0);
        // ∫_0^{-2} |w|^3 dw = -4
        assert_eq!(f2.eval_primitive(&point(-2.0, n)).unwrap().values()[0], -4.0);
        assert!(f2.validate().structural_ok());

        assert!(f1.eval_f(&point(1.0, n - 1)).is_err());
    }

    #[test]
    fn bounds() {
        let d = dom();
        let t = PowerTerm::sampled(&d, 3.0, |x| 2.0 * x.cos(), "2cos").unwrap();
        assert!(t.bound() <= 2.0 && t.bound() > 1.99);
        assert!(t.clone().with_bound(1.0).is_err());
        assert_eq!(t.with_bound(2.0).unwrap().bound(), 2.0);
        assert!(PowerTerm::constant(&d, f64::INFINITY, 1.0).is_err());
    }

    fn mixed(d: &Domain) -> Nonlinearity {
        Nonlinearity::new(
            Form::Odd,
            vec![
                PowerTerm::sampled(d, 3.0, |x| x.cos(), "cos").unwrap(),
                PowerTerm::sampled(d, 4.5, |x| 1.0 + x.sin(), "1+sin").unwrap(),
            ],
            vec![PowerTerm::sampled(d, 1.5, |x| -0.5 * x.sin().powi(2), "-.5sin^2").unwrap()],
        )
    }

    fn mixed_f2(d: &Domain) -> Nonlinearity {
        let mut nl = mixed(d);
        nl = Nonlinearity::new(Form::AbsLeading, nl.a_terms, nl.b_terms);
        nl
    }

    proptest! {
        #[test]
        fn primitive_derivative_is_f(u in -3.0f64..3.0, node in 0usize..64, f2 in any::<bool>()) {
            let d = dom();
            let nl = if f2 { mixed_f2(&d) } else { mixed(&d) };
            prop_assume!(u.abs() > 1e-3);
            let n = d.n_quad();
            let h = 1e-5 * (1.0 + u.abs());
            let fp = nl.eval_primitive(&point(u + h, n)).unwrap().values()[node];
            let fm = nl.eval_primitive(&point(u - h, n)).unwrap().values()[node];
            let fd = (fp - fm) / (2.0 * h);
            let f = nl.eval_f(&point(u, n)).unwrap().values()[node];
            prop_assert!((fd - f).abs() <= 1e-6 * (1.0 + f.abs()), "fd {fd} f {f}");
        }

        #[test]
        fn f1_is_odd(u in -3.0f64..3.0) {
            let d = dom();
            let nl = mixed(&d);
            let n = d.n_quad();
            let a = nl.eval_f(&point(u, n)).unwrap();
            let b = nl.eval_f(&point(-u, n)).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert_eq!(*x, -*y);
            }
        }

        #[test]
        fn moment_bounded_by_a_bounds(u in -4.0f64..4.0) {
            let d = dom();
            for nl in [mixed(&d), mixed_f2(&d)] {
                let n = d.n_quad();
                let f = nl.eval_f(&point(u, n)).unwrap();
                let cap: f64 = nl.a_terms().iter().map(|t| t.bound() * u.abs().powf(t.exponent() + 1.0)).sum();
                for v in f.values() {
                    prop_assert!(u * v <= cap * (1.0 + 1e-12) + 1e-300);
                }
            }
        }
    }

    #[test]
    fn primitive_of_zero_nonlinearity() {
        let d = dom();
        let z = Nonlinearity::zero();
        let g = z.eval_primitive(&point(3.0, d.n_quad())).unwrap();
        assert_abs_diff_eq!(g.values()[0], 0.0);
    }
}
