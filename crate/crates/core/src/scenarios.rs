//! Explicit supercritical initial data and the sufficient conditions for
//! blow-up.
//!
//! Data are built as `u_0 = μw`, `u_1 = μσw + ηv` from a fixed pair
//! `(w, v)` with `(w, v) = 0`, `‖∇w‖ ≠ 0`, `‖v‖ ≠ 0` and
//! `∫ a_1 |w|^{p_1+1} > 0`. With `R(μ) = ½μ²σ²‖w‖² + J(μw)` the energy is
//! `R(μ) + ½η²‖v‖²`, so `η` closes the energy budget for any `μ` with
//! `R(μ) < K`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{Domain, SpectralField};
use crate::error::{argument, Error, Result};
use crate::functionals::{energy, snapshot, term_integrals, State, TermIntegrals};
use crate::nonlinearity::{Nonlinearity, SIGN_EPS};
use crate::ode::LinearComparison;
use crate::solver::{monitor_invariants, simulate, SolverConfig, MonitorVerdicts, TrajectoryRecord, Verdict};
use crate::well::WellReport;

/// Realizes "strictly above the maximum" in the choice of `μ`.
pub const STRICT_FACTOR: f64 = 1.01;
/// Margins smaller than this are flagged inconclusive.
pub const INCONCLUSIVE_MARGIN: f64 = 1e-6;
/// Relative tolerance of the energy reproduced by a constructed pair.
pub const ENERGY_TOL: f64 = 1e-8;

/// Poincaré constant `𝒞 = λ_1`.
pub fn poincare_constant(domain: &Domain) -> f64 {
    domain.lambda1()
}

fn leading(nl: &Nonlinearity) -> Result<f64> {
    nl.leading_exponent().ok_or_else(|| argument("nonlinearity has no leading term"))
}

/// Base pair `(w, v)`: `w` is a `sin²` bump on the longest run of grid
/// nodes where `a_1 > 0`, projected onto the basis; `v` is the lowest mode
/// orthogonalized against `w` that keeps a substantial norm.
pub fn build_base_pair(domain: &Domain, nl: &Nonlinearity) -> Result<(SpectralField, SpectralField)> {
    let a1 = nl
        .a_terms()
        .first()
        .ok_or_else(|| Error::Construction("nonlinearity has no leading term".into()))?;
    let nodes = domain.nodes();
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for (i, &c) in a1.values().iter().enumerate() {
        match (c > SIGN_EPS, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if best.is_none_or(|(bs, be)| i - s > be - bs) {
                    best = Some((s, i));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        let e = a1.values().len();
        if best.is_none_or(|(bs, be)| e - s > be - bs) {
            best = Some((s, e));
        }
    }
    let Some((s, e)) = best.filter(|(s, e)| e - s >= 3) else {
        return Err(Error::Construction("leading coefficient is not positive on any grid interval".into()));
    };
    let (a, b) = (nodes[s], nodes[e - 1]);
    let w = domain.project(|x| {
        if x <= a || x >= b {
            0.0
        } else {
            (std::f64::consts::PI * (x - a) / (b - a)).sin().powi(2)
        }
    });

    let ww = domain.l2_norm_sq(&w);
    let mut v = None;
    for j in 1..=domain.n_modes() {
        let e = SpectralField::unit(domain.n_modes(), j)?;
        let cand = e.axpy(-domain.inner(&e, &w) / ww, &w);
        if domain.l2_norm_sq(&cand) > 0.25 {
            v = Some(cand);
            if j > 1 {
                break;
            }
        }
        if j >= 2 && v.is_some() {
            break;
        }
    }
    let v = v.ok_or_else(|| Error::Construction("no mode is independent of the bump".into()))?;

    let t = term_integrals(domain, nl, &w)?;
    if !(domain.grad_norm_sq(&w) > 0.0) {
        return Err(Error::Construction("bump has zero gradient".into()));
    }
    if !(t.a[0] > 0.0) {
        return Err(Error::Construction(format!("leading integral of the bump is {} (not positive)", t.a[0])));
    }
    if domain.inner(&w, &v).abs() > 1e-12 * ww.sqrt() * domain.l2_norm_sq(&v).sqrt() {
        return Err(Error::Construction("orthogonalization failed".into()));
    }
    Ok((w, v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Signed { sigma: f64, k_target: f64 },
    Positive { k_target: f64 },
    Separating { k_target: f64 },
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairConstants {
    pub mu: f64,
    pub eta: f64,
    pub sigma: f64,
    pub r_mu: f64,
    pub mu0: f64,
    pub strict_factor: f64,
    pub k0: Option<f64>,
    pub m_const: Option<f64>,
    pub l_const: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPair {
    pub u0: SpectralField,
    pub u1: SpectralField,
    pub provenance: Provenance,
    pub constants: Option<PairConstants>,
}

impl DataPair {
    pub fn manual(u0: SpectralField, u1: SpectralField) -> Self {
        Self { u0, u1, provenance: Provenance::Manual, constants: None }
    }

    pub fn state(&self) -> Result<State> {
        State::new(self.u0.clone(), self.u1.clone())
    }
}

/// `R(μ) = ½μ²σ²‖w‖² + J(μw)` built from the term integrals of `w`.
struct Budget {
    w_sq: f64,
    sigma: f64,
    t: TermIntegrals,
}

impl Budget {
    fn r(&self, mu: f64) -> f64 {
        0.5 * mu * mu * self.sigma * self.sigma * self.w_sq + self.t.scaled(mu).potential()
    }

    /// Positive root of `R`. Closed form for a single leading term.
    fn mu0(&self) -> Result<f64> {
        let quad = self.sigma * self.sigma * self.w_sq + self.t.grad_sq;
        let p = self.t.a_exponents()[0];
        if self.t.a.len() == 1 && self.t.b.is_empty() {
            return Ok(((p + 1.0) * quad / (2.0 * self.t.a[0])).powf(1.0 / (p - 1.0)));
        }
        // R(μ)/μ² = ½ quad − Σ m_i μ^{e_i−1}/(e_i+1); the leading integral is positive
        let f = |mu: f64| -self.r(mu) / (mu * mu);
        let mut hi = 1.0;
        let mut lo = 1.0;
        if f(1.0) < 0.0 {
            while f(hi) < 0.0 {
                lo = hi;
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::Construction("energy budget has no positive root".into()));
                }
            }
        } else {
            while f(lo) >= 0.0 {
                hi = lo;
                lo *= 0.5;
                if lo < 1e-300 {
                    return Err(Error::Construction("energy budget has no positive root".into()));
                }
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }
}

fn budget(domain: &Domain, nl: &Nonlinearity, w: &SpectralField, v: &SpectralField, sigma: f64) -> Result<Budget> {
    let ww = domain.l2_norm_sq(w);
    let vv = domain.l2_norm_sq(v);
    if !(domain.grad_norm_sq(w) > 0.0 && vv > 0.0) {
        return Err(Error::Precondition("base pair needs nonzero gradient of w and nonzero v".into()));
    }
    if domain.inner(w, v).abs() > 1e-10 * (ww * vv).sqrt() {
        return Err(Error::Precondition("base pair is not orthogonal".into()));
    }
    let t = term_integrals(domain, nl, w)?;
    if !(t.a.first().copied().unwrap_or(0.0) > 0.0) {
        return Err(Error::Precondition("leading integral of w is not positive".into()));
    }
    Ok(Budget { w_sq: ww, sigma, t })
}

fn assemble(
    domain: &Domain,
    nl: &Nonlinearity,
    w: &SpectralField,
    v: &SpectralField,
    b: &Budget,
    mu: f64,
    k_target: f64,
) -> Result<(DataPair, f64, f64)> {
    let r_mu = b.r(mu);
    if !(r_mu < k_target) {
        return Err(Error::Consistency(format!("R(mu) = {r_mu} is not below the target energy {k_target}")));
    }
    let eta = (2.0 * (k_target - r_mu)).sqrt() / domain.l2_norm_sq(v).sqrt();
    let u0 = w.scaled(mu);
    let u1 = w.scaled(mu * b.sigma).axpy(eta, v);
    let pair = DataPair::manual(u0, u1);
    let e = energy(domain, nl, &pair.state()?)?;
    if (e - k_target).abs() > ENERGY_TOL * k_target.abs().max(1.0) {
        return Err(Error::Consistency(format!("constructed energy {e} misses target {k_target}")));
    }
    Ok((pair, eta, r_mu))
}

fn check_target(k_target: f64) -> Result<()> {
    if !(k_target > 0.0 && k_target.is_finite()) {
        return Err(Error::Precondition(format!("target energy must be positive, got {k_target}")));
    }
    Ok(())
}

/// Data of arbitrary positive energy satisfying the arbitrary-sign
/// condition, for `σ ∈ (−√(𝒞(p_1−1))/2, ∞) \ {0}`.
pub fn build_signed_pair(
    domain: &Domain,
    nl: &Nonlinearity,
    w: &SpectralField,
    v: &SpectralField,
    sigma: f64,
    k_target: f64,
) -> Result<DataPair> {
    check_target(k_target)?;
    let p = leading(nl)?;
    let c = poincare_constant(domain);
    let s = (c * (p - 1.0)).sqrt();
    if !(sigma > -s / 2.0 && sigma != 0.0 && sigma.is_finite()) {
        return Err(Error::Precondition(format!("sigma must lie in ({}, inf) without 0, got {sigma}", -s / 2.0)));
    }
    let b = budget(domain, nl, w, v, sigma)?;
    let mu0 = b.mu0()?;
    let floor = k_target.sqrt() / (s / (p + 1.0) * (s / 2.0 + sigma)).sqrt() / b.w_sq.sqrt();
    let mu = STRICT_FACTOR * mu0.max(floor);
    let (mut pair, eta, r_mu) = assemble(domain, nl, w, v, &b, mu, k_target)?;
    pair.provenance = Provenance::Signed { sigma, k_target };
    pair.constants = Some(PairConstants {
        mu,
        eta,
        sigma,
        r_mu,
        mu0,
        strict_factor: STRICT_FACTOR,
        k0: None,
        m_const: None,
        l_const: None,
    });
    let report = check_conditions(domain, nl, &pair.state()?, None)?;
    if !report.arbitrary_sign.holds {
        return Err(Error::Consistency(format!("constructed pair misses its condition, margin {}", report.arbitrary_sign.margin)));
    }
    Ok(pair)
}

/// Data of arbitrary positive energy satisfying the positive-product
/// condition (`σ = 1`).
pub fn build_positive_pair(domain: &Domain, nl: &Nonlinearity, w: &SpectralField, v: &SpectralField, k_target: f64) -> Result<DataPair> {
    check_target(k_target)?;
    let p = leading(nl)?;
    let c = poincare_constant(domain);
    let b = budget(domain, nl, w, v, 1.0)?;
    let mu0 = b.mu0()?;
    let floor = (2.0 * k_target).sqrt() / (c * (p - 1.0) / (p + 1.0) + 1.0).sqrt() / b.w_sq.sqrt();
    let mu = STRICT_FACTOR * mu0.max(floor);
    let (mut pair, eta, r_mu) = assemble(domain, nl, w, v, &b, mu, k_target)?;
    pair.provenance = Provenance::Positive { k_target };
    pair.constants = Some(PairConstants {
        mu,
        eta,
        sigma: 1.0,
        r_mu,
        mu0,
        strict_factor: STRICT_FACTOR,
        k0: None,
        m_const: None,
        l_const: None,
    });
    let report = check_conditions(domain, nl, &pair.state()?, None)?;
    if !report.positive_product.holds {
        return Err(Error::Consistency(format!("constructed pair misses its condition, margin {}", report.positive_product.margin)));
    }
    Ok(pair)
}

/// `(ℳ, ℒ)` for the separating construction.
pub fn separating_constants(c: f64, p: f64) -> (f64, f64) {
    let g = c * (p - 1.0) / (p + 1.0);
    let m = g.max(1.0).max(2.0 * c * (p - 1.0) / ((1.0 + c) * (p + 1.0)));
    (m, g + 1.0)
}

/// Data satisfying the positive-product condition while violating all
/// three earlier sufficient conditions. Requires `K > K_0`.
pub fn build_separating_pair(domain: &Domain, nl: &Nonlinearity, w: &SpectralField, v: &SpectralField, k_target: f64) -> Result<DataPair> {
    check_target(k_target)?;
    let p = leading(nl)?;
    let c = poincare_constant(domain);
    let (m, l) = separating_constants(c, p);
    if !(m < l) {
        return Err(Error::Consistency(format!("separating constants out of order: M = {m}, L = {l}")));
    }
    let b = budget(domain, nl, w, v, 1.0)?;
    let mu0 = b.mu0()?;
    let k0 = 0.5 * mu0 * mu0 * 0.5 * (m + l) * b.w_sq;
    if !(k_target > k0) {
        return Err(Error::Precondition(format!("target energy {k_target} must exceed K0 = {k0}")));
    }
    let mu = (2.0 * k_target).sqrt() * (2.0 / (m + l)).sqrt() / b.w_sq.sqrt();
    let (mut pair, eta, r_mu) = assemble(domain, nl, w, v, &b, mu, k_target)?;
    pair.provenance = Provenance::Separating { k_target };
    pair.constants = Some(PairConstants {
        mu,
        eta,
        sigma: 1.0,
        r_mu,
        mu0,
        strict_factor: 1.0,
        k0: Some(k0),
        m_const: Some(m),
        l_const: Some(l),
    });
    let r = check_conditions(domain, nl, &pair.state()?, None)?;
    if !(r.beyond_earlier.holds && r.positive_product.holds && !r.quotient_bound.holds && !r.norm_bound.holds && !r.product_bound.holds) {
        return Err(Error::Consistency("separating pair does not separate the conditions".into()));
    }
    Ok(pair)
}

/// Outcome of one compound inequality. The margin is the smallest slack
/// `right side − left side` over its components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionOutcome {
    pub holds: bool,
    pub margin: f64,
    pub inconclusive: bool,
}

#[derive(Clone, Copy)]
enum Cmp {
    Strict,
    Weak,
}

fn outcome(parts: &[(f64, Cmp)]) -> ConditionOutcome {
    let mut holds = true;
    let mut margin = f64::INFINITY;
    for &(m, c) in parts {
        let ok = match c {
            Cmp::Strict => m > 0.0,
            Cmp::Weak => m >= 0.0,
        };
        holds &= ok && !m.is_nan();
        margin = margin.min(if m.is_nan() { f64::NEG_INFINITY } else { m });
    }
    ConditionOutcome { holds, margin, inconclusive: margin.abs() < INCONCLUSIVE_MARGIN }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyRegime {
    NonpositiveEnergy,
    /// `0 < E(0) < d_lower`, `I(u_0) > 0` or `u_0 = 0`.
    SubcriticalStable,
    /// `0 < E(0) < d_lower`, `I(u_0) < 0`.
    SubcriticalUnstable,
    /// `E(0) > d_upper`.
    Supercritical,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub energy: f64,
    pub psi0: f64,
    pub cross: f64,
    pub nehari: f64,
    pub poincare: f64,
    /// `0 < E < 𝒞(p−1)/(2(p+1))‖u_0‖² + √(𝒞(p−1))/(p+1) (u_0, u_1)`
    pub arbitrary_sign: ConditionOutcome,
    /// `‖u_0‖ ≠ 0`, `(u_0, u_1) ≥ 0`, `0 < E < 𝒞(p−1)/(2(p+1))‖u_0‖² + ½(u_0, u_1)²/‖u_0‖²`
    pub positive_product: ConditionOutcome,
    /// `0 < E < ½(u_0, u_1)²/‖u_0‖²`, `(u_0, u_1) > 0`
    pub quotient_bound: ConditionOutcome,
    /// `0 < E < 𝒞(p−1)/(2(p+1))‖u_0‖²`, `(u_0, u_1) ≥ 0`, `I(u_0) < 0`
    pub norm_bound: ConditionOutcome,
    /// `0 < E < 𝒞(p−1)/((1+𝒞)(p+1)) (u_0, u_1)`, `(u_0, u_1) > 0`, `I(u_0) < 0`
    pub product_bound: ConditionOutcome,
    /// Energy above all three earlier thresholds with `(u_0, u_1) > 0`.
    pub beyond_earlier: ConditionOutcome,
    pub regime: Option<EnergyRegime>,
}

impl ConditionReport {
    pub fn any_earlier(&self) -> bool {
        self.quotient_bound.holds || self.norm_bound.holds || self.product_bound.holds
    }
}

/// Evaluates every sufficient condition for the pair `(u_0, u_1)`. The
/// earlier conditions are taken with `E(0) > 0`. The regime needs a well
/// report.
pub fn check_conditions(domain: &Domain, nl: &Nonlinearity, state: &State, well: Option<&WellReport>) -> Result<ConditionReport> {
    let p = leading(nl)?;
    let s = snapshot(domain, nl, state)?;
    let c = poincare_constant(domain);
    let (e, psi, cross, i) = (s.energy, s.psi, 0.5 * s.psi_dot, s.nehari);
    let g = c * (p - 1.0) / (2.0 * (p + 1.0));
    let quotient = if psi > 0.0 { 0.5 * cross * cross / psi } else { f64::NAN };
    let product_coef = c * (p - 1.0) / ((1.0 + c) * (p + 1.0));

    let arbitrary_sign = outcome(&[
        (e, Cmp::Strict),
        (g * psi + (c * (p - 1.0)).sqrt() / (p + 1.0) * cross - e, Cmp::Strict),
    ]);
    let positive_product = outcome(&[
        (psi.sqrt(), Cmp::Strict),
        (cross, Cmp::Weak),
        (e, Cmp::Strict),
        (g * psi + quotient - e, Cmp::Strict),
    ]);
    let quotient_bound = outcome(&[(e, Cmp::Strict), (quotient - e, Cmp::Strict), (cross, Cmp::Strict)]);
    let norm_bound = outcome(&[(e, Cmp::Strict), (g * psi - e, Cmp::Strict), (cross, Cmp::Weak), (-i, Cmp::Strict)]);
    let product_bound = outcome(&[(e, Cmp::Strict), (product_coef * cross - e, Cmp::Strict), (cross, Cmp::Strict), (-i, Cmp::Strict)]);
    let beyond_earlier = outcome(&[
        (cross, Cmp::Strict),
        (e - (g * psi).max(quotient).max(product_coef * cross), Cmp::Strict),
    ]);

    let regime = well.map(|w| {
        let tol = 1e-12 * (1.0 + s.grad_sq);
        if e <= 0.0 {
            EnergyRegime::NonpositiveEnergy
        } else if e < w.d_lower {
            if s.grad_sq == 0.0 || i > tol {
                EnergyRegime::SubcriticalStable
            } else if i < -tol {
                EnergyRegime::SubcriticalUnstable
            } else {
                EnergyRegime::Undetermined
            }
        } else if e > w.d_upper {
            EnergyRegime::Supercritical
        } else {
            EnergyRegime::Undetermined
        }
    });

    Ok(ConditionReport {
        energy: e,
        psi0: psi,
        cross,
        nehari: i,
        poincare: c,
        arbitrary_sign,
        positive_product,
        quotient_bound,
        norm_bound,
        product_bound,
        beyond_earlier,
        regime,
    })
}

/// Random admissible pairs. `u_0` has decaying Gaussian coefficients and
/// a log-uniform amplitude; `u_1 = κu_0 + ρξ` with `ξ ⊥ u_0`, where `ρ` is
/// chosen to hit an energy drawn up to 1.5 times the largest of the
/// earlier thresholds. Draws whose energy is out of reach are rejected.
pub fn sample_pairs(domain: &Domain, nl: &Nonlinearity, n: usize, seed: u64) -> Result<Vec<State>> {
    let p = leading(nl)?;
    let c = poincare_constant(domain);
    let g = c * (p - 1.0) / (2.0 * (p + 1.0));
    let product_coef = c * (p - 1.0) / ((1.0 + c) * (p + 1.0));
    let k = domain.n_modes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = |rng: &mut ChaCha8Rng| -> SpectralField {
        let c: Vec<f64> = (1..=k)
            .map(|j| {
                let x: f64 = StandardNormal.sample(rng);
                x / (j * j) as f64
            })
            .collect();
        SpectralField::new(c).expect("finite")
    };
    let mut out = Vec::with_capacity(n);
    let mut draws = 0usize;
    while out.len() < n {
        draws += 1;
        if draws > 1000 * n.max(1) {
            return Err(Error::Construction("pair sampler rejected too many draws".into()));
        }
        let u0 = gauss(&mut rng);
        let norm = domain.l2_norm_sq(&u0).sqrt();
        if !(norm > 0.0) {
            continue;
        }
        let u0 = u0.scaled(10f64.powf(rng.random_range(-1.0..1.0)) / norm);
        let psi = domain.l2_norm_sq(&u0);
        let xi = gauss(&mut rng);
        let xi = xi.axpy(-domain.inner(&xi, &u0) / psi, &u0);
        let xi_sq = domain.l2_norm_sq(&xi);
        let kappa: f64 = rng.random_range(-1.0..4.0);
        let cross = kappa * psi;
        let base = term_integrals(domain, nl, &u0)?.potential() + 0.5 * kappa * kappa * psi;
        let top = 1.5 * (g * psi).max(0.5 * cross * cross / psi).max(product_coef * cross);
        let target = rng.random_range(-0.2..1.0) * top;
        if !(target > base && xi_sq > 0.0) {
            continue;
        }
        let rho = (2.0 * (target - base) / xi_sq).sqrt();
        out.push(State { u: u0.clone(), v: u0.scaled(kappa).axpy(rho, &xi) });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicationReport {
    pub n_samples: usize,
    pub n_quotient_bound: usize,
    pub n_norm_bound: usize,
    pub n_product_bound: usize,
    pub n_filtered: usize,
    /// Filtered pairs violating the positive-product condition.
    pub counterexamples: usize,
    pub inconclusive: usize,
}

/// Checks that every sampled pair satisfying one of the earlier sufficient
/// conditions also satisfies the positive-product condition.
pub fn check_implication(domain: &Domain, nl: &Nonlinearity, n: usize, seed: u64) -> Result<ImplicationReport> {
    let pairs = sample_pairs(domain, nl, n, seed)?;
    let reports = pairs
        .par_iter()
        .map(|s| check_conditions(domain, nl, s, None))
        .collect::<Result<Vec<_>>>()?;
    let mut r = ImplicationReport {
        n_samples: n,
        n_quotient_bound: 0,
        n_norm_bound: 0,
        n_product_bound: 0,
        n_filtered: 0,
        counterexamples: 0,
        inconclusive: 0,
    };
    for c in &reports {
        r.n_quotient_bound += c.quotient_bound.holds as usize;
        r.n_norm_bound += c.norm_bound.holds as usize;
        r.n_product_bound += c.product_bound.holds as usize;
        if c.any_earlier() {
            r.n_filtered += 1;
            if !c.positive_product.holds {
                r.counterexamples += 1;
            }
            if c.positive_product.inconclusive {
                r.inconclusive += 1;
            }
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCheck {
    pub comparison: LinearComparison,
    pub n_checked: usize,
    /// Smallest `(ψ − ψ_lin) / max(1, ψ_lin)` over trusted records.
    pub worst_margin: f64,
    pub passed: bool,
}

/// `ψ(t) ≥ ψ_lin(t)` at every trusted record, with `α = 𝒞(p_1−1)` and
/// `β = 2(p_1+1)E(0)`.
pub fn comparison_check(record: &TrajectoryRecord, poincare: f64) -> Result<ComparisonCheck> {
    let p = record.leading_exponent.ok_or_else(|| argument("record has no leading exponent"))?;
    let s0 = record.snapshots[0];
    let lin = LinearComparison::new(poincare * (p - 1.0), 2.0 * (p + 1.0) * record.e0, s0.psi, s0.psi_dot)?;
    let n = record.trusted_len().max(1);
    let drift = record.max_trusted_abs_drift;
    let mut worst = f64::INFINITY;
    for (t, s) in record.times[..n].iter().zip(&record.snapshots[..n]) {
        let l = lin.eval(*t);
        worst = worst.min((s.psi - l) / l.abs().max(1.0));
    }
    // energy drift perturbs β by 2(p+1)·drift, which moves ψ_lin by at most that over α
    let tol = 1e-9 + 2.0 * (p + 1.0) * drift / lin.alpha;
    Ok(ComparisonCheck { comparison: lin, n_checked: n, worst_margin: worst, passed: worst >= -tol })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub applicable: bool,
    pub n_checked: usize,
    pub psi_nondecreasing: bool,
    pub phi_nondecreasing: bool,
}

/// Along a trajectory with `I < 0` at every trusted record and
/// `ψ'(0) ≥ 0`, both `ψ` and `ψ'²/(4ψ)` must be nondecreasing.
pub fn monotonicity_check(record: &TrajectoryRecord) -> MonotonicityReport {
    let n = record.trusted_len();
    let snaps = &record.snapshots[..n];
    let applicable = n >= 2 && snaps[0].psi_dot >= 0.0 && snaps.iter().all(|s| s.nehari < 0.0);
    if !applicable {
        return MonotonicityReport { applicable, n_checked: 0, psi_nondecreasing: true, phi_nondecreasing: true };
    }
    let phi = |s: &crate::functionals::FunctionalSnapshot| s.psi_dot * s.psi_dot / (4.0 * s.psi);
    let tol = |a: f64| 1e-12 * a.abs().max(1.0);
    let psi_ok = snaps.windows(2).all(|w| w[1].psi >= w[0].psi - tol(w[0].psi));
    let phi_ok = snaps.windows(2).all(|w| phi(&w[1]) >= phi(&w[0]) - tol(phi(&w[0])));
    MonotonicityReport { applicable, n_checked: n, psi_nondecreasing: psi_ok, phi_nondecreasing: phi_ok }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub record: TrajectoryRecord,
    pub monitors: MonitorVerdicts,
    pub conditions: ConditionReport,
    pub comparison: Option<ComparisonCheck>,
    pub monotonicity: MonotonicityReport,
    /// Statements whose hypotheses hold for the initial data.
    pub predictions: Vec<String>,
    pub predicts_blowup: Option<bool>,
    /// Whether the observed verdict agrees with the prediction.
    pub agreement: Option<bool>,
}

pub fn run_scenario(
    domain: &Domain,
    nl: &Nonlinearity,
    pair: &DataPair,
    config: &SolverConfig,
    well: &WellReport,
) -> Result<ScenarioReport> {
    let state = pair.state()?;
    let conditions = check_conditions(domain, nl, &state, Some(well))?;
    let record = simulate(domain, nl, &state, config)?;
    let monitors = monitor_invariants(&record, well);
    let comparison = if conditions.arbitrary_sign.holds && record.well_theory {
        Some(comparison_check(&record, conditions.poincare)?)
    } else {
        None
    };
    let monotonicity = monotonicity_check(&record);

    let mut predictions = Vec::new();
    let mut blowup = None;
    if record.well_theory {
        match conditions.regime {
            Some(EnergyRegime::NonpositiveEnergy) if conditions.psi0 > 0.0 => {
                predictions.push("nonpositive-energy-blowup".to_string());
                blowup = Some(true);
            }
            Some(EnergyRegime::SubcriticalUnstable) => {
                predictions.push("subcritical-unstable-blowup".to_string());
                blowup = Some(true);
            }
            Some(EnergyRegime::SubcriticalStable) => {
                predictions.push("subcritical-global-existence".to_string());
                blowup = Some(false);
            }
            _ => {}
        }
        if conditions.arbitrary_sign.holds {
            predictions.push("arbitrary-sign-condition-blowup".to_string());
            blowup = Some(true);
        }
        if conditions.positive_product.holds {
            predictions.push("positive-product-condition-blowup".to_string());
            blowup = Some(true);
        }
    }
    let agreement = blowup.map(|b| (record.verdict == Verdict::BlowupDetected) == b);
    Ok(ScenarioReport {
        record,
        monitors,
        conditions,
        comparison,
        monotonicity,
        predictions,
        predicts_blowup: blowup,
        agreement,
    })
}
