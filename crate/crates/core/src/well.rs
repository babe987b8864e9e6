//! Sobolev constants, the Nehari manifold and the depth of the potential
//! well.
//!
//! The depth `d = inf_{z ∈ 𝒩} J(z)` is bracketed from below by the
//! analytic estimate `(p_1−1)/(2(p_1+1)) ξ_0²` and from above by sampling
//! directions in the Galerkin span and projecting them onto `𝒩`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{Domain, SpectralField};
use crate::error::{argument, Error, Result};
use crate::functionals::{term_integrals, TermIntegrals};
use crate::nonlinearity::{Nonlinearity, TermKind};

/// Relative tolerance of the root finders.
pub const ROOT_TOL: f64 = 1e-12;
/// Coefficients smaller than this (relative to the problem scale) cannot be
/// told apart from zero.
pub const AMBIGUITY_TOL: f64 = 1e-12;
/// Tolerance of the region classifier.
pub const CLASSIFY_TOL: f64 = 1e-10;
/// Number of pure modes always included in the direction sample.
pub const PURE_MODES: usize = 8;

/// Embedding constant `C_q` with `‖z‖_q ≤ C_q ‖∇z‖` on `H_0^1(0, L)`.
///
/// `C_2 = L/π` is sharp and `C_∞ = √L/2`. Intermediate exponents use the
/// interpolation `C_∞^{1−2/q} C_2^{2/q}`; exponents below two use Hölder.
pub fn sobolev_constant(domain: &Domain, q: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(argument(format!("Sobolev exponent must be >= 1, got {q}")));
    }
    let l = domain.length();
    let c2 = l / std::f64::consts::PI;
    let cinf = l.sqrt() / 2.0;
    Ok(if q.is_infinite() {
        cinf
    } else if q >= 2.0 {
        cinf.powf(1.0 - 2.0 / q) * c2.powf(2.0 / q)
    } else {
        l.powf(1.0 / q - 0.5) * c2
    })
}

/// Largest ratio `‖z‖_q / ‖∇z‖` found by normalized gradient ascent over
/// the Galerkin span. It is a lower bound for the best constant and must
/// never exceed [`sobolev_constant`].
pub fn sobolev_ratio_ascent(domain: &Domain, q: f64, iters: usize, seed: u64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(argument(format!("Sobolev exponent must be >= 1, got {q}")));
    }
    let k = domain.n_modes();
    let q_eff = if q.is_infinite() { 256.0 } else { q };
    let ratio = |c: &SpectralField| -> f64 {
        let g = domain.synthesize(c).expect("length matches");
        domain.lp_norm(&g, q).expect("valid exponent") / domain.grad_norm_sq(c).sqrt()
    };
    let normalize = |c: SpectralField| {
        let n = domain.grad_norm_sq(&c).sqrt();
        c.scaled(1.0 / n)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![SpectralField::unit(k, 1)?];
    for _ in 0..3 {
        let c: Vec<f64> = (1..=k)
            .map(|j| {
                let n: f64 = StandardNormal.sample(&mut rng);
                n / j as f64
            })
            .collect();
        starts.push(SpectralField::new(c)?);
    }

    let mut best = 0.0f64;
    for start in starts {
        let mut c = normalize(start);
        let mut r = ratio(&c);
        let mut step = 0.5;
        for _ in 0..iters {
            let g = domain.synthesize(&c)?;
            let s: f64 = g.values().iter().map(|v| v.abs().powf(q_eff)).sum();
            if s == 0.0 {
                break;
            }
            // gradient of ‖z‖_q along the unit gradient-norm sphere
            let weights: Vec<f64> = g
                .values()
                .iter()
                .map(|v| v.abs().powf(q_eff - 1.0) * v.signum() / s)
                .collect();
            let mut grad = domain.analyze(&crate::basis::GridFunction::new(weights))?;
            for (gj, lj) in grad.coeffs_mut().iter_mut().zip(domain.eigenvalues()) {
                *gj /= lj;
            }
            let radial = grad.coeffs().iter().zip(c.coeffs()).zip(domain.eigenvalues()).map(|((g, c), l)| g * c * l).sum::<f64>();
            let tangent = grad.axpy(-radial, &c);
            let tn = domain.grad_norm_sq(&tangent).sqrt();
            if tn < 1e-14 {
                break;
            }
            let mut improved = false;
            while step > 1e-10 {
                let trial = normalize(c.axpy(step / tn, &tangent));
                let rt = ratio(&trial);
                if rt > r {
                    c = trial;
                    r = rt;
                    step *= 1.5;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        best = best.max(r);
    }
    Ok(best)
}

/// `φ(ξ) = Σ_i A_i C_{p_i+1}^{p_i+1} ξ^{p_i−1}` together with its terms.
#[derive(Debug, Clone)]
pub struct Phi {
    terms: Vec<(f64, f64)>,
}

impl Phi {
    pub fn new(domain: &Domain, nl: &Nonlinearity) -> Result<Self> {
        let terms = nl
            .a_terms()
            .iter()
            .map(|t| {
                let p = t.exponent();
                Ok((t.bound() * sobolev_constant(domain, p + 1.0)?.powf(p + 1.0), p - 1.0))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { terms })
    }

    pub fn eval(&self, xi: f64) -> f64 {
        self.terms.iter().map(|(c, e)| c * xi.powf(*e)).sum()
    }

    pub fn is_degenerate(&self) -> bool {
        self.terms.iter().all(|(c, _)| *c == 0.0)
    }
}

/// Unique positive root of `φ(ξ) = 1`.
pub fn xi0(domain: &Domain, nl: &Nonlinearity) -> Result<f64> {
    let phi = Phi::new(domain, nl)?;
    if phi.is_degenerate() {
        return Err(Error::Domain("all leading bounds vanish; the threshold has no root".into()));
    }
    let f = |x: f64| phi.eval(x) - 1.0;
    let (lo, hi) = bracket(f, 1.0)?;
    Ok(bisect(f, lo, hi, ROOT_TOL, ROOT_TOL))
}

/// Finds `lo < hi` with `f(lo) < 0 ≤ f(hi)` for an eventually increasing
/// `f` that is negative near zero.
fn bracket(f: impl Fn(f64) -> f64, start: f64) -> Result<(f64, f64)> {
    let mut lo = start;
    let mut hi = start;
    if f(start) < 0.0 {
        for _ in 0..2100 {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                break;
            }
            if f(hi) >= 0.0 {
                return Ok((lo, hi));
            }
        }
    } else {
        for _ in 0..2100 {
            hi = lo;
            lo *= 0.5;
            if lo == 0.0 {
                break;
            }
            if f(lo) < 0.0 {
                return Ok((lo, hi));
            }
        }
    }
    Err(Error::NoRoot("could not bracket a sign change".into()))
}

/// Bisection on `f(lo) < 0 ≤ f(hi)` until the residual or the relative
/// width falls below tolerance.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, ftol: f64, xtol: f64) -> f64 {
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let v = f(mid);
        if v.abs() <= ftol || (hi - lo) <= xtol * mid.abs() {
            return mid;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// `(exponent − 1, coefficient)` of `g(t) = ∫ (tz) f(x, tz) / t²` on the
/// side `sign ∈ {+1, −1}` for `t > 0`.
fn side_coefficients(t: &TermIntegrals, sign: f64) -> Vec<(f64, f64)> {
    let a = t
        .a
        .iter()
        .zip(t.a_exponents())
        .zip(t.a_kinds())
        .map(|((&m, &p), &k)| match k {
            TermKind::OddPower => (p - 1.0, m),
            TermKind::AbsPower => (p - 1.0, sign * m),
        });
    let b = t.b.iter().zip(t.b_exponents()).map(|(&m, &q)| (q - 1.0, m));
    a.chain(b).collect()
}

fn side_root(t: &TermIntegrals, sign: f64) -> Result<Option<f64>> {
    let coeffs = side_coefficients(t, sign);
    let scale: f64 = t.grad_sq + coeffs.iter().map(|(_, c)| c.abs()).sum::<f64>();
    let leading = coeffs
        .iter()
        .filter(|(_, c)| *c != 0.0)
        .max_by(|x, y| x.0.total_cmp(&y.0));
    let Some(&(_, lead)) = leading else {
        return Ok(None);
    };
    if lead.abs() <= AMBIGUITY_TOL * scale {
        return Err(Error::Ambiguous(format!(
            "leading scaling coefficient {lead:e} is indistinguishable from zero"
        )));
    }
    if lead < 0.0 {
        return Ok(None);
    }
    let g = |s: f64| coeffs.iter().map(|(e, c)| c * s.powf(*e)).sum::<f64>() - t.grad_sq;
    let (lo, hi) = bracket(g, 1.0)?;
    let root = bisect(g, lo, hi, 0.0, ROOT_TOL);
    Ok(Some(root))
}

/// Nonzero real `λ` with `I(λz) = 0`, positive roots first.
pub fn lambda_star(domain: &Domain, nl: &Nonlinearity, z: &SpectralField) -> Result<Vec<f64>> {
    let t = term_integrals(domain, nl, z)?;
    lambda_star_from(&t)
}

/// As [`lambda_star`], from precomputed term integrals.
pub fn lambda_star_from(t: &TermIntegrals) -> Result<Vec<f64>> {
    if !(t.grad_sq > 0.0) {
        return Err(argument("direction has zero gradient norm"));
    }
    let symmetric = t.a_kinds().iter().all(|k| *k == TermKind::OddPower);
    let mut roots = Vec::with_capacity(2);
    if let Some(r) = side_root(t, 1.0)? {
        roots.push(r);
        if symmetric {
            roots.push(-r);
        }
    }
    if !symmetric {
        if let Some(r) = side_root(t, -1.0)? {
            roots.push(-r);
        }
    }
    if roots.is_empty() {
        return Err(Error::NoRoot(
            "no scaling of the direction reaches the Nehari manifold (leading integrals are not positive)".into(),
        ));
    }
    Ok(roots)
}

/// Scaling `λ*` used by [`project_to_nehari`]: the positive root when it
/// exists, otherwise the negative one.
pub fn nehari_scaling(domain: &Domain, nl: &Nonlinearity, z: &SpectralField) -> Result<f64> {
    Ok(lambda_star(domain, nl, z)?[0])
}

pub fn project_to_nehari(domain: &Domain, nl: &Nonlinearity, z: &SpectralField) -> Result<SpectralField> {
    Ok(z.scaled(nehari_scaling(domain, nl, z)?))
}

/// `min_λ J(λz)` over the Nehari scalings of `z`.
fn direction_value(t: &TermIntegrals) -> Option<f64> {
    let roots = lambda_star_from(t).ok()?;
    roots
        .iter()
        .map(|&l| t.scaled(l).potential())
        .filter(|v| v.is_finite())
        .min_by(f64::total_cmp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthOptions {
    /// Random directions in addition to the pure modes and candidates.
    pub n_directions: usize,
    pub seed: u64,
    pub refine: bool,
    pub candidates: Vec<SpectralField>,
    /// Sweep cap of the compass search.
    pub refine_sweeps: usize,
}

impl Default for DepthOptions {
    fn default() -> Self {
        Self { n_directions: 256, seed: 0, refine: false, candidates: Vec::new(), refine_sweeps: 200 }
    }
}

/// Two-sided estimate of the well depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellReport {
    pub xi0: f64,
    pub d_lower: f64,
    pub d_upper: f64,
    pub n_directions: usize,
    pub seed: u64,
    pub refined: bool,
    /// Keyed by the exponent `q` of `C_q`.
    pub sobolev_constants: BTreeMap<String, f64>,
    /// `min J` along each sampled direction, `None` if `𝒩` is not reached.
    pub direction_values: Vec<Option<f64>>,
    /// Field on `𝒩` attaining `d_upper`.
    pub minimizer: SpectralField,
}

/// Sampled directions: pure modes, then `1/j`-decaying normal coefficients.
/// Larger samples with the same seed are supersets of smaller ones.
pub fn sample_directions(n_modes: usize, n_random: usize, seed: u64) -> Vec<SpectralField> {
    let mut out: Vec<SpectralField> = (1..=n_modes.min(PURE_MODES))
        .map(|j| SpectralField::unit(n_modes, j).expect("index in range"))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_random {
        let c: Vec<f64> = (1..=n_modes)
            .map(|j| {
                let n: f64 = StandardNormal.sample(&mut rng);
                n / j as f64
            })
            .collect();
        out.push(SpectralField::new(c).expect("finite"));
    }
    out
}

pub fn depth_estimate(domain: &Domain, nl: &Nonlinearity, opts: &DepthOptions) -> Result<WellReport> {
    let xi = xi0(domain, nl)?;
    let p1 = nl.leading_exponent().expect("nondegenerate threshold implies a leading term");
    let d_lower = (p1 - 1.0) / (2.0 * (p1 + 1.0)) * xi * xi;

    let mut dirs = sample_directions(domain.n_modes(), opts.n_directions, opts.seed);
    for c in &opts.candidates {
        domain.check_field(c)?;
        dirs.push(c.clone());
    }
    let values: Vec<Option<f64>> = dirs
        .par_iter()
        .map(|z| {
            if domain.grad_norm_sq(z) == 0.0 {
                return None;
            }
            term_integrals(domain, nl, z).ok().as_ref().and_then(direction_value)
        })
        .collect();

    let best = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let Some((best_idx, mut d_upper)) = best else {
        return Err(Error::Domain("no sampled direction reaches the Nehari manifold".into()));
    };
    let mut best_dir = dirs[best_idx].clone();

    if opts.refine {
        let (dir, value) = compass_refine(domain, nl, best_dir.clone(), d_upper, opts.refine_sweeps);
        if value < d_upper {
            d_upper = value;
            best_dir = dir;
        }
    }

    let t = term_integrals(domain, nl, &best_dir)?;
    let lambda = lambda_star_from(&t)?
        .into_iter()
        .min_by(|a, b| t.scaled(*a).potential().total_cmp(&t.scaled(*b).potential()))
        .expect("nonempty root set");

    let mut sobolev_constants = BTreeMap::new();
    sobolev_constants.insert("2".to_string(), sobolev_constant(domain, 2.0)?);
    for term in nl.a_terms() {
        let q = term.exponent() + 1.0;
        sobolev_constants.insert(format!("{q}"), sobolev_constant(domain, q)?);
    }

    Ok(WellReport {
        xi0: xi,
        d_lower,
        d_upper,
        n_directions: dirs.len(),
        seed: opts.seed,
        refined: opts.refine,
        sobolev_constants,
        direction_values: values,
        minimizer: best_dir.scaled(lambda),
    })
}

/// Coordinate compass search on `z ↦ min_λ J(λz)`.
fn compass_refine(
    domain: &Domain,
    nl: &Nonlinearity,
    start: SpectralField,
    start_value: f64,
    sweeps: usize,
) -> (SpectralField, f64) {
    let norm = domain.l2_norm_sq(&start).sqrt();
    let mut z = start.scaled(1.0 / norm);
    let mut best = start_value;
    let mut h = 0.25;
    let eval = |c: &SpectralField| {
        term_integrals(domain, nl, c).ok().as_ref().and_then(direction_value)
    };
    for _ in 0..sweeps {
        if h < 1e-7 {
            break;
        }
        let mut improved = false;
        for j in 0..z.len() {
            for s in [h, -h] {
                let mut trial = z.clone();
                trial.coeffs_mut()[j] += s;
                let n = domain.l2_norm_sq(&trial).sqrt();
                if n == 0.0 {
                    continue;
                }
                let trial = trial.scaled(1.0 / n);
                if let Some(v) = eval(&trial) {
                    if v < best {
                        best = v;
                        z = trial;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (z, best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `I > 0`
    WInterior,
    /// `I < 0`
    V,
    /// `I = 0`, `∇z ≠ 0`
    OnN,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub region: Region,
    pub i_value: f64,
    pub grad_norm: f64,
}

/// Places `z` relative to the Nehari manifold. For structurally valid
/// nonlinearities the result is cross-checked against the threshold `ξ_0`:
/// fields with `0 < ‖∇z‖ < ξ_0` must have `I > 0`.
pub fn classify(domain: &Domain, nl: &Nonlinearity, z: &SpectralField) -> Result<Classification> {
    let t = term_integrals(domain, nl, z)?;
    let grad_norm = t.grad_sq.sqrt();
    let i_value = t.nehari();
    let scale = t.grad_sq + t.a.iter().chain(&t.b).map(|m| m.abs()).sum::<f64>();
    let region = if grad_norm <= CLASSIFY_TOL {
        Region::Zero
    } else if i_value.abs() <= CLASSIFY_TOL * scale {
        Region::OnN
    } else if i_value > 0.0 {
        Region::WInterior
    } else {
        Region::V
    };

    if region != Region::Zero && nl.validate().structural_ok() {
        if let Ok(xi) = xi0(domain, nl) {
            let margin = 1e-9 * xi;
            if grad_norm < xi - margin && region != Region::WInterior {
                return Err(Error::Consistency(format!(
                    "field with gradient norm {grad_norm} below threshold {xi} classified as {region:?}"
                )));
            }
        }
    }
    Ok(Classification { region, i_value, grad_norm })
}
