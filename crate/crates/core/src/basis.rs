//! Dirichlet sine eigenbasis on an interval `(0, L)`.
//!
//! Fields are stored as coefficients `γ_j` in the L²-orthonormal basis
//! `w_j(x) = sqrt(2/L) sin(jπx/L)`, `j = 1..=K`, whose Dirichlet Laplacian
//! eigenvalues are `λ_j = (jπ/L)²`. Nodal values live on the `M` midpoints
//! `x_m = (m + 1/2) L / M` with equal weights `L / M`.
//!
//! The midpoint rule integrates `cos(nπx/L)` exactly for `0 < n < 2M`, so the
//! Gram matrix of the basis is the identity to rounding error whenever
//! `M ≥ K`, and products of up to `2M/K - 1` basis functions (polynomial
//! nonlinearities) are integrated without aliasing.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};

/// Coefficients of an H₀¹ function in the sine eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField(Vec<f64>);

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(argument(format!("coefficient {} is not finite", i + 1)));
        }
        Ok(Self(coeffs))
    }

    pub fn zeros(n_modes: usize) -> Self {
        Self(vec![0.0; n_modes])
    }

    /// The `j`-th unit vector (1-based, matching the eigenpair index).
    pub fn unit(n_modes: usize, j: usize) -> Result<Self> {
        if j == 0 || j > n_modes {
            return Err(argument(format!("mode {j} outside 1..={n_modes}")));
        }
        let mut c = vec![0.0; n_modes];
        c[j - 1] = 1.0;
        Ok(Self(c))
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|c| c * s).collect())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + s * b).collect())
    }

    /// Euclidean dot product of coefficient vectors, which equals the L²
    /// inner product of the represented functions.
    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

/// Nodal values on the quadrature grid of a [`Domain`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction(Vec<f64>);

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The interval `(0, L)` with a truncated eigenbasis and its quadrature grid.
#[derive(Debug, Clone)]
pub struct Domain {
    length: f64,
    n_modes: usize,
    n_quad: usize,
    nodes: Vec<f64>,
    weight: f64,
    eigenvalues: Vec<f64>,
    // row j-1 holds w_j at every node
    basis: Vec<f64>,
}

impl Domain {
    pub const DEFAULT_MODES: usize = 64;

    /// Builds a domain with `n_quad ≥ 4 n_modes` midpoint nodes.
    pub fn new(length: f64, n_modes: usize, n_quad: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(argument(format!("interval length must be positive, got {length}")));
        }
        if n_modes == 0 {
            return Err(argument("at least one mode is required"));
        }
        if n_quad < 4 * n_modes {
            return Err(argument(format!(
                "need at least 4 quadrature nodes per mode: {n_quad} < 4*{n_modes}"
            )));
        }
        let h = length / n_quad as f64;
        let nodes: Vec<f64> = (0..n_quad).map(|m| (m as f64 + 0.5) * h).collect();
        let norm = (2.0 / length).sqrt();
        let mut basis = Vec::with_capacity(n_modes * n_quad);
        for j in 1..=n_modes {
            let k = j as f64 * PI / length;
            basis.extend(nodes.iter().map(|&x| norm * (k * x).sin()));
        }
        let eigenvalues = (1..=n_modes)
            .map(|j| (j as f64 * PI / length).powi(2))
            .collect();
        Ok(Self {
            length,
            n_modes,
            n_quad,
            nodes,
            weight: h,
            eigenvalues,
            basis,
        })
    }

    /// Builds a domain with the default `8K` quadrature nodes.
    pub fn with_modes(length: f64, n_modes: usize) -> Result<Self> {
        Self::new(length, n_modes, 8 * n_modes)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_quad(&self) -> usize {
        self.n_quad
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Quadrature weight shared by every node.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Smallest Dirichlet eigenvalue, the sharp Poincaré constant.
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn eigenvalue(&self, j: usize) -> Result<f64> {
        self.check_mode(j)?;
        Ok(self.eigenvalues[j - 1])
    }

    /// Eigenvalue `λ_j` and the sampled eigenfunction `w_j` (1-based `j`).
    pub fn eigenpair(&self, j: usize) -> Result<(f64, GridFunction)> {
        self.check_mode(j)?;
        Ok((self.eigenvalues[j - 1], GridFunction(self.mode_row(j - 1).to_vec())))
    }

    fn check_mode(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.n_modes {
            return Err(argument(format!("mode index {j} outside 1..={}", self.n_modes)));
        }
        Ok(())
    }

    fn mode_row(&self, i: usize) -> &[f64] {
        &self.basis[i * self.n_quad..(i + 1) * self.n_quad]
    }

    /// Samples a function of `x` at the quadrature nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction(self.nodes.iter().map(|&x| f(x)).collect())
    }

    /// Pointwise values of `Σ γ_j w_j`.
    pub fn synthesize(&self, field: &SpectralField) -> Result<GridFunction> {
        self.check_field(field)?;
        let mut out = vec![0.0; self.n_quad];
        for (i, &c) in field.coeffs().iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.mode_row(i)) {
                *o += c * w;
            }
        }
        Ok(GridFunction(out))
    }

    /// Quadrature projection `γ_j = ∫ g w_j`.
    pub fn analyze(&self, g: &GridFunction) -> Result<SpectralField> {
        self.check_grid(g)?;
        let coeffs = (0..self.n_modes)
            .map(|i| {
                let s: f64 = self.mode_row(i).iter().zip(g.values()).map(|(w, v)| w * v).sum();
                s * self.weight
            })
            .collect();
        Ok(SpectralField(coeffs))
    }

    /// Projection of an analytic function onto the truncated basis.
    pub fn project(&self, f: impl Fn(f64) -> f64) -> SpectralField {
        let g = self.sample(f);
        self.analyze(&g).expect("sampled grid matches domain")
    }

    /// `‖∇z‖² = Σ λ_j γ_j²`.
    pub fn grad_norm_sq(&self, field: &SpectralField) -> f64 {
        field
            .coeffs()
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, l)| l * c * c)
            .sum()
    }

    /// `‖z‖² = Σ γ_j²`.
    pub fn l2_norm_sq(&self, field: &SpectralField) -> f64 {
        field.dot(field)
    }

    pub fn inner(&self, f1: &SpectralField, f2: &SpectralField) -> f64 {
        f1.dot(f2)
    }

    /// `‖g‖_p` by quadrature; `p = ∞` is the maximum absolute nodal value.
    pub fn lp_norm(&self, g: &GridFunction, p: f64) -> Result<f64> {
        self.check_grid(g)?;
        if p.is_nan() || p < 1.0 {
            return Err(argument(format!("Lebesgue exponent must be >= 1, got {p}")));
        }
        if p.is_infinite() {
            return Ok(g.values().iter().fold(0.0, |m, v| m.max(v.abs())));
        }
        let s: f64 = g.values().iter().map(|v| v.abs().powf(p)).sum();
        Ok((s * self.weight).powf(1.0 / p))
    }

    /// Quadrature of nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_quad);
        values.iter().sum::<f64>() * self.weight
    }

    pub(crate) fn check_field(&self, field: &SpectralField) -> Result<()> {
        if field.len() != self.n_modes {
            return Err(argument(format!(
                "field has {} coefficients, domain has {} modes",
                field.len(),
                self.n_modes
            )));
        }
        Ok(())
    }

    pub(crate) fn check_grid(&self, g: &GridFunction) -> Result<()> {
        if g.len() != self.n_quad {
            return Err(Error::Argument(format!(
                "grid function has {} values, domain has {} nodes",
                g.len(),
                self.n_quad
            )));
        }
        Ok(())
    }
}
