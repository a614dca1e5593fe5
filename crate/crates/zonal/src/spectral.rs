//! Eigenstructure of the Laplace-Beltrami operator on the supported spaces:
//! eigenvalues, eigenspace dimensions, Jacobi polynomial evaluation, and the
//! addition-formula constants kappa.
//!
//! Degrees run over the index set Lambda of the space: all non-negative
//! integers, except on real projective space where only even degrees occur
//! (`degree_stride = 2`).

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::spaces::SpaceParams;

/// Checks `ell` lies in the eigenvalue index set of the space.
fn check_degree(params: &SpaceParams, ell: usize, max: usize) -> Result<()> {
    if ell % params.degree_stride != 0 || ell > max {
        return Err(Error::InvalidDegree {
            ell,
            stride: params.degree_stride,
            max,
        });
    }
    Ok(())
}

/// Laplace-Beltrami eigenvalue at degree `ell`: `-ell (ell + alpha + beta + 1)`.
pub fn eigenvalue(params: &SpaceParams, ell: usize) -> Result<f64> {
    check_degree(params, ell, usize::MAX)?;
    Ok(eigenvalue_unchecked(params, ell))
}

pub(crate) fn eigenvalue_unchecked(params: &SpaceParams, ell: usize) -> f64 {
    let l = ell as f64;
    -l * (l + params.alpha + params.beta + 1.0)
}

/// Dimension of the eigenspace at degree `ell`.
///
/// Evaluated through log-Gamma differences and rounded; the Gamma ratio is
/// an integer for every legal space, which is asserted (to relative 1e-6)
/// before rounding. Returned as `f64` because the exact values overflow
/// 64-bit integers on the Cayley plane well inside usable degree ranges.
pub fn eigenspace_dim(params: &SpaceParams, ell: usize) -> Result<f64> {
    check_degree(params, ell, usize::MAX)?;
    Ok(eigenspace_dim_unchecked(params, ell))
}

pub(crate) fn eigenspace_dim_unchecked(params: &SpaceParams, ell: usize) -> f64 {
    if ell == 0 {
        return 1.0;
    }
    let (alpha, beta) = (params.alpha, params.beta);
    let sigma = alpha + beta + 1.0;
    let l = ell as f64;
    let log_dim = (2.0 * l + sigma).ln() + ln_gamma(beta + 1.0) + ln_gamma(l + sigma)
        + ln_gamma(l + alpha + 1.0)
        - ln_gamma(alpha + 1.0)
        - ln_gamma(sigma + 1.0)
        - ln_gamma(l + 1.0)
        - ln_gamma(l + beta + 1.0);
    let dim = log_dim.exp();
    let rounded = dim.round();
    assert!(
        (dim - rounded).abs() <= 1e-6 * rounded.max(1.0),
        "eigenspace dimension {dim} at ell = {ell} is not an integer; wrong (alpha, beta) wiring?"
    );
    rounded
}

/// Jacobi polynomial values `P_0(t), ..., P_max(t)` by the three-term
/// recurrence. `P_0` and `P_1` are seeded explicitly and the recurrence is
/// entered at degree 2: its leading coefficient vanishes at degree 1 when
/// `alpha + beta = -1` (the circle).
pub fn jacobi_polynomials(alpha: f64, beta: f64, max_degree: usize, t: f64) -> Result<Vec<f64>> {
    if !(alpha > -1.0 && beta > -1.0) {
        return Err(Error::Config(format!(
            "Jacobi parameters must exceed -1, got ({alpha}, {beta})"
        )));
    }
    let t = clamp_unit(t)?;
    let mut values = Vec::with_capacity(max_degree + 1);
    values.push(1.0);
    if max_degree == 0 {
        return Ok(values);
    }
    values.push(((alpha + beta + 2.0) * t + (alpha - beta)) / 2.0);
    for n in 2..=max_degree {
        let nf = n as f64;
        let s = 2.0 * nf + alpha + beta;
        let c1 = 2.0 * nf * (nf + alpha + beta) * (s - 2.0);
        let c2 = (s - 1.0) * (alpha * alpha - beta * beta);
        let c3 = (s - 1.0) * s * (s - 2.0);
        let c4 = 2.0 * (nf + alpha - 1.0) * (nf + beta - 1.0) * s;
        let p = ((c2 + c3 * t) * values[n - 1] - c4 * values[n - 2]) / c1;
        values.push(p);
    }
    Ok(values)
}

/// `P_ell^{(alpha, beta)}(1) = Gamma(ell + alpha + 1) / (Gamma(alpha + 1) ell!)`.
pub fn jacobi_at_one(alpha: f64, ell: usize) -> f64 {
    let l = ell as f64;
    (ln_gamma(l + alpha + 1.0) - ln_gamma(alpha + 1.0) - ln_gamma(l + 1.0)).exp()
}

/// Fused evaluation of `sum_n weights[n] P_n(t)` over all degrees up to
/// `weights.len() - 1`, without materializing the polynomial values.
/// Assumes `|t| <= 1`; the zonal hot paths (kernel evaluation, model
/// covariances) run through here.
pub fn jacobi_weighted_sum(alpha: f64, beta: f64, weights: &[f64], t: f64) -> f64 {
    debug_assert!(t.abs() <= 1.0 + 1e-12);
    let mut sum = match weights.first() {
        Some(&w) => w,
        None => return 0.0,
    };
    if weights.len() == 1 {
        return sum;
    }
    let mut prev = 1.0;
    let mut curr = ((alpha + beta + 2.0) * t + (alpha - beta)) / 2.0;
    sum += weights[1] * curr;
    for (n, &w) in weights.iter().enumerate().skip(2) {
        let nf = n as f64;
        let s = 2.0 * nf + alpha + beta;
        let c1 = 2.0 * nf * (nf + alpha + beta) * (s - 2.0);
        let c2 = (s - 1.0) * (alpha * alpha - beta * beta);
        let c3 = (s - 1.0) * s * (s - 2.0);
        let c4 = 2.0 * (nf + alpha - 1.0) * (nf + beta - 1.0) * s;
        let next = ((c2 + c3 * t) * curr - c4 * prev) / c1;
        prev = curr;
        curr = next;
        sum += w * curr;
    }
    sum
}

fn clamp_unit(t: f64) -> Result<f64> {
    if t.abs() <= 1.0 {
        Ok(t)
    } else if t.abs() <= 1.0 + 1e-12 {
        Ok(t.clamp(-1.0, 1.0))
    } else {
        Err(Error::Domain {
            value: t,
            domain: "[-1, 1]",
        })
    }
}

/// One row of a spectral table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRow {
    pub ell: usize,
    /// Eigenvalue `-ell (ell + alpha + beta + 1)`; zero at degree zero and
    /// strictly decreasing along the table.
    pub lambda: f64,
    /// Eigenspace dimension (integer-valued).
    pub dim: f64,
    /// Addition-formula constant `kappa = dim / P_ell(1)`.
    pub kappa: f64,
}

/// Precomputed eigenvalues, dimensions, and addition constants for all
/// degrees of the index set up to a truncation level.
#[derive(Debug, Clone)]
pub struct SpectralTable {
    params: SpaceParams,
    ell_max: usize,
    rows: Vec<SpectralRow>,
}

impl SpectralTable {
    pub fn new(params: SpaceParams, ell_max: usize) -> SpectralTable {
        let rows = (0..=ell_max)
            .step_by(params.degree_stride)
            .map(|ell| {
                let dim = eigenspace_dim_unchecked(&params, ell);
                SpectralRow {
                    ell,
                    lambda: eigenvalue_unchecked(&params, ell),
                    dim,
                    kappa: dim / jacobi_at_one(params.alpha, ell),
                }
            })
            .collect();
        SpectralTable {
            params,
            ell_max,
            rows,
        }
    }

    pub fn params(&self) -> &SpaceParams {
        &self.params
    }

    pub fn ell_max(&self) -> usize {
        self.ell_max
    }

    pub fn rows(&self) -> &[SpectralRow] {
        &self.rows
    }

    pub fn row(&self, ell: usize) -> Result<&SpectralRow> {
        check_degree(&self.params, ell, self.ell_max)?;
        Ok(&self.rows[ell / self.params.degree_stride])
    }

    /// The degree-`ell` term of the addition formula at `t = cos(eps rho)`:
    /// `kappa_ell * P_ell(t)`, the reproducing kernel of the eigenspace.
    pub fn addition_kernel(&self, ell: usize, t: f64) -> Result<f64> {
        let row = self.row(ell)?;
        let values = jacobi_polynomials(self.params.alpha, self.params.beta, ell, t)?;
        Ok(row.kappa * values[ell])
    }
}
