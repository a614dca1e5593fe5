//! Compact two-point homogeneous spaces: parameters, points, distances,
//! and uniform sampling.
//!
//! Five families are supported: spheres and the projective spaces over the
//! reals, complex numbers, quaternions, and octonions (the Cayley plane).
//! Each family carries a pair of Jacobi parameters `(alpha, beta)` and a
//! distance scaling `eps` such that `cos(eps * rho)` of two uniform points
//! follows the Jacobi weight `(1-t)^alpha (1+t)^beta` on its reachable
//! range. Points are unit vectors over the coordinate field; projective
//! identification stays implicit because every operation here is invariant
//! under unit scalar multiples of a representative.
//!
//! The Cayley plane has no associative coordinate representation, so it is
//! supported only where points are not needed (spectral tables and zonal
//! kernels as functions of `t`).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five families of compact two-point homogeneous spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Sphere,
    RealProjective,
    ComplexProjective,
    QuaternionProjective,
    CayleyPlane,
}

impl SpaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::Sphere => "sphere",
            SpaceKind::RealProjective => "real_projective",
            SpaceKind::ComplexProjective => "complex_projective",
            SpaceKind::QuaternionProjective => "quaternion_projective",
            SpaceKind::CayleyPlane => "cayley_plane",
        }
    }

    /// Real components per coordinate-field entry (1, 1, 2, 4; none for Cayley).
    fn field_width(self) -> Option<usize> {
        match self {
            SpaceKind::Sphere | SpaceKind::RealProjective => Some(1),
            SpaceKind::ComplexProjective => Some(2),
            SpaceKind::QuaternionProjective => Some(4),
            SpaceKind::CayleyPlane => None,
        }
    }
}

impl std::fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A space family instance: manifold dimension, Jacobi parameters, distance
/// scaling, and the stride of the eigenvalue index set (2 on real projective
/// space, where only even degrees occur).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceParams {
    pub kind: SpaceKind,
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    pub degree_stride: usize,
}

impl SpaceParams {
    /// Builds the parameters for `(kind, d)`, rejecting dimensions outside
    /// the legal set of the family.
    pub fn new(kind: SpaceKind, d: usize) -> Result<SpaceParams> {
        let legal = match kind {
            SpaceKind::Sphere => d >= 1,
            SpaceKind::RealProjective => d >= 2,
            SpaceKind::ComplexProjective => d >= 4 && d % 2 == 0,
            SpaceKind::QuaternionProjective => d >= 8 && d % 4 == 0,
            SpaceKind::CayleyPlane => d == 16,
        };
        if !legal {
            return Err(Error::IllegalSpace {
                kind: kind.name(),
                d,
                legal: match kind {
                    SpaceKind::Sphere => "d = 1, 2, 3, ...",
                    SpaceKind::RealProjective => "d = 2, 3, 4, ...",
                    SpaceKind::ComplexProjective => "even d = 4, 6, 8, ...",
                    SpaceKind::QuaternionProjective => "d = 8, 12, 16, ...",
                    SpaceKind::CayleyPlane => "d = 16",
                },
            });
        }
        let half = (d as f64 - 2.0) / 2.0;
        let (alpha, beta) = match kind {
            SpaceKind::Sphere | SpaceKind::RealProjective => (half, half),
            SpaceKind::ComplexProjective => (half, 0.0),
            SpaceKind::QuaternionProjective => (half, 1.0),
            SpaceKind::CayleyPlane => (7.0, 3.0),
        };
        let real_projective = kind == SpaceKind::RealProjective;
        Ok(SpaceParams {
            kind,
            dim: d,
            alpha,
            beta,
            eps: if real_projective { 0.5 } else { 1.0 },
            degree_stride: if real_projective { 2 } else { 1 },
        })
    }

    /// Number of stored real coordinates of a point, or `None` when the
    /// family has no point representation (Cayley plane).
    pub fn coords_len(&self) -> Option<usize> {
        let w = self.kind.field_width()?;
        // d + 1 coordinate-field entries for real kinds; (d/2 + 1) complex
        // entries for P^d(C); (d/4 + 1) quaternionic entries for P^d(H).
        let entries = match self.kind {
            SpaceKind::Sphere | SpaceKind::RealProjective => self.dim + 1,
            SpaceKind::ComplexProjective => self.dim / 2 + 1,
            SpaceKind::QuaternionProjective => self.dim / 4 + 1,
            SpaceKind::CayleyPlane => unreachable!(),
        };
        Some(entries * w)
    }

    /// Draws `count` independent points from the normalized Riemannian
    /// (uniform) measure. Deterministic given the generator state.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<Point>> {
        let len = self
            .coords_len()
            .ok_or(Error::UnsupportedSampling(self.kind.name()))?;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            // A normalized i.i.d. Gaussian vector is uniform on the unit
            // sphere of the coordinate field; quotienting by unit scalars
            // then gives the Fubini-Study uniform law on projective kinds.
            let mut coords: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
            let mut norm = l2_norm(&coords);
            while norm < 1e-8 {
                for c in coords.iter_mut() {
                    *c = rng.sample(StandardNormal);
                }
                norm = l2_norm(&coords);
            }
            for c in coords.iter_mut() {
                *c /= norm;
            }
            out.push(Point {
                kind: self.kind,
                coords,
            });
        }
        Ok(out)
    }

    /// Constructs a point of this space from raw coordinates, normalizing
    /// them onto the unit sphere of the coordinate field.
    pub fn point(&self, coords: Vec<f64>) -> Result<Point> {
        let len = self
            .coords_len()
            .ok_or(Error::UnsupportedSampling(self.kind.name()))?;
        if coords.len() != len {
            return Err(Error::Config(format!(
                "point on {} with d = {} needs {} real coordinates, got {}",
                self.kind,
                self.dim,
                len,
                coords.len()
            )));
        }
        let norm = l2_norm(&coords);
        if norm < 1e-8 {
            return Err(Error::Config("point coordinates are numerically zero".into()));
        }
        let coords = coords.into_iter().map(|c| c / norm).collect();
        Ok(Point {
            kind: self.kind,
            coords,
        })
    }

    /// `cos(eps * rho(u, v))`, the argument of the Jacobi polynomials in the
    /// addition formula. Computed directly from representatives and clamped
    /// to `[-1, 1]`.
    pub fn cos_scaled_distance(&self, u: &Point, v: &Point) -> Result<f64> {
        self.check_point(u)?;
        self.check_point(v)?;
        let t = match self.kind {
            SpaceKind::Sphere => real_dot(&u.coords, &v.coords),
            SpaceKind::RealProjective => real_dot(&u.coords, &v.coords).abs(),
            SpaceKind::ComplexProjective => {
                let (re, im) = complex_hermitian_dot(&u.coords, &v.coords);
                2.0 * (re * re + im * im) - 1.0
            }
            SpaceKind::QuaternionProjective => {
                let q = quaternion_hermitian_dot(&u.coords, &v.coords);
                2.0 * (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]) - 1.0
            }
            SpaceKind::CayleyPlane => {
                return Err(Error::UnsupportedSampling(self.kind.name()))
            }
        };
        Ok(t.clamp(-1.0, 1.0))
    }

    /// Geodesic distance normalized to `[0, pi]`.
    pub fn geodesic_distance(&self, u: &Point, v: &Point) -> Result<f64> {
        let t = self.cos_scaled_distance(u, v)?;
        Ok(t.acos() / self.eps)
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if p.kind != self.kind {
            return Err(Error::SpaceMismatch(self.kind.name(), p.kind.name()));
        }
        if Some(p.coords.len()) != self.coords_len() {
            return Err(Error::Config(format!(
                "point has {} coordinates, expected {:?} on {} with d = {}",
                p.coords.len(),
                self.coords_len(),
                self.kind,
                self.dim
            )));
        }
        Ok(())
    }
}

/// A point of a space, stored as a unit vector of real components of its
/// coordinate-field representative. For projective kinds this is one
/// representative of an equivalence class; all distance operations are
/// invariant under unit scalar multiples.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    kind: SpaceKind,
    coords: Vec<f64>,
}

impl Point {
    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Sum of squares of all real components; 1 up to rounding.
    pub fn norm_sq(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum()
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn real_dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Hermitian inner product sum_j conj(u_j) v_j over interleaved complex
/// coordinates; returns (re, im).
fn complex_hermitian_dot(u: &[f64], v: &[f64]) -> (f64, f64) {
    let mut re = 0.0;
    let mut im = 0.0;
    for (uc, vc) in u.chunks_exact(2).zip(v.chunks_exact(2)) {
        // conj(a + ib)(c + id) = (ac + bd) + i(ad - bc)
        re += uc[0] * vc[0] + uc[1] * vc[1];
        im += uc[0] * vc[1] - uc[1] * vc[0];
    }
    (re, im)
}

/// Quaternionic Hermitian inner product sum_j conj(u_j) v_j. Conjugation of
/// the first factor makes |<u lam, v mu>| = |<u, v>| for unit quaternions
/// lam, mu, which is what projective identification requires.
fn quaternion_hermitian_dot(u: &[f64], v: &[f64]) -> [f64; 4] {
    let mut acc = [0.0f64; 4];
    for (q, r) in u.chunks_exact(4).zip(v.chunks_exact(4)) {
        // conj(q) * r with q = (w, x, y, z)
        let (w1, x1, y1, z1) = (q[0], -q[1], -q[2], -q[3]);
        let (w2, x2, y2, z2) = (r[0], r[1], r[2], r[3]);
        acc[0] += w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2;
        acc[1] += w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2;
        acc[2] += w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2;
        acc[3] += w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2;
    }
    acc
}

/// Multiplies the coordinates of `p` by a unit scalar of its coordinate
/// field (sign, unit complex, or unit quaternion). Distance operations must
/// be invariant under this. Exposed for tests and diagnostics.
pub fn scalar_multiply(p: &Point, scalar: &[f64]) -> Point {
    let width = p.kind.field_width().expect("no point representation");
    assert_eq!(scalar.len(), width, "scalar width mismatch");
    let mut coords = Vec::with_capacity(p.coords.len());
    match width {
        1 => {
            for c in &p.coords {
                coords.push(c * scalar[0]);
            }
        }
        2 => {
            for uc in p.coords.chunks_exact(2) {
                // right multiplication by the unit complex scalar
                coords.push(uc[0] * scalar[0] - uc[1] * scalar[1]);
                coords.push(uc[0] * scalar[1] + uc[1] * scalar[0]);
            }
        }
        4 => {
            for q in p.coords.chunks_exact(4) {
                // right multiplication q * s
                let (w1, x1, y1, z1) = (q[0], q[1], q[2], q[3]);
                let (w2, x2, y2, z2) = (scalar[0], scalar[1], scalar[2], scalar[3]);
                coords.push(w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2);
                coords.push(w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2);
                coords.push(w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2);
                coords.push(w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2);
            }
        }
        _ => unreachable!(),
    }
    Point {
        kind: p.kind,
        coords,
    }
}
