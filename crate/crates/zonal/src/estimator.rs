//! Pairwise regression design and the penalized covariance estimator.
//!
//! Each replicate contributes every ordered off-diagonal pair of its
//! measurements as one regression row: response `W_ij W_ik`, weight
//! `1 / (n r_i (r_i - 1))`. The estimator minimizes the weighted squared
//! loss plus `eta` times the squared tensor-Sobolev norm; by the
//! representer property the minimizer lives in the span of the product
//! kernel sections at the observed pairs, so fitting reduces to the
//! symmetric positive-definite system `(K + eta W^{-1}) c = y`.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::ZonalKernel;
use crate::spaces::{Point, SpaceParams};

/// Default cap on the number of pair rows; the dense Gram matrix beyond
/// this would exceed desk-scale memory.
pub const MAX_PAIR_ROWS: usize = 20_000;

/// Measurements of one replicate: locations and the noisy values observed
/// there.
#[derive(Debug, Clone)]
pub struct Subject {
    pub locations: Vec<Point>,
    pub values: Vec<f64>,
}

/// Noisy measurements of independent replicates of a random field.
#[derive(Debug, Clone)]
pub struct Dataset {
    space: SpaceParams,
    subjects: Vec<Subject>,
}

impl Dataset {
    /// Validates per-subject shape (equal-length locations and values, all
    /// points from `space`).
    pub fn new(space: SpaceParams, subjects: Vec<Subject>) -> Result<Dataset> {
        for (i, s) in subjects.iter().enumerate() {
            if s.locations.len() != s.values.len() {
                return Err(Error::Config(format!(
                    "subject {i}: {} locations but {} values",
                    s.locations.len(),
                    s.values.len()
                )));
            }
            for p in &s.locations {
                if p.kind() != space.kind {
                    return Err(Error::SpaceMismatch(space.kind.name(), p.kind().name()));
                }
            }
        }
        Ok(Dataset { space, subjects })
    }

    pub fn space(&self) -> &SpaceParams {
        &self.space
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    /// Per-subject measurement counts `r_i`.
    pub fn location_counts(&self) -> Vec<usize> {
        self.subjects.iter().map(|s| s.locations.len()).collect()
    }
}

/// One regression row: indices of the anchor pair into the pooled point
/// list, the product response, and the subject weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRow {
    pub first: usize,
    pub second: usize,
    pub response: f64,
    pub weight: f64,
    pub subject: usize,
}

/// The flattened off-diagonal pair design of a dataset.
///
/// Rows are ordered subject-major, then by first index, then by second, and
/// both orderings `(j, k)` and `(k, j)` of every pair are present with the
/// same response and weight.
#[derive(Debug, Clone)]
pub struct PairDesign {
    space: SpaceParams,
    points: Vec<Point>,
    rows: Vec<PairRow>,
}

impl PairDesign {
    /// Assembles the design. Every subject needs at least two measurements;
    /// the weights of subject `i` are `1 / (n r_i (r_i - 1))` and sum to
    /// `1/n` within the subject, to 1 overall.
    pub fn from_dataset(data: &Dataset) -> Result<PairDesign> {
        let n = data.subjects.len();
        for (i, s) in data.subjects.iter().enumerate() {
            if s.locations.len() < 2 {
                return Err(Error::Design {
                    subject: i,
                    count: s.locations.len(),
                });
            }
        }
        let mut points = Vec::with_capacity(data.subjects.iter().map(|s| s.locations.len()).sum());
        let mut rows = Vec::new();
        for (i, s) in data.subjects.iter().enumerate() {
            let base = points.len();
            points.extend(s.locations.iter().cloned());
            let r = s.locations.len();
            let weight = 1.0 / (n as f64 * r as f64 * (r as f64 - 1.0));
            for j in 0..r {
                for k in 0..r {
                    if j == k {
                        continue;
                    }
                    rows.push(PairRow {
                        first: base + j,
                        second: base + k,
                        response: s.values[j] * s.values[k],
                        weight,
                        subject: i,
                    });
                }
            }
        }
        Ok(PairDesign {
            space: *data.space(),
            points,
            rows,
        })
    }

    /// Builds a design from raw parts; used by the solver unit tests and
    /// file loading.
    pub fn from_parts(space: SpaceParams, points: Vec<Point>, rows: Vec<PairRow>) -> Result<PairDesign> {
        for row in &rows {
            if row.first >= points.len() || row.second >= points.len() {
                return Err(Error::Config("pair row references a missing point".into()));
            }
            if !(row.weight > 0.0) {
                return Err(Error::Config("pair weights must be positive".into()));
            }
        }
        Ok(PairDesign { space, points, rows })
    }

    pub fn space(&self) -> &SpaceParams {
        &self.space
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn rows(&self) -> &[PairRow] {
        &self.rows
    }

    /// Number of regression rows `M = sum_i r_i (r_i - 1)`.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn first_point(&self, row: &PairRow) -> &Point {
        &self.points[row.first]
    }

    pub fn second_point(&self, row: &PairRow) -> &Point {
        &self.points[row.second]
    }
}

/// Symmetric kernel matrix over a point list, filled column-parallel.
fn point_gram(kernel: &ZonalKernel, space: &SpaceParams, points: &[Point]) -> Result<DMatrix<f64>> {
    let p = points.len();
    // validate once; the parallel fill then uses the unchecked path
    for pt in points {
        if pt.kind() != space.kind {
            return Err(Error::SpaceMismatch(space.kind.name(), pt.kind().name()));
        }
    }
    let mut data = vec![0.0; p * p];
    data.par_chunks_mut(p.max(1)).enumerate().for_each(|(j, col)| {
        for (i, slot) in col.iter_mut().enumerate() {
            let t = space
                .cos_scaled_distance(&points[i], &points[j])
                .expect("validated points");
            *slot = kernel.eval_clamped(t);
        }
    });
    Ok(DMatrix::from_vec(p, p, data))
}

/// Precomputed Gram structure of a design, reusable across penalty values.
pub struct Fitter<'a> {
    kernel: &'a ZonalKernel,
    design: &'a PairDesign,
    /// Kernel values between pooled points.
    point_gram: DMatrix<f64>,
    /// Product-kernel Gram over the pair rows.
    gram: DMatrix<f64>,
    responses: DVector<f64>,
    inv_weights: Vec<f64>,
}

impl<'a> Fitter<'a> {
    pub fn new(kernel: &'a ZonalKernel, design: &'a PairDesign) -> Result<Fitter<'a>> {
        if kernel.params().kind != design.space.kind {
            return Err(Error::SpaceMismatch(
                kernel.params().kind.name(),
                design.space.kind.name(),
            ));
        }
        let m = design.len();
        if m == 0 {
            return Err(Error::Config("the pair design has no rows".into()));
        }
        if m > MAX_PAIR_ROWS {
            return Err(Error::Resource(format!(
                "design has {m} pair rows; the dense solver is capped at {MAX_PAIR_ROWS}"
            )));
        }
        let point_gram = point_gram(kernel, &design.space, &design.points)?;
        let rows = design.rows();
        let mut data = vec![0.0; m * m];
        data.par_chunks_mut(m).enumerate().for_each(|(col, chunk)| {
            let rc = &rows[col];
            for (r, slot) in chunk.iter_mut().enumerate() {
                let rr = &rows[r];
                *slot = point_gram[(rr.first, rc.first)] * point_gram[(rr.second, rc.second)];
            }
        });
        let gram = DMatrix::from_vec(m, m, data);
        let responses = DVector::from_iterator(m, rows.iter().map(|r| r.response));
        let inv_weights = rows.iter().map(|r| 1.0 / r.weight).collect();
        Ok(Fitter {
            kernel,
            design,
            point_gram,
            gram,
            responses,
            inv_weights,
        })
    }

    /// Number of pair rows.
    pub fn len(&self) -> usize {
        self.design.len()
    }

    pub fn is_empty(&self) -> bool {
        self.design.is_empty()
    }

    /// Solves `(K + eta W^{-1}) c = y` by Cholesky factorization with one
    /// step of iterative refinement. The system is the first-order
    /// condition of the weighted ridge objective restricted to the span of
    /// the product-kernel sections at the anchors, which contains the
    /// unique minimizer.
    pub fn fit(&self, eta: f64) -> Result<CovEstimate> {
        if !(eta > 0.0) {
            return Err(Error::Config(format!(
                "the penalty must be positive (eta = {eta}); eta = 0 is outside the estimator's domain"
            )));
        }
        let m = self.len();
        let mut system = self.gram.clone();
        for i in 0..m {
            system[(i, i)] += eta * self.inv_weights[i];
        }
        let chol = Cholesky::new(system).ok_or_else(|| {
            Error::Numerical(
                "Cholesky factorization of the penalized system failed; the design is severely \
                 ill-conditioned — consider a larger eta"
                    .into(),
            )
        })?;
        let mut coeffs = chol.solve(&self.responses);
        // one refinement step keeps the optimality residual near rounding level
        let mut residual = &self.responses - &self.gram * &coeffs;
        for i in 0..m {
            residual[i] -= eta * self.inv_weights[i] * coeffs[i];
        }
        coeffs += chol.solve(&residual);
        Ok(CovEstimate {
            kernel: self.kernel.clone(),
            points: self.design.points.clone(),
            anchors: self
                .design
                .rows()
                .iter()
                .map(|r| (r.first, r.second))
                .collect(),
            coeffs: coeffs.iter().copied().collect(),
            eta,
        })
    }

    /// Residual norm of the optimality system at the given coefficients.
    pub fn optimality_residual(&self, est: &CovEstimate) -> f64 {
        let c = DVector::from_column_slice(&est.coeffs);
        let mut r = &self.gram * &c - &self.responses;
        for i in 0..self.len() {
            r[i] += est.eta * self.inv_weights[i] * c[i];
        }
        r.norm()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn point_gram(&self) -> &DMatrix<f64> {
        &self.point_gram
    }
}

/// Convenience wrapper: assemble the Gram structure and fit once.
pub fn fit(kernel: &ZonalKernel, design: &PairDesign, eta: f64) -> Result<CovEstimate> {
    Fitter::new(kernel, design)?.fit(eta)
}

/// A fitted covariance estimate: representer coefficients over the anchor
/// pairs of the design.
#[derive(Debug, Clone)]
pub struct CovEstimate {
    kernel: ZonalKernel,
    points: Vec<Point>,
    anchors: Vec<(usize, usize)>,
    coeffs: Vec<f64>,
    eta: f64,
}

impl CovEstimate {
    /// Rebuilds an estimate from stored parts (file round-trips, synthetic
    /// coefficient vectors in tests).
    pub fn from_parts(
        kernel: ZonalKernel,
        points: Vec<Point>,
        anchors: Vec<(usize, usize)>,
        coeffs: Vec<f64>,
        eta: f64,
    ) -> Result<CovEstimate> {
        if coeffs.len() != anchors.len() {
            return Err(Error::Config(format!(
                "{} coefficients for {} anchors",
                coeffs.len(),
                anchors.len()
            )));
        }
        for &(a, b) in &anchors {
            if a >= points.len() || b >= points.len() {
                return Err(Error::Config("anchor references a missing point".into()));
            }
        }
        for p in &points {
            if p.kind() != kernel.params().kind {
                return Err(Error::SpaceMismatch(
                    kernel.params().kind.name(),
                    p.kind().name(),
                ));
            }
        }
        Ok(CovEstimate {
            kernel,
            points,
            anchors,
            coeffs,
            eta,
        })
    }

    pub fn kernel(&self) -> &ZonalKernel {
        &self.kernel
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn anchors(&self) -> &[(usize, usize)] {
        &self.anchors
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Evaluates the fitted covariance surface at `(u, v)`.
    pub fn predict(&self, u: &Point, v: &Point) -> Result<f64> {
        let params = self.kernel.params();
        let psi_u = self.section_values(params, u)?;
        let psi_v = self.section_values(params, v)?;
        let mut sum = 0.0;
        for (&(a, b), &c) in self.anchors.iter().zip(&self.coeffs) {
            sum += c * psi_u[a] * psi_v[b];
        }
        Ok(sum)
    }

    fn section_values(&self, params: &SpaceParams, q: &Point) -> Result<Vec<f64>> {
        self.points
            .iter()
            .map(|p| Ok(self.kernel.eval_clamped(params.cos_scaled_distance(q, p)?)))
            .collect()
    }

    /// Squared norm of the estimate in the tensor Sobolev space: `c' K c`
    /// over the anchor Gram matrix.
    pub fn rkhs_norm_sq(&self) -> f64 {
        let params = self.kernel.params();
        let g = point_gram(&self.kernel, params, &self.points).expect("validated points");
        let mut total = 0.0;
        for (&(a1, b1), &c1) in self.anchors.iter().zip(&self.coeffs) {
            let mut inner = 0.0;
            for (&(a2, b2), &c2) in self.anchors.iter().zip(&self.coeffs) {
                inner += c2 * g[(a1, a2)] * g[(b1, b2)];
            }
            total += c1 * inner;
        }
        total
    }

    /// The penalized objective of the design at this estimate: weighted
    /// squared loss plus `eta` times the squared norm. Serves as the
    /// test-side oracle for the solver.
    pub fn objective(&self, design: &PairDesign) -> Result<f64> {
        let mut loss = 0.0;
        for row in design.rows() {
            let fitted = self.predict(design.first_point(row), design.second_point(row))?;
            let resid = row.response - fitted;
            loss += row.weight * resid * resid;
        }
        Ok(loss + self.eta * self.rkhs_norm_sq())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::SpaceKind;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere2() -> SpaceParams {
        SpaceParams::new(SpaceKind::Sphere, 2).unwrap()
    }

    fn kernel() -> ZonalKernel {
        ZonalKernel::with_tolerance(sphere2(), 3.0, 1e-8).unwrap()
    }

    fn random_dataset(
        space: SpaceParams,
        counts: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Dataset {
        let subjects = counts
            .iter()
            .map(|&r| {
                let locations = space.sample_uniform(r, rng).unwrap();
                let values = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
                Subject { locations, values }
            })
            .collect();
        Dataset::new(space, subjects).unwrap()
    }

    #[test]
    fn single_subject_two_measurements() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = random_dataset(sphere2(), &[2], &mut rng);
        let design = PairDesign::from_dataset(&data).unwrap();
        assert_eq!(design.len(), 2);
        let y = data.subjects()[0].values[0] * data.subjects()[0].values[1];
        for row in design.rows() {
            assert_eq!(row.response, y);
            assert_eq!(row.weight, 0.5);
        }
        assert_eq!(design.rows()[0].first, design.rows()[1].second);
    }

    #[test]
    fn two_subject_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = random_dataset(sphere2(), &[2, 3], &mut rng);
        let design = PairDesign::from_dataset(&data).unwrap();
        assert_eq!(design.len(), 2 + 6);
        for row in design.rows() {
            let expected = if row.subject == 0 { 0.25 } else { 1.0 / 12.0 };
            assert_eq!(row.weight, expected);
            // exhaustive response check against the raw values
            let s = &data.subjects()[row.subject];
            let base = if row.subject == 0 { 0 } else { 2 };
            assert_eq!(
                row.response,
                s.values[row.first - base] * s.values[row.second - base]
            );
        }
        // subject-major deterministic ordering: (j, k) pairs in j-then-k order
        let firsts: Vec<usize> = design.rows().iter().map(|r| r.first).collect();
        assert_eq!(firsts, vec![0, 1, 2, 2, 3, 3, 4, 4]);
    }

    #[test]
    fn weights_sum_to_one_and_transposes_present() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = random_dataset(sphere2(), &[4, 2, 3, 5], &mut rng);
        let design = PairDesign::from_dataset(&data).unwrap();
        let total: f64 = design.rows().iter().map(|r| r.weight).sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-14);
        for row in design.rows() {
            assert!(design.rows().iter().any(|r| {
                r.first == row.second
                    && r.second == row.first
                    && r.response == row.response
                    && r.weight == row.weight
            }));
        }
    }

    #[test]
    fn undersampled_subject_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = random_dataset(sphere2(), &[3, 1], &mut rng);
        match PairDesign::from_dataset(&data) {
            Err(Error::Design { subject, count }) => {
                assert_eq!((subject, count), (1, 1));
            }
            other => panic!("expected design error, got {other:?}"),
        }
    }

    #[test]
    fn gram_is_exactly_symmetric_and_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = random_dataset(sphere2(), &[3, 4], &mut rng);
        let design = PairDesign::from_dataset(&data).unwrap();
        let k = kernel();
        let fitter = Fitter::new(&k, &design).unwrap();
        let gram = fitter.gram();
        assert_eq!(gram, &gram.transpose());
        let eigs = gram.symmetric_eigenvalues();
        let trace = gram.trace();
        assert!(eigs.iter().all(|&e| e >= -1e-8 * trace));
    }

    #[test]
    fn single_row_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let space = sphere2();
        let pts = space.sample_uniform(2, &mut rng).unwrap();
        let row = PairRow {
            first: 0,
            second: 1,
            response: 0.7,
            weight: 0.25,
            subject: 0,
        };
        let design = PairDesign::from_parts(space, pts, vec![row]).unwrap();
        let k = kernel();
        let eta = 0.3;
        let est = fit(&k, &design, eta).unwrap();
        let k11 = k
            .product(
                &design.points()[0],
                &design.points()[1],
                &design.points()[0],
                &design.points()[1],
            )
            .unwrap();
        let expected = 0.25 * 0.7 / (0.25 * k11 + eta);
        assert_relative_eq!(est.coeffs()[0], expected, max_relative = 1e-12);
    }

    #[test]
    fn huge_penalty_shrinks_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data = random_dataset(sphere2(), &[3, 3], &mut rng);
        let design = PairDesign::from_dataset(&data).unwrap();
        let k = kernel();
        let est = fit(&k, &design, 1e9).unwrap();
        assert!(est.coeffs().iter().all(|c| c.abs() < 1e-8));
        let probe = sphere2().sample_uniform(2, &mut rng).unwrap();
        assert!(est.predict(&probe[0], &probe[1]).unwrap().abs() < 1e-6);
    }

    #[test]
    fn rejects_non_positive_penalty_and_oversized_designs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = random_dataset(sphere2(), &[3], &mut rng);
        let design = PairDesign::from_dataset(&data).unwrap();
        let k = kernel();
        assert!(matches!(fit(&k, &design, 0.0), Err(Error::Config(_))));
        assert!(matches!(fit(&k, &design, -1.0), Err(Error::Config(_))));

        let big = random_dataset(sphere2(), &[150], &mut rng);
        let big_design = PairDesign::from_dataset(&big).unwrap();
        assert!(big_design.len() > MAX_PAIR_ROWS);
        assert!(matches!(
            Fitter::new(&k, &big_design),
            Err(Error::Resource(_))
        ));
    }

    /// Dense brute-force minimizer of the quadratic objective in c:
    /// `(K W K + eta K) c = K W y` solved with an SVD pseudo-inverse.
    fn brute_force_coeffs(fitter: &Fitter, eta: f64) -> DVector<f64> {
        let m = fitter.len();
        let k = fitter.gram().clone();
        let mut w = DMatrix::zeros(m, m);
        for i in 0..m {
            w[(i, i)] = 1.0 / fitter.inv_weights[i];
        }
        let lhs = &k * &w * &k + eta * &k;
        let rhs = &k * &w * &fitter.responses;
        let svd = lhs.svd(true, true);
        svd.pseudo_inverse(1e-13).unwrap() * rhs
    }

    #[test]
    fn matches_brute_force_minimizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = kernel();
        for trial in 0..5 {
            let data = random_dataset(sphere2(), &[3, 2, 3], &mut rng);
            let design = PairDesign::from_dataset(&data).unwrap();
            let fitter = Fitter::new(&k, &design).unwrap();
            let eta = 0.2 + 0.2 * trial as f64;
            let est = fitter.fit(eta).unwrap();
            let brute = brute_force_coeffs(&fitter, eta);
            let got = DVector::from_column_slice(est.coeffs());
            let rel = (&got - &brute).norm() / brute.norm();
            assert!(rel < 1e-8, "trial {trial}: relative gap {rel}");
        }
    }

    #[test]
    fn optimality_residual_is_tiny() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let k = kernel();
        let data = random_dataset(sphere2(), &[4, 3], &mut rng);
        let design = PairDesign::from_dataset(&data).unwrap();
        let fitter = Fitter::new(&k, &design).unwrap();
        for &eta in &[1e-3, 0.1, 10.0] {
            let est = fitter.fit(eta).unwrap();
            let resid = fitter.optimality_residual(&est);
            let scale = fitter.responses.norm();
            assert!(resid <= 1e-9 * scale, "eta {eta}: residual {resid}");
        }
    }

    #[test]
    fn objective_at_solution_beats_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = kernel();
        let data = random_dataset(sphere2(), &[3, 3], &mut rng);
        let design = PairDesign::from_dataset(&data).unwrap();
        let est = fit(&k, &design, 0.4).unwrap();
        let base = est.objective(&design).unwrap();
        let scale = est.coeffs().iter().map(|c| c.abs()).fold(0.0, f64::max);
        for _ in 0..100 {
            let perturbed: Vec<f64> = est
                .coeffs()
                .iter()
                .map(|c| c + rng.random_range(-0.1..0.1) * scale.max(1e-3))
                .collect();
            let alt = CovEstimate::from_parts(
                k.clone(),
                est.points().to_vec(),
                est.anchors().to_vec(),
                perturbed,
                est.eta(),
            )
            .unwrap();
            assert!(alt.objective(&design).unwrap() >= base - 1e-12);
        }
    }

    #[test]
    fn objective_of_zero_coefficients_is_weighted_response_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let k = kernel();
        let data = random_dataset(sphere2(), &[3, 2], &mut rng);
        let design = PairDesign::from_dataset(&data).unwrap();
        let zero = CovEstimate::from_parts(
            k,
            design.points().to_vec(),
            design.rows().iter().map(|r| (r.first, r.second)).collect(),
            vec![0.0; design.len()],
            0.5,
        )
        .unwrap();
        let expected: f64 = design
            .rows()
            .iter()
            .map(|r| r.weight * r.response * r.response)
            .sum();
        assert_relative_eq!(zero.objective(&design).unwrap(), expected, max_relative = 1e-12);
        assert_eq!(zero.rkhs_norm_sq(), 0.0);
    }

    #[test]
    fn near_interpolation_at_vanishing_penalty() {
        // well-separated points keep the 6-row system benign
        let space = sphere2();
        let pts = vec![
            space.point(vec![1.0, 0.0, 0.0]).unwrap(),
            space.point(vec![0.0, 1.0, 0.0]).unwrap(),
            space.point(vec![0.0, 0.0, 1.0]).unwrap(),
        ];
        let data = Dataset::new(
            space,
            vec![Subject {
                locations: pts,
                values: vec![0.3, -0.9, 0.6],
            }],
        )
        .unwrap();
        let design = PairDesign::from_dataset(&data).unwrap();
        assert_eq!(design.len(), 6);
        let k = kernel();
        let est = fit(&k, &design, 1e-8).unwrap();
        let loss: f64 = design
            .rows()
            .iter()
            .map(|r| {
                let fitted = est
                    .predict(design.first_point(r), design.second_point(r))
                    .unwrap();
                r.weight * (r.response - fitted).powi(2)
            })
            .sum();
        assert!(loss < 1e-10, "loss {loss}");
    }

    #[test]
    fn rkhs_norm_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let k = kernel();
        let space = sphere2();
        let pts = space.sample_uniform(2, &mut rng).unwrap();
        let single = CovEstimate::from_parts(
            k.clone(),
            pts.clone(),
            vec![(0, 1)],
            vec![1.0],
            1.0,
        )
        .unwrap();
        // squared norm of one tensor section is the kernel diagonal
        assert_relative_eq!(
            single.rkhs_norm_sq(),
            k.at_one() * k.at_one(),
            max_relative = 1e-12
        );

        let data = random_dataset(space, &[3], &mut rng);
        let design = PairDesign::from_dataset(&data).unwrap();
        let est = fit(&k, &design, 0.7).unwrap();
        let doubled = CovEstimate::from_parts(
            k.clone(),
            est.points().to_vec(),
            est.anchors().to_vec(),
            est.coeffs().iter().map(|c| 2.0 * c).collect(),
            est.eta(),
        )
        .unwrap();
        assert_relative_eq!(
            doubled.rkhs_norm_sq(),
            4.0 * est.rkhs_norm_sq(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn penalty_norm_monotone_in_eta() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let k = kernel();
        let data = random_dataset(sphere2(), &[4, 3], &mut rng);
        let design = PairDesign::from_dataset(&data).unwrap();
        let fitter = Fitter::new(&k, &design).unwrap();
        let mut last = f64::INFINITY;
        for &eta in &[1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0] {
            let norm = fitter.fit(eta).unwrap().rkhs_norm_sq();
            assert!(norm <= last * (1.0 + 1e-9), "eta {eta}: {norm} > {last}");
            last = norm;
        }
    }

    #[test]
    fn prediction_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let k = kernel();
        let data = random_dataset(sphere2(), &[4, 2], &mut rng);
        let design = PairDesign::from_dataset(&data).unwrap();
        let est = fit(&k, &design, 0.05).unwrap();
        let mut scale: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let pts = sphere2().sample_uniform(2, &mut rng).unwrap();
            let a = est.predict(&pts[0], &pts[1]).unwrap();
            let b = est.predict(&pts[1], &pts[0]).unwrap();
            scale = scale.max(a.abs());
            worst = worst.max((a - b).abs());
        }
        assert!(worst <= 1e-9 * scale.max(1e-12), "asymmetry {worst} at scale {scale}");
    }

    #[test]
    fn permutation_invariance_of_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let k = kernel();
        let space = sphere2();
        let data = random_dataset(space, &[3, 4, 2], &mut rng);
        let design = PairDesign::from_dataset(&data).unwrap();
        let est = fit(&k, &design, 0.2).unwrap();

        // permute subjects and, within subject 0, the measurement order
        let s = data.subjects();
        let mut reordered = vec![s[2].clone(), s[0].clone(), s[1].clone()];
        reordered[1] = Subject {
            locations: vec![
                reordered[1].locations[2].clone(),
                reordered[1].locations[0].clone(),
                reordered[1].locations[1].clone(),
            ],
            values: vec![
                reordered[1].values[2],
                reordered[1].values[0],
                reordered[1].values[1],
            ],
        };
        let permuted = Dataset::new(space, reordered).unwrap();
        let p_design = PairDesign::from_dataset(&permuted).unwrap();
        let p_est = fit(&k, &p_design, 0.2).unwrap();

        let mut scale: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let pts = space.sample_uniform(2, &mut rng).unwrap();
            let a = est.predict(&pts[0], &pts[1]).unwrap();
            let b = p_est.predict(&pts[0], &pts[1]).unwrap();
            scale = scale.max(a.abs());
            worst = worst.max((a - b).abs());
        }
        assert!(worst <= 1e-9 * scale.max(1e-12), "gap {worst} at scale {scale}");
    }
}
