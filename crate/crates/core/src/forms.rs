//! Rank and principal minors of the curvature matrix, gauge-fixed vertex
//! coordinates, and the two top-degree forms whose ratio is the invariant.

use nalgebra::{DMatrix, Matrix3};
use rand::Rng;

use crate::complex::GluedComplex;
use crate::curvature::{curvature_matrix, CurvatureMatrix, Realization, SAMPLING_RETRIES};
use crate::error::{Error, Result};
use crate::geometry::Point;

pub const DEFAULT_TAU_RANK: f64 = 1e-8;

/// Relative singular-value ratio below which a length Jacobian is treated as
/// singular.
pub const JACOBIAN_CONDITION_FLOOR: f64 = 1e-12;

/// Bunch–Kaufman growth constant `(1 + sqrt 17) / 8`.
const PIVOT_ALPHA: f64 = 0.640_388_203_202_208_1;

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `tau * s_max`.
pub fn numeric_rank(a: &DMatrix<f64>, tau: f64) -> usize {
    numeric_rank_against(a, tau, 0.0)
}

/// Number of singular values above `tau * max(s_max, reference)`.
///
/// `reference` is the size of the terms that were summed into `a`; it keeps
/// a matrix made of pure cancellation noise from being read as full rank.
pub fn numeric_rank_against(a: &DMatrix<f64>, tau: f64, reference: f64) -> usize {
    let s = singular_values(a);
    let Some(&s_max) = s.first() else { return 0 };
    if s_max == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > tau * s_max.max(reference)).count()
}

fn submatrix(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

fn det(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        1.0
    } else {
        m.clone().lu().determinant()
    }
}

/// One step of the symmetric elimination.
#[derive(Debug, Clone, PartialEq)]
pub enum Pivot {
    Single { index: usize, value: f64 },
    Pair { indices: [usize; 2], det: f64 },
}

/// A principal basis `C` of the curvature matrix and its minor `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSelection {
    /// Edge classes in `C`, ascending.
    pub basis: Vec<usize>,
    /// Edge classes outside `C`, ascending.
    pub complement: Vec<usize>,
    /// `det A|_C`.
    pub f: f64,
    pub pivots: Vec<Pivot>,
    pub s_max: f64,
    pub threshold: f64,
}

impl BasisSelection {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Validates a user-chosen basis: `|C|` equals the numeric rank and
    /// `A|_C` is nonsingular at the same tolerance.
    pub fn from_indices(a: &DMatrix<f64>, indices: &[usize], tau: f64) -> Result<Self> {
        Self::from_indices_against(a, indices, tau, 0.0)
    }

    /// [`BasisSelection::from_indices`] with the rank threshold of
    /// [`numeric_rank_against`].
    pub fn from_indices_against(a: &DMatrix<f64>, indices: &[usize], tau: f64, reference: f64) -> Result<Self> {
        check_finite(a)?;
        let n = a.nrows();
        let mut basis = indices.to_vec();
        basis.sort_unstable();
        basis.dedup();
        if basis.len() != indices.len() {
            return Err(Error::InvalidBasis("repeated edge class".into()));
        }
        if let Some(&k) = basis.iter().find(|&&k| k >= n) {
            return Err(Error::IndexOutOfRange { what: "edge class", index: k, count: n });
        }
        let s = singular_values(a);
        let s_max = s.first().copied().unwrap_or(0.0);
        let threshold = tau * s_max.max(reference);
        let rank = numeric_rank_against(a, tau, reference);
        if basis.len() != rank {
            return Err(Error::InvalidBasis(format!("{} classes given but rank is {rank}", basis.len())));
        }
        let sub = submatrix(a, &basis, &basis);
        if singular_values(&sub).last().is_some_and(|&x| x <= threshold) {
            return Err(Error::InvalidBasis("principal submatrix is singular".into()));
        }
        Ok(BasisSelection {
            complement: (0..n).filter(|k| basis.binary_search(k).is_err()).collect(),
            f: det(&sub),
            pivots: Vec::new(),
            basis,
            s_max,
            threshold,
        })
    }
}

fn check_finite(a: &DMatrix<f64>) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("curvature matrix"))
    }
}

/// Symmetric elimination with complete pivoting on the Schur complement.
///
/// A diagonal pivot is taken when the largest remaining diagonal entry is at
/// least `alpha` times the largest off-diagonal one; otherwise the `2x2`
/// principal block at the largest off-diagonal entry is eliminated (needed
/// for matrices such as the projective-space one, whose diagonal vanishes).
/// Ties go to the lowest edge class. Elimination stops once every remaining
/// entry is at most `tau * s_max`; the pivot count must agree with the
/// singular-value rank.
pub fn select_principal_basis(a: &DMatrix<f64>, tau: f64) -> Result<BasisSelection> {
    select_principal_basis_against(a, tau, 0.0)
}

/// [`select_principal_basis`] with the rank threshold of
/// [`numeric_rank_against`].
pub fn select_principal_basis_against(a: &DMatrix<f64>, tau: f64, reference: f64) -> Result<BasisSelection> {
    check_finite(a)?;
    let n = a.nrows();
    let s = singular_values(a);
    let s_max = s.first().copied().unwrap_or(0.0);
    let threshold = tau * s_max.max(reference);
    let mut schur = a.clone();
    let mut active: Vec<usize> = (0..n).collect();
    let mut basis = Vec::new();
    let mut pivots = Vec::new();
    let mut f = 1.0;

    loop {
        let mut diag: Option<(usize, f64)> = None;
        let mut off: Option<(usize, usize, f64)> = None;
        for (x, &i) in active.iter().enumerate() {
            let v = schur[(i, i)].abs();
            if diag.map_or(true, |(_, m)| v > m) {
                diag = Some((i, v));
            }
            for &j in &active[x + 1..] {
                let v = schur[(i, j)].abs();
                if off.map_or(true, |(_, _, m)| v > m) {
                    off = Some((i, j, v));
                }
            }
        }
        let Some((di, dmax)) = diag else { break };
        let omax = off.map_or(0.0, |o| o.2);
        if dmax.max(omax) <= threshold {
            break;
        }
        let block: Vec<usize> = if dmax >= PIVOT_ALPHA * omax {
            let value = schur[(di, di)];
            pivots.push(Pivot::Single { index: di, value });
            f *= value;
            vec![di]
        } else {
            let (i, j, _) = off.unwrap();
            let d = schur[(i, i)] * schur[(j, j)] - schur[(i, j)] * schur[(j, i)];
            pivots.push(Pivot::Pair { indices: [i, j], det: d });
            f *= d;
            vec![i, j]
        };
        active.retain(|k| !block.contains(k));
        let p = submatrix(&schur, &block, &block);
        let p_inv = p.try_inverse().ok_or(Error::NonFinite("pivot block"))?;
        let cross = submatrix(&schur, &active, &block);
        let update = &cross * p_inv * cross.transpose();
        for (x, &i) in active.iter().enumerate() {
            for (y, &j) in active.iter().enumerate() {
                schur[(i, j)] -= update[(x, y)];
            }
        }
        basis.extend(block);
    }

    let svd_rank = numeric_rank_against(a, tau, reference);
    if basis.len() != svd_rank {
        return Err(Error::RankAmbiguous { pivoted: basis.len(), svd: svd_rank });
    }
    basis.sort_unstable();
    Ok(BasisSelection {
        complement: (0..n).filter(|k| basis.binary_search(k).is_err()).collect(),
        basis,
        f,
        pivots,
        s_max,
        threshold,
    })
}

/// Ordered triple of vertex classes fixing the gauge: `a` at the origin, `b`
/// on the positive x axis, `c` in the upper half of the xy plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frame {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

impl Frame {
    pub fn new(a: usize, b: usize, c: usize) -> Self {
        Frame { a, b, c }
    }

    /// Every ordered triple of distinct classes out of `vertex_count`.
    pub fn all(vertex_count: usize) -> Vec<Frame> {
        let mut out = Vec::new();
        for a in 0..vertex_count {
            for b in 0..vertex_count {
                for c in 0..vertex_count {
                    if a != b && b != c && a != c {
                        out.push(Frame::new(a, b, c));
                    }
                }
            }
        }
        out
    }
}

impl Default for Frame {
    fn default() -> Self {
        Frame::new(0, 1, 2)
    }
}

/// Vertex positions after the gauge-fixing rigid motion, with the chart
/// coordinates `q` listed as `(vertex class, axis)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeChart {
    pub frame: Frame,
    pub points: Vec<Point>,
    pub slots: Vec<(usize, usize)>,
    pub q: Vec<f64>,
}

impl GaugeChart {
    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

pub fn gauge_chart(r: &Realization, frame: Frame) -> Result<GaugeChart> {
    let v = r.complex().vertex_count();
    let Frame { a, b, c } = frame;
    for x in [a, b, c] {
        if x >= v {
            return Err(Error::IndexOutOfRange { what: "vertex class", index: x, count: v });
        }
    }
    let degenerate = Error::DegenerateFrame { a, b, c };
    if a == b || b == c || a == c {
        return Err(degenerate);
    }
    let p = r.coords();
    let ab = p[b] - p[a];
    let ac = p[c] - p[a];
    if ab.norm() == 0.0 || ab.cross(&ac).norm() <= 1e-12 * ab.norm() * ac.norm() {
        return Err(degenerate);
    }
    let e1 = ab.normalize();
    let e2 = (ac - e1 * ac.dot(&e1)).normalize();
    let e3 = e1.cross(&e2);
    let rotation = Matrix3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()]);
    let points: Vec<Point> = p.iter().map(|x| rotation * (x - p[a])).collect();

    let mut slots = vec![(b, 0), (c, 0), (c, 1)];
    for w in (0..v).filter(|w| ![a, b, c].contains(w)) {
        slots.extend([(w, 0), (w, 1), (w, 2)]);
    }
    let q = slots.iter().map(|&(w, axis)| points[w][axis]).collect();
    Ok(GaugeChart { frame, points, slots, q })
}

/// Rows `d l_k / d q` for the listed edge classes.
pub fn length_jacobian(complex: &GluedComplex, chart: &GaugeChart, edges: &[usize]) -> Result<DMatrix<f64>> {
    let mut j = DMatrix::zeros(edges.len(), chart.dim());
    for (row, &k) in edges.iter().enumerate() {
        let [u, v] = complex.edge_endpoints(k);
        let d = chart.points[u] - chart.points[v];
        let len = d.norm();
        if u == v || len == 0.0 {
            return Err(Error::ZeroLengthEdge(k));
        }
        let unit = d / len;
        for (col, &(w, axis)) in chart.slots.iter().enumerate() {
            if w == u {
                j[(row, col)] += unit[axis];
            }
            if w == v {
                j[(row, col)] -= unit[axis];
            }
        }
    }
    Ok(j)
}

/// Coefficient of the length form against `dq`, plus the Jacobian data it
/// was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Form22 {
    pub c22: f64,
    pub det_jacobian: f64,
    /// `s_min / s_max` of the complement Jacobian.
    pub jacobian_condition: f64,
}

fn complement_jacobian(r: &Realization, basis: &BasisSelection, chart: &GaugeChart) -> Result<(DMatrix<f64>, f64)> {
    if basis.complement.len() != chart.dim() {
        return Err(Error::DegreeMismatch {
            complement: basis.complement.len(),
            chart: chart.dim(),
        });
    }
    let j = length_jacobian(r.complex(), chart, &basis.complement)?;
    let s = singular_values(&j);
    let condition = match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        (None, None) => 1.0,
        _ => 0.0,
    };
    if condition < JACOBIAN_CONDITION_FLOOR {
        return Err(Error::SingularJacobian {
            condition: if condition > 0.0 { 1.0 / condition } else { f64::INFINITY },
        });
    }
    Ok((j, condition))
}

pub fn evaluate_form22(r: &Realization, basis: &BasisSelection, chart: &GaugeChart) -> Result<Form22> {
    let (j, condition) = complement_jacobian(r, basis, chart)?;
    let det_jacobian = det(&j);
    let lengths: f64 = r.lengths().iter().product();
    let volumes: f64 = (0..r.complex().tet_count()).map(|t| 6.0 * r.volume(t)).product();
    let c22 = lengths * det_jacobian.abs() / (basis.f.abs() * volumes).sqrt();
    if !c22.is_finite() {
        return Err(Error::NonFinite("length form"));
    }
    Ok(Form22 { c22, det_jacobian, jacobian_condition: condition })
}

/// `x_B^2 |y_C|`.
pub fn evaluate_form25(chart: &GaugeChart) -> f64 {
    chart.q[0] * chart.q[0] * chart.q[2].abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantOptions {
    pub tau_rank: f64,
    pub frame: Frame,
    /// Explicit principal basis; chosen by pivoting when absent.
    pub basis: Option<Vec<usize>>,
}

impl Default for InvariantOptions {
    fn default() -> Self {
        InvariantOptions {
            tau_rank: DEFAULT_TAU_RANK,
            frame: Frame::default(),
            basis: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub invariant: f64,
    pub rank: usize,
    pub edge_count: usize,
    pub vertex_count: usize,
    pub basis: Vec<usize>,
    pub f: f64,
    pub det_jacobian: f64,
    pub chart_dim: usize,
    pub c22: f64,
    pub c25: f64,
    pub jacobian_condition: f64,
    pub max_asymmetry: f64,
    pub s_max: f64,
    pub tau_rank: f64,
    pub tau_geom: f64,
    pub frame: Frame,
}

pub fn select_basis(a: &CurvatureMatrix, options: &InvariantOptions) -> Result<BasisSelection> {
    match &options.basis {
        Some(c) => BasisSelection::from_indices_against(a.matrix(), c, options.tau_rank, a.contribution_scale),
        None => select_principal_basis_against(a.matrix(), options.tau_rank, a.contribution_scale),
    }
}

pub fn invariant(r: &Realization, options: &InvariantOptions) -> Result<InvariantReport> {
    let a = curvature_matrix(r)?;
    let basis = select_basis(&a, options)?;
    let chart = gauge_chart(r, options.frame)?;
    let form = evaluate_form22(r, &basis, &chart)?;
    let c25 = evaluate_form25(&chart);
    Ok(InvariantReport {
        invariant: form.c22 / c25,
        rank: basis.rank(),
        edge_count: r.complex().edge_count(),
        vertex_count: r.complex().vertex_count(),
        f: basis.f,
        det_jacobian: form.det_jacobian,
        chart_dim: chart.dim(),
        c22: form.c22,
        c25,
        jacobian_condition: form.jacobian_condition,
        max_asymmetry: a.asymmetry(),
        s_max: basis.s_max,
        tau_rank: options.tau_rank,
        tau_geom: r.tau_geom(),
        frame: options.frame,
        basis: basis.basis,
    })
}

/// Draws random realizations until the invariant is defined, resampling on
/// singular Jacobians and ambiguous rank decisions.
pub fn sample_invariant<R: Rng + ?Sized>(
    complex: &GluedComplex,
    rng: &mut R,
    tau_geom: f64,
    options: &InvariantOptions,
) -> Result<(Realization, InvariantReport)> {
    let mut last = Error::SamplingFailed(SAMPLING_RETRIES);
    for _ in 0..SAMPLING_RETRIES {
        let r = Realization::random(complex, rng, tau_geom)?;
        match invariant(&r, options) {
            Ok(report) => return Ok((r, report)),
            Err(e @ (Error::SingularJacobian { .. } | Error::RankAmbiguous { .. } | Error::DegenerateFrame { .. })) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(match last {
        Error::SingularJacobian { .. } | Error::RankAmbiguous { .. } | Error::DegenerateFrame { .. } => last,
        _ => Error::SamplingFailed(SAMPLING_RETRIES),
    })
}

/// `(3V - 6) - (N - L)`.
pub fn degree_difference(r: &Realization, tau_rank: f64) -> Result<i64> {
    let a = curvature_matrix(r)?;
    let rank = numeric_rank_against(a.matrix(), tau_rank, a.contribution_scale) as i64;
    let c = r.complex();
    Ok((3 * c.vertex_count() as i64 - 6) - (c.edge_count() as i64 - rank))
}

/// `a = J_C J_{C-bar}^{-1}`: rows indexed by the basis, columns by its
/// complement, so that `dl_C = a dl_{C-bar}` on flat configurations.
pub fn flat_response_matrix(r: &Realization, basis: &BasisSelection, chart: &GaugeChart) -> Result<DMatrix<f64>> {
    let (jc_bar, _) = complement_jacobian(r, basis, chart)?;
    let jc = length_jacobian(r.complex(), chart, &basis.basis)?;
    if basis.basis.is_empty() {
        return Ok(DMatrix::zeros(0, basis.complement.len()));
    }
    let inv = jc_bar.lu().try_inverse().ok_or(Error::SingularJacobian { condition: f64::INFINITY })?;
    Ok(jc * inv)
}

/// Both sides of the minor exchange law `f'/f = det(a[A, B])^2`, where
/// `A = C \ C'` and `B = C' \ C`. `response` is indexed as returned by
/// [`flat_response_matrix`] for `c`.
pub fn check_basis_change(a: &DMatrix<f64>, c: &[usize], c_new: &[usize], response: &DMatrix<f64>) -> Result<(f64, f64)> {
    let n = a.nrows();
    let mut c_sorted = c.to_vec();
    c_sorted.sort_unstable();
    let complement: Vec<usize> = (0..n).filter(|k| c_sorted.binary_search(k).is_err()).collect();
    if response.nrows() != c_sorted.len() || response.ncols() != complement.len() {
        return Err(Error::InvalidExchange("response matrix does not match the basis".into()));
    }
    let leaving: Vec<usize> = c_sorted.iter().copied().filter(|k| !c_new.contains(k)).collect();
    let entering: Vec<usize> = c_new.iter().copied().filter(|k| !c_sorted.contains(k)).collect();
    if leaving.len() != entering.len() || c_new.len() != c_sorted.len() {
        return Err(Error::InvalidExchange(format!(
            "{} classes leave but {} enter",
            leaving.len(),
            entering.len()
        )));
    }
    let rows: Vec<usize> = leaving.iter().map(|k| c_sorted.binary_search(k).unwrap()).collect();
    let cols: Vec<usize> = entering
        .iter()
        .map(|k| {
            complement
                .binary_search(k)
                .map_err(|_| Error::IndexOutOfRange { what: "edge class", index: *k, count: n })
        })
        .collect::<Result<_>>()?;
    let f = det(&submatrix(a, &c_sorted, &c_sorted));
    let f_new = det(&submatrix(a, c_new, c_new));
    let minor = det(&submatrix(response, &rows, &cols));
    Ok((f_new / f, minor * minor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::curvature_matrix;
    use crate::fixtures::{lens, rp3, rp3_edge, s3};
    use crate::geometry::DEFAULT_TAU_GEOM;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    fn regular_coords() -> Vec<Point> {
        let s3 = 3f64.sqrt();
        vec![
            Point::zeros(),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.5, s3 / 2.0, 0.0),
            Point::new(0.5, s3 / 6.0, (2.0f64 / 3.0).sqrt()),
        ]
    }

    fn random(complex: &GluedComplex, seed: u64) -> Realization {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Realization::random(complex, &mut rng, DEFAULT_TAU_GEOM).unwrap()
    }

    #[test]
    fn diagonal_basis() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 0.0, 5.0]));
        let b = select_principal_basis(&a, DEFAULT_TAU_RANK).unwrap();
        assert_eq!(b.basis, vec![0, 2]);
        assert_eq!(b.complement, vec![1]);
        assert_relative_eq!(b.f, 15.0);
        assert_eq!(numeric_rank(&a, DEFAULT_TAU_RANK), 2);
    }

    #[test]
    fn zero_matrix_has_empty_basis() {
        let a = DMatrix::zeros(6, 6);
        let b = select_principal_basis(&a, DEFAULT_TAU_RANK).unwrap();
        assert!(b.basis.is_empty());
        assert_eq!(b.f, 1.0);
        assert_eq!(numeric_rank(&a, DEFAULT_TAU_RANK), 0);
    }

    #[test]
    fn cancellation_noise_has_rank_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = DMatrix::<f64>::from_fn(6, 6, |_, _| rng.gen_range(-1e-16..1e-16));
        let noise = &noise + noise.transpose();
        assert_eq!(numeric_rank(&noise, DEFAULT_TAU_RANK), 6);
        assert_eq!(numeric_rank_against(&noise, DEFAULT_TAU_RANK, 1.0), 0);
        let b = select_principal_basis_against(&noise, DEFAULT_TAU_RANK, 1.0).unwrap();
        assert!(b.basis.is_empty());
    }

    #[test]
    fn zero_diagonal_needs_pair_pivots() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]);
        let b = select_principal_basis(&a, DEFAULT_TAU_RANK).unwrap();
        assert_eq!(b.basis, vec![0, 1]);
        assert_relative_eq!(b.f, -4.0);
        assert!(matches!(b.pivots[0], Pivot::Pair { .. }));
    }

    #[test]
    fn pivot_product_is_the_principal_minor() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            // F^T D F with a few zero entries in D.
            let f = DMatrix::<f64>::from_fn(7, 7, |_, _| rng.gen_range(-1.0..1.0));
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(7, |i, _| {
                if i < 4 { rng.gen_range(-2.0..2.0) } else { 0.0 }
            }));
            let a = f.transpose() * d * &f;
            let b = select_principal_basis(&a, DEFAULT_TAU_RANK).unwrap();
            assert_eq!(b.rank(), 4);
            let direct = det(&submatrix(&a, &b.basis, &b.basis));
            assert_relative_eq!(b.f, direct, max_relative = 1e-8);
        }
    }

    #[test]
    fn non_finite_matrix_is_rejected() {
        let a = DMatrix::from_element(2, 2, f64::NAN);
        assert_eq!(select_principal_basis(&a, DEFAULT_TAU_RANK), Err(Error::NonFinite("curvature matrix")));
    }

    #[test]
    fn projective_rank_and_minor() {
        for seed in 0..10 {
            let r = random(&rp3(), seed);
            let a = curvature_matrix(&r).unwrap();
            assert_eq!(numeric_rank(a.matrix(), DEFAULT_TAU_RANK), 6);
            let named: Vec<usize> = ["b", "c", "d", "f", "g", "h"].map(rp3_edge).to_vec();
            let chosen = BasisSelection::from_indices(a.matrix(), &named, DEFAULT_TAU_RANK).unwrap();
            let l = r.lengths();
            let v6 = 6.0 * r.volume(0);
            let expected: f64 = [("b", "f"), ("c", "g"), ("d", "h")]
                .iter()
                .map(|&(x, y)| (2.0 * l[rp3_edge(x)] * l[rp3_edge(y)] / v6).powi(2))
                .product();
            assert_relative_eq!(chosen.f.abs(), expected, max_relative = 1e-9);
            let picked = select_principal_basis(a.matrix(), DEFAULT_TAU_RANK).unwrap();
            assert_eq!(picked.rank(), 6);
        }
    }

    #[test]
    fn invalid_bases_are_rejected() {
        let r = random(&rp3(), 1);
        let a = curvature_matrix(&r).unwrap();
        let too_small = ["b", "c"].map(rp3_edge);
        assert!(matches!(BasisSelection::from_indices(a.matrix(), &too_small, DEFAULT_TAU_RANK), Err(Error::InvalidBasis(_))));
        // b and b' both see only f and f'-type partners of rank one each.
        let singular = ["b", "b'", "c", "d", "g", "h"].map(rp3_edge);
        assert!(matches!(BasisSelection::from_indices(a.matrix(), &singular, DEFAULT_TAU_RANK), Err(Error::InvalidBasis(_))));
    }

    #[test]
    fn regular_sphere_chart() {
        let r = Realization::new(s3(), regular_coords()).unwrap();
        let chart = gauge_chart(&r, Frame::default()).unwrap();
        let expected = [1.0, 0.5, 3f64.sqrt() / 2.0, 0.5, 3f64.sqrt() / 6.0, (2.0f64 / 3.0).sqrt()];
        assert_eq!(chart.dim(), 6);
        for (x, y) in chart.q.iter().zip(expected) {
            assert_relative_eq!(*x, y, epsilon = 1e-15);
        }
        assert_relative_eq!(evaluate_form25(&chart), 0.8660254038, epsilon = 1e-10);
        let moved = r.map_coords(|p| p + Point::new(3.0, -1.0, 2.0)).unwrap();
        let chart2 = gauge_chart(&moved, Frame::default()).unwrap();
        for (x, y) in chart.q.iter().zip(&chart2.q) {
            assert_relative_eq!(*x, *y, epsilon = 1e-14);
        }
    }

    #[test]
    fn collinear_frame_is_degenerate() {
        let r = Realization::new(s3(), regular_coords()).unwrap();
        assert_eq!(gauge_chart(&r, Frame::new(0, 1, 1)), Err(Error::DegenerateFrame { a: 0, b: 1, c: 1 }));
        let mut coords = regular_coords();
        coords[2] = Point::new(2.0, 0.0, 0.0);
        let flat = Realization::with_tolerance(s3(), coords, 0.0).unwrap();
        assert_eq!(gauge_chart(&flat, Frame::default()), Err(Error::DegenerateFrame { a: 0, b: 1, c: 2 }));
        assert!(gauge_chart(&flat, Frame::new(0, 1, 3)).is_ok());
    }

    #[test]
    fn length_jacobian_rows() {
        let r = random(&lens(3, 1).unwrap().complex, 3);
        let chart = gauge_chart(&r, Frame::default()).unwrap();
        let c = r.complex();
        let ab = (0..c.edge_count()).find(|&k| {
            let [u, v] = c.edge_endpoints(k);
            (u, v) == (0, 1) || (u, v) == (1, 0)
        });
        if let Some(k) = ab {
            let row = length_jacobian(c, &chart, &[k]).unwrap();
            assert_relative_eq!(row[(0, 0)], 1.0, epsilon = 1e-15);
            assert!(row.iter().skip(1).all(|x| *x == 0.0));
        }
        // Finite differences in q.
        let all: Vec<usize> = (0..c.edge_count()).collect();
        let j = length_jacobian(c, &chart, &all).unwrap();
        let h = 1e-6;
        for col in 0..chart.dim() {
            let (w, axis) = chart.slots[col];
            for (row, &k) in all.iter().enumerate() {
                let [u, v] = c.edge_endpoints(k);
                let len = |delta: f64| {
                    let mut p = chart.points.clone();
                    p[w][axis] += delta;
                    (p[u] - p[v]).norm()
                };
                let fd = (len(h) - len(-h)) / (2.0 * h);
                assert!((fd - j[(row, col)]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn sphere_invariant_is_one() {
        for seed in 0..20 {
            let r = random(&s3(), seed);
            let rep = invariant(&r, &InvariantOptions::default()).unwrap();
            assert_eq!(rep.rank, 0);
            assert_relative_eq!(rep.invariant, 1.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn projective_invariant_is_one_eighth() {
        for seed in 0..20 {
            let r = random(&rp3(), seed);
            let rep = invariant(&r, &InvariantOptions::default()).unwrap();
            assert_eq!(rep.rank, 6);
            assert_relative_eq!(rep.invariant, 0.125, max_relative = 1e-9);
        }
    }

    #[test]
    fn frames_and_scaling_do_not_matter() {
        for complex in [s3(), rp3()] {
            let r = random(&complex, 42);
            let base = invariant(&r, &InvariantOptions::default()).unwrap().invariant;
            for frame in Frame::all(4) {
                let opts = InvariantOptions { frame, ..Default::default() };
                assert_relative_eq!(invariant(&r, &opts).unwrap().invariant, base, max_relative = 1e-9);
            }
            for c in [0.5, 2.0, 10.0] {
                let scaled = r.map_coords(|p| p * c).unwrap();
                assert_relative_eq!(invariant(&scaled, &InvariantOptions::default()).unwrap().invariant, base, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn several_bases_give_the_same_value() {
        let r = random(&rp3(), 5);
        let a = curvature_matrix(&r).unwrap();
        let named = ["b", "c", "d", "f", "g", "h"].map(rp3_edge).to_vec();
        let swapped = ["b'", "c", "d", "f", "g", "h"].map(rp3_edge).to_vec();
        let primed = ["b'", "c'", "d'", "f'", "g'", "h'"].map(rp3_edge).to_vec();
        let greedy = select_principal_basis(a.matrix(), DEFAULT_TAU_RANK).unwrap().basis;
        let mut seen = Vec::new();
        for basis in [named, swapped, primed, greedy] {
            let mut sorted = basis.clone();
            sorted.sort_unstable();
            seen.push(sorted);
            let opts = InvariantOptions { basis: Some(basis), ..Default::default() };
            assert_relative_eq!(invariant(&r, &opts).unwrap().invariant, 0.125, max_relative = 1e-9);
        }
        seen.sort();
        seen.dedup();
        assert!(seen.len() >= 3);
    }

    #[test]
    fn lens_space_value() {
        let c = lens(3, 1).unwrap().complex;
        for seed in 0..5 {
            let r = random(&c, seed);
            let rep = invariant(&r, &InvariantOptions::default()).unwrap();
            assert_eq!(rep.rank, 10);
            assert_relative_eq!(rep.invariant, 1.0 / 27.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn degree_difference_vanishes_on_fixtures() {
        assert_eq!(degree_difference(&random(&s3(), 1), DEFAULT_TAU_RANK).unwrap(), 0);
        assert_eq!(degree_difference(&random(&rp3(), 1), DEFAULT_TAU_RANK).unwrap(), 0);
    }

    #[test]
    fn wrong_basis_size_is_a_degree_mismatch() {
        let r = random(&s3(), 3);
        let chart = gauge_chart(&r, Frame::default()).unwrap();
        let bogus = BasisSelection {
            basis: vec![0],
            complement: vec![1, 2, 3, 4, 5],
            f: 1.0,
            pivots: Vec::new(),
            s_max: 0.0,
            threshold: 0.0,
        };
        assert_eq!(
            evaluate_form22(&r, &bogus, &chart),
            Err(Error::DegreeMismatch { complement: 5, chart: 6 })
        );
    }

    #[test]
    fn flat_response_and_block_structure() {
        let r = random(&rp3(), 8);
        let a = curvature_matrix(&r).unwrap();
        let basis = select_principal_basis(a.matrix(), DEFAULT_TAU_RANK).unwrap();
        let chart = gauge_chart(&r, Frame::default()).unwrap();
        let resp = flat_response_matrix(&r, &basis, &chart).unwrap();
        assert_eq!(resp.shape(), (6, 6));

        // A = N^T A|_C N with N = [I | -a] in (C, C-bar) order.
        let order: Vec<usize> = basis.basis.iter().chain(&basis.complement).copied().collect();
        let mut n = DMatrix::zeros(6, 12);
        for i in 0..6 {
            n[(i, i)] = 1.0;
            for j in 0..6 {
                n[(i, 6 + j)] = -resp[(i, j)];
            }
        }
        let ac = submatrix(a.matrix(), &basis.basis, &basis.basis);
        let rebuilt = n.transpose() * ac * &n;
        let permuted = submatrix(a.matrix(), &order, &order);
        assert!(max_abs(&(rebuilt - &permuted)) <= 1e-8 * max_abs(&permuted));

        // dl_C = a dl_C-bar along a random tangent move of the vertices.
        let c = r.complex();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dq: Vec<f64> = (0..chart.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = 1e-6;
        let moved = |s: f64| {
            let mut p = chart.points.clone();
            for (x, &(w, axis)) in chart.slots.iter().enumerate() {
                p[w][axis] += s * h * dq[x];
            }
            (0..c.edge_count()).map(|k| {
                let [u, v] = c.edge_endpoints(k);
                (p[u] - p[v]).norm()
            }).collect::<Vec<_>>()
        };
        let (lp, lm) = (moved(1.0), moved(-1.0));
        let dl: Vec<f64> = lp.iter().zip(&lm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        for (i, &k) in basis.basis.iter().enumerate() {
            let predicted: f64 = basis.complement.iter().enumerate().map(|(j, &m)| resp[(i, j)] * dl[m]).sum();
            assert!((predicted - dl[k]).abs() <= 1e-7 * (1.0 + dl[k].abs()));
        }
    }

    #[test]
    fn basis_exchange_law() {
        let r = random(&rp3(), 10);
        let a = curvature_matrix(&r).unwrap();
        let named = ["b", "c", "d", "f", "g", "h"].map(rp3_edge).to_vec();
        let basis = BasisSelection::from_indices(a.matrix(), &named, DEFAULT_TAU_RANK).unwrap();
        let chart = gauge_chart(&r, Frame::default()).unwrap();
        let resp = flat_response_matrix(&r, &basis, &chart).unwrap();
        let (same_ratio, same_minor) = check_basis_change(a.matrix(), &named, &named, &resp).unwrap();
        assert_relative_eq!(same_ratio, 1.0);
        assert_relative_eq!(same_minor, 1.0);
        let swapped = ["b'", "c", "d", "f", "g", "h"].map(rp3_edge).to_vec();
        let (ratio, minor) = check_basis_change(a.matrix(), &named, &swapped, &resp).unwrap();
        assert_relative_eq!(ratio, minor, max_relative = 1e-8);
        let uneven = ["b'", "c'", "d", "f", "g"].map(rp3_edge).to_vec();
        assert!(matches!(check_basis_change(a.matrix(), &named, &uneven, &resp), Err(Error::InvalidExchange(_))));
    }

    #[test]
    fn exchange_law_on_synthetic_factored_matrices() {
        // A = N^T D N with N = [I | -a]: every principal minor of size L
        // satisfies the exchange law exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let (l, m) = (3, 4);
            let resp = DMatrix::<f64>::from_fn(l, m, |_, _| rng.gen_range(-1.0..1.0));
            let d = DMatrix::<f64>::from_fn(l, l, |_, _| rng.gen_range(-1.0..1.0));
            let d = &d + d.transpose();
            let mut n = DMatrix::zeros(l, l + m);
            for i in 0..l {
                n[(i, i)] = 1.0;
                for j in 0..m {
                    n[(i, l + j)] = -resp[(i, j)];
                }
            }
            let a = n.transpose() * d * &n;
            let c = vec![0, 1, 2];
            let new = vec![0, 2, 3 + rng.gen_range(0..m)];
            let (ratio, minor) = check_basis_change(&a, &c, &new, &resp).unwrap();
            assert_relative_eq!(ratio, minor, max_relative = 1e-8);
        }
    }
}
