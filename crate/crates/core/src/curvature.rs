//! Realizations of a complex in Euclidean space, defect angles around edge
//! classes and the matrix of their length derivatives.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::complex::{GluedComplex, EDGE_VERTICES};
use crate::error::{Error, Result};
use crate::geometry::{dihedral_angles_of, dihedral_gradient, place_canonical, signed_volume, EdgeLengths6, Point, DEFAULT_TAU_GEOM};

/// Attempts made by [`Realization::random`] before giving up.
pub const SAMPLING_RETRIES: usize = 100;

/// A complex whose vertex classes are mapped to points of `R^3`.
#[derive(Debug, Clone)]
pub struct Realization {
    complex: GluedComplex,
    coords: Vec<Point>,
    lengths: Vec<f64>,
    parity: Vec<i8>,
    signs: Vec<i8>,
    tau_geom: f64,
}

impl Realization {
    pub fn new(complex: GluedComplex, coords: Vec<Point>) -> Result<Self> {
        Self::with_tolerance(complex, coords, DEFAULT_TAU_GEOM)
    }

    pub fn with_tolerance(complex: GluedComplex, coords: Vec<Point>, tau_geom: f64) -> Result<Self> {
        let orientation = complex.check_orientable()?.to_vec();
        if coords.len() < complex.vertex_count() {
            return Err(Error::MissingCoordinate(coords.len()));
        }
        if coords.len() > complex.vertex_count() {
            return Err(Error::IndexOutOfRange {
                what: "vertex class",
                index: complex.vertex_count(),
                count: complex.vertex_count(),
            });
        }
        if coords.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(Error::NonFinite("coordinates"));
        }
        let lengths = (0..complex.edge_count())
            .map(|k| {
                let [u, v] = complex.edge_endpoints(k);
                (coords[u] - coords[v]).norm()
            })
            .collect();
        let mut parity = Vec::with_capacity(complex.tet_count());
        for t in 0..complex.tet_count() {
            let p = complex.tet_vertices(t).map(|v| coords[v]);
            let six_volume = 6.0 * signed_volume(&p);
            let l = EdgeLengths6::from_points(&p);
            if !(six_volume.abs() >= tau_geom * l.mean().powi(3)) {
                return Err(Error::DegenerateTet { tet: t });
            }
            parity.push(if six_volume > 0.0 { 1 } else { -1 });
        }
        let signs = orientation.iter().zip(&parity).map(|(s, e)| s * e).collect();
        Ok(Realization {
            complex,
            coords,
            lengths,
            parity,
            signs,
            tau_geom,
        })
    }

    /// I.i.d. uniform points in the unit cube, resampled until no tetrahedron
    /// is degenerate.
    pub fn random<R: Rng + ?Sized>(complex: &GluedComplex, rng: &mut R, tau_geom: f64) -> Result<Self> {
        complex.check_orientable()?;
        for _ in 0..SAMPLING_RETRIES {
            let coords = (0..complex.vertex_count())
                .map(|_| Point::new(rng.gen(), rng.gen(), rng.gen()))
                .collect();
            match Self::with_tolerance(complex.clone(), coords, tau_geom) {
                Ok(r) => return Ok(r),
                Err(Error::DegenerateTet { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::SamplingFailed(SAMPLING_RETRIES))
    }

    pub fn complex(&self) -> &GluedComplex {
        &self.complex
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    /// Length of every edge class.
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Sign of the image orientation of each tetrahedron.
    pub fn parity(&self) -> &[i8] {
        &self.parity
    }

    /// `s_t`: `+1` where the map preserves the orientation of the complex.
    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn tau_geom(&self) -> f64 {
        self.tau_geom
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        self.complex.tet_vertices(t).map(|v| self.coords[v])
    }

    pub fn tet_lengths(&self, t: usize) -> EdgeLengths6 {
        EdgeLengths6(self.complex.tet_edges(t).map(|k| self.lengths[k]))
    }

    /// Unsigned volume of the image of tetrahedron `t`.
    pub fn volume(&self, t: usize) -> f64 {
        signed_volume(&self.tet_points(t)).abs()
    }

    /// The same complex with every coordinate passed through `f`.
    pub fn map_coords(&self, f: impl Fn(&Point) -> Point) -> Result<Self> {
        Self::with_tolerance(
            self.complex.clone(),
            self.coords.iter().map(f).collect(),
            self.tau_geom,
        )
    }

    pub fn defects(&self) -> Result<Defects> {
        defect_from_lengths(&self.complex, &self.signs, &self.lengths)
    }
}

/// Defect angles around each edge class, raw and reduced into `(-pi, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Defects {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl Defects {
    pub fn max_normalized(&self) -> f64 {
        self.normalized.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub fn normalize_angle(x: f64) -> f64 {
    x - 2.0 * PI * ((x - PI) / (2.0 * PI)).ceil()
}

/// `omega_a = sum over incidences of -s_t * phi`. Only realizability of the
/// individual tetrahedra is required, not flatness.
pub fn defect_from_lengths(complex: &GluedComplex, signs: &[i8], lengths: &[f64]) -> Result<Defects> {
    let mut raw = vec![0.0; complex.edge_count()];
    for t in 0..complex.tet_count() {
        let l = EdgeLengths6(complex.tet_edges(t).map(|k| lengths[k]));
        let p = place_canonical(&l, 0.0).map_err(|_| Error::NotRealizableTet { tet: t })?;
        let angles = dihedral_angles_of(&p);
        for (e, k) in complex.tet_edges(t).into_iter().enumerate() {
            raw[k] -= f64::from(signs[t]) * angles[e];
        }
    }
    let normalized = raw.iter().map(|&x| normalize_angle(x)).collect();
    Ok(Defects { raw, normalized })
}

/// `A[j][k] = d(omega_j)/d(l_k)` over edge classes.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureMatrix {
    pub matrix: DMatrix<f64>,
    /// Largest single-tetrahedron contribution to any entry. Entries far
    /// below it are cancellation noise.
    pub contribution_scale: f64,
}

impl CurvatureMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.matrix[(j, k)]
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `max |A - A^T|`.
    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `|A L|`.
    pub fn kernel_residual(&self, lengths: &[f64]) -> f64 {
        (&self.matrix * DVector::from_column_slice(lengths)).norm()
    }
}

pub fn curvature_matrix(r: &Realization) -> Result<CurvatureMatrix> {
    let c = r.complex();
    let n = c.edge_count();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut contribution_scale: f64 = 0.0;
    for t in 0..c.tet_count() {
        let g = dihedral_gradient(&r.tet_lengths(t), 0.0).map_err(|_| Error::DegenerateTet { tet: t })?;
        contribution_scale = contribution_scale.max(g.max_abs());
        let edges = c.tet_edges(t);
        let s = f64::from(r.signs()[t]);
        for (ej, &j) in edges.iter().enumerate() {
            for (ek, &k) in edges.iter().enumerate() {
                a[(j, k)] -= s * g.get(ej, ek);
            }
        }
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("curvature matrix"));
    }
    Ok(CurvatureMatrix { matrix: a, contribution_scale })
}

/// Five-point central differences of the raw defect angles; column `k`
/// perturbs `l_k` alone. A step that leaves the realizable region is retried
/// with `h / 10` up to three times.
pub fn fd_curvature_matrix(complex: &GluedComplex, signs: &[i8], lengths: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let n = complex.edge_count();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let mut step = h;
        let mut attempt = 0;
        let column = loop {
            let eval = |s: f64| {
                let mut l = lengths.to_vec();
                l[k] += s * step;
                defect_from_lengths(complex, signs, &l)
            };
            let stencil: Result<Vec<Defects>> = [-2.0, -1.0, 1.0, 2.0].into_iter().map(eval).collect();
            match stencil {
                Ok(d) => {
                    break (0..n)
                        .map(|j| (d[0].raw[j] - 8.0 * d[1].raw[j] + 8.0 * d[2].raw[j] - d[3].raw[j]) / (12.0 * step))
                        .collect::<Vec<_>>();
                }
                Err(Error::NotRealizableTet { tet }) => {
                    attempt += 1;
                    if attempt > 3 {
                        return Err(Error::StepNotRealizable { tet });
                    }
                    step /= 10.0;
                }
                Err(e) => return Err(e),
            }
        };
        for (j, v) in column.into_iter().enumerate() {
            a[(j, k)] = v;
        }
    }
    Ok(a)
}

/// True when some tetrahedron contains edges of both classes.
pub fn share_tetrahedron(complex: &GluedComplex, j: usize, k: usize) -> bool {
    (0..complex.tet_count()).any(|t| {
        let e = complex.tet_edges(t);
        e.contains(&j) && e.contains(&k)
    })
}

/// Local edge positions of class `k` inside tetrahedron `t`.
pub fn local_edges_of(complex: &GluedComplex, t: usize, k: usize) -> Vec<usize> {
    (0..EDGE_VERTICES.len()).filter(|&e| complex.edge_class(t, e) == k).collect()
}
