//! Metric geometry of one Euclidean tetrahedron given by its six edge lengths.
//!
//! Edge lengths are indexed in local edge order (see [`crate::complex`]).
//! Angle derivatives are computed analytically by pushing the gradient of the
//! dihedral angles with respect to vertex positions through the inverse of the
//! length Jacobian of the canonical placement.

use std::ops::Index;

use nalgebra::{Matrix5, Matrix6, Vector3};
use rand::Rng;

use crate::complex::{opposite_edge, EDGE_VERTICES};
use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

/// Default relative threshold on `6V / mean(l)^3` below which a tetrahedron
/// counts as degenerate.
pub const DEFAULT_TAU_GEOM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeLengths6(pub [f64; 6]);

impl EdgeLengths6 {
    pub fn new(l: [f64; 6]) -> Self {
        EdgeLengths6(l)
    }

    pub fn from_points(p: &[Point; 4]) -> Self {
        EdgeLengths6(EDGE_VERTICES.map(|[u, v]| (p[u] - p[v]).norm()))
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / 6.0
    }

    pub fn scaled(&self, c: f64) -> Self {
        EdgeLengths6(self.0.map(|x| x * c))
    }

    pub fn with(&self, edge: usize, value: f64) -> Self {
        let mut l = self.0;
        l[edge] = value;
        EdgeLengths6(l)
    }

    pub fn squared(&self, u: usize, v: usize) -> f64 {
        if u == v {
            0.0
        } else {
            let l = self.0[crate::complex::edge_index(u, v)];
            l * l
        }
    }
}

impl Index<usize> for EdgeLengths6 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// The bordered Cayley–Menger determinant; equals `288 V^2`.
pub fn cayley_menger(l: &EdgeLengths6) -> f64 {
    let mut m = Matrix5::<f64>::zeros();
    for i in 0..4 {
        m[(0, i + 1)] = 1.0;
        m[(i + 1, 0)] = 1.0;
        for j in 0..4 {
            m[(i + 1, j + 1)] = l.squared(i, j);
        }
    }
    m.determinant()
}

/// Volume from edge lengths. Slightly negative determinants (within
/// `tau * mean^6`) are treated as flat.
pub fn cm_volume(l: &EdgeLengths6, tau: f64) -> Result<f64> {
    if l.0.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::NotRealizable);
    }
    let cm = cayley_menger(l);
    let scale = l.mean().powi(6);
    if cm < -tau * scale {
        return Err(Error::NotRealizable);
    }
    Ok((cm.max(0.0) / 288.0).sqrt())
}

/// `det(p1 - p0, p2 - p0, p3 - p0) / 6`.
pub fn signed_volume(p: &[Point; 4]) -> f64 {
    (p[1] - p[0]).dot(&(p[2] - p[0]).cross(&(p[3] - p[0]))) / 6.0
}

fn check_degenerate(volume: f64, l: &EdgeLengths6, tau: f64) -> Result<()> {
    let threshold = tau * l.mean().powi(3);
    if 6.0 * volume < threshold {
        return Err(Error::DegenerateTetrahedron {
            six_volume: 6.0 * volume,
            threshold,
        });
    }
    Ok(())
}

fn face_is_triangle(a: f64, b: f64, c: f64) -> bool {
    a < b + c && b < a + c && c < a + b
}

/// Vertex 0 at the origin, vertex 1 on the positive x axis, vertex 2 in the
/// upper half of the xy plane and vertex 3 above it.
pub fn place_canonical(l: &EdgeLengths6, tau: f64) -> Result<[Point; 4]> {
    let volume = cm_volume(l, tau)?;
    for face in 0..4 {
        let [a, b, c] = crate::complex::face_vertices(face);
        let (x, y, z) = (
            l[crate::complex::edge_index(a, b)],
            l[crate::complex::edge_index(a, c)],
            l[crate::complex::edge_index(b, c)],
        );
        if !face_is_triangle(x, y, z) {
            return Err(Error::NotRealizable);
        }
    }
    check_degenerate(volume, l, tau)?;

    let (l01, l02, l03) = (l[0], l[1], l[2]);
    let (l12, l13, l23) = (l[3], l[4], l[5]);
    let x2 = (l01 * l01 + l02 * l02 - l12 * l12) / (2.0 * l01);
    let y2 = (l02 * l02 - x2 * x2).max(0.0).sqrt();
    let x3 = (l01 * l01 + l03 * l03 - l13 * l13) / (2.0 * l01);
    let y3 = (l03 * l03 - l23 * l23 + x2 * x2 + y2 * y2 - 2.0 * x3 * x2) / (2.0 * y2);
    let z3 = (l03 * l03 - x3 * x3 - y3 * y3).max(0.0).sqrt();
    Ok([
        Point::zeros(),
        Point::new(l01, 0.0, 0.0),
        Point::new(x2, y2, 0.0),
        Point::new(x3, y3, z3),
    ])
}

/// Vertices of edge `e` followed by the two remaining vertices.
fn edge_frame(e: usize) -> [usize; 4] {
    let [i, j] = EDGE_VERTICES[e];
    let [k, l] = EDGE_VERTICES[opposite_edge(e)];
    [i, j, k, l]
}

struct Hinge {
    axis: Point,
    u_perp: Point,
    w_perp: Point,
    alpha_k: f64,
    alpha_l: f64,
}

fn hinge(p: &[Point; 4], e: usize) -> Hinge {
    let [i, j, k, l] = edge_frame(e);
    let axis = p[j] - p[i];
    let len2 = axis.norm_squared();
    let u = p[k] - p[i];
    let w = p[l] - p[i];
    let alpha_k = u.dot(&axis) / len2;
    let alpha_l = w.dot(&axis) / len2;
    Hinge {
        axis,
        u_perp: u - axis * alpha_k,
        w_perp: w - axis * alpha_l,
        alpha_k,
        alpha_l,
    }
}

/// Interior dihedral angles of a placed tetrahedron, in `(0, pi)`.
pub fn dihedral_angles_of(p: &[Point; 4]) -> [f64; 6] {
    std::array::from_fn(|e| {
        let h = hinge(p, e);
        h.u_perp.cross(&h.w_perp).norm().atan2(h.u_perp.dot(&h.w_perp))
    })
}

/// Gradient of the dihedral angle at edge `e` with respect to the four
/// vertex positions.
pub fn dihedral_angle_point_gradient(p: &[Point; 4], e: usize) -> [Point; 4] {
    let [i, j, k, l] = edge_frame(e);
    let h = hinge(p, e);
    let _ = h.axis;
    let (hk, hl) = (h.u_perp.norm(), h.w_perp.norm());
    let (uk, ul) = (h.u_perp / hk, h.w_perp / hl);
    // Unit in-plane normals of the two faces, each pointing at the other face.
    let mk = (h.w_perp - uk * h.w_perp.dot(&uk)).normalize();
    let ml = (h.u_perp - ul * h.u_perp.dot(&ul)).normalize();
    let gk = -mk / hk;
    let gl = -ml / hl;
    let mut grad = [Point::zeros(); 4];
    grad[k] = gk;
    grad[l] = gl;
    grad[i] = -(gk * (1.0 - h.alpha_k) + gl * (1.0 - h.alpha_l));
    grad[j] = -(gk * h.alpha_k + gl * h.alpha_l);
    grad
}

pub fn dihedral_angle(l: &EdgeLengths6, e: usize, tau: f64) -> Result<f64> {
    Ok(dihedral_angles_of(&place_canonical(l, tau)?)[e])
}

/// Lengths, volume, canonical placement and dihedral angles of one tetrahedron.
#[derive(Debug, Clone)]
pub struct TetMetric {
    pub lengths: EdgeLengths6,
    pub volume: f64,
    pub points: [Point; 4],
    pub angles: [f64; 6],
}

impl TetMetric {
    pub fn new(lengths: EdgeLengths6, tau: f64) -> Result<Self> {
        let points = place_canonical(&lengths, tau)?;
        Ok(TetMetric {
            lengths,
            volume: signed_volume(&points).abs(),
            angles: dihedral_angles_of(&points),
            points,
        })
    }
}

/// `G[a][b] = d(phi_a)/d(l_b)` for one tetrahedron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TetDerivatives(pub Matrix6<f64>);

impl TetDerivatives {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.0[(a, b)]
    }

    /// `max |G - G^T|`.
    pub fn asymmetry(&self) -> f64 {
        (self.0 - self.0.transpose()).abs().max()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.abs().max()
    }

    /// `|G l|`, which vanishes because angles do not change under scaling.
    pub fn homogeneity_residual(&self, l: &EdgeLengths6) -> f64 {
        (self.0 * nalgebra::Vector6::from_row_slice(&l.0)).norm()
    }
}

/// Canonical-placement coordinates `(x1, x2, y2, x3, y3, z3)` as
/// `(vertex, axis)` pairs.
const CHART: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

pub fn dihedral_gradient(l: &EdgeLengths6, tau: f64) -> Result<TetDerivatives> {
    let p = place_canonical(l, tau)?;
    dihedral_gradient_at(&p)
}

/// Angle derivatives of the tetrahedron spanned by `p`, which must be in
/// canonical position.
pub(crate) fn dihedral_gradient_at(p: &[Point; 4]) -> Result<TetDerivatives> {
    let mut angle_jac = Matrix6::<f64>::zeros();
    for e in 0..6 {
        let grad = dihedral_angle_point_gradient(p, e);
        for (r, &(v, axis)) in CHART.iter().enumerate() {
            angle_jac[(e, r)] = grad[v][axis];
        }
    }
    let mut length_jac = Matrix6::<f64>::zeros();
    for (e, &[u, v]) in EDGE_VERTICES.iter().enumerate() {
        let d = p[u] - p[v];
        let unit = d / d.norm();
        for (r, &(w, axis)) in CHART.iter().enumerate() {
            let sign = if w == u {
                1.0
            } else if w == v {
                -1.0
            } else {
                0.0
            };
            length_jac[(e, r)] = sign * unit[axis];
        }
    }
    // G * J = Phi  <=>  J^T G^T = Phi^T
    let lu = length_jac.transpose().lu();
    let gt = lu
        .solve(&angle_jac.transpose())
        .ok_or(Error::DegenerateTetrahedron {
            six_volume: 6.0 * signed_volume(p).abs(),
            threshold: 0.0,
        })?;
    Ok(TetDerivatives(gt.transpose()))
}

/// `l_a l_opp / (6 V)`: the derivative of the angle at `a` in the length of
/// the opposite edge.
pub fn skew_derivative_closed_form(l: &EdgeLengths6, a: usize, tau: f64) -> Result<f64> {
    if a >= 6 {
        return Err(Error::WrongEdgeRelation { a, b: a });
    }
    let m = TetMetric::new(*l, tau)?;
    Ok(l[a] * l[opposite_edge(a)] / (6.0 * m.volume))
}

/// `-(1/12) l_a l_b V' / V^2` for edges `a = AB`, `b = BC` sharing vertex
/// `B`, where `V'` is the volume of `A C D D*` with `D*` the mirror image of
/// the fourth vertex `D` in the plane `ABC`.
///
/// `V'` carries a sign: positive when the foot of `D` on the plane `ABC` lies
/// on the same side of the line `AC` as `B`.
pub fn adjacent_derivative_closed_form(
    l: &EdgeLengths6,
    a: usize,
    b: usize,
    tau: f64,
) -> Result<f64> {
    if a >= 6 || b >= 6 {
        return Err(Error::WrongEdgeRelation { a, b });
    }
    let [a0, a1] = EDGE_VERTICES[a];
    let [b0, b1] = EDGE_VERTICES[b];
    let shared: Vec<usize> = [a0, a1].into_iter().filter(|v| *v == b0 || *v == b1).collect();
    if a == b || shared.len() != 1 {
        return Err(Error::WrongEdgeRelation { a, b });
    }
    let vb = shared[0];
    let va = if a0 == vb { a1 } else { a0 };
    let vc = if b0 == vb { b1 } else { b0 };
    let vd = 6 - va - vb - vc;

    let m = TetMetric::new(*l, tau)?;
    let p = &m.points;
    let normal = (p[vb] - p[va]).cross(&(p[vc] - p[va])).normalize();
    let height = (p[vd] - p[va]).dot(&normal);
    let mirrored = p[vd] - normal * (2.0 * height);
    let foot = p[vd] - normal * height;
    let unsigned = signed_volume(&[p[va], p[vc], p[vd], mirrored]).abs();
    let side = |x: Point| (p[vc] - p[va]).cross(&(x - p[va])).dot(&normal);
    let signed = unsigned * (side(foot) * side(p[vb])).signum();
    Ok(-l[a] * l[b] * signed / (12.0 * m.volume * m.volume))
}

/// Lengths of a random tetrahedron with vertices uniform in the unit cube,
/// resampled until `6V >= min_quality * mean(l)^3`.
pub fn sample_tetrahedron<R: Rng + ?Sized>(rng: &mut R, min_quality: f64) -> ([Point; 4], EdgeLengths6) {
    loop {
        let p: [Point; 4] =
            std::array::from_fn(|_| Point::new(rng.gen(), rng.gen(), rng.gen()));
        let l = EdgeLengths6::from_points(&p);
        if 6.0 * signed_volume(&p).abs() >= min_quality * l.mean().powi(3) {
            return (p, l);
        }
    }
}
