//! Small triangulations used throughout the tests and shipped as JSON.
//!
//! Most of them are described as balls of labelled tetrahedra: faces with the
//! same label set are glued to each other, and the remaining boundary faces
//! are paired by a relabelling of the boundary.

use std::collections::BTreeMap;

use crate::complex::{face_vertices, glue_pair, FaceGluing, GluedComplex};
use crate::error::{Error, Result};

/// A complex together with the labelled tetrahedra it was built from.
#[derive(Debug, Clone)]
pub struct LabelledComplex {
    pub complex: GluedComplex,
    pub tets: Vec<[usize; 4]>,
}

impl LabelledComplex {
    /// Edge class of the edge between two labels, taken from the first
    /// tetrahedron that contains both.
    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.tets.iter().enumerate().find_map(|(t, labels)| {
            let i = labels.iter().position(|&x| x == a)?;
            let j = labels.iter().position(|&x| x == b)?;
            (i != j).then(|| self.complex.edge_class(t, crate::complex::edge_index(i, j)))
        })
    }

    /// Vertex class carrying a label.
    pub fn vertex_of(&self, label: usize) -> Option<usize> {
        self.tets.iter().enumerate().find_map(|(t, labels)| {
            let i = labels.iter().position(|&x| x == label)?;
            Some(self.complex.vertex_class(t, i))
        })
    }
}

/// Gluings for labelled tetrahedra: interior faces (label set shared by two
/// faces) are glued label to label; each leftover face `X` whose labels all
/// have an image under `boundary` is glued to the leftover face with the image
/// label set.
pub fn labelled_gluings(
    tets: &[[usize; 4]],
    boundary: impl Fn(usize) -> Option<usize>,
) -> Result<Vec<FaceGluing>> {
    let mut by_key: BTreeMap<[usize; 3], Vec<(usize, usize)>> = BTreeMap::new();
    for (t, labels) in tets.iter().enumerate() {
        for face in 0..4 {
            let mut key = face_vertices(face).map(|v| labels[v]);
            key.sort_unstable();
            by_key.entry(key).or_default().push((t, face));
        }
    }
    let local_of = |t: usize, label: usize| tets[t].iter().position(|&x| x == label);
    let mut gluings = BTreeMap::new();
    let mut add = |pair: [FaceGluing; 2]| {
        for g in pair {
            gluings.insert((g.tet, g.face), g);
        }
    };
    for (key, slots) in &by_key {
        match slots.as_slice() {
            [(t, f), (u, g)] => {
                let map = face_vertices(*f).map(|v| local_of(*u, tets[*t][v]).unwrap());
                add(glue_pair(*t, *f, *u, *g, map));
            }
            [(t, f)] => {
                let Some(image) = key.iter().map(|&l| boundary(l)).collect::<Option<Vec<_>>>() else {
                    continue;
                };
                let mut target = [image[0], image[1], image[2]];
                target.sort_unstable();
                let Some([(u, g)]) = by_key.get(&target).map(Vec::as_slice) else {
                    return Err(Error::InvalidGluing(format!(
                        "boundary face {key:?} has no unique partner {target:?}"
                    )));
                };
                let mut map = [0; 3];
                for (i, v) in face_vertices(*f).into_iter().enumerate() {
                    let l = boundary(tets[*t][v]).unwrap();
                    map[i] = local_of(*u, l).unwrap();
                }
                add(glue_pair(*t, *f, *u, *g, map));
            }
            _ => {
                return Err(Error::InvalidGluing(format!(
                    "label set {key:?} occurs on {} faces",
                    slots.len()
                )))
            }
        }
    }
    Ok(gluings.into_values().collect())
}

pub fn from_labelled(
    tets: Vec<[usize; 4]>,
    boundary: impl Fn(usize) -> Option<usize>,
) -> Result<LabelledComplex> {
    let gluings = labelled_gluings(&tets, boundary)?;
    let complex = GluedComplex::build(tets.len(), &gluings)?;
    Ok(LabelledComplex { complex, tets })
}

/// The 3-sphere as two tetrahedra glued along their boundaries by the
/// identity.
pub fn s3_gluings() -> Vec<FaceGluing> {
    (0..4)
        .flat_map(|f| glue_pair(0, f, 1, f, face_vertices(f)))
        .collect()
}

pub fn s3() -> GluedComplex {
    GluedComplex::build(2, &s3_gluings()).expect("sphere fixture is valid")
}

/// Labels of the lens-space ball: the centre, the two poles and the
/// equatorial polygon.
pub mod lens_labels {
    pub const CENTRE: usize = 0;
    pub const NORTH: usize = 1;
    pub const SOUTH: usize = 2;
    pub fn equator(i: usize) -> usize {
        3 + i
    }
}

/// `L(p, q)` as the cone from an interior point over a bipyramid with a
/// `2p`-gon equator, the upper hemisphere identified with the lower one by a
/// reflection followed by a rotation through `2q` equatorial steps.
///
/// Every tetrahedron has four distinct vertex classes (centre, pole, and one
/// equatorial vertex of each parity), so generic realizations exist.
pub fn lens(p: usize, q: usize) -> Result<LabelledComplex> {
    use lens_labels::*;
    if p < 2 || q == 0 || q >= p || gcd(p, q) != 1 {
        return Err(Error::InvalidGluing(format!("no lens space L({p},{q})")));
    }
    let n = 2 * p;
    let mut tets = Vec::with_capacity(2 * n);
    for pole in [NORTH, SOUTH] {
        for i in 0..n {
            tets.push([CENTRE, pole, equator(i), equator((i + 1) % n)]);
        }
    }
    from_labelled(tets, |l| match l {
        NORTH => Some(SOUTH),
        l if l >= 3 => Some(equator((l - 3 + 2 * q) % n)),
        _ => None,
    })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Projective space `L(2,1)`: an octahedron coned from its centre `A`, with
/// antipodal boundary points identified.
///
/// Equatorial labels alternate `B+ C+ B- C-`; the poles are `D+` and `D-`.
pub fn rp3_labelled() -> LabelledComplex {
    lens(2, 1).expect("projective space fixture is valid")
}

pub fn rp3() -> GluedComplex {
    rp3_labelled().complex
}

pub fn rp3_gluings() -> Vec<FaceGluing> {
    rp3().gluings().to_vec()
}

/// Names of the twelve projective-space edges, paired as `x` / `x'`.
///
/// `b, c, d` join the centre to `B+, C+, D+` (primed: to the negative copies);
/// `f, g, h` and their primes are the six boundary edge classes.
pub fn rp3_edge_names() -> Vec<(&'static str, usize)> {
    use lens_labels::*;
    let lc = rp3_labelled();
    let (a, dp, dm) = (CENTRE, NORTH, SOUTH);
    let (bp, cp, bm, cm) = (equator(0), equator(1), equator(2), equator(3));
    let pairs = [
        ("b", a, bp),
        ("c", a, cp),
        ("d", a, dp),
        ("f", dp, cm),
        ("g", dp, bm),
        ("h", bm, cp),
        ("b'", a, bm),
        ("c'", a, cm),
        ("d'", a, dm),
        ("f'", dp, cp),
        ("g'", dp, bp),
        ("h'", bm, cm),
    ];
    pairs
        .iter()
        .map(|&(name, x, y)| (name, lc.edge_between(x, y).expect("labelled edge exists")))
        .collect()
}

pub fn rp3_edge(name: &str) -> usize {
    rp3_edge_names()
        .into_iter()
        .find(|(n, _)| *n == name)
        .unwrap_or_else(|| panic!("unknown projective-space edge {name}"))
        .1
}

/// `S^2 x [0,1]` from prisms over the boundary of a tetrahedron, closed up by
/// the identity (`S^2 x S^1`) or by a reflection of the sphere (the
/// non-orientable bundle).
pub fn s2_bundle(reflect: bool) -> GluedComplex {
    let bottom = |i: usize| i;
    let top = |i: usize| 4 + i;
    let mut tets = Vec::new();
    for [i, j, k] in [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]] {
        tets.push([bottom(i), bottom(j), bottom(k), top(k)]);
        tets.push([bottom(i), bottom(j), top(j), top(k)]);
        tets.push([bottom(i), top(i), top(j), top(k)]);
    }
    let swap = |i: usize| match (reflect, i) {
        (true, 0) => 1,
        (true, 1) => 0,
        _ => i,
    };
    from_labelled(tets, |l| (l >= 4).then(|| bottom(swap(l - 4))))
        .expect("sphere bundle fixture is valid")
        .complex
}
