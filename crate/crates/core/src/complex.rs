//! Pre-simplicial 3-complexes given as tetrahedra with pairwise face gluings.
//!
//! Each tetrahedron has local vertices `0..4`, local edges `0..6` in the order
//! `(0,1) (0,2) (0,3) (1,2) (1,3) (2,3)` and local faces `0..4`, face `i`
//! being the triangle opposite vertex `i`. Vertices, edges and faces of the
//! complex are equivalence classes of these local slots under the gluings, so
//! two distinct edges may join the same pair of vertices.

use std::collections::VecDeque;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local edges of a tetrahedron as vertex pairs.
pub const EDGE_VERTICES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Local index of the edge joining local vertices `u` and `v`.
pub fn edge_index(u: usize, v: usize) -> usize {
    let (a, b) = if u < v { (u, v) } else { (v, u) };
    match (a, b) {
        (0, 1) => 0,
        (0, 2) => 1,
        (0, 3) => 2,
        (1, 2) => 3,
        (1, 3) => 4,
        (2, 3) => 5,
        _ => panic!("no local edge joins vertices {u} and {v}"),
    }
}

/// The edge sharing no vertex with `e`.
pub fn opposite_edge(e: usize) -> usize {
    5 - e
}

/// Vertices of local face `f`, ascending.
pub fn face_vertices(f: usize) -> [usize; 3] {
    match f {
        0 => [1, 2, 3],
        1 => [0, 2, 3],
        2 => [0, 1, 3],
        3 => [0, 1, 2],
        _ => panic!("local face index {f} out of range"),
    }
}

/// Sign of a permutation of `0..4`.
pub fn permutation_sign(p: &[usize; 4]) -> i8 {
    let mut sign = 1;
    for i in 0..4 {
        for j in (i + 1)..4 {
            if p[i] > p[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// Identification of face `face` of `tet` with face `to_face` of `to_tet`.
///
/// `map[i]` is the local vertex of `to_tet` receiving the `i`-th vertex (in
/// ascending order) of the source face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FaceGluing {
    pub tet: usize,
    pub face: usize,
    pub to_tet: usize,
    pub to_face: usize,
    pub map: [usize; 3],
}

impl FaceGluing {
    pub fn new(tet: usize, face: usize, to_tet: usize, to_face: usize, map: [usize; 3]) -> Self {
        FaceGluing {
            tet,
            face,
            to_tet,
            to_face,
            map,
        }
    }

    /// The gluing as a full permutation of local vertices, sending the
    /// vertex opposite `face` to the vertex opposite `to_face`.
    pub fn permutation(&self) -> [usize; 4] {
        let mut p = [0; 4];
        for (i, &v) in face_vertices(self.face).iter().enumerate() {
            p[v] = self.map[i];
        }
        p[self.face] = self.to_face;
        p
    }

    /// The record describing the same identification from the other side.
    pub fn inverse(&self) -> FaceGluing {
        let p = self.permutation();
        let mut inv = [0; 4];
        for (v, &w) in p.iter().enumerate() {
            inv[w] = v;
        }
        let target = face_vertices(self.to_face);
        FaceGluing {
            tet: self.to_tet,
            face: self.to_face,
            to_tet: self.tet,
            to_face: self.face,
            map: [inv[target[0]], inv[target[1]], inv[target[2]]],
        }
    }

    fn check_syntax(&self, tet_count: usize) -> Result<()> {
        for (what, index, count) in [
            ("tetrahedron", self.tet, tet_count),
            ("tetrahedron", self.to_tet, tet_count),
            ("local face", self.face, 4),
            ("local face", self.to_face, 4),
        ] {
            if index >= count {
                return Err(Error::IndexOutOfRange { what, index, count });
            }
        }
        let target = face_vertices(self.to_face);
        let mut seen = [false; 4];
        for &m in &self.map {
            if m >= 4 || !target.contains(&m) || seen[m] {
                return Err(Error::InvalidGluing(format!(
                    "map {:?} of tetrahedron {} face {} is not a bijection onto face {} of tetrahedron {}",
                    self.map, self.tet, self.face, self.to_face, self.to_tet
                )));
            }
            seen[m] = true;
        }
        Ok(())
    }
}

/// A closed pre-simplicial 3-complex with its derived vertex, edge and face
/// classes.
#[derive(Debug, Clone, PartialEq)]
pub struct GluedComplex {
    tet_count: usize,
    gluings: Vec<FaceGluing>,
    vertex_class: Vec<usize>,
    edge_class: Vec<usize>,
    face_class: Vec<usize>,
    vertex_members: Vec<Vec<usize>>,
    edge_members: Vec<Vec<usize>>,
    face_members: Vec<Vec<usize>>,
    orientation: std::result::Result<Vec<i8>, (usize, usize)>,
}

/// Partition `0..n` by the union-find, numbering classes by their minimal
/// element.
fn classes(uf: &UnionFind<usize>, n: usize) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut id_of_root = vec![usize::MAX; n];
    let mut class = vec![0; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for slot in 0..n {
        let root = uf.find(slot);
        if id_of_root[root] == usize::MAX {
            id_of_root[root] = members.len();
            members.push(Vec::new());
        }
        class[slot] = id_of_root[root];
        members[class[slot]].push(slot);
    }
    (class, members)
}

impl GluedComplex {
    /// Build a complex from `tet_count` tetrahedra and the full, involutive
    /// list of face gluings (both directions of every identification).
    pub fn build(tet_count: usize, gluings: &[FaceGluing]) -> Result<Self> {
        let mut slot: Vec<Option<FaceGluing>> = vec![None; 4 * tet_count];
        for g in gluings {
            g.check_syntax(tet_count)?;
            if g.tet == g.to_tet && g.face == g.to_face {
                return Err(Error::SelfGluedFace {
                    tet: g.tet,
                    face: g.face,
                });
            }
            let s = &mut slot[4 * g.tet + g.face];
            match s {
                Some(prev) if prev != g => {
                    return Err(Error::NotClosed {
                        tet: g.tet,
                        face: g.face,
                        reason: "is glued twice",
                    })
                }
                _ => *s = Some(*g),
            }
        }
        if let Some(i) = slot.iter().position(Option::is_none) {
            return Err(Error::NotClosed {
                tet: i / 4,
                face: i % 4,
                reason: "is not glued",
            });
        }
        for g in slot.iter().flatten() {
            if slot[4 * g.to_tet + g.to_face] != Some(g.inverse()) {
                return Err(Error::Inconsistent {
                    tet: g.tet,
                    face: g.face,
                });
            }
        }
        let gluings: Vec<FaceGluing> = slot.into_iter().flatten().collect();

        let mut vertices = UnionFind::new(4 * tet_count);
        let mut edges = UnionFind::new(6 * tet_count);
        let mut faces = UnionFind::new(4 * tet_count);
        for g in &gluings {
            let p = g.permutation();
            let fv = face_vertices(g.face);
            for &v in &fv {
                vertices.union(4 * g.tet + v, 4 * g.to_tet + p[v]);
            }
            for i in 0..3 {
                for j in (i + 1)..3 {
                    let (u, v) = (fv[i], fv[j]);
                    edges.union(
                        6 * g.tet + edge_index(u, v),
                        6 * g.to_tet + edge_index(p[u], p[v]),
                    );
                }
            }
            faces.union(4 * g.tet + g.face, 4 * g.to_tet + g.to_face);
        }
        let (vertex_class, vertex_members) = classes(&vertices, 4 * tet_count);
        let (edge_class, edge_members) = classes(&edges, 6 * tet_count);
        let (face_class, face_members) = classes(&faces, 4 * tet_count);

        let mut complex = GluedComplex {
            tet_count,
            gluings,
            vertex_class,
            edge_class,
            face_class,
            vertex_members,
            edge_members,
            face_members,
            orientation: Ok(Vec::new()),
        };
        let euler = complex.euler_characteristic();
        if euler != 0 {
            let (v, e, f, t) = complex.f_vector();
            return Err(Error::NotManifold(format!(
                "Euler characteristic {euler} for f-vector ({v}, {e}, {f}, {t})"
            )));
        }
        complex.orientation = complex.propagate_orientation();
        Ok(complex)
    }

    /// Breadth-first sign propagation; the lowest tetrahedron of every
    /// connected component gets `+1`.
    fn propagate_orientation(&self) -> std::result::Result<Vec<i8>, (usize, usize)> {
        let mut sigma = vec![0i8; self.tet_count];
        for start in 0..self.tet_count {
            if sigma[start] != 0 {
                continue;
            }
            sigma[start] = 1;
            let mut queue = VecDeque::from([start]);
            while let Some(t) = queue.pop_front() {
                for face in 0..4 {
                    let g = self.gluing(t, face);
                    let want = -sigma[t] * permutation_sign(&g.permutation());
                    match sigma[g.to_tet] {
                        0 => {
                            sigma[g.to_tet] = want;
                            queue.push_back(g.to_tet);
                        }
                        s if s != want => return Err((t, face)),
                        _ => {}
                    }
                }
            }
        }
        Ok(sigma)
    }

    pub fn tet_count(&self) -> usize {
        self.tet_count
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_members.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_members.len()
    }

    pub fn face_count(&self) -> usize {
        self.face_members.len()
    }

    /// `(V, E, F, T)`.
    pub fn f_vector(&self) -> (usize, usize, usize, usize) {
        (
            self.vertex_count(),
            self.edge_count(),
            self.face_count(),
            self.tet_count,
        )
    }

    pub fn euler_characteristic(&self) -> i64 {
        let (v, e, f, t) = self.f_vector();
        v as i64 - e as i64 + f as i64 - t as i64
    }

    /// All gluing records, one per face slot, ordered by `(tet, face)`.
    pub fn gluings(&self) -> &[FaceGluing] {
        &self.gluings
    }

    pub fn gluing(&self, tet: usize, face: usize) -> &FaceGluing {
        &self.gluings[4 * tet + face]
    }

    pub fn vertex_class(&self, tet: usize, local: usize) -> usize {
        self.vertex_class[4 * tet + local]
    }

    pub fn edge_class(&self, tet: usize, local: usize) -> usize {
        self.edge_class[6 * tet + local]
    }

    pub fn face_class(&self, tet: usize, local: usize) -> usize {
        self.face_class[4 * tet + local]
    }

    pub fn tet_vertices(&self, tet: usize) -> [usize; 4] {
        std::array::from_fn(|i| self.vertex_class(tet, i))
    }

    pub fn tet_edges(&self, tet: usize) -> [usize; 6] {
        std::array::from_fn(|i| self.edge_class(tet, i))
    }

    /// Orientation signs making every gluing orientation-reversing.
    pub fn check_orientable(&self) -> Result<&[i8]> {
        match &self.orientation {
            Ok(sigma) => Ok(sigma),
            Err((tet, face)) => Err(Error::NonOrientable {
                tet: *tet,
                face: *face,
            }),
        }
    }

    pub fn is_orientable(&self) -> bool {
        self.orientation.is_ok()
    }

    /// Incidences `(tet, local edge)` of an edge class, in slot order.
    pub fn edge_star(&self, class: usize) -> Result<Vec<(usize, usize)>> {
        let members = self
            .edge_members
            .get(class)
            .ok_or(Error::IndexOutOfRange {
                what: "edge class",
                index: class,
                count: self.edge_count(),
            })?;
        Ok(members.iter().map(|&s| (s / 6, s % 6)).collect())
    }

    /// Incidences `(tet, local vertex)` of a vertex class, in slot order.
    pub fn vertex_star(&self, class: usize) -> Result<Vec<(usize, usize)>> {
        let members = self
            .vertex_members
            .get(class)
            .ok_or(Error::IndexOutOfRange {
                what: "vertex class",
                index: class,
                count: self.vertex_count(),
            })?;
        Ok(members.iter().map(|&s| (s / 4, s % 4)).collect())
    }

    /// The two `(tet, local face)` slots of a face class.
    pub fn face_slots(&self, class: usize) -> Result<Vec<(usize, usize)>> {
        let members = self
            .face_members
            .get(class)
            .ok_or(Error::IndexOutOfRange {
                what: "face class",
                index: class,
                count: self.face_count(),
            })?;
        Ok(members.iter().map(|&s| (s / 4, s % 4)).collect())
    }

    /// Vertex classes at the ends of an edge class.
    pub fn edge_endpoints(&self, class: usize) -> [usize; 2] {
        let slot = self.edge_members[class][0];
        let (tet, e) = (slot / 6, slot % 6);
        let [u, v] = EDGE_VERTICES[e];
        [self.vertex_class(tet, u), self.vertex_class(tet, v)]
    }

    /// Combinatorial isomorphism, allowing any relabelling of tetrahedra and
    /// of their local vertices.
    pub fn is_isomorphic(&self, other: &GluedComplex) -> bool {
        if self.f_vector() != other.f_vector() {
            return false;
        }
        let mut used = vec![false; other.tet_count];
        let mut done = vec![false; self.tet_count];
        for start in 0..self.tet_count {
            if done[start] {
                continue;
            }
            let mut matched = false;
            'search: for candidate in 0..other.tet_count {
                if used[candidate] {
                    continue;
                }
                for perm in PERMUTATIONS_4 {
                    if let Some(image) = self.extend_isomorphism(other, start, candidate, perm, &used)
                    {
                        for (t, m) in image.iter().enumerate() {
                            if let Some((u, _)) = m {
                                done[t] = true;
                                used[*u] = true;
                            }
                        }
                        matched = true;
                        break 'search;
                    }
                }
            }
            if !matched {
                return false;
            }
        }
        true
    }

    fn extend_isomorphism(
        &self,
        other: &GluedComplex,
        start: usize,
        candidate: usize,
        perm: [usize; 4],
        used: &[bool],
    ) -> Option<Vec<Option<(usize, [usize; 4])>>> {
        let mut image: Vec<Option<(usize, [usize; 4])>> = vec![None; self.tet_count];
        let mut taken = used.to_vec();
        image[start] = Some((candidate, perm));
        taken[candidate] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(t) = queue.pop_front() {
            let (u, pi) = image[t].expect("queued tetrahedra are mapped");
            for face in 0..4 {
                let g = self.gluing(t, face);
                let h = other.gluing(u, pi[face]);
                let p = g.permutation();
                let q = h.permutation();
                // pi' o p = q o pi on every local vertex.
                let mut next = [0; 4];
                for v in 0..4 {
                    next[p[v]] = q[pi[v]];
                }
                match image[g.to_tet] {
                    None => {
                        if taken[h.to_tet] {
                            return None;
                        }
                        taken[h.to_tet] = true;
                        image[g.to_tet] = Some((h.to_tet, next));
                        queue.push_back(g.to_tet);
                    }
                    Some((w, existing)) => {
                        if w != h.to_tet || existing != next {
                            return None;
                        }
                    }
                }
            }
        }
        Some(image)
    }
}

const PERMUTATIONS_4: [[usize; 4]; 24] = [
    [0, 1, 2, 3],
    [0, 1, 3, 2],
    [0, 2, 1, 3],
    [0, 2, 3, 1],
    [0, 3, 1, 2],
    [0, 3, 2, 1],
    [1, 0, 2, 3],
    [1, 0, 3, 2],
    [1, 2, 0, 3],
    [1, 2, 3, 0],
    [1, 3, 0, 2],
    [1, 3, 2, 0],
    [2, 0, 1, 3],
    [2, 0, 3, 1],
    [2, 1, 0, 3],
    [2, 1, 3, 0],
    [2, 3, 0, 1],
    [2, 3, 1, 0],
    [3, 0, 1, 2],
    [3, 0, 2, 1],
    [3, 1, 0, 2],
    [3, 1, 2, 0],
    [3, 2, 0, 1],
    [3, 2, 1, 0],
];

/// Both directions of an identification, for building gluing lists by hand.
pub fn glue_pair(tet: usize, face: usize, to_tet: usize, to_face: usize, map: [usize; 3]) -> [FaceGluing; 2] {
    let g = FaceGluing::new(tet, face, to_tet, to_face, map);
    [g, g.inverse()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn opposite_edges_are_disjoint() {
        for a in 0..6 {
            for b in 0..6 {
                let shared = EDGE_VERTICES[a]
                    .iter()
                    .filter(|v| EDGE_VERTICES[b].contains(v))
                    .count();
                let expected = if a == b {
                    2
                } else if b == opposite_edge(a) {
                    0
                } else {
                    1
                };
                assert_eq!(shared, expected, "edges {a} {b}");
            }
        }
    }

    #[test]
    fn inverse_is_involutive() {
        let g = FaceGluing::new(0, 2, 3, 1, [3, 0, 2]);
        assert_eq!(g.inverse().inverse(), g);
        assert_eq!(g.inverse().tet, 3);
        assert_eq!(g.inverse().face, 1);
    }

    #[test]
    fn sphere_counts() {
        let s3 = fixtures::s3();
        assert_eq!(s3.f_vector(), (4, 6, 4, 2));
        assert_eq!(s3.euler_characteristic(), 0);
        for class in 0..6 {
            let star = s3.edge_star(class).unwrap();
            assert_eq!(star.len(), 2);
            assert_ne!(star[0].0, star[1].0);
        }
    }

    #[test]
    fn sphere_orientation_brute_force() {
        let s3 = fixtures::s3();
        let sigma = s3.check_orientable().unwrap();
        assert_eq!(sigma[0], 1);
        let reversing = |s: [i8; 2]| {
            s3.gluings().iter().all(|g| {
                s[g.tet] * s[g.to_tet] * permutation_sign(&g.permutation()) == -1
            })
        };
        let valid: Vec<[i8; 2]> = [[1, 1], [1, -1]]
            .into_iter()
            .filter(|s| reversing(*s))
            .collect();
        assert_eq!(valid, vec![[sigma[0], sigma[1]]]);
    }

    #[test]
    fn lone_tetrahedron_is_not_closed() {
        assert!(matches!(
            GluedComplex::build(1, &[]),
            Err(Error::NotClosed { tet: 0, face: 0, .. })
        ));
    }

    #[test]
    fn empty_complex() {
        let c = GluedComplex::build(0, &[]).unwrap();
        assert_eq!(c.f_vector(), (0, 0, 0, 0));
    }

    #[test]
    fn face_glued_to_itself_rejected() {
        let g = FaceGluing::new(0, 0, 0, 0, [1, 2, 3]);
        assert_eq!(
            GluedComplex::build(1, &[g]),
            Err(Error::SelfGluedFace { tet: 0, face: 0 })
        );
    }

    #[test]
    fn missing_inverse_is_inconsistent() {
        let mut gluings = fixtures::s3_gluings();
        // Replace one back-record by a different map.
        let idx = gluings
            .iter()
            .position(|g| g.tet == 1 && g.face == 0)
            .unwrap();
        gluings[idx].map = [2, 1, 3];
        assert!(matches!(
            GluedComplex::build(2, &gluings),
            Err(Error::Inconsistent { .. })
        ));
    }

    #[test]
    fn duplicate_gluing_is_not_closed() {
        let mut gluings = fixtures::s3_gluings();
        let mut extra = gluings[0];
        extra.to_face = 1;
        extra.map = [0, 2, 3];
        gluings.push(extra);
        assert!(matches!(
            GluedComplex::build(2, &gluings),
            Err(Error::NotClosed { .. })
        ));
    }

    #[test]
    fn bad_map_rejected() {
        let g = FaceGluing::new(0, 0, 1, 0, [0, 2, 3]);
        assert!(matches!(
            GluedComplex::build(2, &[g]),
            Err(Error::InvalidGluing(_))
        ));
        let g = FaceGluing::new(0, 5, 1, 0, [1, 2, 3]);
        assert!(matches!(
            GluedComplex::build(2, &[g]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn reflected_mapping_torus_is_non_orientable() {
        let straight = fixtures::s2_bundle(false);
        assert!(straight.is_orientable());
        // Same prisms, end identification composed with a transposition.
        let twisted = fixtures::s2_bundle(true);
        assert_eq!(twisted.euler_characteristic(), 0);
        assert!(matches!(
            twisted.check_orientable(),
            Err(Error::NonOrientable { .. })
        ));
    }

    #[test]
    fn one_tetrahedron_complex_lists_repeated_class_twice() {
        // Enumerate every single-tetrahedron gluing pattern and keep a
        // closed manifold in which one class holds two local edges.
        const PERM3: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let pairings = [[(0, 1), (2, 3)], [(0, 2), (1, 3)], [(0, 3), (1, 2)]];
        let mut found = None;
        'outer: for pairing in pairings {
            for m0 in PERM3 {
                for m1 in PERM3 {
                    let mut gluings = Vec::new();
                    for (&(f, g), m) in pairing.iter().zip([m0, m1]) {
                        let target = face_vertices(g);
                        gluings.extend(glue_pair(0, f, 0, g, m.map(|i| target[i])));
                    }
                    let Ok(c) = GluedComplex::build(1, &gluings) else {
                        continue;
                    };
                    let distinct: std::collections::HashSet<usize> = c.tet_edges(0).into_iter().collect();
                    if c.is_orientable() && c.vertex_count() == 1 && distinct.len() < 6 {
                        found = Some(c);
                        break 'outer;
                    }
                }
            }
        }
        let c = found.expect("a one-tetrahedron manifold exists");
        assert_eq!(c.vertex_count(), 1);
        let edges = c.tet_edges(0);
        let k = (0..6)
            .map(|e| edges[e])
            .find(|k| edges.iter().filter(|x| *x == k).count() >= 2)
            .unwrap();
        let star = c.edge_star(k).unwrap();
        let expected: Vec<(usize, usize)> = (0..6).filter(|&e| edges[e] == k).map(|e| (0, e)).collect();
        assert_eq!(star, expected);
    }

    #[test]
    fn projective_counts_and_star_total() {
        let rp3 = fixtures::rp3();
        assert_eq!(rp3.f_vector(), (4, 12, 16, 8));
        assert!(rp3.is_orientable());
        let total: usize = (0..12).map(|k| rp3.edge_star(k).unwrap().len()).sum();
        assert_eq!(total, 48);
    }

    #[test]
    fn permuted_gluing_list_gives_same_classes() {
        let mut gluings = fixtures::rp3_gluings();
        let a = GluedComplex::build(8, &gluings).unwrap();
        gluings.reverse();
        gluings.rotate_left(5);
        let b = GluedComplex::build(8, &gluings).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.check_orientable().unwrap(), b.check_orientable().unwrap());
    }

    #[test]
    fn isomorphism_detects_relabelling() {
        let s3 = fixtures::s3();
        let rp3 = fixtures::rp3();
        assert!(s3.is_isomorphic(&s3));
        assert!(!s3.is_isomorphic(&rp3));
        // Swap the two tetrahedra and relabel local vertices 0 <-> 1.
        let swap = |v: usize| match v {
            0 => 1,
            1 => 0,
            v => v,
        };
        let mut relabelled = Vec::new();
        for g in s3.gluings() {
            let p = g.permutation();
            let mut q = [0; 4];
            for v in 0..4 {
                q[swap(v)] = swap(p[v]);
            }
            let face = swap(g.face);
            let to_face = swap(g.to_face);
            let fv = face_vertices(face);
            relabelled.push(FaceGluing::new(
                1 - g.tet,
                face,
                1 - g.to_tet,
                to_face,
                [q[fv[0]], q[fv[1]], q[fv[2]]],
            ));
        }
        let other = GluedComplex::build(2, &relabelled).unwrap();
        assert!(s3.is_isomorphic(&other));
    }
}
