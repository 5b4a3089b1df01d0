//! Geometric Pachner moves on realized complexes.
//!
//! Every move removes a cavity of tetrahedra and fills it with new ones. The
//! cavity is described by labels on the vertices of the removed tetrahedra
//! (slots identified through the gluings inside the cavity share a label);
//! new tetrahedra are label quadruples. Faces of the filling are glued to
//! each other by label, and to the outside through the old gluings of the
//! cavity boundary.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use petgraph::unionfind::UnionFind;
use rand::Rng;

use crate::complex::{edge_index, face_vertices, FaceGluing, GluedComplex, EDGE_VERTICES};
use crate::curvature::Realization;
use crate::error::{Error, Result};
use crate::geometry::{signed_volume, EdgeLengths6, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveKind {
    OneFour,
    TwoThree,
    ThreeTwo,
    FourOne,
}

impl fmt::Display for MoveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MoveKind::OneFour => "1-4",
            MoveKind::TwoThree => "2-3",
            MoveKind::ThreeTwo => "3-2",
            MoveKind::FourOne => "4-1",
        })
    }
}

/// A requested move: its kind, the tetrahedron / face class / edge class /
/// vertex class it acts on, and optional barycentric weights for `1-4`.
#[derive(Debug, Clone, PartialEq)]
pub struct MoveRecord {
    pub kind: MoveKind,
    pub target: usize,
    pub weights: Option<[f64; 4]>,
}

impl fmt::Display for MoveRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind, self.target)?;
        if let Some(w) = self.weights {
            write!(f, " {} {} {} {}", w[0], w[1], w[2], w[3])?;
        }
        Ok(())
    }
}

impl FromStr for MoveRecord {
    type Err = String;

    fn from_str(line: &str) -> std::result::Result<Self, String> {
        let mut words = line.split_whitespace();
        let kind = match words.next() {
            Some("1-4") => MoveKind::OneFour,
            Some("2-3") => MoveKind::TwoThree,
            Some("3-2") => MoveKind::ThreeTwo,
            Some("4-1") => MoveKind::FourOne,
            Some(other) => return Err(format!("unknown move {other:?}")),
            None => return Err("empty move".into()),
        };
        let target = words
            .next()
            .ok_or("missing move target")?
            .parse::<usize>()
            .map_err(|e| format!("bad move target: {e}"))?;
        let rest: Vec<f64> = words
            .map(|w| w.parse::<f64>().map_err(|e| format!("bad weight {w:?}: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        let weights = match (kind, rest.len()) {
            (_, 0) => None,
            (MoveKind::OneFour, 4) => Some([rest[0], rest[1], rest[2], rest[3]]),
            (MoveKind::OneFour, n) => return Err(format!("expected 4 weights, found {n}")),
            (_, _) => return Err(format!("move {kind} takes no weights")),
        };
        Ok(MoveRecord { kind, target, weights })
    }
}

/// Parses a move script: one move per line, `#` starts a comment.
pub fn parse_script(text: &str) -> Result<Vec<MoveRecord>> {
    let mut moves = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        moves.push(line.parse().map_err(|message| Error::Parse {
            location: format!("line {}", i + 1),
            message,
        })?);
    }
    Ok(moves)
}

/// Result of a move: the new realization and how old classes map into it.
#[derive(Debug, Clone)]
pub struct MoveOutcome {
    pub realization: Realization,
    pub record: MoveRecord,
    /// Old edge class to new edge class; `None` for edges the move destroys.
    pub edge_map: Vec<Option<usize>>,
    /// Old vertex class to new vertex class.
    pub vertex_map: Vec<Option<usize>>,
    /// Edge classes not in the image of `edge_map`.
    pub new_edges: Vec<usize>,
    pub new_vertices: Vec<usize>,
}

/// `1/4` each plus a uniform jitter of at most `0.05`, renormalized.
pub fn jittered_weights<R: Rng + ?Sized>(rng: &mut R) -> [f64; 4] {
    let w: [f64; 4] = std::array::from_fn(|_| 0.25 + rng.gen_range(-0.05..0.05));
    let s: f64 = w.iter().sum();
    w.map(|x| x / s)
}

/// A labelled cavity and its filling.
struct Cavity {
    removed: Vec<usize>,
    /// Label of each local vertex of each removed tetrahedron.
    labels: Vec<[usize; 4]>,
    /// Face slots of removed tetrahedra glued inside the cavity.
    interior: Vec<(usize, usize)>,
    /// Position of each label.
    points: Vec<Point>,
    /// Old vertex class carried by each label, if any.
    old_class: Vec<Option<usize>>,
    fill: Vec<[usize; 4]>,
}

fn check_index(what: &'static str, index: usize, count: usize) -> Result<()> {
    if index >= count {
        Err(Error::IndexOutOfRange { what, index, count })
    } else {
        Ok(())
    }
}

/// Labels slots of `removed` tetrahedra by gluing together the local vertices
/// identified through `interior` face slots. Returns per-tetrahedron labels
/// numbered by first appearance.
fn label_cavity(complex: &GluedComplex, removed: &[usize], interior: &[(usize, usize)]) -> Vec<[usize; 4]> {
    let pos = |t: usize| removed.iter().position(|&r| r == t);
    let mut uf = UnionFind::<usize>::new(4 * removed.len());
    for &(t, f) in interior {
        let g = complex.gluing(t, f);
        let (i, j) = (pos(t).unwrap(), pos(g.to_tet).unwrap());
        let perm = g.permutation();
        for v in face_vertices(f) {
            uf.union(4 * i + v, 4 * j + perm[v]);
        }
    }
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    removed
        .iter()
        .enumerate()
        .map(|(i, _)| {
            std::array::from_fn(|v| {
                let root = uf.find(4 * i + v);
                let next = ids.len();
                *ids.entry(root).or_insert(next)
            })
        })
        .collect()
}

fn sorted3(mut k: [usize; 3]) -> [usize; 3] {
    k.sort_unstable();
    k
}

fn rebuild(r: &Realization, cavity: Cavity, record: MoveRecord) -> Result<MoveOutcome> {
    let old = r.complex();
    let fail = |why: &str| Error::NotRemovable(format!("{record}: {why}"));
    let is_removed = |t: usize| cavity.removed.contains(&t);
    let removed_pos = |t: usize| cavity.removed.iter().position(|&x| x == t);

    for quad in &cavity.fill {
        let p = quad.map(|l| cavity.points[l]);
        let l = EdgeLengths6::from_points(&p);
        let six = 6.0 * signed_volume(&p).abs();
        if !(six >= r.tau_geom() * l.mean().powi(3)) || l.0.iter().any(|&x| x == 0.0) {
            return Err(Error::DegenerateMove(format!(
                "{record}: new tetrahedron on labels {quad:?} has 6V = {six:.3e}"
            )));
        }
    }

    // Final tetrahedron numbering: the filling reuses removed indices in
    // ascending order, extra new tetrahedra are appended, and surplus removed
    // indices are compacted away.
    #[derive(Clone, Copy)]
    enum Slot {
        Old(usize),
        New(usize),
    }
    let mut holes = cavity.removed.clone();
    holes.sort_unstable();
    let mut layout = Vec::new();
    for t in 0..old.tet_count() {
        match holes.iter().position(|&h| h == t) {
            None => layout.push(Slot::Old(t)),
            Some(k) if k < cavity.fill.len() => layout.push(Slot::New(k)),
            Some(_) => {}
        }
    }
    for k in holes.len()..cavity.fill.len() {
        layout.push(Slot::New(k));
    }
    let mut old_index = vec![usize::MAX; old.tet_count()];
    let mut new_index = vec![usize::MAX; cavity.fill.len()];
    for (i, s) in layout.iter().enumerate() {
        match *s {
            Slot::Old(t) => old_index[t] = i,
            Slot::New(k) => new_index[k] = i,
        }
    }

    // Faces of the filling, keyed by label set.
    let mut fill_faces: BTreeMap<[usize; 3], Vec<(usize, usize)>> = BTreeMap::new();
    for (k, quad) in cavity.fill.iter().enumerate() {
        for f in 0..4 {
            fill_faces.entry(sorted3(face_vertices(f).map(|v| quad[v]))).or_default().push((k, f));
        }
    }
    let local_in_fill = |k: usize, label: usize| cavity.fill[k].iter().position(|&x| x == label).unwrap();

    // Boundary slots of the cavity, keyed by label set.
    let mut boundary: BTreeMap<[usize; 3], (usize, usize)> = BTreeMap::new();
    for (i, &t) in cavity.removed.iter().enumerate() {
        for f in 0..4 {
            if cavity.interior.contains(&(t, f)) {
                continue;
            }
            let key = sorted3(face_vertices(f).map(|v| cavity.labels[i][v]));
            if boundary.insert(key, (t, f)).is_some() {
                return Err(fail("cavity boundary repeats a face"));
            }
        }
    }
    let mut fill_of_boundary: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for (key, slots) in &fill_faces {
        match slots.len() {
            2 => {}
            1 => {
                let b = boundary.get(key).ok_or_else(|| fail("filling face has no partner"))?;
                fill_of_boundary.insert(*b, slots[0]);
            }
            _ => return Err(fail("filling repeats a face")),
        }
    }
    if fill_of_boundary.len() != boundary.len() {
        return Err(fail("cavity boundary does not match the filling"));
    }

    let mut gluings = Vec::new();
    for g in old.gluings() {
        if !is_removed(g.tet) && !is_removed(g.to_tet) {
            gluings.push(FaceGluing { tet: old_index[g.tet], to_tet: old_index[g.to_tet], ..*g });
        }
    }
    for (key, slots) in &fill_faces {
        if let [(k, f), (m, h)] = slots.as_slice() {
            let map = face_vertices(*f).map(|v| local_in_fill(*m, cavity.fill[*k][v]));
            gluings.extend(crate::complex::glue_pair(new_index[*k], *f, new_index[*m], *h, map));
        } else {
            let _ = key;
        }
    }
    for (&(t, f), &(k, fk)) in &fill_of_boundary {
        let i = removed_pos(t).unwrap();
        let g = old.gluing(t, f);
        let perm = g.permutation();
        // Local vertex of `t` carrying each label.
        let local_in_t = |label: usize| cavity.labels[i].iter().position(|&x| x == label).unwrap();
        let images = face_vertices(fk).map(|v| perm[local_in_t(cavity.fill[k][v])]);
        let forward = if is_removed(g.to_tet) {
            let j = removed_pos(g.to_tet).unwrap();
            let &(m, fm) = fill_of_boundary
                .get(&(g.to_tet, g.to_face))
                .ok_or_else(|| fail("boundary face glued into the cavity interior"))?;
            FaceGluing::new(
                new_index[k],
                fk,
                new_index[m],
                fm,
                images.map(|w| local_in_fill(m, cavity.labels[j][w])),
            )
        } else {
            let forward = FaceGluing::new(new_index[k], fk, old_index[g.to_tet], g.to_face, images);
            gluings.push(forward.inverse());
            forward
        };
        gluings.push(forward);
    }

    let complex = GluedComplex::build(layout.len(), &gluings)?;

    let mut coords = vec![None; complex.vertex_count()];
    let mut vertex_map = vec![None; old.vertex_count()];
    for (i, s) in layout.iter().enumerate() {
        for v in 0..4 {
            let class = complex.vertex_class(i, v);
            match *s {
                Slot::Old(t) => {
                    let o = old.vertex_class(t, v);
                    coords[class] = Some(r.coords()[o]);
                    vertex_map[o] = Some(class);
                }
                Slot::New(k) => {
                    let label = cavity.fill[k][v];
                    coords[class] = Some(cavity.points[label]);
                    if let Some(o) = cavity.old_class[label] {
                        vertex_map[o] = Some(class);
                    }
                }
            }
        }
    }
    let coords: Vec<Point> = coords.into_iter().map(|c| c.expect("every class has a slot")).collect();

    let mut edge_map = vec![None; old.edge_count()];
    for (i, s) in layout.iter().enumerate() {
        if let Slot::Old(t) = *s {
            for e in 0..6 {
                edge_map[old.edge_class(t, e)] = Some(complex.edge_class(i, e));
            }
        }
    }
    for (i, &t) in cavity.removed.iter().enumerate() {
        for (e, [u, v]) in EDGE_VERTICES.iter().enumerate() {
            let (a, b) = (cavity.labels[i][*u], cavity.labels[i][*v]);
            for (k, quad) in cavity.fill.iter().enumerate() {
                if let (Some(x), Some(y)) = (quad.iter().position(|&l| l == a), quad.iter().position(|&l| l == b)) {
                    edge_map[old.edge_class(t, e)] = Some(complex.edge_class(new_index[k], edge_index(x, y)));
                }
            }
        }
    }
    let hit = |n: usize, map: &[Option<usize>]| (0..n).filter(|c| !map.contains(&Some(*c))).collect::<Vec<_>>();
    let new_edges = hit(complex.edge_count(), &edge_map);
    let new_vertices = hit(complex.vertex_count(), &vertex_map);

    let realization = Realization::with_tolerance(complex, coords, r.tau_geom()).map_err(|e| match e {
        Error::DegenerateTet { tet } => Error::DegenerateMove(format!("{record}: tetrahedron {tet} is degenerate")),
        other => other,
    })?;
    Ok(MoveOutcome {
        realization,
        record,
        edge_map,
        vertex_map,
        new_edges,
        new_vertices,
    })
}

/// Stars tetrahedron `t` at the point `sum w_i p_i`.
pub fn move_1_4(r: &Realization, t: usize, weights: [f64; 4]) -> Result<MoveOutcome> {
    let c = r.complex();
    check_index("tetrahedron", t, c.tet_count())?;
    let record = MoveRecord { kind: MoveKind::OneFour, target: t, weights: Some(weights) };
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) || !total.is_finite() {
        return Err(Error::DegenerateMove(format!("{record}: weights must be positive")));
    }
    let p = r.tet_points(t);
    let centre = (0..4).fold(Point::zeros(), |acc, i| acc + p[i] * (weights[i] / total));
    let mut points = p.to_vec();
    points.push(centre);
    let mut old_class: Vec<Option<usize>> = c.tet_vertices(t).map(Some).to_vec();
    old_class.push(None);
    let cavity = Cavity {
        removed: vec![t],
        labels: vec![[0, 1, 2, 3]],
        interior: Vec::new(),
        points,
        old_class,
        fill: vec![[0, 1, 2, 4], [0, 1, 3, 4], [0, 2, 3, 4], [1, 2, 3, 4]],
    };
    rebuild(r, cavity, record)
}

/// Removes a vertex class whose star is four tetrahedra forming a starred
/// tetrahedron.
pub fn move_4_1(r: &Realization, v: usize) -> Result<MoveOutcome> {
    let c = r.complex();
    check_index("vertex class", v, c.vertex_count())?;
    let record = MoveRecord { kind: MoveKind::FourOne, target: v, weights: None };
    let fail = |why: &str| Error::NotRemovable(format!("{record}: {why}"));
    let star = c.vertex_star(v)?;
    let mut removed: Vec<usize> = star.iter().map(|s| s.0).collect();
    removed.sort_unstable();
    removed.dedup();
    if star.len() != 4 || removed.len() != 4 {
        return Err(fail(&format!("vertex lies in {} tetrahedron corners", star.len())));
    }
    let apex: Vec<usize> = removed.iter().map(|&t| star.iter().find(|s| s.0 == t).unwrap().1).collect();
    let interior: Vec<(usize, usize)> = removed
        .iter()
        .zip(&apex)
        .flat_map(|(&t, &a)| (0..4).filter(move |&f| f != a).map(move |f| (t, f)))
        .collect();
    for &(t, f) in &interior {
        if !removed.contains(&c.gluing(t, f).to_tet) {
            return Err(fail("star is not closed"));
        }
    }
    let raw = label_cavity(c, &removed, &interior);
    let centre = raw[0][apex[0]];
    if removed.iter().enumerate().any(|(i, _)| raw[i].iter().filter(|&&l| l == centre).count() != 1)
        || raw.iter().flatten().copied().max() != Some(4)
    {
        return Err(fail("star is not a starred tetrahedron"));
    }
    // Outer labels in the order they appear in the lowest removed tetrahedron,
    // then the one it misses; the centre becomes label 4.
    let mut order: Vec<usize> = raw[0].iter().copied().filter(|&l| l != centre).collect();
    let missing: Vec<usize> = (0..5).filter(|l| *l != centre && !order.contains(l)).collect();
    order.extend(missing);
    let relabel = |l: usize| if l == centre { 4 } else { order.iter().position(|&x| x == l).unwrap() };
    let labels: Vec<[usize; 4]> = raw.iter().map(|q| q.map(relabel)).collect();
    let mut points = vec![Point::zeros(); 5];
    let mut old_class = vec![None; 5];
    for (i, &t) in removed.iter().enumerate() {
        for x in 0..4 {
            let l = labels[i][x];
            points[l] = r.coords()[c.vertex_class(t, x)];
            if l != 4 {
                old_class[l] = Some(c.vertex_class(t, x));
            }
        }
    }
    for q in &labels {
        let mut outer: Vec<usize> = q.iter().copied().filter(|&l| l != 4).collect();
        outer.sort_unstable();
        outer.dedup();
        if outer.len() != 3 {
            return Err(fail("star is not a starred tetrahedron"));
        }
    }
    let cavity = Cavity { removed, labels, interior, points, old_class, fill: vec![[0, 1, 2, 3]] };
    rebuild(r, cavity, record)
}

/// Replaces the two tetrahedra on either side of a face class by three
/// tetrahedra around the new edge joining their apexes.
pub fn move_2_3(r: &Realization, face: usize) -> Result<MoveOutcome> {
    let c = r.complex();
    check_index("face class", face, c.face_count())?;
    let record = MoveRecord { kind: MoveKind::TwoThree, target: face, weights: None };
    let slots = c.face_slots(face)?;
    let (t1, f1) = slots[0];
    let (t2, f2) = slots[1];
    if t1 == t2 {
        return Err(Error::SameTetrahedron(face));
    }
    let g = c.gluing(t1, f1);
    let perm = g.permutation();
    let mut second = [usize::MAX; 4];
    for v in 0..4 {
        second[perm[v]] = v;
    }
    second[f2] = 4;
    let labels = vec![[0, 1, 2, 3], second];
    let (d, e) = (f1, 4);
    if c.vertex_class(t1, f1) == c.vertex_class(t2, f2) {
        return Err(Error::DegenerateMove(format!(
            "{record}: both apexes are vertex class {}",
            c.vertex_class(t1, f1)
        )));
    }
    let mut points: Vec<Point> = r.tet_points(t1).to_vec();
    points.push(r.coords()[c.vertex_class(t2, f2)]);
    let mut old_class: Vec<Option<usize>> = c.tet_vertices(t1).map(Some).to_vec();
    old_class.push(Some(c.vertex_class(t2, f2)));
    let [x, y, z] = face_vertices(f1);
    let cavity = Cavity {
        removed: vec![t1, t2],
        labels,
        interior: vec![(t1, f1), (t2, f2)],
        points,
        old_class,
        fill: vec![[x, y, d, e], [x, z, d, e], [y, z, d, e]],
    };
    rebuild(r, cavity, record)
}

/// Replaces the three tetrahedra around an edge class of valence three by two
/// tetrahedra sharing a face.
pub fn move_3_2(r: &Realization, edge: usize) -> Result<MoveOutcome> {
    let c = r.complex();
    check_index("edge class", edge, c.edge_count())?;
    let record = MoveRecord { kind: MoveKind::ThreeTwo, target: edge, weights: None };
    let fail = |why: &str| Error::NotRemovable(format!("{record}: {why}"));
    let star = c.edge_star(edge)?;
    let mut removed: Vec<usize> = star.iter().map(|s| s.0).collect();
    removed.sort_unstable();
    removed.dedup();
    if star.len() != 3 || removed.len() != 3 {
        return Err(fail(&format!("edge has valence {}", star.len())));
    }
    let local: Vec<usize> = removed.iter().map(|&t| star.iter().find(|s| s.0 == t).unwrap().1).collect();
    let mut interior = Vec::new();
    for (&t, &e) in removed.iter().zip(&local) {
        for f in EDGE_VERTICES[crate::complex::opposite_edge(e)] {
            if !removed.contains(&c.gluing(t, f).to_tet) {
                return Err(fail("edge star is not closed"));
            }
            interior.push((t, f));
        }
    }
    let labels = label_cavity(c, &removed, &interior);
    let [ia, ib] = EDGE_VERTICES[local[0]];
    let (a, b) = (labels[0][ia], labels[0][ib]);
    let count = labels.iter().flatten().copied().max().map_or(0, |m| m + 1);
    let ends_ok = labels.iter().zip(&local).all(|(q, &e)| {
        let [u, v] = EDGE_VERTICES[e];
        (q[u], q[v]) == (a, b) || (q[u], q[v]) == (b, a)
    });
    if a == b || count != 5 || !ends_ok || labels.iter().any(|q| {
        let mut s = q.to_vec();
        s.sort_unstable();
        s.dedup();
        s.len() != 4
    }) {
        return Err(fail("edge star is not three tetrahedra around one edge"));
    }
    let mut points = vec![Point::zeros(); 5];
    let mut old_class = vec![None; 5];
    for (i, &t) in removed.iter().enumerate() {
        for x in 0..4 {
            points[labels[i][x]] = r.coords()[c.vertex_class(t, x)];
            old_class[labels[i][x]] = Some(c.vertex_class(t, x));
        }
    }
    let ring: Vec<usize> = (0..5).filter(|&l| l != a && l != b).collect();
    let cavity = Cavity {
        removed,
        labels,
        interior,
        points,
        old_class,
        fill: vec![[a, ring[0], ring[1], ring[2]], [b, ring[0], ring[1], ring[2]]],
    };
    rebuild(r, cavity, record)
}

/// Applies a recorded move; `1-4` without weights draws jittered ones.
pub fn apply_move<R: Rng + ?Sized>(r: &Realization, m: &MoveRecord, rng: &mut R) -> Result<MoveOutcome> {
    match m.kind {
        MoveKind::OneFour => move_1_4(r, m.target, m.weights.unwrap_or_else(|| jittered_weights(rng))),
        MoveKind::FourOne => move_4_1(r, m.target),
        MoveKind::TwoThree => move_2_3(r, m.target),
        MoveKind::ThreeTwo => move_3_2(r, m.target),
    }
}
