//! Conforming tetrahedral meshes of box domains.
//!
//! Meshes are built from a structured Kuhn split of the unit cube and refined
//! by octasection. Edges and faces store their vertex ids in ascending order,
//! which fixes a global orientation that every element can reconstruct locally.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

pub type Point = [f64; 3];

/// Local edges of a tetrahedron, as pairs of local vertex indices.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Local faces of a tetrahedron; face `i` is opposite local vertex `i`.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

const NO_TET: usize = usize::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("number of subdivisions must be at least 1, got {0}")]
    InvalidSubdivision(usize),
    #[error("inner box {corner} corner coordinate {axis} = {value} is not a multiple of 1/{n}")]
    MisalignedBox {
        corner: &'static str,
        axis: char,
        value: f64,
        n: usize,
    },
    #[error("inner box is empty or leaves the unit cube")]
    InvalidBox,
    #[error("element {tet} is degenerate or inverted (det = {det:e})")]
    DegenerateElement { tet: usize, det: f64 },
    #[error("face {face:?} is shared by {count} elements")]
    NonConforming { face: [usize; 3], count: usize },
    #[error("element {tet} references vertex {vertex}, but the mesh has {nverts} vertices")]
    VertexOutOfRange {
        tet: usize,
        vertex: usize,
        nverts: usize,
    },
    #[error("element {tet} repeats a vertex")]
    RepeatedVertex { tet: usize },
    #[error("mesh has no elements")]
    Empty,
    #[error("mesh dump line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Axis-aligned box `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisBox {
    pub min: Point,
    pub max: Point,
}

impl AxisBox {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    pub fn cube(lo: f64, hi: f64) -> Self {
        Self::new([lo; 3], [hi; 3])
    }

    pub fn contains(&self, x: &Point) -> bool {
        (0..3).all(|d| x[d] >= self.min[d] && x[d] <= self.max[d])
    }
}

/// A boundary face together with its owning element and boundary tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFace {
    pub face: usize,
    pub tet: usize,
    /// Local face index within `tet` (face opposite this local vertex).
    pub local: usize,
    pub tag: u32,
}

/// Affine map `x = linear * xhat + offset` from the reference tetrahedron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMap {
    /// Column-major: column `j` is the image of the reference axis `e_j`.
    pub linear: [[f64; 3]; 3],
    pub offset: Point,
    pub det: f64,
    pub diameter: f64,
}

impl ElementMap {
    /// Entry `(row, col)` of the linear part.
    #[inline]
    pub fn f(&self, row: usize, col: usize) -> f64 {
        self.linear[col][row]
    }

    pub fn apply(&self, xhat: &Point) -> Point {
        let mut x = self.offset;
        for (col, &c) in xhat.iter().enumerate() {
            for (row, xr) in x.iter_mut().enumerate() {
                *xr += self.linear[col][row] * c;
            }
        }
        x
    }

    /// `F^{-T}` as a row-major 3x3 array.
    pub fn inverse_transpose(&self) -> [[f64; 3]; 3] {
        let f = |r, c| self.f(r, c);
        let inv_det = 1.0 / self.det;
        // cofactor matrix of F equals det * F^{-T}
        let mut g = [[0.0; 3]; 3];
        for (r, row) in g.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
                let (c1, c2) = ((c + 1) % 3, (c + 2) % 3);
                *entry = (f(r1, c1) * f(r2, c2) - f(r1, c2) * f(r2, c1)) * inv_det;
            }
        }
        g
    }

    /// `F` as a row-major 3x3 array.
    pub fn forward(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry = self.f(r, c);
            }
        }
        m
    }
}

/// Conforming tetrahedral mesh with subdomain tags and oriented entities.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    tets: Vec<[usize; 4]>,
    tags: Vec<u32>,
    edges: Vec<[usize; 2]>,
    faces: Vec<[usize; 3]>,
    tet_edges: Vec<[usize; 6]>,
    tet_faces: Vec<[usize; 4]>,
    face_tets: Vec<[usize; 2]>,
    boundary: Vec<BoundaryFace>,
    interface: Vec<usize>,
}

fn sorted2(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn sorted3(a: usize, b: usize, c: usize) -> [usize; 3] {
    let mut f = [a, b, c];
    f.sort_unstable();
    f
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn det3(a: &Point, b: &Point, c: &Point) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn dist(a: &Point, b: &Point) -> f64 {
    let d = sub(a, b);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Tag of the unit-cube side a face lies on: 1/2 for x = 0/1, 3/4 for y, 5/6 for z.
/// Faces not on a side get tag 0.
pub fn unit_cube_side(pts: &[Point; 3]) -> u32 {
    const TOL: f64 = 1e-12;
    for axis in 0..3 {
        for (side, value) in [0.0, 1.0].into_iter().enumerate() {
            if pts.iter().all(|p| (p[axis] - value).abs() < TOL) {
                return (2 * axis + side + 1) as u32;
            }
        }
    }
    0
}

const KUHN_PATHS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Kuhn-split mesh of the unit cube with `n` cells per axis.
///
/// Tets whose centroid lies in `inner_box` get tag 1 and the rest tag 2; without
/// an inner box every tet is tagged 1.
pub fn build_structured_cube_mesh(n: usize, inner_box: Option<AxisBox>) -> Result<Mesh, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidSubdivision(n));
    }
    if let Some(b) = &inner_box {
        for (corner, pt) in [("lower", &b.min), ("upper", &b.max)] {
            for (axis, &value) in pt.iter().enumerate() {
                let scaled = value * n as f64;
                if (scaled - scaled.round()).abs() > 1e-9 {
                    return Err(MeshError::MisalignedBox {
                        corner,
                        axis: ['x', 'y', 'z'][axis],
                        value,
                        n,
                    });
                }
            }
        }
        if (0..3).any(|d| b.min[d] < -1e-12 || b.max[d] > 1.0 + 1e-12 || b.max[d] <= b.min[d]) {
            return Err(MeshError::InvalidBox);
        }
    }

    let np = n + 1;
    let h = 1.0 / n as f64;
    let vid = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let mut vertices = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 * h, j as f64 * h, k as f64 * h]);
            }
        }
    }

    let mut tets = Vec::with_capacity(6 * n * n * n);
    let mut tags = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for path in KUHN_PATHS {
                    let mut idx = [i, j, k];
                    let mut tet = [vid(i, j, k); 4];
                    for (step, &axis) in path.iter().enumerate() {
                        idx[axis] += 1;
                        tet[step + 1] = vid(idx[0], idx[1], idx[2]);
                    }
                    let [a, b, c, d] = tet.map(|v| vertices[v]);
                    if det3(&sub(&b, &a), &sub(&c, &a), &sub(&d, &a)) < 0.0 {
                        tet.swap(2, 3);
                    }
                    let tag = match &inner_box {
                        Some(bx) => {
                            let centroid = centroid4(&tet.map(|v| vertices[v]));
                            if bx.contains(&centroid) {
                                1
                            } else {
                                2
                            }
                        }
                        None => 1,
                    };
                    tets.push(tet);
                    tags.push(tag);
                }
            }
        }
    }
    Mesh::from_elements(vertices, tets, tags, |_, pts| unit_cube_side(pts))
}

fn centroid4(p: &[Point; 4]) -> Point {
    let mut c = [0.0; 3];
    for q in p {
        for d in 0..3 {
            c[d] += 0.25 * q[d];
        }
    }
    c
}

/// Splits every tet into eight children (Bey's octasection, interior diagonal
/// between the midpoints of edges 0-2 and 1-3 after ordering the vertices by
/// coordinate sum). Tags and boundary tags are inherited.
pub fn refine_uniform(m: &Mesh) -> Mesh {
    let nv = m.vertices.len();
    let mut vertices = m.vertices.clone();
    vertices.reserve(m.edges.len());
    for e in &m.edges {
        let (a, b) = (m.vertices[e[0]], m.vertices[e[1]]);
        vertices.push([
            0.5 * (a[0] + b[0]),
            0.5 * (a[1] + b[1]),
            0.5 * (a[2] + b[2]),
        ]);
    }
    let edge_index: HashMap<[usize; 2], usize> =
        m.edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mid = |a: usize, b: usize| nv + edge_index[&sorted2(a, b)];

    let mut tets = Vec::with_capacity(8 * m.tets.len());
    let mut tags = Vec::with_capacity(8 * m.tets.len());
    for (t, tet) in m.tets.iter().enumerate() {
        let mut v = *tet;
        v.sort_by(|&a, &b| {
            let sa: f64 = m.vertices[a].iter().sum();
            let sb: f64 = m.vertices[b].iter().sum();
            sa.partial_cmp(&sb).unwrap().then(a.cmp(&b))
        });
        let [x0, x1, x2, x3] = v;
        let (x01, x02, x03) = (mid(x0, x1), mid(x0, x2), mid(x0, x3));
        let (x12, x13, x23) = (mid(x1, x2), mid(x1, x3), mid(x2, x3));
        let children = [
            [x0, x01, x02, x03],
            [x01, x1, x12, x13],
            [x02, x12, x2, x23],
            [x03, x13, x23, x3],
            [x01, x02, x03, x13],
            [x01, x02, x12, x13],
            [x02, x03, x13, x23],
            [x02, x12, x13, x23],
        ];
        for mut child in children {
            let [a, b, c, d] = child.map(|i| vertices[i]);
            if det3(&sub(&b, &a), &sub(&c, &a), &sub(&d, &a)) < 0.0 {
                child.swap(2, 3);
            }
            tets.push(child);
            tags.push(m.tags[t]);
        }
    }

    // child boundary faces inherit the tag of the parent face they lie in
    let parent_faces: HashMap<[usize; 3], u32> = m
        .boundary
        .iter()
        .map(|bf| (m.faces[bf.face], bf.tag))
        .collect();
    let parents_of = |v: usize| -> [usize; 2] {
        if v < nv {
            [v, v]
        } else {
            m.edges[v - nv]
        }
    };
    Mesh::from_elements(vertices, tets, tags, |verts, _| {
        let mut set: Vec<usize> = verts.iter().flat_map(|&v| parents_of(v)).collect();
        set.sort_unstable();
        set.dedup();
        if set.len() == 3 {
            parent_faces
                .get(&[set[0], set[1], set[2]])
                .copied()
                .unwrap_or(0)
        } else {
            0
        }
    })
    .expect("octasection of a valid mesh is valid")
}

impl Mesh {
    /// Builds topology from elements. `boundary_tag` receives the sorted vertex
    /// ids and coordinates of each boundary face.
    pub fn from_elements<F>(
        vertices: Vec<Point>,
        tets: Vec<[usize; 4]>,
        tags: Vec<u32>,
        mut boundary_tag: F,
    ) -> Result<Mesh, MeshError>
    where
        F: FnMut(&[usize; 3], &[Point; 3]) -> u32,
    {
        if tets.is_empty() {
            return Err(MeshError::Empty);
        }
        assert_eq!(tets.len(), tags.len(), "one tag per element");
        let nverts = vertices.len();
        for (t, tet) in tets.iter().enumerate() {
            for &v in tet {
                if v >= nverts {
                    return Err(MeshError::VertexOutOfRange {
                        tet: t,
                        vertex: v,
                        nverts,
                    });
                }
            }
            let mut s = *tet;
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(MeshError::RepeatedVertex { tet: t });
            }
        }

        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut face_index: HashMap<[usize; 3], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut faces = Vec::new();
        let mut face_tets: Vec<[usize; 2]> = Vec::new();
        let mut tet_edges = Vec::with_capacity(tets.len());
        let mut tet_faces = Vec::with_capacity(tets.len());

        for (t, tet) in tets.iter().enumerate() {
            let mut te = [0; 6];
            for (le, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let key = sorted2(tet[*a], tet[*b]);
                te[le] = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edges.len() - 1
                });
            }
            let mut tf = [0; 4];
            for (lf, [a, b, c]) in LOCAL_FACES.iter().enumerate() {
                let key = sorted3(tet[*a], tet[*b], tet[*c]);
                let id = *face_index.entry(key).or_insert_with(|| {
                    faces.push(key);
                    face_tets.push([NO_TET, NO_TET]);
                    faces.len() - 1
                });
                let slot = &mut face_tets[id];
                if slot[0] == NO_TET {
                    slot[0] = t;
                } else if slot[1] == NO_TET {
                    slot[1] = t;
                } else {
                    return Err(MeshError::NonConforming {
                        face: key,
                        count: 3,
                    });
                }
                tf[lf] = id;
            }
            tet_edges.push(te);
            tet_faces.push(tf);
        }

        let mut boundary = Vec::new();
        let mut interface = Vec::new();
        for (f, ft) in face_tets.iter().enumerate() {
            if ft[1] == NO_TET {
                let tet = ft[0];
                let local = tet_faces[tet].iter().position(|&x| x == f).unwrap();
                let verts = faces[f];
                let tag = boundary_tag(&verts, &verts.map(|v| vertices[v]));
                boundary.push(BoundaryFace {
                    face: f,
                    tet,
                    local,
                    tag,
                });
            } else if tags[ft[0]] != tags[ft[1]] {
                interface.push(f);
            }
        }

        let mesh = Mesh {
            vertices,
            tets,
            tags,
            edges,
            faces,
            tet_edges,
            tet_faces,
            face_tets,
            boundary,
            interface,
        };
        for t in 0..mesh.tets.len() {
            mesh.element_map(t)?;
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn tags(&self) -> &[u32] {
        &self.tags
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn tet_edges(&self) -> &[[usize; 6]] {
        &self.tet_edges
    }

    pub fn tet_faces(&self) -> &[[usize; 4]] {
        &self.tet_faces
    }

    /// The one or two elements adjacent to face `f`.
    pub fn face_tets(&self, f: usize) -> (usize, Option<usize>) {
        let [a, b] = self.face_tets[f];
        (a, (b != NO_TET).then_some(b))
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary
    }

    /// Interior faces separating elements with different tags.
    pub fn interface_faces(&self) -> &[usize] {
        &self.interface
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    /// Distinct subdomain tags in ascending order.
    pub fn subdomain_tags(&self) -> Vec<u32> {
        let mut tags = self.tags.clone();
        tags.sort_unstable();
        tags.dedup();
        tags
    }

    pub fn element_map(&self, t: usize) -> Result<ElementMap, MeshError> {
        let p = self.tet_points(t);
        let cols = [sub(&p[1], &p[0]), sub(&p[2], &p[0]), sub(&p[3], &p[0])];
        let det = det3(&cols[0], &cols[1], &cols[2]);
        let mut diameter: f64 = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                diameter = diameter.max(dist(&p[i], &p[j]));
            }
        }
        if det <= 1e-14 * diameter.powi(3) {
            return Err(MeshError::DegenerateElement { tet: t, det });
        }
        Ok(ElementMap {
            linear: cols,
            offset: p[0],
            det,
            diameter,
        })
    }

    /// Element map of a tet already validated at construction.
    pub(crate) fn map(&self, t: usize) -> ElementMap {
        self.element_map(t).expect("validated at construction")
    }

    pub fn volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.map(t).det / 6.0).sum()
    }

    /// Maximal element diameter.
    pub fn max_diameter(&self) -> f64 {
        (0..self.tets.len())
            .map(|t| self.map(t).diameter)
            .fold(0.0, f64::max)
    }

    /// Re-checks the structural invariants: positive Jacobians, every face shared
    /// by one or two elements, interface faces separating distinct tags.
    pub fn check(&self) -> Result<(), MeshError> {
        for t in 0..self.tets.len() {
            self.element_map(t)?;
        }
        let mut count: HashMap<[usize; 3], usize> = HashMap::new();
        for tet in &self.tets {
            for [a, b, c] in LOCAL_FACES {
                *count.entry(sorted3(tet[a], tet[b], tet[c])).or_default() += 1;
            }
        }
        for (face, c) in count {
            if c > 2 {
                return Err(MeshError::NonConforming { face, count: c });
            }
        }
        for (f, ft) in self.face_tets.iter().enumerate() {
            if ft[1] != NO_TET
                && self.tags[ft[0]] != self.tags[ft[1]]
                && !self.interface.contains(&f)
            {
                return Err(MeshError::NonConforming {
                    face: self.faces[f],
                    count: 2,
                });
            }
        }
        Ok(())
    }

    /// Plain-text dump: one section per entity kind, coordinates with 17
    /// significant digits.
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        out.push_str("maxwell-hp-mesh 1\n");
        let _ = writeln!(out, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
        }
        let _ = writeln!(out, "tets {}", self.tets.len());
        for (t, tag) in self.tets.iter().zip(&self.tags) {
            let _ = writeln!(out, "{} {} {} {} {}", t[0], t[1], t[2], t[3], tag);
        }
        let _ = writeln!(out, "edges {}", self.edges.len());
        for e in &self.edges {
            let _ = writeln!(out, "{} {}", e[0], e[1]);
        }
        let _ = writeln!(out, "faces {}", self.faces.len());
        for f in &self.faces {
            let _ = writeln!(out, "{} {} {}", f[0], f[1], f[2]);
        }
        let _ = writeln!(out, "boundary {}", self.boundary.len());
        for b in &self.boundary {
            let _ = writeln!(out, "{} {}", b.face, b.tag);
        }
        out.push_str("end\n");
        out
    }

    /// Parses a dump written by [`Mesh::to_dump`]. Topology is rebuilt from the
    /// elements and must match the recorded edge, face and boundary sections.
    pub fn from_dump(text: &str) -> Result<Mesh, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let err = |line: usize, msg: &str| MeshError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| err(0, &format!("unexpected end of input, expected {what}")))
        };

        let (ln, header) = next("header")?;
        if header != "maxwell-hp-mesh 1" {
            return Err(err(ln, "missing 'maxwell-hp-mesh 1' header"));
        }

        fn section(line: (usize, &str), name: &str) -> Result<usize, MeshError> {
            let (ln, text) = line;
            let mut it = text.split_whitespace();
            if it.next() != Some(name) {
                return Err(MeshError::Parse {
                    line: ln,
                    msg: format!("expected section '{name}'"),
                });
            }
            let count = it
                .next()
                .and_then(|c| c.parse::<usize>().ok())
                .ok_or_else(|| MeshError::Parse {
                    line: ln,
                    msg: format!("bad count for section '{name}'"),
                })?;
            if it.next().is_some() {
                return Err(MeshError::Parse {
                    line: ln,
                    msg: "trailing tokens".into(),
                });
            }
            Ok(count)
        }
        fn numbers<T: std::str::FromStr>(
            line: (usize, &str),
            n: usize,
        ) -> Result<Vec<T>, MeshError> {
            let (ln, text) = line;
            let vals: Vec<T> = text
                .split_whitespace()
                .map(|tok| tok.parse::<T>())
                .collect::<Result<_, _>>()
                .map_err(|_| MeshError::Parse {
                    line: ln,
                    msg: "malformed number".into(),
                })?;
            if vals.len() != n {
                return Err(MeshError::Parse {
                    line: ln,
                    msg: format!("expected {n} values, found {}", vals.len()),
                });
            }
            Ok(vals)
        }
        // counts come from untrusted input; cap preallocation
        let cap = |n: usize| n.min(1 << 16);

        let nv = section(next("vertices")?, "vertices")?;
        let mut vertices = Vec::with_capacity(cap(nv));
        for _ in 0..nv {
            let line = next("vertex")?;
            let v: Vec<f64> = numbers(line, 3)?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(err(line.0, "non-finite coordinate"));
            }
            vertices.push([v[0], v[1], v[2]]);
        }
        let nt = section(next("tets")?, "tets")?;
        let mut tets = Vec::with_capacity(cap(nt));
        let mut tags = Vec::with_capacity(cap(nt));
        for _ in 0..nt {
            let line = next("tet")?;
            let v: Vec<u64> = numbers(line, 5)?;
            let tag = u32::try_from(v[4]).map_err(|_| err(line.0, "tag out of range"))?;
            tets.push([v[0], v[1], v[2], v[3]].map(|x| x as usize));
            tags.push(tag);
        }
        let ne = section(next("edges")?, "edges")?;
        let mut edges = Vec::with_capacity(cap(ne));
        for _ in 0..ne {
            let v: Vec<usize> = numbers(next("edge")?, 2)?;
            edges.push([v[0], v[1]]);
        }
        let nf = section(next("faces")?, "faces")?;
        let mut faces = Vec::with_capacity(cap(nf));
        for _ in 0..nf {
            let v: Vec<usize> = numbers(next("face")?, 3)?;
            faces.push([v[0], v[1], v[2]]);
        }
        let nb = section(next("boundary")?, "boundary")?;
        let mut btags: HashMap<usize, u32> = HashMap::with_capacity(cap(nb));
        for _ in 0..nb {
            let line = next("boundary face")?;
            let v: Vec<u64> = numbers(line, 2)?;
            let tag = u32::try_from(v[1]).map_err(|_| err(line.0, "tag out of range"))?;
            if btags.insert(v[0] as usize, tag).is_some() {
                return Err(err(line.0, "duplicate boundary face"));
            }
        }
        let (ln, end) = next("end")?;
        if end != "end" {
            return Err(err(ln, "expected 'end'"));
        }

        let face_ids: HashMap<[usize; 3], usize> =
            faces.iter().enumerate().map(|(i, &f)| (f, i)).collect();
        let mesh = Mesh::from_elements(vertices, tets, tags, |verts, _| {
            face_ids
                .get(verts)
                .and_then(|id| btags.get(id))
                .copied()
                .unwrap_or(u32::MAX)
        })?;
        if mesh.edges != edges {
            return Err(err(0, "edge section does not match element topology"));
        }
        if mesh.faces != faces {
            return Err(err(0, "face section does not match element topology"));
        }
        if mesh.boundary.len() != btags.len() || mesh.boundary.iter().any(|b| b.tag == u32::MAX) {
            return Err(err(0, "boundary section does not match element topology"));
        }
        Ok(mesh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cube_counts() {
        let m = build_structured_cube_mesh(1, None).unwrap();
        assert_eq!(m.vertices().len(), 8);
        assert_eq!(m.num_tets(), 6);
        assert_eq!(m.edges().len(), 19);
        assert_eq!(m.faces().len(), 18);
        assert_eq!(m.boundary_faces().len(), 12);
        // Euler characteristic of a ball
        let chi = 8 - 19 + 18 - 6;
        assert_eq!(chi as i64, 1);
        assert!(m.tags().iter().all(|&t| t == 1));
    }

    #[test]
    fn counts_by_enumeration() {
        // brute force: distinct sorted vertex tuples over all tets
        for n in 1..4 {
            let m = build_structured_cube_mesh(n, None).unwrap();
            let mut edges = std::collections::BTreeSet::new();
            let mut faces = std::collections::BTreeSet::new();
            for t in m.tets() {
                for i in 0..4 {
                    for j in i + 1..4 {
                        edges.insert(sorted2(t[i], t[j]));
                        for k in j + 1..4 {
                            faces.insert(sorted3(t[i], t[j], t[k]));
                        }
                    }
                }
            }
            assert_eq!(edges.len(), m.edges().len());
            assert_eq!(faces.len(), m.faces().len());
            let v = m.vertices().len() as i64;
            assert_eq!(
                v - edges.len() as i64 + faces.len() as i64 - m.num_tets() as i64,
                1
            );
            assert_eq!(m.boundary_faces().len(), 12 * n * n);
        }
        assert_eq!(build_structured_cube_mesh(2, None).unwrap().num_tets(), 48);
    }

    #[test]
    fn rejects_zero_subdivisions() {
        assert_eq!(
            build_structured_cube_mesh(0, None),
            Err(MeshError::InvalidSubdivision(0))
        );
    }

    #[test]
    fn misaligned_inner_box_names_coordinate() {
        let b = AxisBox::new([0.25, 0.3, 0.25], [0.75, 0.75, 0.75]);
        let e = build_structured_cube_mesh(4, Some(b)).unwrap_err();
        match &e {
            MeshError::MisalignedBox { corner, axis, .. } => {
                assert_eq!(*corner, "lower");
                assert_eq!(*axis, 'y');
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(e.to_string().contains("coordinate y = 0.3"));
    }

    #[test]
    fn inner_box_tagging() {
        let b = AxisBox::cube(0.25, 0.75);
        let m = build_structured_cube_mesh(4, Some(b)).unwrap();
        let mut inner = 0;
        for t in 0..m.num_tets() {
            let c = centroid4(&m.tet_points(t));
            assert_eq!(m.tags()[t] == 1, b.contains(&c));
            inner += (m.tags()[t] == 1) as usize;
        }
        assert_eq!(inner, 6 * 8);
        // interface: the inner cube surface, 6 sides * 4 squares * 2 triangles
        assert_eq!(m.interface_faces().len(), 48);
        m.check().unwrap();
    }

    #[test]
    fn element_map_reference_and_scaled() {
        let verts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let m = Mesh::from_elements(verts.clone(), vec![[0, 1, 2, 3]], vec![1], |_, _| 0).unwrap();
        let em = m.element_map(0).unwrap();
        assert_eq!(
            em.forward(),
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        );
        assert_eq!(em.det, 1.0);
        let scaled: Vec<Point> = verts.iter().map(|p| p.map(|c| 2.0 * c)).collect();
        let m2 = Mesh::from_elements(scaled, vec![[0, 1, 2, 3]], vec![1], |_, _| 0).unwrap();
        assert_eq!(m2.element_map(0).unwrap().det, 8.0);
    }

    #[test]
    fn inverted_element_rejected() {
        let verts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let e = Mesh::from_elements(verts, vec![[0, 2, 1, 3]], vec![1], |_, _| 0).unwrap_err();
        assert!(matches!(e, MeshError::DegenerateElement { tet: 0, .. }));
    }

    #[test]
    fn det_is_six_times_volume() {
        let m = build_structured_cube_mesh(1, None).unwrap();
        for t in 0..m.num_tets() {
            let p = m.tet_points(t);
            // signed volume via the scalar triple product, independent of ElementMap
            let vol = det3(&sub(&p[1], &p[0]), &sub(&p[2], &p[0]), &sub(&p[3], &p[0])) / 6.0;
            let em = m.element_map(t).unwrap();
            assert!((em.det - 6.0 * vol).abs() < 1e-15);
            assert!((vol - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn refinement_reproduces_finer_kuhn_mesh() {
        let coarse = build_structured_cube_mesh(1, None).unwrap();
        let fine = refine_uniform(&coarse);
        assert_eq!(fine.num_tets(), 48);
        fine.check().unwrap();
        let h0 = coarse.max_diameter();
        let h1 = fine.max_diameter();
        assert!((h1 - 0.5 * h0).abs() < 1e-14, "{h0} {h1}");

        let key = |m: &Mesh, t: usize| {
            let mut pts: Vec<[i64; 3]> = m
                .tet_points(t)
                .iter()
                .map(|p| p.map(|c| (c * 1024.0).round() as i64))
                .collect();
            pts.sort();
            pts
        };
        let direct = build_structured_cube_mesh(2, None).unwrap();
        let mut a: Vec<_> = (0..fine.num_tets()).map(|t| key(&fine, t)).collect();
        let mut b: Vec<_> = (0..direct.num_tets()).map(|t| key(&direct, t)).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn refinement_keeps_tags_and_boundary() {
        let m = build_structured_cube_mesh(2, Some(AxisBox::cube(0.0, 0.5))).unwrap();
        let r = refine_uniform(&refine_uniform(&m));
        r.check().unwrap();
        assert_eq!(r.boundary_faces().len(), 12 * 64);
        for b in r.boundary_faces() {
            let pts = r.faces()[b.face].map(|v| r.vertices()[v]);
            assert_eq!(b.tag, unit_cube_side(&pts));
        }
        for t in 0..r.num_tets() {
            let c = centroid4(&r.tet_points(t));
            assert_eq!(r.tags()[t] == 1, AxisBox::cube(0.0, 0.5).contains(&c));
        }
        assert!((r.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orientation_is_reproducible() {
        let a = build_structured_cube_mesh(3, None).unwrap();
        let b = build_structured_cube_mesh(3, None).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert!(a.edges().iter().all(|e| e[0] < e[1]));
        assert!(a.faces().iter().all(|f| f[0] < f[1] && f[1] < f[2]));
    }

    #[test]
    fn dump_round_trip() {
        let m = build_structured_cube_mesh(2, Some(AxisBox::cube(0.5, 1.0))).unwrap();
        let text = m.to_dump();
        let back = Mesh::from_dump(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn dump_rejects_garbage() {
        assert!(Mesh::from_dump("").is_err());
        assert!(Mesh::from_dump("maxwell-hp-mesh 1\nvertices 1\n0 0\n").is_err());
        let m = build_structured_cube_mesh(1, None).unwrap();
        let text = m.to_dump().replace("edges 19\n0 1\n", "edges 19\n1 0\n");
        assert!(Mesh::from_dump(&text).is_err());
    }
}
