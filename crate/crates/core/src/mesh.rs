//! Tetrahedral volume meshes and triangular boundary meshes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::vec3::Vec3;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("element {element} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange {
        element: usize,
        index: usize,
        count: usize,
    },
    #[error("tetrahedron {0} has zero volume")]
    DegenerateTet(usize),
    #[error("triangle {0} has zero area")]
    ZeroArea(usize),
    #[error("face shared by more than two tetrahedra (tets {0:?})")]
    NonManifold(Vec<usize>),
}

/// Outward faces of a positively oriented tet; face `k` is opposite vertex `k`.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

/// A point that fell outside every element.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("point {0:?} lies outside the mesh")]
pub struct OutsideMesh(pub [f64; 3]);

#[derive(Debug, Clone)]
pub struct VolumeMesh {
    pub vertices: Vec<Vec3>,
    pub tets: Vec<[usize; 4]>,
    pub regions: Vec<i32>,
    /// `neighbors[t][k]` is the tet across the face opposite local vertex `k`.
    pub neighbors: Vec<[Option<usize>; 4]>,
    vt_offsets: Vec<usize>,
    vt_list: Vec<usize>,
}

fn signed_volume(p: &[Vec3; 4]) -> f64 {
    (p[1] - p[0]).dot((p[2] - p[0]).cross(p[3] - p[0])) / 6.0
}

impl VolumeMesh {
    /// Builds a mesh, flipping negatively oriented tets and computing adjacency.
    pub fn new(
        vertices: Vec<Vec3>,
        mut tets: Vec<[usize; 4]>,
        regions: Vec<i32>,
    ) -> Result<Self, MeshError> {
        assert_eq!(tets.len(), regions.len(), "one region tag per tet");
        let n = vertices.len();
        for (t, tet) in tets.iter_mut().enumerate() {
            if let Some(&bad) = tet.iter().find(|&&i| i >= n) {
                return Err(MeshError::IndexOutOfRange {
                    element: t,
                    index: bad,
                    count: n,
                });
            }
            let p = tet.map(|i| vertices[i]);
            let vol = signed_volume(&p);
            let scale = (0..4)
                .flat_map(|a| (a + 1..4).map(move |b| (a, b)))
                .map(|(a, b)| p[a].dist(p[b]))
                .fold(0.0, f64::max);
            if vol.abs() <= 1e-12 * scale.powi(3) {
                return Err(MeshError::DegenerateTet(t));
            }
            if vol < 0.0 {
                tet.swap(2, 3);
            }
        }

        let mut faces: HashMap<[usize; 3], Vec<(usize, usize)>> =
            HashMap::with_capacity(tets.len() * 3);
        for (t, tet) in tets.iter().enumerate() {
            for (k, f) in TET_FACES.iter().enumerate() {
                let mut key = f.map(|l| tet[l]);
                key.sort_unstable();
                faces.entry(key).or_default().push((t, k));
            }
        }
        let mut neighbors = vec![[None; 4]; tets.len()];
        for owners in faces.values() {
            match owners.as_slice() {
                [_] => {}
                [(s, ks), (t, kt)] => {
                    neighbors[*s][*ks] = Some(*t);
                    neighbors[*t][*kt] = Some(*s);
                }
                many => {
                    let mut ids: Vec<usize> = many.iter().map(|o| o.0).collect();
                    ids.sort_unstable();
                    return Err(MeshError::NonManifold(ids));
                }
            }
        }

        let mut vt_offsets = vec![0usize; n + 1];
        for tet in &tets {
            for &v in tet {
                vt_offsets[v + 1] += 1;
            }
        }
        for v in 0..n {
            vt_offsets[v + 1] += vt_offsets[v];
        }
        let mut fill = vt_offsets.clone();
        let mut vt_list = vec![0usize; vt_offsets[n]];
        for (t, tet) in tets.iter().enumerate() {
            for &v in tet {
                vt_list[fill[v]] = t;
                fill[v] += 1;
            }
        }

        Ok(Self {
            vertices,
            tets,
            regions,
            neighbors,
            vt_offsets,
            vt_list,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses the `tetmesh N M` text format.
    pub fn parse(text: &str) -> Result<Self, MeshError> {
        let mut lines = data_lines(text);
        let (hl, header) = lines.next().ok_or(MeshError::Parse {
            line: 0,
            msg: "empty file".into(),
        })?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 || h[0] != "tetmesh" {
            return Err(parse_err(hl, "expected header `tetmesh <N> <M>`"));
        }
        let nv: usize = num(hl, h[1])?;
        let nt: usize = num(hl, h[2])?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (l, s) = lines.next().ok_or(parse_err(usize::MAX, "missing vertex lines"))?;
            vertices.push(vertex_line(l, s)?);
        }
        let mut tets = Vec::with_capacity(nt);
        let mut regions = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (l, s) = lines.next().ok_or(parse_err(usize::MAX, "missing tet lines"))?;
            let f: Vec<&str> = s.split_whitespace().collect();
            if f.len() != 6 || f[0] != "t" {
                return Err(parse_err(l, "expected `t i0 i1 i2 i3 region`"));
            }
            tets.push([num(l, f[1])?, num(l, f[2])?, num(l, f[3])?, num(l, f[4])?]);
            regions.push(num(l, f[5])?);
        }
        if let Some((l, _)) = lines.next() {
            return Err(parse_err(l, "trailing data after the last tet"));
        }
        Self::new(vertices, tets, regions)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "tetmesh {} {}", self.vertices.len(), self.tets.len()).unwrap();
        for v in &self.vertices {
            writeln!(s, "v {:e} {:e} {:e}", v.x, v.y, v.z).unwrap();
        }
        for (t, r) in self.tets.iter().zip(&self.regions) {
            writeln!(s, "t {} {} {} {} {}", t[0], t[1], t[2], t[3], r).unwrap();
        }
        s
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_points(&self, t: usize) -> [Vec3; 4] {
        self.tets[t].map(|i| self.vertices[i])
    }

    pub fn volume(&self, t: usize) -> f64 {
        signed_volume(&self.tet_points(t))
    }

    pub fn centroid(&self, t: usize) -> Vec3 {
        let p = self.tet_points(t);
        (p[0] + p[1] + p[2] + p[3]) * 0.25
    }

    /// Tets having `v` as a vertex.
    pub fn vertex_tets(&self, v: usize) -> &[usize] {
        &self.vt_list[self.vt_offsets[v]..self.vt_offsets[v + 1]]
    }

    /// `(tet, local face)` for every face with no neighbor.
    pub fn boundary_faces(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (t, nb) in self.neighbors.iter().enumerate() {
            for (k, n) in nb.iter().enumerate() {
                if n.is_none() {
                    out.push((t, k));
                }
            }
        }
        out
    }

    /// Global vertex indices of a face, ordered so the right-hand normal
    /// points out of the tet.
    pub fn face_vertices(&self, t: usize, k: usize) -> [usize; 3] {
        TET_FACES[k].map(|l| self.tets[t][l])
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for &v in &self.vertices {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.dist(hi)
    }

    /// Mean length of the edges incident to `v`.
    pub fn local_size(&self, v: usize) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        let mut seen: Vec<usize> = Vec::with_capacity(32);
        for &t in self.vertex_tets(v) {
            for &w in &self.tets[t] {
                if w != v && !seen.contains(&w) {
                    seen.push(w);
                    sum += self.vertices[v].dist(self.vertices[w]);
                    n += 1;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Barycentric coordinates of `p` in tet `t`.
    pub fn barycentric(&self, t: usize, p: Vec3) -> [f64; 4] {
        let [a, b, c, d] = self.tet_points(t);
        let vol6 = (b - a).dot((c - a).cross(d - a));
        let l1 = (p - a).dot((c - a).cross(d - a)) / vol6;
        let l2 = (b - a).dot((p - a).cross(d - a)) / vol6;
        let l3 = (b - a).dot((c - a).cross(p - a)) / vol6;
        [1.0 - l1 - l2 - l3, l1, l2, l3]
    }

    /// Finds a tet containing `p`: a walk across faces from `hint`, then a
    /// linear scan if the walk hits the boundary or cycles. Points on shared
    /// faces resolve to the first tet found.
    pub fn locate(&self, p: Vec3, hint: Option<usize>) -> Option<usize> {
        const TOL: f64 = 1e-10;
        if self.tets.is_empty() {
            return None;
        }
        let mut t = hint.unwrap_or(0).min(self.tets.len() - 1);
        for _ in 0..self.tets.len().min(10_000) {
            let l = self.barycentric(t, p);
            let (k, m) = l
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
            if m >= -TOL {
                return Some(t);
            }
            match self.neighbors[t][k] {
                Some(n) => t = n,
                None => break,
            }
        }
        self.tets.iter().enumerate().find_map(|(t, tet)| {
            let mut lo = self.vertices[tet[0]];
            let mut hi = lo;
            for &i in &tet[1..] {
                lo = lo.min(self.vertices[i]);
                hi = hi.max(self.vertices[i]);
            }
            let pad = TOL * lo.dist(hi);
            let inside_box = (0..3).all(|k| p[k] >= lo[k] - pad && p[k] <= hi[k] + pad);
            (inside_box && self.barycentric(t, p).iter().all(|&l| l >= -TOL)).then_some(t)
        })
    }

    /// Value of the P1 hat function of vertex `j` at `y`.
    pub fn hat_eval(&self, j: usize, y: Vec3) -> Result<f64, OutsideMesh> {
        let t = self
            .locate(y, self.vertex_tets(j).first().copied())
            .ok_or(OutsideMesh(y.to_array()))?;
        let l = self.barycentric(t, y);
        Ok(self.tets[t]
            .iter()
            .position(|&v| v == j)
            .map_or(0.0, |k| l[k]))
    }

    /// P1 interpolation of a nodal field at `y`.
    pub fn interpolate(&self, field: &[f64], y: Vec3, hint: Option<usize>) -> Result<f64, OutsideMesh> {
        let t = self.locate(y, hint).ok_or(OutsideMesh(y.to_array()))?;
        let l = self.barycentric(t, y);
        Ok((0..4).map(|k| l[k] * field[self.tets[t][k]]).sum())
    }

    /// Boundary triangles as a surface mesh with outward normals taken from
    /// the owning tets. `label` maps each face (by its three points) to a tag.
    /// Returns the mesh plus, per surface vertex, the volume vertex it came from.
    pub fn boundary_surface(&self, mut label: impl FnMut([Vec3; 3]) -> i32) -> (SurfaceMesh, Vec<usize>) {
        let mut remap: HashMap<usize, usize> = HashMap::new();
        let mut vol_index = Vec::new();
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut labels = Vec::new();
        for (t, k) in self.boundary_faces() {
            let f = self.face_vertices(t, k);
            let pts = f.map(|v| self.vertices[v]);
            let tri = f.map(|v| {
                *remap.entry(v).or_insert_with(|| {
                    vertices.push(self.vertices[v]);
                    vol_index.push(v);
                    vertices.len() - 1
                })
            });
            triangles.push(tri);
            labels.push(label(pts));
        }
        let mesh = SurfaceMesh::from_oriented(vertices, triangles, labels)
            .expect("boundary faces of a valid tet mesh have positive area");
        (mesh, vol_index)
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub labels: Vec<i32>,
    pub normals: Vec<Vec3>,
    pub areas: Vec<f64>,
    /// Interior reference point used for orientation, if one was given.
    pub interior: Option<Vec3>,
}

impl SurfaceMesh {
    /// Takes triangle orientation as given (right-hand rule).
    pub fn from_oriented(
        vertices: Vec<Vec3>,
        triangles: Vec<[usize; 3]>,
        labels: Vec<i32>,
    ) -> Result<Self, MeshError> {
        let n = vertices.len();
        let mut normals = Vec::with_capacity(triangles.len());
        let mut areas = Vec::with_capacity(triangles.len());
        for (k, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= n) {
                return Err(MeshError::IndexOutOfRange {
                    element: k,
                    index: bad,
                    count: n,
                });
            }
            let [a, b, c] = tri.map(|i| vertices[i]);
            let cr = (b - a).cross(c - a);
            let area = 0.5 * cr.norm();
            let scale = a.dist(b).max(b.dist(c)).max(a.dist(c));
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] || area <= 1e-14 * scale * scale
            {
                return Err(MeshError::ZeroArea(k));
            }
            normals.push(cr / (2.0 * area));
            areas.push(area);
        }
        Ok(Self {
            vertices,
            triangles,
            labels,
            normals,
            areas,
            interior: None,
        })
    }

    /// Orients every normal away from `interior` (suits boundaries that are
    /// star-shaped with respect to that point).
    pub fn new(
        vertices: Vec<Vec3>,
        mut triangles: Vec<[usize; 3]>,
        labels: Vec<i32>,
        interior: Vec3,
    ) -> Result<Self, MeshError> {
        for tri in triangles.iter_mut() {
            if tri.iter().all(|&i| i < vertices.len()) {
                let [a, b, c] = tri.map(|i| vertices[i]);
                let centroid = (a + b + c) / 3.0;
                if (b - a).cross(c - a).dot(centroid - interior) < 0.0 {
                    tri.swap(1, 2);
                }
            }
        }
        let mut m = Self::from_oriented(vertices, triangles, labels)?;
        m.interior = Some(interior);
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses the `trimesh L K ix iy iz` text format.
    pub fn parse(text: &str) -> Result<Self, MeshError> {
        let mut lines = data_lines(text);
        let (hl, header) = lines.next().ok_or(parse_err(0, "empty file"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 6 || h[0] != "trimesh" {
            return Err(parse_err(hl, "expected header `trimesh <L> <K> ix iy iz`"));
        }
        let nv: usize = num(hl, h[1])?;
        let nt: usize = num(hl, h[2])?;
        let interior = Vec3::new(num(hl, h[3])?, num(hl, h[4])?, num(hl, h[5])?);
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (l, s) = lines.next().ok_or(parse_err(usize::MAX, "missing vertex lines"))?;
            vertices.push(vertex_line(l, s)?);
        }
        let mut triangles = Vec::with_capacity(nt);
        let mut labels = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (l, s) = lines.next().ok_or(parse_err(usize::MAX, "missing face lines"))?;
            let f: Vec<&str> = s.split_whitespace().collect();
            if f.first() != Some(&"f") {
                return Err(parse_err(l, "expected `f i0 i1 i2 label`"));
            }
            if f.len() == 4 {
                return Err(parse_err(l, "missing boundary label"));
            }
            if f.len() != 5 {
                return Err(parse_err(l, "expected `f i0 i1 i2 label`"));
            }
            triangles.push([num(l, f[1])?, num(l, f[2])?, num(l, f[3])?]);
            labels.push(num(l, f[4])?);
        }
        if let Some((l, _)) = lines.next() {
            return Err(parse_err(l, "trailing data after the last face"));
        }
        Self::new(vertices, triangles, labels, interior)
    }

    pub fn to_text(&self) -> String {
        let c = self.interior.unwrap_or_else(|| self.centroid());
        let mut s = String::new();
        writeln!(
            s,
            "trimesh {} {} {:e} {:e} {:e}",
            self.vertices.len(),
            self.triangles.len(),
            c.x,
            c.y,
            c.z
        )
        .unwrap();
        for v in &self.vertices {
            writeln!(s, "v {:e} {:e} {:e}", v.x, v.y, v.z).unwrap();
        }
        for (t, l) in self.triangles.iter().zip(&self.labels) {
            writeln!(s, "f {} {} {} {}", t[0], t[1], t[2], l).unwrap();
        }
        s
    }

    pub fn tri_points(&self, k: usize) -> [Vec3; 3] {
        self.triangles[k].map(|i| self.vertices[i])
    }

    fn centroid(&self) -> Vec3 {
        let s = self.vertices.iter().fold(Vec3::ZERO, |a, &v| a + v);
        s / self.vertices.len().max(1) as f64
    }

    /// Volume enclosed by a closed, outward-oriented surface.
    pub fn enclosed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|k| {
                let [a, b, c] = self.tri_points(k);
                ((a + b + c) / 3.0).dot(self.normals[k]) * self.areas[k] / 3.0
            })
            .sum()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Triangles carrying `label`.
    pub fn labelled(&self, label: i32) -> impl Iterator<Item = usize> + '_ {
        (0..self.triangles.len()).filter(move |&k| self.labels[k] == label)
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_err(line: usize, msg: &str) -> MeshError {
    MeshError::Parse {
        line,
        msg: msg.to_string(),
    }
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, MeshError> {
    s.parse()
        .map_err(|_| parse_err(line, &format!("cannot parse `{s}`")))
}

fn vertex_line(l: usize, s: &str) -> Result<Vec3, MeshError> {
    let f: Vec<&str> = s.split_whitespace().collect();
    if f.len() != 4 || f[0] != "v" {
        return Err(parse_err(l, "expected `v x y z`"));
    }
    Ok(Vec3::new(num(l, f[1])?, num(l, f[2])?, num(l, f[3])?))
}

/// Unit cube split into 6 tets around the main diagonal.
pub fn unit_cube() -> VolumeMesh {
    let mut v = Vec::new();
    for i in 0..8 {
        v.push(Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64));
    }
    let tets = vec![
        [0, 1, 3, 7],
        [0, 1, 5, 7],
        [0, 2, 3, 7],
        [0, 2, 6, 7],
        [0, 4, 5, 7],
        [0, 4, 6, 7],
    ];
    VolumeMesh::new(v, tets, vec![0; 6]).expect("unit cube is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_TET: &str = "tetmesh 4 1\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nt 0 1 2 3 7\n";

    #[test]
    fn single_tet_file() {
        let m = VolumeMesh::parse(ONE_TET).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_tets(), 1);
        assert_eq!(m.regions, vec![7]);
        assert!((m.volume(0) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn negative_tets_are_flipped() {
        let m = VolumeMesh::parse("tetmesh 4 1\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nt 0 2 1 3 0\n").unwrap();
        assert!(m.volume(0) > 0.0);
    }

    #[test]
    fn cube_split_counts() {
        let m = unit_cube();
        assert_eq!(m.num_vertices(), 8);
        assert_eq!(m.num_tets(), 6);
        assert_eq!(m.boundary_faces().len(), 12);
        let vol: f64 = (0..6).map(|t| m.volume(t)).sum();
        assert!((vol - 1.0).abs() < 1e-14);
    }

    #[test]
    fn out_of_range_index_names_the_tet() {
        let mut text = unit_cube().to_text();
        let last = text.trim_end().rfind('\n').unwrap();
        text.truncate(last + 1);
        text.push_str("t 0 4 6 99 0\n");
        match VolumeMesh::parse(&text) {
            Err(MeshError::IndexOutOfRange { element, index, .. }) => {
                assert_eq!((element, index), (5, 99));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flat_tet_is_rejected() {
        let err = VolumeMesh::parse("tetmesh 4 1\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nt 0 1 2 3 0\n");
        assert!(matches!(err, Err(MeshError::DegenerateTet(0))));
    }

    #[test]
    fn text_round_trip() {
        let m = unit_cube();
        let back = VolumeMesh::parse(&m.to_text()).unwrap();
        assert_eq!(back.tets, m.tets);
        assert_eq!(back.vertices, m.vertices);
    }

    #[test]
    fn hat_values() {
        let m = unit_cube();
        for j in 0..8 {
            assert_eq!(m.hat_eval(j, m.vertices[j]).unwrap(), 1.0);
        }
        let c = m.centroid(3);
        assert!((m.hat_eval(0, c).unwrap() - 0.25).abs() < 1e-14);
        let y = Vec3::new(0.3, 0.6, 0.2);
        let t = m.locate(y, None).unwrap();
        let s: f64 = m.tets[t].iter().map(|&j| m.hat_eval(j, y).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(m.hat_eval(0, Vec3::new(2.0, 0.5, 0.5)).is_err());
    }

    #[test]
    fn square_normals_face_away_from_interior() {
        let s = SurfaceMesh::parse(
            "trimesh 4 2 0.5 0.5 0.5\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 0 1 2 1\nf 0 2 3 1\n",
        )
        .unwrap();
        for n in &s.normals {
            assert!((n.z + 1.0).abs() < 1e-15 && n.x == 0.0 && n.y == 0.0);
        }
    }

    #[test]
    fn cube_surface_is_closed() {
        let (s, map) = unit_cube().boundary_surface(|_| 0);
        assert_eq!(s.triangles.len(), 12);
        assert_eq!(map.len(), 8);
        assert!((s.enclosed_volume() - 1.0).abs() < 1e-12);
        let sum = (0..12).fold(Vec3::ZERO, |a, k| a + s.normals[k] * s.areas[k]);
        assert!(sum.norm() <= 1e-10 * s.total_area());
        let back = SurfaceMesh::parse(&s.to_text()).unwrap();
        assert!((back.enclosed_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_vertex_triangle_is_rejected() {
        let r = SurfaceMesh::parse("trimesh 3 1 0 0 1\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 1 2\n");
        assert!(matches!(r, Err(MeshError::ZeroArea(0))));
        let r = SurfaceMesh::parse("trimesh 3 1 0 0 1\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n");
        assert!(matches!(r, Err(MeshError::Parse { .. })));
    }
}
