//! Ray geometry: optical depth through the mesh, boundary exit points,
//! mirror points and single-bounce specular paths off planar reflectors.

use std::collections::HashMap;

use smallvec::SmallVec;

use crate::bvh::{Bvh, Tri};
use crate::mesh::{SurfaceMesh, VolumeMesh};
use crate::vec3::Vec3;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GeometryError {
    #[error("region {0} of the mesh has no absorption data")]
    UnknownRegion(i32),
    #[error("absorption model: {0}")]
    Model(String),
    #[error("reflector: {0}")]
    Reflector(String),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Piecewise constant κ and scattering albedo `a`, per band and per region tag.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionModel {
    pub bands: Vec<Band>,
    pub regions: Vec<i32>,
    /// `kappa[band][region]`
    pub kappa: Vec<Vec<f64>>,
    /// `scatter[band][region]`
    pub scatter: Vec<Vec<f64>>,
}

impl AbsorptionModel {
    pub fn new(
        bands: Vec<Band>,
        regions: Vec<i32>,
        kappa: Vec<Vec<f64>>,
        scatter: Vec<Vec<f64>>,
    ) -> Result<Self, GeometryError> {
        let bad = |m: String| Err(GeometryError::Model(m));
        if bands.is_empty() {
            return bad("no bands".into());
        }
        for (b, band) in bands.iter().enumerate() {
            if !(band.lo >= 0.0 && band.hi >= band.lo) || band.lo.is_nan() {
                return bad(format!("band {b} [{}, {}) is malformed", band.lo, band.hi));
            }
            if b > 0 && band.lo < bands[b - 1].hi {
                return bad(format!("band {b} overlaps or precedes band {}", b - 1));
            }
        }
        let mut sorted = regions.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != regions.len() {
            return bad("duplicate region tag".into());
        }
        for (name, table, lo, hi) in [("kappa", &kappa, 0.0, f64::INFINITY), ("scatter", &scatter, 0.0, 1.0)] {
            if table.len() != bands.len() || table.iter().any(|r| r.len() != regions.len()) {
                return bad(format!("{name} table must be bands x regions"));
            }
            if table.iter().flatten().any(|&v| !(v >= lo && v <= hi) || !v.is_finite()) {
                return bad(format!("{name} value out of range [{lo}, {hi}]"));
            }
        }
        Ok(Self {
            bands,
            regions,
            kappa,
            scatter,
        })
    }

    /// One band `[0, inf)` with no scattering.
    pub fn grey(regions: &[(i32, f64)]) -> Self {
        Self::new(
            vec![Band {
                lo: 0.0,
                hi: f64::INFINITY,
            }],
            regions.iter().map(|r| r.0).collect(),
            vec![regions.iter().map(|r| r.1).collect()],
            vec![vec![0.0; regions.len()]],
        )
        .expect("grey model is well formed")
    }

    pub fn num_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn region_index(&self, tag: i32) -> Option<usize> {
        self.regions.iter().position(|&r| r == tag)
    }

    pub fn kappa(&self, band: usize, tag: i32) -> Option<f64> {
        self.region_index(tag).map(|r| self.kappa[band][r])
    }

    pub fn scatter(&self, band: usize, tag: i32) -> Option<f64> {
        self.region_index(tag).map(|r| self.scatter[band][r])
    }
}

/// Optical depth, with an explicit flag for paths that leave the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Depth {
    Finite(f64),
    Blocked,
}

impl Depth {
    pub fn attenuation(self) -> f64 {
        match self {
            Depth::Finite(d) => (-d).exp(),
            Depth::Blocked => 0.0,
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Depth::Finite(d) => Some(d),
            Depth::Blocked => None,
        }
    }

    pub fn is_blocked(self) -> bool {
        self == Depth::Blocked
    }
}

impl std::ops::Add for Depth {
    type Output = Depth;
    fn add(self, o: Depth) -> Depth {
        match (self, o) {
            (Depth::Finite(a), Depth::Finite(b)) => Depth::Finite(a + b),
            _ => Depth::Blocked,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpticalPath {
    pub segments: Vec<(Vec3, Vec3)>,
    pub depth_per_band: Vec<Depth>,
}

impl OpticalPath {
    pub fn length(&self) -> f64 {
        self.segments.iter().map(|(a, b)| a.dist(*b)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitPoint {
    pub point: Vec3,
    pub tau: f64,
    pub label: i32,
    pub triangle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarReflector {
    pub point: Vec3,
    pub normal: Vec3,
    pub label: i32,
    pub r0: f64,
}

impl PlanarReflector {
    pub fn new(point: Vec3, normal: Vec3, label: i32, r0: f64) -> Result<Self, GeometryError> {
        if !(0.0..=1.0).contains(&r0) {
            return Err(GeometryError::Reflector(format!("reflectance {r0} outside [0, 1]")));
        }
        let n = normal.norm();
        if !(n > 0.0) || !n.is_finite() || !point.is_finite() {
            return Err(GeometryError::Reflector("plane normal must be a nonzero vector".into()));
        }
        Ok(Self {
            point,
            normal: normal / n,
            label,
            r0,
        })
    }

    pub fn signed_distance(&self, x: Vec3) -> f64 {
        (x - self.point).dot(self.normal)
    }
}

/// Image of `x` across the reflector plane.
pub fn mirror_point(x: Vec3, r: &PlanarReflector) -> Vec3 {
    x - r.normal * (2.0 * r.signed_distance(x))
}

/// Triangulated reflector patch, projected to the plane and bucketed on a grid.
#[derive(Debug, Clone)]
struct Patch {
    origin: Vec3,
    u: Vec3,
    v: Vec3,
    tris: Vec<[[f64; 2]; 3]>,
    ids: Vec<usize>,
    lo: [f64; 2],
    cell: f64,
    dims: [usize; 2],
    buckets: Vec<Vec<u32>>,
    points: Vec<Vec3>,
}

impl Patch {
    fn build(r: &PlanarReflector, surface: &SurfaceMesh, ids: Vec<usize>) -> Self {
        let n = r.normal;
        let helper = if n.x.abs() < 0.9 {
            Vec3::new(1.0, 0.0, 0.0)
        } else {
            Vec3::new(0.0, 1.0, 0.0)
        };
        let u = n.cross(helper).normalized();
        let v = n.cross(u);
        let origin = r.point;
        let proj = |p: Vec3| [(p - origin).dot(u), (p - origin).dot(v)];
        let tris: Vec<[[f64; 2]; 3]> = ids.iter().map(|&k| surface.tri_points(k).map(proj)).collect();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for t in &tris {
            for p in t {
                for a in 0..2 {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
        }
        let area: f64 = ids.iter().map(|&k| surface.areas[k]).sum();
        let cell = (2.0 * area / ids.len().max(1) as f64).sqrt().max(1e-12);
        let dims = [0, 1].map(|a| (((hi[a] - lo[a]) / cell).ceil() as usize).clamp(1, 4096));
        let mut buckets = vec![Vec::new(); dims[0] * dims[1]];
        for (k, t) in tris.iter().enumerate() {
            let mut tlo = [f64::INFINITY; 2];
            let mut thi = [f64::NEG_INFINITY; 2];
            for p in t {
                for a in 0..2 {
                    tlo[a] = tlo[a].min(p[a]);
                    thi[a] = thi[a].max(p[a]);
                }
            }
            let c0 = [0, 1].map(|a| Self::cell_of(tlo[a] - 1e-9 * cell, lo[a], cell, dims[a]));
            let c1 = [0, 1].map(|a| Self::cell_of(thi[a] + 1e-9 * cell, lo[a], cell, dims[a]));
            for i in c0[0]..=c1[0] {
                for j in c0[1]..=c1[1] {
                    buckets[i + dims[0] * j].push(k as u32);
                }
            }
        }
        let points = ids
            .iter()
            .flat_map(|&k| surface.tri_points(k))
            .collect();
        Self {
            origin,
            u,
            v,
            tris,
            ids,
            lo,
            cell,
            dims,
            buckets,
            points,
        }
    }

    fn cell_of(x: f64, lo: f64, cell: f64, dim: usize) -> usize {
        // the cast truncates toward zero and saturates negatives to 0
        (((x - lo) / cell) as usize).min(dim - 1)
    }

    /// Surface triangle containing the in-plane point `p` (closed patch).
    fn locate(&self, p: Vec3) -> Option<usize> {
        let q = [(p - self.origin).dot(self.u), (p - self.origin).dot(self.v)];
        for a in 0..2 {
            let slack = 1e-9 * self.cell;
            if q[a] < self.lo[a] - slack || q[a] > self.lo[a] + self.cell * self.dims[a] as f64 + slack {
                return None;
            }
        }
        let i = Self::cell_of(q[0], self.lo[0], self.cell, self.dims[0]);
        let j = Self::cell_of(q[1], self.lo[1], self.cell, self.dims[1]);
        for &k in &self.buckets[i + self.dims[0] * j] {
            let [a, b, c] = self.tris[k as usize];
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            let l1 = ((q[0] - a[0]) * (c[1] - a[1]) - (q[1] - a[1]) * (c[0] - a[0])) / det;
            let l2 = ((b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0])) / det;
            let eps = 1e-10;
            if l1 >= -eps && l2 >= -eps && l1 + l2 <= 1.0 + eps {
                return Some(self.ids[k as usize]);
            }
        }
        None
    }
}

/// The configured planar reflectors together with their patches.
#[derive(Debug, Clone)]
pub struct ReflectorSet {
    pub reflectors: Vec<PlanarReflector>,
    patches: Vec<Patch>,
    tol: f64,
    /// Pairs of reflectors whose patches face each other; such setups would
    /// produce double bounces, which are not modelled.
    pub warnings: Vec<String>,
}

impl ReflectorSet {
    pub fn empty() -> Self {
        Self {
            reflectors: Vec::new(),
            patches: Vec::new(),
            tol: 0.0,
            warnings: Vec::new(),
        }
    }

    /// Binds each reflector to the surface triangles carrying its label. The
    /// normal is flipped if needed so that it points out of the domain.
    pub fn new(reflectors: Vec<PlanarReflector>, surface: &SurfaceMesh) -> Result<Self, GeometryError> {
        let (mut lo, mut hi) = (Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY), Vec3::ZERO);
        hi = hi - lo;
        for &p in &surface.vertices {
            lo = lo.min(p);
            hi = hi.max(p);
        }
        let scale = lo.dist(hi).max(1e-300);
        let tol = 1e-9 * scale;
        let mut out = Vec::with_capacity(reflectors.len());
        let mut patches = Vec::with_capacity(reflectors.len());
        for mut r in reflectors {
            let ids: Vec<usize> = surface.labelled(r.label).collect();
            if ids.is_empty() {
                return Err(GeometryError::Reflector(format!(
                    "label {} has no surface triangles",
                    r.label
                )));
            }
            let mut nsum = Vec3::ZERO;
            for &k in &ids {
                for p in surface.tri_points(k) {
                    if r.signed_distance(p).abs() > tol {
                        return Err(GeometryError::Reflector(format!(
                            "triangle {k} of label {} is not on the reflector plane",
                            r.label
                        )));
                    }
                }
                nsum += surface.normals[k] * surface.areas[k];
            }
            if nsum.dot(r.normal) < 0.0 {
                r.normal = -r.normal;
            }
            patches.push(Patch::build(&r, surface, ids));
            out.push(r);
        }
        let mut warnings = Vec::new();
        for a in 0..out.len() {
            for b in a + 1..out.len() {
                let sees = |p: &Patch, r: &PlanarReflector| p.points.iter().any(|&x| r.signed_distance(x) < -tol);
                if sees(&patches[a], &out[b]) && sees(&patches[b], &out[a]) {
                    warnings.push(format!(
                        "reflectors {} and {} face each other; only single bounces are modelled",
                        out[a].label, out[b].label
                    ));
                }
            }
        }
        Ok(Self {
            reflectors: out,
            patches,
            tol,
            warnings,
        })
    }

    pub fn len(&self) -> usize {
        self.reflectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reflectors.is_empty()
    }

    /// Point `x'` on reflector `k` where the specular path from `x` to `y`
    /// bounces, with the patch triangle holding it. `None` when `x` and `y`
    /// are on opposite sides, both on the plane, or the bounce misses the patch.
    pub fn reflection_point(&self, k: usize, x: Vec3, y: Vec3) -> Option<(Vec3, usize)> {
        let r = &self.reflectors[k];
        let sx = r.signed_distance(x);
        let sy = r.signed_distance(y);
        if sx > self.tol || sy > self.tol || (sx.abs() <= self.tol && sy.abs() <= self.tol) {
            return None;
        }
        let sx = sx.min(0.0);
        let sy = sy.min(0.0);
        let xbar = x - r.normal * (2.0 * sx);
        // xbar is at height -sx >= 0, y at sy <= 0
        let t = -sx / (-sx - sy);
        let mut p = xbar + (y - xbar) * t;
        p = p - r.normal * r.signed_distance(p);
        self.patches[k].locate(p).map(|tri| (p, tri))
    }
}

/// Acceleration structures for optical depth and exit-point queries.
#[derive(Debug, Clone)]
pub struct TransportGeometry<'m> {
    pub mesh: &'m VolumeMesh,
    /// Region index (into the absorption model) per tet.
    pub tet_region: Vec<u32>,
    interfaces: Bvh,
    /// `(front, back)` region per interface face; `None` is outside the domain.
    sides: Vec<(Option<u32>, Option<u32>)>,
    boundary: Bvh,
    boundary_labels: Vec<i32>,
    boundary_normals: Vec<Vec3>,
    diameter: f64,
    tol: f64,
}

impl<'m> TransportGeometry<'m> {
    /// Collects the faces a segment can cross where κ may change: faces between
    /// tets of different regions and boundary faces off the convex hull.
    /// Segments between two points of the domain never cross a hull face.
    pub fn new(mesh: &'m VolumeMesh, surface: &SurfaceMesh, model: &AbsorptionModel) -> Result<Self, GeometryError> {
        let tet_region = mesh
            .regions
            .iter()
            .map(|&tag| model.region_index(tag).map(|r| r as u32).ok_or(GeometryError::UnknownRegion(tag)))
            .collect::<Result<Vec<_>, _>>()?;
        let diameter = mesh.diameter().max(1e-300);
        let tol = 1e-9 * diameter;

        let bfaces = mesh.boundary_faces();
        let mut bverts: Vec<usize> = bfaces.iter().flat_map(|&(t, k)| mesh.face_vertices(t, k)).collect();
        bverts.sort_unstable();
        bverts.dedup();
        let bpts: Vec<Vec3> = bverts.iter().map(|&v| mesh.vertices[v]).collect();
        let mut hull_planes: HashMap<[i64; 4], bool> = HashMap::new();

        let mut tris = Vec::new();
        let mut sides = Vec::new();
        for (t, nb) in mesh.neighbors.iter().enumerate() {
            for (k, other) in nb.iter().enumerate() {
                let f = mesh.face_vertices(t, k).map(|v| mesh.vertices[v]);
                let side = match *other {
                    Some(o) if o > t && tet_region[o] != tet_region[t] => (Some(tet_region[o]), Some(tet_region[t])),
                    Some(_) => continue,
                    None => {
                        let n = (f[1] - f[0]).cross(f[2] - f[0]).normalized();
                        let d = n.dot(f[0]);
                        let q = |x: f64| (x * 1e8).round() as i64;
                        let key = [q(n.x), q(n.y), q(n.z), q(d / diameter)];
                        let hull = *hull_planes
                            .entry(key)
                            .or_insert_with(|| bpts.iter().all(|p| n.dot(*p) - d <= tol));
                        if hull {
                            continue;
                        }
                        (None, Some(tet_region[t]))
                    }
                };
                tris.push(Tri::new(f[0], f[1], f[2], sides.len() as u32));
                sides.push(side);
            }
        }
        let boundary = Bvh::build(
            (0..surface.triangles.len())
                .map(|k| {
                    let [a, b, c] = surface.tri_points(k);
                    Tri::new(a, b, c, k as u32)
                })
                .collect(),
        );
        Ok(Self {
            mesh,
            tet_region,
            interfaces: Bvh::build(tris),
            sides,
            boundary,
            boundary_labels: surface.labels.clone(),
            boundary_normals: surface.normals.clone(),
            diameter,
            tol,
        })
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn num_interface_faces(&self) -> usize {
        self.interfaces.len()
    }

    /// κ of `band` indexed by region index.
    pub fn kappa_table<'a>(&self, model: &'a AbsorptionModel, band: usize) -> &'a [f64] {
        &model.kappa[band]
    }

    /// Optical depth of `[start, end]` given the region at `start` (seen
    /// along the segment). Returns the depth and the region at `end`, or
    /// `None` when the segment leaves the domain.
    #[inline]
    pub fn trace(&self, start: Vec3, region: u32, end: Vec3, kappa: &[f64]) -> Option<(f64, u32)> {
        let d = end - start;
        let len = d.norm();
        if len == 0.0 {
            return Some((0.0, region));
        }
        let tt = self.tol / len;
        let mut hits: SmallVec<[(f64, Option<u32>); 8]> = SmallVec::new();
        self.interfaces.segment(start, d, -tt, 1.0 - tt, 1e-12, |t, tri| {
            let dn = d.dot(tri.normal());
            if dn != 0.0 {
                let (front, back) = self.sides[tri.id as usize];
                hits.push((t, if dn > 0.0 { front } else { back }));
            }
        });
        let mut r = region;
        if hits.is_empty() {
            return Some((kappa[r as usize] * len, r));
        }
        hits.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut depth = 0.0;
        let mut prev = 0.0;
        for (t, next) in hits {
            let t = t.max(0.0);
            depth += kappa[r as usize] * (t - prev);
            prev = t;
            r = next?;
        }
        depth += kappa[r as usize] * (1.0 - prev);
        Some((depth * len, r))
    }

    /// Tet and region seen when leaving `x` toward `toward`.
    pub fn locate_toward(&self, x: Vec3, toward: Vec3) -> Option<(usize, u32)> {
        let d = toward - x;
        let len = d.norm();
        let step = if len > 0.0 { (1e-7 * self.diameter / len).min(0.5) } else { 0.0 };
        let p = x + d * step;
        let t = self.mesh.locate(p, None)?;
        Some((t, self.tet_region[t]))
    }

    /// `|y - x| ∫ κ` along the segment for one band; `Blocked` when the
    /// segment leaves the domain or an endpoint is outside.
    pub fn optical_depth(&self, x: Vec3, y: Vec3, model: &AbsorptionModel, band: usize) -> Depth {
        if x == y {
            return Depth::Finite(0.0);
        }
        let Some((_, region)) = self.locate_toward(x, y) else {
            return Depth::Blocked;
        };
        if self.locate_toward(y, x).is_none() {
            return Depth::Blocked;
        }
        match self.trace(x, region, y, &model.kappa[band]) {
            Some((d, _)) => Depth::Finite(d),
            None => Depth::Blocked,
        }
    }

    /// First boundary point `x - tau omega` reached from `x` going against `omega`.
    pub fn exit_point(&self, x: Vec3, omega: Vec3) -> Option<ExitPoint> {
        self.exit_from(x, omega).or_else(|| {
            // tangent to the face holding x: nudge inward and retry
            let k = self.face_containing(x)?;
            let nudged = x - self.boundary_normals[k] * (1e-12 * self.diameter);
            self.exit_from(nudged, omega)
        })
    }

    fn exit_from(&self, x: Vec3, omega: Vec3) -> Option<ExitPoint> {
        let d = -omega.normalized();
        let reach = 2.0 * self.diameter;
        let dir = d * reach;
        let t_min = self.tol / reach;
        let mut best: Option<(f64, usize)> = None;
        self.boundary.segment(x, dir, t_min, 1.0, 1e-12, |t, tri| {
            if dir.dot(tri.normal()) > 0.0 && best.map_or(true, |(b, _)| t < b) {
                best = Some((t, tri.id as usize));
            }
        });
        best.map(|(t, k)| ExitPoint {
            point: x + dir * t,
            tau: t * reach,
            label: self.boundary_labels[k],
            triangle: k,
        })
    }

    fn face_containing(&self, x: Vec3) -> Option<usize> {
        self.boundary.tris().iter().find_map(|tri| {
            let n = tri.normal();
            let nn = n.norm();
            let h = (x - tri.a).dot(n) / nn;
            if h.abs() > 10.0 * self.tol {
                return None;
            }
            let on = x - n * (h / nn);
            tri.intersect(on + n / nn, -n / nn, 1e-9).map(|_| tri.id as usize)
        })
    }

    /// Up to one specular path per reflector, with per-band depths along
    /// `[x, x'] ∪ [x', y]`.
    pub fn reflected_paths(
        &self,
        x: Vec3,
        y: Vec3,
        reflectors: &ReflectorSet,
        model: &AbsorptionModel,
    ) -> Vec<(usize, Vec3, OpticalPath)> {
        (0..reflectors.len())
            .filter_map(|k| {
                let (p, _) = reflectors.reflection_point(k, x, y)?;
                let depth_per_band = (0..model.num_bands())
                    .map(|b| self.optical_depth(x, p, model, b) + self.optical_depth(p, y, model, b))
                    .collect();
                Some((
                    k,
                    p,
                    OpticalPath {
                        segments: vec![(x, p), (p, y)],
                        depth_per_band,
                    },
                ))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgen::{boundary, box_mesh, grid_mesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn uniform_slab_depth() {
        let m = box_mesh(Vec3::ZERO, Vec3::new(12.0, 2.0, 2.0), [6, 2, 2]);
        let s = boundary(&m, |_| 0);
        let model = AbsorptionModel::grey(&[(0, 0.1)]);
        let g = TransportGeometry::new(&m, &s, &model).unwrap();
        let d = g.optical_depth(Vec3::new(1.0, 1.0, 1.0), Vec3::new(11.0, 1.0, 1.0), &model, 0);
        assert!(close(d.value().unwrap(), 1.0, 1e-12));
    }

    fn two_region_bar() -> (VolumeMesh, AbsorptionModel) {
        let xs: Vec<f64> = (0..=8).map(|k| 2.5 * k as f64).collect();
        let ys = [0.0, 1.0, 2.0];
        let m = grid_mesh(&xs, &ys, &ys, |c| Some(if c.x < 10.0 { 1 } else { 2 }));
        let model = AbsorptionModel::grey(&[(1, 0.1), (2, 1e-4)]);
        (m, model)
    }

    #[test]
    fn two_region_chord_matches_dense_sampling() {
        let (m, model) = two_region_bar();
        let s = boundary(&m, |_| 0);
        let g = TransportGeometry::new(&m, &s, &model).unwrap();
        let x = Vec3::new(0.0, 1.0, 1.0);
        let y = Vec3::new(20.0, 1.0, 1.0);
        let d = g.optical_depth(x, y, &model, 0).value().unwrap();
        assert!(close(d, 1.001, 1e-12), "{d}");
        // oblique segment against a midpoint-sampled oracle
        let x = Vec3::new(0.3, 0.2, 1.7);
        let y = Vec3::new(19.1, 1.9, 0.4);
        let n = 100_000;
        let kap = |p: Vec3| if p.x < 10.0 { 0.1 } else { 1e-4 };
        let oracle: f64 = (0..n)
            .map(|k| kap(x + (y - x) * ((k as f64 + 0.5) / n as f64)))
            .sum::<f64>()
            * x.dist(y)
            / n as f64;
        let d = g.optical_depth(x, y, &model, 0).value().unwrap();
        assert!(close(d, oracle, 1e-5), "{d} vs {oracle}");
    }

    #[test]
    fn crossing_the_notch_is_blocked() {
        let xs = [0.0, 1.0, 2.0];
        let zs = [0.0, 1.0];
        // L-shape in x-y, extruded in z
        let m = grid_mesh(&xs, &xs, &zs, |c| (!(c.x > 1.0 && c.y > 1.0)).then_some(0));
        let s = boundary(&m, |_| 0);
        let model = AbsorptionModel::grey(&[(0, 0.5)]);
        let g = TransportGeometry::new(&m, &s, &model).unwrap();
        assert!(g.num_interface_faces() > 0);
        let a = Vec3::new(1.8, 0.5, 0.5);
        let b = Vec3::new(0.5, 1.8, 0.5);
        assert_eq!(g.optical_depth(a, b, &model, 0), Depth::Blocked);
        assert_eq!(g.optical_depth(a, b, &model, 0).attenuation(), 0.0);
        let c = Vec3::new(0.5, 0.5, 0.5);
        assert!(close(g.optical_depth(a, c, &model, 0).value().unwrap(), 0.5 * 1.3, 1e-12));
    }

    #[test]
    fn depth_is_additive() {
        let (m, model) = two_region_bar();
        let s = boundary(&m, |_| 0);
        let g = TransportGeometry::new(&m, &s, &model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = |rng: &mut ChaCha8Rng| Vec3::new(rng.gen::<f64>() * 20.0, rng.gen::<f64>() * 2.0, rng.gen::<f64>() * 2.0);
            let (x, y) = (p(&mut rng), p(&mut rng));
            let mid = x + (y - x) * rng.gen::<f64>();
            let whole = g.optical_depth(x, y, &model, 0).value().unwrap();
            let parts = g.optical_depth(x, mid, &model, 0).value().unwrap() + g.optical_depth(mid, y, &model, 0).value().unwrap();
            assert!((whole - parts).abs() <= 1e-10 * whole.max(1e-12));
        }
    }

    #[test]
    fn exit_points_in_the_unit_cube() {
        let m = crate::mesh::unit_cube();
        let s = boundary(&m, |p| if p.iter().all(|q| q.z == 0.0) { 5 } else { 1 });
        let model = AbsorptionModel::grey(&[(0, 1.0)]);
        let g = TransportGeometry::new(&m, &s, &model).unwrap();
        let c = Vec3::new(0.5, 0.5, 0.5);
        let e = g.exit_point(c, Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert!(e.point.dist(Vec3::new(0.5, 0.5, 0.0)) < 1e-12);
        assert!((e.tau - 0.5).abs() < 1e-12);
        assert_eq!(e.label, 5);
        let w = Vec3::new(1.0, 1.0, 1.0).normalized();
        let e = g.exit_point(c, w).unwrap();
        assert!(e.point.norm() < 1e-9);
        assert!((e.tau - 3f64.sqrt() / 2.0).abs() < 1e-9);
        // on the bottom face, looking back through the cube
        let e = g.exit_point(Vec3::new(0.5, 0.5, 0.0), Vec3::new(0.0, 0.0, -1.0)).unwrap();
        assert!((e.tau - 1.0).abs() < 1e-12);
        // tangent to the bottom face
        let e = g.exit_point(Vec3::new(0.5, 0.5, 0.0), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((e.tau - 0.5).abs() < 1e-9);
    }

    fn plane_patch(label: i32) -> SurfaceMesh {
        SurfaceMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(10.0, 0.0, 0.0),
                Vec3::new(10.0, 10.0, 0.0),
                Vec3::new(0.0, 10.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![label, label],
            Vec3::new(5.0, 5.0, 5.0),
        )
        .unwrap()
    }

    #[test]
    fn mirror_examples() {
        let r = PlanarReflector::new(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), 0, 1.0).unwrap();
        assert_eq!(mirror_point(Vec3::new(3.0, 1.0, 2.0), &r), Vec3::new(-3.0, 1.0, 2.0));
        assert_eq!(mirror_point(Vec3::new(0.0, 4.0, 2.0), &r), Vec3::new(0.0, 4.0, 2.0));
        let r = PlanarReflector::new(Vec3::new(1.0, 1.0, 1.0), Vec3::new(1.0, 0.0, 0.0), 0, 1.0).unwrap();
        assert_eq!(mirror_point(Vec3::new(4.0, 0.0, 0.0), &r), Vec3::new(-2.0, 0.0, 0.0));
        assert!(PlanarReflector::new(Vec3::ZERO, Vec3::ZERO, 0, 1.0).is_err());
        assert!(PlanarReflector::new(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0), 0, 1.5).is_err());
    }

    #[test]
    fn reflection_point_examples() {
        let s = plane_patch(3);
        let r = PlanarReflector::new(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0), 3, 1.0).unwrap();
        let set = ReflectorSet::new(vec![r], &s).unwrap();
        // normal was flipped to point out of the domain
        assert_eq!(set.reflectors[0].normal, Vec3::new(0.0, 0.0, -1.0));
        let (p, _) = set.reflection_point(0, Vec3::new(1.0, 1.0, 1.0), Vec3::new(3.0, 3.0, 1.0)).unwrap();
        assert!(p.dist(Vec3::new(2.0, 2.0, 0.0)) < 1e-14);
        let (p, _) = set.reflection_point(0, Vec3::new(1.0, 1.0, 1.0), Vec3::new(1.0, 1.0, 3.0)).unwrap();
        assert!(p.dist(Vec3::new(1.0, 1.0, 0.0)) < 1e-14);
        assert!(set.reflection_point(0, Vec3::new(9.0, 9.0, 1.0), Vec3::new(13.0, 13.0, 1.0)).is_none());
        assert!(set.reflection_point(0, Vec3::new(1.0, 1.0, 1.0), Vec3::new(1.0, 1.0, -1.0)).is_none());
        assert!(set.warnings.is_empty());
    }

    #[test]
    fn orthogonal_reflectors_warn() {
        let m = box_mesh(Vec3::ZERO, Vec3::new(2.0, 2.0, 2.0), [2, 2, 2]);
        let s = boundary(&m, |p| {
            if p.iter().all(|q| q.x == 0.0) {
                1
            } else if p.iter().all(|q| q.y == 0.0) {
                2
            } else {
                0
            }
        });
        let rs = vec![
            PlanarReflector::new(Vec3::ZERO, Vec3::new(-1.0, 0.0, 0.0), 1, 1.0).unwrap(),
            PlanarReflector::new(Vec3::ZERO, Vec3::new(0.0, -1.0, 0.0), 2, 1.0).unwrap(),
        ];
        let set = ReflectorSet::new(rs, &s).unwrap();
        assert_eq!(set.warnings.len(), 1);
        let model = AbsorptionModel::grey(&[(0, 0.2)]);
        let g = TransportGeometry::new(&m, &s, &model).unwrap();
        let x = Vec3::new(0.5, 0.7, 1.0);
        let y = Vec3::new(1.5, 0.4, 1.2);
        let paths = g.reflected_paths(x, y, &set, &model);
        assert_eq!(paths.len(), 2);
        for (k, p, path) in paths {
            let r = &set.reflectors[k];
            let xbar = mirror_point(x, r);
            assert!((xbar.dist(y) - path.length()).abs() < 1e-12);
            let d = path.depth_per_band[0].value().unwrap();
            assert!(close(d, 0.2 * path.length(), 1e-10));
            // equal angles with the normal
            let a = (x - p).normalized().dot(r.normal);
            let b = (y - p).normalized().dot(r.normal);
            assert!((a - b).abs() < 1e-10);
        }
        let empty = ReflectorSet::empty();
        assert!(g.reflected_paths(x, y, &empty, &model).is_empty());
    }
}
