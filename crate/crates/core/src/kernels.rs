//! Entry generators for the volume operator `G` (volume vertex to volume
//! vertex) and the boundary source operator `S` (source-surface vertex to
//! volume vertex), both integrated by quadrature against P1 hat functions.

use std::f64::consts::PI;

use rte_hmatrix::{aca, AcaResult, BlockAccess, HMatrix, HMatrixError, LowRank, MatrixGenerator};

use crate::mesh::{SurfaceMesh, VolumeMesh, TET_FACES};
use crate::quadrature;
use crate::transport::{AbsorptionModel, ReflectorSet, TransportGeometry};
use crate::vec3::Vec3;

const INV_4PI: f64 = 1.0 / (4.0 * PI);

/// Quadrature knobs shared by both operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Elements closer than `near_factor * h_i` to the target use `near_degree`.
    pub near_factor: f64,
    pub near_degree: usize,
    pub far_degree: usize,
    /// Gauss points along the ray for elements touching the target.
    pub radial_points: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            near_factor: 2.0,
            near_degree: 5,
            far_degree: 2,
            radial_points: 3,
        }
    }
}

/// Everything an entry evaluation reads, for one band.
pub struct KernelContext<'a> {
    pub mesh: &'a VolumeMesh,
    pub surface: &'a SurfaceMesh,
    pub geometry: &'a TransportGeometry<'a>,
    pub model: &'a AbsorptionModel,
    pub reflectors: &'a ReflectorSet,
    pub band: usize,
    pub quadrature: QuadratureOptions,
}

/// Target vertex with its mirror images.
struct Target {
    index: usize,
    x: Vec3,
    mirrors: smallvec::SmallVec<[Vec3; 4]>,
    r_near: f64,
}

struct Common<'a> {
    ctx: &'a KernelContext<'a>,
    kappa: &'a [f64],
    h: Vec<f64>,
    r0: Vec<f64>,
}

impl<'a> Common<'a> {
    fn new(ctx: &'a KernelContext<'a>) -> Self {
        let mesh = ctx.mesh;
        Self {
            ctx,
            kappa: &ctx.model.kappa[ctx.band],
            h: (0..mesh.num_vertices()).map(|v| mesh.local_size(v)).collect(),
            r0: ctx.reflectors.reflectors.iter().map(|r| r.r0).collect(),
        }
    }

    fn target(&self, i: usize) -> Target {
        let x = self.ctx.mesh.vertices[i];
        Target {
            index: i,
            x,
            mirrors: self
                .ctx
                .reflectors
                .reflectors
                .iter()
                .map(|r| crate::transport::mirror_point(x, r))
                .collect(),
            r_near: self.ctx.quadrature.near_factor * self.h[i],
        }
    }

    /// Attenuated `1/r²` transfer from `y` (region `region`) to the target,
    /// summed over the direct path and every specular path.
    #[inline]
    fn transfer(&self, tgt: &Target, y: Vec3, region: u32) -> f64 {
        let geo = self.ctx.geometry;
        let mut v = 0.0;
        if let Some((d, _)) = geo.trace(y, region, tgt.x, self.kappa) {
            v += (-d).exp() / (tgt.x - y).norm2();
        }
        for (k, r0) in self.r0.iter().enumerate() {
            if *r0 == 0.0 {
                continue;
            }
            if let Some((xp, _)) = self.ctx.reflectors.reflection_point(k, tgt.x, y) {
                if let Some((d1, r1)) = geo.trace(y, region, xp, self.kappa) {
                    if let Some((d2, _)) = geo.trace(xp, r1, tgt.x, self.kappa) {
                        v += r0 * (-(d1 + d2)).exp() / (tgt.mirrors[k] - y).norm2();
                    }
                }
            }
        }
        v
    }

    /// Emission from boundary point `y` with outward normal `n` seen at the
    /// target: `([(x-y)·n]_-)² / |x-y|⁴ e^{-depth}` plus the specular images.
    #[inline]
    fn emission(&self, tgt: &Target, y: Vec3, n: Vec3, region: u32) -> f64 {
        let geo = self.ctx.geometry;
        let mut v = 0.0;
        let c = (tgt.x - y).dot(n);
        if c < 0.0 {
            if let Some((d, _)) = geo.trace(y, region, tgt.x, self.kappa) {
                let r2 = (tgt.x - y).norm2();
                v += c * c / (r2 * r2) * (-d).exp();
            }
        }
        for (k, r0) in self.r0.iter().enumerate() {
            if *r0 == 0.0 {
                continue;
            }
            let xbar = tgt.mirrors[k];
            let c = (xbar - y).dot(n);
            if c >= 0.0 {
                continue;
            }
            if let Some((xp, _)) = self.ctx.reflectors.reflection_point(k, tgt.x, y) {
                if let Some((d1, r1)) = geo.trace(y, region, xp, self.kappa) {
                    if let Some((d2, _)) = geo.trace(xp, r1, tgt.x, self.kappa) {
                        let r2 = (xbar - y).norm2();
                        v += r0 * c * c / (r2 * r2) * (-(d1 + d2)).exp();
                    }
                }
            }
        }
        v
    }
}

/// `G_ij = 1/4π ∫ κ(y) [e^{-τ(x_i,y)}/|x_i-y|² + Σ R⁰ e^{-τ(x_i,x',y)}/|x̄_i-y|²] ŵ_j(y) dy`.
pub struct VolumeKernel<'a> {
    c: Common<'a>,
    centroid: Vec<Vec3>,
    radius: Vec<f64>,
    duffy: Vec<(f64, [f64; 3], f64)>,
}

impl<'a> VolumeKernel<'a> {
    pub fn new(ctx: &'a KernelContext<'a>) -> Self {
        let mesh = ctx.mesh;
        let centroid: Vec<Vec3> = (0..mesh.num_tets()).map(|t| mesh.centroid(t)).collect();
        let radius = (0..mesh.num_tets())
            .map(|t| mesh.tet_points(t).iter().map(|p| p.dist(centroid[t])).fold(0.0, f64::max))
            .collect();
        // collapsed rule around a vertex: triangle rule on the opposite face
        // times Gauss points along the ray; y = x + s (p - x), dy = 3 V s² ds dA/A
        let (gs, gw) = quadrature::gauss_legendre(ctx.quadrature.radial_points);
        let tri = quadrature::tri(5);
        let mut duffy = Vec::new();
        for (s, ws) in gs.iter().zip(&gw) {
            for (l, wl) in tri.points.iter().zip(&tri.weights) {
                duffy.push((*s, *l, ws * wl * 3.0 * s * s));
            }
        }
        Self {
            c: Common::new(ctx),
            centroid,
            radius,
            duffy,
        }
    }

    /// Calls `f(barycentric, weighted integrand)` for each quadrature point of tet `t`.
    #[inline]
    fn tet_points(&self, tgt: &Target, t: usize, mut f: impl FnMut(&[f64; 4], f64)) {
        let mesh = self.c.ctx.mesh;
        let tet = &mesh.tets[t];
        let region = self.c.ctx.geometry.tet_region[t];
        let kt = self.c.kappa[region as usize];
        if kt == 0.0 {
            return;
        }
        let p = mesh.tet_points(t);
        let vol = mesh.volume(t);
        if let Some(a) = tet.iter().position(|&v| v == tgt.index) {
            let face = TET_FACES[a];
            for &(s, l, w) in &self.duffy {
                let q = p[face[0]] * l[0] + p[face[1]] * l[1] + p[face[2]] * l[2];
                let y = tgt.x + (q - tgt.x) * s;
                let mut bary = [0.0; 4];
                bary[a] = 1.0 - s;
                for m in 0..3 {
                    bary[face[m]] = s * l[m];
                }
                f(&bary, w * vol * kt * self.c.transfer(tgt, y, region));
            }
            return;
        }
        let near = tgt.x.dist(self.centroid[t]) - self.radius[t] < tgt.r_near;
        let opts = &self.c.ctx.quadrature;
        let rule = quadrature::tet(if near { opts.near_degree } else { opts.far_degree });
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let y = p[0] * l[0] + p[1] * l[1] + p[2] * l[2] + p[3] * l[3];
            f(l, w * vol * kt * self.c.transfer(tgt, y, region));
        }
    }

    /// `G_ij` for one pair.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let tgt = self.c.target(i);
        let mesh = self.c.ctx.mesh;
        let mut sum = 0.0;
        for &t in mesh.vertex_tets(j) {
            let k = mesh.tets[t].iter().position(|&v| v == j).unwrap();
            self.tet_points(&tgt, t, |b, v| sum += b[k] * v);
        }
        sum * INV_4PI
    }

    /// Full row `i` over all vertices.
    pub fn row(&self, i: usize) -> Vec<f64> {
        let tgt = self.c.target(i);
        let mesh = self.c.ctx.mesh;
        let mut out = vec![0.0; mesh.num_vertices()];
        for t in 0..mesh.num_tets() {
            let tet = mesh.tets[t];
            self.tet_points(&tgt, t, |b, v| {
                for k in 0..4 {
                    out[tet[k]] += b[k] * v;
                }
            });
        }
        out.iter_mut().for_each(|v| *v *= INV_4PI);
        out
    }
}

/// Tets touching a column set, with the local column of each corner.
fn support_slots<const K: usize>(
    cols: &[usize],
    elems_of: impl Fn(usize) -> Vec<(usize, usize)>,
) -> Vec<(usize, [u32; K])> {
    let mut triples: Vec<(usize, usize, u32)> = Vec::new();
    for (c, &j) in cols.iter().enumerate() {
        for (e, k) in elems_of(j) {
            triples.push((e, k, c as u32));
        }
    }
    triples.sort_unstable();
    let mut out: Vec<(usize, [u32; K])> = Vec::new();
    for (e, k, c) in triples {
        match out.last_mut() {
            Some((le, slots)) if *le == e => slots[k] = c,
            _ => {
                let mut slots = [u32::MAX; K];
                slots[k] = c;
                out.push((e, slots));
            }
        }
    }
    out
}

pub struct VolumeBlock<'b, 'a> {
    k: &'b VolumeKernel<'a>,
    rows: &'b [usize],
    cols: &'b [usize],
    support: Vec<(usize, [u32; 4])>,
}

impl BlockAccess for VolumeBlock<'_, '_> {
    fn row(&mut self, local_row: usize, out: &mut [f64]) {
        out.fill(0.0);
        let tgt = self.k.c.target(self.rows[local_row]);
        for (t, slots) in &self.support {
            self.k.tet_points(&tgt, *t, |b, v| {
                for m in 0..4 {
                    if slots[m] != u32::MAX {
                        out[slots[m] as usize] += b[m] * v;
                    }
                }
            });
        }
        out.iter_mut().for_each(|v| *v *= INV_4PI);
    }

    fn col(&mut self, local_col: usize, out: &mut [f64]) {
        let j = self.cols[local_col];
        for (o, &i) in out.iter_mut().zip(self.rows) {
            *o = self.k.entry(i, j);
        }
    }

    /// When no target sees a support tet through the near or the collapsed
    /// rule, the block is `K P`: `K` holds the weighted kernel at the far-rule
    /// points of the support tets and `P` the sparse hat values there. ACA on
    /// `K` costs one kernel call per column entry instead of a full hat
    /// integral.
    fn compress(&mut self, nrows: usize, ncols: usize, eps: f64, max_rank: usize) -> Option<AcaResult> {
        let k = self.k;
        let mesh = k.c.ctx.mesh;
        let mut targets = Vec::with_capacity(nrows);
        for &i in self.rows {
            let tg = k.c.target(i);
            let near = self.support.iter().any(|(t, _)| {
                mesh.tets[*t].contains(&i) || tg.x.dist(k.centroid[*t]) - k.radius[*t] < tg.r_near
            });
            if near {
                return None;
            }
            targets.push(tg);
        }
        let rule = quadrature::tet(k.c.ctx.quadrature.far_degree);
        let mut points = Vec::new();
        let mut proj: Vec<(usize, usize, f64)> = Vec::new();
        for (t, slots) in &self.support {
            let region = k.c.ctx.geometry.tet_region[*t];
            let kt = k.c.kappa[region as usize];
            if kt == 0.0 {
                continue;
            }
            let p = mesh.tet_points(*t);
            let vol = mesh.volume(*t);
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                for m in 0..4 {
                    if slots[m] != u32::MAX {
                        proj.push((points.len(), slots[m] as usize, l[m] * INV_4PI));
                    }
                }
                let y = p[0] * l[0] + p[1] * l[1] + p[2] * l[2] + p[3] * l[3];
                points.push((y, region, w * vol * kt));
            }
        }
        let mut samples = Samples {
            c: &k.c,
            targets: &targets,
            points: &points,
        };
        let res = aca(&mut samples, nrows, points.len(), eps, max_rank);
        let rank = if res.saturated { 0 } else { res.factors.rank };
        let mut v = vec![0.0; ncols * rank];
        for r in 0..rank {
            let vk = res.factors.v_col(r);
            let out = &mut v[r * ncols..(r + 1) * ncols];
            for &(q, c, b) in &proj {
                out[c] += b * vk[q];
            }
        }
        let u = if rank == 0 { Vec::new() } else { res.factors.u };
        Some(AcaResult {
            factors: LowRank {
                nrows,
                ncols,
                rank,
                u,
                v,
            },
            saturated: res.saturated,
            rows_evaluated: res.rows_evaluated,
            cols_evaluated: res.cols_evaluated,
        })
    }
}

/// Weighted transfer kernel between far targets and far-rule points.
struct Samples<'s, 'a> {
    c: &'s Common<'a>,
    targets: &'s [Target],
    points: &'s [(Vec3, u32, f64)],
}

impl BlockAccess for Samples<'_, '_> {
    fn row(&mut self, local_row: usize, out: &mut [f64]) {
        let tgt = &self.targets[local_row];
        for (o, (y, region, w)) in out.iter_mut().zip(self.points) {
            *o = w * self.c.transfer(tgt, *y, *region);
        }
    }

    fn col(&mut self, local_col: usize, out: &mut [f64]) {
        let (y, region, w) = self.points[local_col];
        for (o, tgt) in out.iter_mut().zip(self.targets) {
            *o = w * self.c.transfer(tgt, y, region);
        }
    }
}

impl<'a> MatrixGenerator for VolumeKernel<'a> {
    type Block<'b>
        = VolumeBlock<'b, 'a>
    where
        Self: 'b;

    fn nrows(&self) -> usize {
        self.c.ctx.mesh.num_vertices()
    }

    fn ncols(&self) -> usize {
        self.c.ctx.mesh.num_vertices()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        VolumeKernel::entry(self, i, j)
    }

    fn block<'b>(&'b self, rows: &'b [usize], cols: &'b [usize]) -> VolumeBlock<'b, 'a> {
        let mesh = self.c.ctx.mesh;
        let support = support_slots::<4>(cols, |j| {
            mesh.vertex_tets(j)
                .iter()
                .map(|&t| (t, mesh.tets[t].iter().position(|&v| v == j).unwrap()))
                .collect()
        });
        VolumeBlock {
            k: self,
            rows,
            cols,
            support,
        }
    }
}

/// Emitted intensity per boundary label; labels not listed emit nothing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceField {
    pub q0: Vec<(i32, f64)>,
}

impl SourceField {
    pub fn value(&self, label: i32) -> f64 {
        self.q0.iter().find(|(l, _)| *l == label).map_or(0.0, |p| p.1)
    }
}

/// `S_il = 1/4π ∫_{Γ_Q} [cos²/|x_i-y|² e^{-τ} + Σ R⁰ (image terms)] w̃_l(y) dy`.
///
/// Columns are (surface vertex, source label) pairs so that sources with
/// different labels meeting at a vertex stay independent.
pub struct SurfaceKernel<'a> {
    c: Common<'a>,
    pub columns: Vec<(usize, i32)>,
    col_tris: Vec<Vec<(usize, usize)>>,
    tri_region: Vec<u32>,
    tri_centroid: Vec<Vec3>,
    tri_radius: Vec<f64>,
}

impl<'a> SurfaceKernel<'a> {
    /// Builds columns for the triangles whose label has a positive entry in `source`.
    pub fn new(ctx: &'a KernelContext<'a>, source: &SourceField) -> Self {
        let s = ctx.surface;
        let mut col_of: std::collections::BTreeMap<(usize, i32), Vec<(usize, usize)>> = Default::default();
        let mut tri_region = vec![u32::MAX; s.triangles.len()];
        let mut tri_centroid = vec![Vec3::ZERO; s.triangles.len()];
        let mut tri_radius = vec![0.0; s.triangles.len()];
        for (k, tri) in s.triangles.iter().enumerate() {
            let label = s.labels[k];
            if source.value(label) <= 0.0 {
                continue;
            }
            let pts = s.tri_points(k);
            let c = (pts[0] + pts[1] + pts[2]) / 3.0;
            tri_centroid[k] = c;
            tri_radius[k] = pts.iter().map(|p| p.dist(c)).fold(0.0, f64::max);
            let inward = c - s.normals[k] * tri_radius[k];
            tri_region[k] = ctx
                .geometry
                .locate_toward(c, inward)
                .map_or(u32::MAX, |(_, r)| r);
            for (m, &v) in tri.iter().enumerate() {
                col_of.entry((v, label)).or_default().push((k, m));
            }
        }
        let (columns, col_tris) = col_of.into_iter().unzip();
        Self {
            c: Common::new(ctx),
            columns,
            col_tris,
            tri_region,
            tri_centroid,
            tri_radius,
        }
    }

    /// Nodal source values `Q⁰_l`, one per column.
    pub fn source_values(&self, source: &SourceField) -> Vec<f64> {
        self.columns.iter().map(|&(_, label)| source.value(label)).collect()
    }

    /// Calls `f(barycentric, weighted integrand)` over triangle `k`,
    /// subdividing near the target.
    fn tri_points(&self, tgt: &Target, k: usize, mut f: impl FnMut(&[f64; 3], f64)) {
        let region = self.tri_region[k];
        if region == u32::MAX {
            return;
        }
        let s = self.c.ctx.surface;
        let p = s.tri_points(k);
        let n = s.normals[k];
        let area = s.areas[k];
        let opts = &self.c.ctx.quadrature;
        let dist = tgt.x.dist(self.tri_centroid[k]) - self.tri_radius[k];
        // a vertex of the face takes the limit from inside the domain, where
        // the face fills the wedge of its corner angle: ∫ cos dω = angle / 2
        let seen = std::iter::once((tgt.x, 1.0)).chain(tgt.mirrors.iter().copied().zip(self.c.r0.iter().copied()));
        for (x, weight) in seen {
            if let Some(m) = p.iter().position(|&v| v.dist(x) <= 1e-9 * self.tri_radius[k]) {
                let (a, b) = (p[(m + 1) % 3] - p[m], p[(m + 2) % 3] - p[m]);
                let angle = (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos();
                let mut l = [0.0; 3];
                l[m] = 1.0;
                f(&l, 0.5 * weight * angle);
            }
        }
        // one-sided emission: the target and all its images behind the face see nothing
        let behind = (tgt.x - p[0]).dot(n) >= 0.0 && tgt.mirrors.iter().all(|m| (*m - p[0]).dot(n) >= 0.0);
        if behind {
            return;
        }
        let mut emit = |l: &[f64; 3], w: f64| {
            let y = p[0] * l[0] + p[1] * l[1] + p[2] * l[2];
            f(l, w * area * self.c.emission(tgt, y, n, region));
        };
        if dist >= tgt.r_near {
            let rule = quadrature::tri(opts.far_degree);
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                emit(l, *w);
            }
            return;
        }
        let rule = quadrature::tri(opts.near_degree);
        let eye = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let mut stack = vec![(eye, 1.0f64, 0u32)];
        while let Some((c, frac, depth)) = stack.pop() {
            let to_world = |b: &[f64; 3]| -> [f64; 3] {
                let mut o = [0.0; 3];
                for m in 0..3 {
                    for r in 0..3 {
                        o[r] += b[m] * c[m][r];
                    }
                }
                o
            };
            let corners: Vec<Vec3> = c.iter().map(|b| p[0] * b[0] + p[1] * b[1] + p[2] * b[2]).collect();
            let centre = (corners[0] + corners[1] + corners[2]) / 3.0;
            let size = corners[0].dist(corners[1]).max(corners[1].dist(corners[2])).max(corners[0].dist(corners[2]));
            if depth < 6 && size > 0.5 * tgt.x.dist(centre) {
                let mid = |a: usize, b: usize| -> [f64; 3] { [0, 1, 2].map(|r| 0.5 * (c[a][r] + c[b][r])) };
                let (m01, m12, m02) = (mid(0, 1), mid(1, 2), mid(0, 2));
                for sub in [[c[0], m01, m02], [m01, c[1], m12], [m02, m12, c[2]], [m01, m12, m02]] {
                    stack.push((sub, frac * 0.25, depth + 1));
                }
                continue;
            }
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                emit(&to_world(l), w * frac);
            }
        }
    }

    pub fn entry(&self, i: usize, col: usize) -> f64 {
        let tgt = self.c.target(i);
        let mut sum = 0.0;
        for &(k, m) in &self.col_tris[col] {
            self.tri_points(&tgt, k, |b, v| sum += b[m] * v);
        }
        sum * INV_4PI
    }
}

pub struct SurfaceBlock<'b, 'a> {
    k: &'b SurfaceKernel<'a>,
    rows: &'b [usize],
    cols: &'b [usize],
    support: Vec<(usize, [u32; 3])>,
}

impl BlockAccess for SurfaceBlock<'_, '_> {
    fn row(&mut self, local_row: usize, out: &mut [f64]) {
        out.fill(0.0);
        let tgt = self.k.c.target(self.rows[local_row]);
        for (t, slots) in &self.support {
            self.k.tri_points(&tgt, *t, |b, v| {
                for m in 0..3 {
                    if slots[m] != u32::MAX {
                        out[slots[m] as usize] += b[m] * v;
                    }
                }
            });
        }
        out.iter_mut().for_each(|v| *v *= INV_4PI);
    }

    fn col(&mut self, local_col: usize, out: &mut [f64]) {
        let j = self.cols[local_col];
        for (o, &i) in out.iter_mut().zip(self.rows) {
            *o = self.k.entry(i, j);
        }
    }
}

impl<'a> MatrixGenerator for SurfaceKernel<'a> {
    type Block<'b>
        = SurfaceBlock<'b, 'a>
    where
        Self: 'b;

    fn nrows(&self) -> usize {
        self.c.ctx.mesh.num_vertices()
    }

    fn ncols(&self) -> usize {
        self.columns.len()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        SurfaceKernel::entry(self, i, j)
    }

    fn block<'b>(&'b self, rows: &'b [usize], cols: &'b [usize]) -> SurfaceBlock<'b, 'a> {
        let support = support_slots::<3>(cols, |c| self.col_tris[c].clone());
        SurfaceBlock {
            k: self,
            rows,
            cols,
            support,
        }
    }

    fn zero_col(&self, j: usize) -> bool {
        self.col_tris[j].iter().all(|&(k, _)| self.tri_region[k] == u32::MAX)
    }
}

/// Column points of the surface operator, for its cluster tree.
pub fn surface_column_points(surface: &SurfaceMesh, kernel: &SurfaceKernel) -> Vec<[f64; 3]> {
    kernel.columns.iter().map(|&(v, _)| surface.vertices[v].to_array()).collect()
}

/// `S̄_i = Σ_l S_il Q⁰_l`.
pub fn assemble_source_vector(s: &HMatrix, q0: &[f64]) -> Result<Vec<f64>, HMatrixError> {
    s.matvec(q0)
}
