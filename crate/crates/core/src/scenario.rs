//! Built-in Kobayashi duct problems: a 60 x 100 x 60 box with a 10 cm
//! source cube in one corner and a void-like duct running along y.

use crate::kernels::SourceField;
use std::collections::HashMap;

use crate::mesh::{MeshError, SurfaceMesh, VolumeMesh};
use crate::meshgen::{graded_lines, grid_mesh};
use crate::transport::{mirror_point, AbsorptionModel, PlanarReflector};
use crate::vec3::Vec3;

pub const REGION_MEDIUM: i32 = 1;
pub const REGION_DUCT: i32 = 2;
pub const LABEL_WALL: i32 = 0;
pub const LABEL_SOURCE: i32 = 1;
pub const LABEL_X0: i32 = 10;
pub const LABEL_Y0: i32 = 11;
pub const LABEL_Z0: i32 = 12;

pub const KAPPA_MEDIUM: f64 = 0.1;
pub const KAPPA_DUCT: f64 = 1e-4;
pub const Q0: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KobayashiTest {
    /// Mirror on x = 0, uniform κ = 0.1.
    Test1,
    /// Mirror on x = 0, duct κ.
    Test2,
    /// Mirrors on x = 0, y = 0, z = 0, duct κ.
    Test3,
}

impl KobayashiTest {
    pub fn name(self) -> &'static str {
        match self {
            KobayashiTest::Test1 => "kobayashi-test1",
            KobayashiTest::Test2 => "kobayashi-test2",
            KobayashiTest::Test3 => "kobayashi-test3",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Self::Test1, Self::Test2, Self::Test3].into_iter().find(|t| t.name() == s)
    }

    fn has_duct(self) -> bool {
        !matches!(self, KobayashiTest::Test1)
    }
}

/// How the x = 0 symmetry is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Mirrors as the test prescribes.
    Reflective,
    /// Same mesh with every mirror removed.
    NoReflection,
    /// Domain doubled across x = 0, no mirror on that plane.
    Symmetrized,
}

/// A complete problem: meshes, absorption, mirrors and sources.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub volume: VolumeMesh,
    pub surface: SurfaceMesh,
    pub model: AbsorptionModel,
    pub reflectors: Vec<PlanarReflector>,
    /// Band-integrated `Q⁰` per boundary label, one entry per band.
    pub sources: Vec<SourceField>,
}

/// Grid lines for spacing `h`, with 10 always a line.
pub fn kobayashi_lines(h: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (
        graded_lines(0.0, 60.0, &[10.0], h),
        graded_lines(0.0, 100.0, &[10.0], h),
        graded_lines(0.0, 60.0, &[10.0], h),
    )
}

/// Vertex count of the mesh `kobayashi(_, h, Reflective)` would build.
pub fn kobayashi_vertex_count(h: f64) -> usize {
    let (xs, ys, zs) = kobayashi_lines(h);
    let count = |l: &[f64]| l.iter().filter(|&&v| v <= 10.0).count();
    xs.len() * ys.len() * zs.len() - (count(&xs) - 1) * (count(&ys) - 1) * (count(&zs) - 1)
}

/// Largest spacing whose mesh has at least `n` vertices.
pub fn spacing_for_vertices(n: usize) -> f64 {
    let (mut lo, mut hi) = (0.2, 60.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if kobayashi_vertex_count(mid) >= n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn kobayashi(test: KobayashiTest, h: f64, variant: Variant) -> Scenario {
    let (mut xs, ys, zs) = kobayashi_lines(h);
    let sym = variant == Variant::Symmetrized;
    if sym {
        let mut neg: Vec<f64> = xs.iter().skip(1).map(|x| -x).collect();
        neg.reverse();
        neg.extend(xs);
        xs = neg;
    }
    let duct = test.has_duct();
    let volume = grid_mesh(&xs, &ys, &zs, |c| {
        if c.x.abs() < 10.0 && c.y < 10.0 && c.z < 10.0 {
            return None;
        }
        if duct && c.x.abs() < 10.0 && c.z < 10.0 {
            Some(REGION_DUCT)
        } else {
            Some(REGION_MEDIUM)
        }
    });
    let (surface, _) = volume.boundary_surface(|p| face_label(p, sym));
    let mut regions = vec![(REGION_MEDIUM, KAPPA_MEDIUM)];
    if duct {
        regions.push((REGION_DUCT, KAPPA_DUCT));
    }
    let model = AbsorptionModel::grey(&regions);
    let plane = |n: Vec3, label| PlanarReflector::new(Vec3::ZERO, n, label, 1.0).expect("unit reflector");
    let reflectors = match (variant, test) {
        (Variant::NoReflection, _) => vec![],
        (Variant::Symmetrized, KobayashiTest::Test3) => vec![
            plane(Vec3::new(0.0, -1.0, 0.0), LABEL_Y0),
            plane(Vec3::new(0.0, 0.0, -1.0), LABEL_Z0),
        ],
        (Variant::Symmetrized, _) => vec![],
        (Variant::Reflective, KobayashiTest::Test3) => vec![
            plane(Vec3::new(-1.0, 0.0, 0.0), LABEL_X0),
            plane(Vec3::new(0.0, -1.0, 0.0), LABEL_Y0),
            plane(Vec3::new(0.0, 0.0, -1.0), LABEL_Z0),
        ],
        (Variant::Reflective, _) => vec![plane(Vec3::new(-1.0, 0.0, 0.0), LABEL_X0)],
    };
    let suffix = match variant {
        Variant::Reflective => "",
        Variant::NoReflection => "-norc",
        Variant::Symmetrized => "-sym",
    };
    Scenario {
        name: format!("{}{}", test.name(), suffix),
        volume,
        surface,
        model,
        reflectors,
        sources: vec![SourceField {
            q0: vec![(LABEL_SOURCE, Q0)],
        }],
    }
}

/// Doubles the domain across the plane of mirror `k` and drops that mirror.
///
/// Vertices within `1e-9` of the diameter from the plane are shared by both
/// halves. Boundary labels of the image half copy those of the faces they
/// mirror; the other mirrors are kept as they are.
pub fn symmetrize(sc: &Scenario, k: usize) -> Result<Scenario, MeshError> {
    let r = &sc.reflectors[k];
    let mesh = &sc.volume;
    let tol = 1e-9 * mesh.diameter();
    let n = mesh.num_vertices().max(1) as f64;
    let centre = mesh.vertices.iter().fold(Vec3::ZERO, |a, &v| a + v) / n;
    let side = if r.signed_distance(centre) <= 0.0 { 1.0 } else { -1.0 };
    let mut vertices = mesh.vertices.clone();
    let image: Vec<usize> = mesh
        .vertices
        .iter()
        .enumerate()
        .map(|(v, &p)| {
            if r.signed_distance(p).abs() <= tol {
                v
            } else {
                vertices.push(mirror_point(p, r));
                vertices.len() - 1
            }
        })
        .collect();
    let mut tets = mesh.tets.clone();
    tets.extend(mesh.tets.iter().map(|t| t.map(|v| image[v])));
    let mut regions = mesh.regions.clone();
    regions.extend_from_slice(&mesh.regions);
    let volume = VolumeMesh::new(vertices, tets, regions)?;

    let key = |p: Vec3| p.to_array().map(|c| (c / tol).round() as i64);
    let face_key = |pts: [Vec3; 3]| {
        let mut k = pts.map(key);
        k.sort_unstable();
        k
    };
    let mut labels: HashMap<[[i64; 3]; 3], i32> = HashMap::new();
    for (t, tri) in sc.surface.triangles.iter().enumerate() {
        labels.insert(face_key(tri.map(|v| sc.surface.vertices[v])), sc.surface.labels[t]);
    }
    let (surface, _) = volume.boundary_surface(|pts| {
        let back = pts.map(|p| if side * r.signed_distance(p) > tol { mirror_point(p, r) } else { p });
        labels.get(&face_key(back)).copied().unwrap_or(LABEL_WALL)
    });
    let mut reflectors = sc.reflectors.clone();
    reflectors.remove(k);
    Ok(Scenario {
        name: format!("{}-sym", sc.name),
        volume,
        surface,
        model: sc.model.clone(),
        reflectors,
        sources: sc.sources.clone(),
    })
}

fn face_label(p: [Vec3; 3], sym: bool) -> i32 {
    let all = |f: &dyn Fn(Vec3) -> bool| p.iter().all(|&q| f(q));
    let in_cube = |q: Vec3| q.x.abs() <= 10.0 && q.y <= 10.0 && q.z <= 10.0;
    if all(&|q| in_cube(q) && (q.x.abs() == 10.0 || q.y == 10.0 || q.z == 10.0)) {
        return LABEL_SOURCE;
    }
    if !sym && all(&|q| q.x == 0.0) {
        return LABEL_X0;
    }
    if all(&|q| q.y == 0.0) {
        return LABEL_Y0;
    }
    if all(&|q| q.z == 0.0) {
        return LABEL_Z0;
    }
    LABEL_WALL
}
