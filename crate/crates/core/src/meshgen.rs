//! Structured tetrahedral meshes: tensor grids split into Kuhn simplices.

use crate::mesh::{SurfaceMesh, VolumeMesh};
use crate::vec3::Vec3;

/// Grid lines on `[lo, hi]` that contain every value of `breaks` inside the
/// interval, with spacing at most `h` in each piece.
pub fn graded_lines(lo: f64, hi: f64, breaks: &[f64], h: f64) -> Vec<f64> {
    assert!(hi > lo && h > 0.0);
    let mut knots = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    knots.extend(inner);
    knots.push(hi);
    let mut out = vec![lo];
    for w in knots.windows(2) {
        let n = ((w[1] - w[0]) / h - 1e-9).ceil().max(1.0) as usize;
        for k in 1..=n {
            out.push(if k == n {
                w[1]
            } else {
                w[0] + (w[1] - w[0]) * k as f64 / n as f64
            });
        }
    }
    out
}

/// Meshes the cells of the tensor grid `xs x ys x zs` for which `cell`
/// returns a region tag, six tets per cell. All cells use the same split, so
/// the result is conforming.
pub fn grid_mesh(xs: &[f64], ys: &[f64], zs: &[f64], cell: impl Fn(Vec3) -> Option<i32>) -> VolumeMesh {
    let (nx, ny, nz) = (xs.len(), ys.len(), zs.len());
    let lin = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    let mut id = vec![usize::MAX; nx * ny * nz];
    let mut vertices = Vec::new();
    let mut tets = Vec::new();
    let mut regions = Vec::new();
    // the six monotone lattice paths from corner 000 to 111
    const PATHS: [[usize; 2]; 6] = [[1, 3], [1, 5], [2, 3], [2, 6], [4, 5], [4, 6]];
    for k in 0..nz.saturating_sub(1) {
        for j in 0..ny.saturating_sub(1) {
            for i in 0..nx.saturating_sub(1) {
                let c = Vec3::new(
                    0.5 * (xs[i] + xs[i + 1]),
                    0.5 * (ys[j] + ys[j + 1]),
                    0.5 * (zs[k] + zs[k + 1]),
                );
                let Some(region) = cell(c) else { continue };
                let mut corner = [0usize; 8];
                for (b, slot) in corner.iter_mut().enumerate() {
                    let (di, dj, dk) = (b & 1, (b >> 1) & 1, (b >> 2) & 1);
                    let l = lin(i + di, j + dj, k + dk);
                    if id[l] == usize::MAX {
                        id[l] = vertices.len();
                        vertices.push(Vec3::new(xs[i + di], ys[j + dj], zs[k + dk]));
                    }
                    *slot = id[l];
                }
                for p in PATHS {
                    tets.push([corner[0], corner[p[0]], corner[p[1]], corner[7]]);
                    regions.push(region);
                }
            }
        }
    }
    VolumeMesh::new(vertices, tets, regions).expect("grid cells are non-degenerate")
}

/// Axis-aligned box meshed with roughly `n` cells per edge, single region.
pub fn box_mesh(lo: Vec3, hi: Vec3, n: [usize; 3]) -> VolumeMesh {
    let lines = |a: f64, b: f64, m: usize| -> Vec<f64> {
        (0..=m).map(|k| a + (b - a) * k as f64 / m as f64).collect()
    };
    grid_mesh(
        &lines(lo.x, hi.x, n[0]),
        &lines(lo.y, hi.y, n[1]),
        &lines(lo.z, hi.z, n[2]),
        |_| Some(0),
    )
}

/// Closed boundary of `mesh` with one label per boundary face.
pub fn boundary(mesh: &VolumeMesh, label: impl FnMut([Vec3; 3]) -> i32) -> SurfaceMesh {
    mesh.boundary_surface(label).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lines_hit_every_break() {
        let l = graded_lines(0.0, 100.0, &[10.0], 5.5);
        assert!(l.contains(&10.0));
        assert_eq!(l[0], 0.0);
        assert_eq!(*l.last().unwrap(), 100.0);
        assert!(l.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 5.5 + 1e-9));
    }

    #[test]
    fn box_mesh_is_closed_and_has_the_right_volume() {
        let m = box_mesh(Vec3::ZERO, Vec3::new(2.0, 1.0, 3.0), [2, 3, 4]);
        assert_eq!(m.num_vertices(), 3 * 4 * 5);
        let vol: f64 = (0..m.num_tets()).map(|t| m.volume(t)).sum();
        assert!((vol - 6.0).abs() < 1e-12);
        let s = boundary(&m, |_| 0);
        assert!((s.enclosed_volume() - 6.0).abs() < 1e-12);
        assert!((s.total_area() - 22.0).abs() < 1e-12);
    }

    #[test]
    fn removed_cells_leave_a_notch() {
        let xs = [0.0, 1.0, 2.0];
        let m = grid_mesh(&xs, &xs, &xs, |c| (!(c.x < 1.0 && c.y < 1.0 && c.z < 1.0)).then_some(1));
        let vol: f64 = (0..m.num_tets()).map(|t| m.volume(t)).sum();
        assert!((vol - 7.0).abs() < 1e-12);
        assert_eq!(m.num_vertices(), 26);
        let s = boundary(&m, |_| 0);
        assert!((s.enclosed_volume() - 7.0).abs() < 1e-12);
    }
}
