//! Field dumps and norms on nodal fields.

use std::fmt::Write as _;

use rte_core::VolumeMesh;

/// Legacy ASCII unstructured grid with one scalar per named field.
pub fn vtk(mesh: &VolumeMesh, title: &str, fields: &[(&str, &[f64])]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.replace('\n', " "));
    let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.num_vertices());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
    }
    let nt = mesh.num_tets();
    let _ = writeln!(s, "CELLS {nt} {}", nt * 5);
    for t in &mesh.tets {
        let _ = writeln!(s, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("10\n");
    }
    let _ = writeln!(s, "CELL_DATA {nt}\nSCALARS region int 1\nLOOKUP_TABLE default");
    for r in &mesh.regions {
        let _ = writeln!(s, "{r}");
    }
    let _ = writeln!(s, "POINT_DATA {}", mesh.num_vertices());
    for (name, values) in fields {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values.iter() {
            let _ = writeln!(s, "{v:e}");
        }
    }
    s
}

/// `x,y,z,<fields...>` per vertex.
pub fn nodal_csv(mesh: &VolumeMesh, fields: &[(&str, &[f64])]) -> String {
    let mut s = String::from("x,y,z");
    for (name, _) in fields {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (i, v) in mesh.vertices.iter().enumerate() {
        let _ = write!(s, "{},{},{}", v.x, v.y, v.z);
        for (_, f) in fields {
            let _ = write!(s, ",{:e}", f[i]);
        }
        s.push('\n');
    }
    s
}

/// Lumped P1 mass: a quarter of every incident tet volume.
pub fn lumped_mass(mesh: &VolumeMesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.num_vertices()];
    for (t, tet) in mesh.tets.iter().enumerate() {
        let q = 0.25 * mesh.volume(t);
        for &v in tet {
            m[v] += q;
        }
    }
    m
}

pub fn l2_norm(mass: &[f64], f: &[f64]) -> f64 {
    mass.iter().zip(f).map(|(m, v)| m * v * v).sum::<f64>().sqrt()
}

/// `f` sampled at the vertices of `target`; `None` where a vertex falls
/// outside `mesh`.
pub fn transfer(mesh: &VolumeMesh, f: &[f64], target: &VolumeMesh) -> Vec<Option<f64>> {
    let mut hint = None;
    target
        .vertices
        .iter()
        .map(|&p| {
            let t = mesh.locate(p, hint)?;
            hint = Some(t);
            Some(mesh.interpolate(f, p, Some(t)).ok()?)
        })
        .collect()
}

/// Relative lumped-L² distance `|a - b| / |b|` on `mesh`, skipping missing values.
pub fn relative_l2(mesh: &VolumeMesh, a: &[Option<f64>], b: &[f64]) -> f64 {
    let mass = lumped_mass(mesh);
    let (mut num, mut den) = (0.0, 0.0);
    for ((m, a), b) in mass.iter().zip(a).zip(b) {
        if let Some(a) = a {
            num += m * (a - b) * (a - b);
            den += m * b * b;
        }
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
