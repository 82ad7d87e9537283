//! Run configuration: a TOML file, or a built-in scenario plus defaults.

use std::path::{Path, PathBuf};

use rte_core::kernels::{QuadratureOptions, SourceField};
use rte_core::operators::AssemblyOptions;
use rte_core::scenario::{kobayashi, spacing_for_vertices, KobayashiTest, Scenario, Variant};
use rte_core::solver::SolveConfig;
use rte_core::{AbsorptionModel, Band, MeshError, PlanarReflector, SurfaceMesh, Vec3, VolumeMesh};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioSection,
    pub bands: Vec<BandSpec>,
    pub regions: Vec<RegionSpec>,
    pub boundary: Vec<BoundarySpec>,
    pub solver: SolverSection,
    pub hmatrix: HMatrixSection,
    pub output: OutputSection,
    pub ladder: LadderSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    /// `kobayashi-test1`, `kobayashi-test2` or `kobayashi-test3`.
    pub builtin: Option<String>,
    /// Target vertex count of a built-in mesh.
    pub vertices: usize,
    pub variant: Variant,
    pub volume_mesh: Option<PathBuf>,
    pub surface_mesh: Option<PathBuf>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            builtin: None,
            vertices: 3000,
            variant: Variant::Reflective,
            volume_mesh: None,
            surface_mesh: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSpec {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub tag: i32,
    /// One value per band.
    pub kappa: Vec<f64>,
    /// Scattering albedo per band; zero when omitted.
    #[serde(default)]
    pub scatter: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub label: i32,
    /// Band-integrated emitted intensity, one value per band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflector: Option<ReflectorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectorSpec {
    pub point: [f64; 3],
    pub normal: [f64; 3],
    pub r0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub t0: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolveConfig::default();
        Self {
            t0: d.t0,
            max_iters: d.max_iters,
            tol: d.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HMatrixSection {
    pub eta: f64,
    pub eps: f64,
    pub leaf_size: usize,
    /// Near-field radius as a multiple of the local mesh size.
    pub r_near: f64,
}

impl Default for HMatrixSection {
    fn default() -> Self {
        let d = AssemblyOptions::default();
        Self {
            eta: d.eta,
            eps: d.eps,
            leaf_size: d.leaf_size,
            r_near: d.quadrature.near_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write the nodal fields as VTK and CSV.
    pub fields: bool,
    pub probes: Vec<ProbeSpec>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            fields: true,
            probes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    /// Frequency-integrated mean intensity.
    J,
    /// Temperature.
    T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub name: String,
    pub from: [f64; 3],
    pub to: [f64; 3],
    pub samples: usize,
    pub quantity: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderSection {
    /// Target vertex counts of the built-in meshes used by `bench` and `error-ladder`.
    pub vertices: Vec<usize>,
    pub quantity: Quantity,
}

impl Default for LadderSection {
    fn default() -> Self {
        Self {
            vertices: vec![1000, 2000, 4000],
            quantity: Quantity::J,
        }
    }
}

/// Probes drawn for the built-in duct problems.
pub fn builtin_probes() -> Vec<ProbeSpec> {
    vec![
        ProbeSpec {
            name: "x_y25_z25".into(),
            from: [0.0, 25.0, 25.0],
            to: [60.0, 25.0, 25.0],
            samples: 61,
            quantity: Quantity::J,
        },
        ProbeSpec {
            name: "y_x5_z5".into(),
            from: [5.0, 0.0, 5.0],
            to: [5.0, 100.0, 5.0],
            samples: 101,
            quantity: Quantity::J,
        },
    ]
}

impl Config {
    pub fn builtin(name: &str) -> Self {
        Self {
            scenario: ScenarioSection {
                builtin: Some(name.to_string()),
                ..Default::default()
            },
            output: OutputSection {
                probes: builtin_probes(),
                ..Default::default()
            },
            ..Default::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Invalid(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::MissingFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            t0: self.solver.t0,
            max_iters: self.solver.max_iters,
            tol: self.solver.tol,
        }
    }

    pub fn assembly_options(&self) -> AssemblyOptions {
        AssemblyOptions {
            eta: self.hmatrix.eta,
            eps: self.hmatrix.eps,
            leaf_size: self.hmatrix.leaf_size,
            quadrature: QuadratureOptions {
                near_factor: self.hmatrix.r_near,
                ..Default::default()
            },
        }
    }

    pub fn builtin_test(&self) -> Option<KobayashiTest> {
        self.scenario.builtin.as_deref().and_then(KobayashiTest::from_name)
    }

    /// Every problem with the settings that can be seen without reading meshes.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let s = &self.scenario;
        match (&s.builtin, &s.volume_mesh, &s.surface_mesh) {
            (Some(name), None, None) => {
                if KobayashiTest::from_name(name).is_none() {
                    errs.push(format!(
                        "unknown built-in scenario `{name}` (expected kobayashi-test1, kobayashi-test2 or kobayashi-test3)"
                    ));
                }
                if !self.bands.is_empty() || !self.regions.is_empty() || !self.boundary.is_empty() {
                    errs.push("built-in scenarios define their own bands, regions and boundary".into());
                }
                if s.vertices < 8 {
                    errs.push(format!("scenario.vertices = {} is too small", s.vertices));
                }
            }
            (Some(_), _, _) => errs.push("give either scenario.builtin or mesh paths, not both".into()),
            (None, Some(_), Some(_)) => {
                if s.variant != Variant::Reflective {
                    errs.push("scenario.variant applies to built-in scenarios only".into());
                }
                errs.extend(self.validate_media());
            }
            (None, _, _) => errs.push("scenario needs `builtin` or both `volume_mesh` and `surface_mesh`".into()),
        }
        let v = &self.solver;
        if !(v.tol > 0.0) {
            errs.push(format!("solver.tol = {} must be positive", v.tol));
        }
        if v.max_iters == 0 {
            errs.push("solver.max_iters must be at least 1".into());
        }
        if !(v.t0 >= 0.0) || !v.t0.is_finite() {
            errs.push(format!("solver.t0 = {} must be finite and nonnegative", v.t0));
        }
        let h = &self.hmatrix;
        if !(h.eta > 0.0) {
            errs.push(format!("hmatrix.eta = {} must be positive", h.eta));
        }
        if !(h.eps > 0.0) {
            errs.push(format!("hmatrix.eps = {} must be positive", h.eps));
        }
        if h.leaf_size == 0 {
            errs.push("hmatrix.leaf_size must be at least 1".into());
        }
        if !(h.r_near > 0.0) {
            errs.push(format!("hmatrix.r_near = {} must be positive", h.r_near));
        }
        for p in &self.output.probes {
            if p.samples == 0 {
                errs.push(format!("probe `{}` needs at least one sample", p.name));
            }
        }
        errs
    }

    fn validate_media(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let nb = self.bands.len();
        if nb == 0 {
            errs.push("at least one [[bands]] entry is required".into());
        }
        if self.regions.is_empty() {
            errs.push("at least one [[regions]] entry is required".into());
        }
        for r in &self.regions {
            if r.kappa.len() != nb {
                errs.push(format!("region {}: {} kappa values for {nb} bands", r.tag, r.kappa.len()));
            }
            if !r.scatter.is_empty() && r.scatter.len() != nb {
                errs.push(format!("region {}: {} scatter values for {nb} bands", r.tag, r.scatter.len()));
            }
        }
        for b in &self.boundary {
            if b.q0.is_none() && b.reflector.is_none() {
                errs.push(format!("boundary {}: needs q0 or reflector", b.label));
            }
            if let Some(q) = &b.q0 {
                if q.len() != nb {
                    errs.push(format!("boundary {}: {} q0 values for {nb} bands", b.label, q.len()));
                }
                if q.iter().any(|v| !(*v >= 0.0)) {
                    errs.push(format!("boundary {}: q0 must be nonnegative", b.label));
                }
            }
            if let (Some(q), Some(_)) = (&b.q0, &b.reflector) {
                if q.iter().any(|v| *v > 0.0) {
                    errs.push(format!("boundary {}: a reflector cannot also emit", b.label));
                }
            }
        }
        let mut labels: Vec<i32> = self.boundary.iter().map(|b| b.label).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            errs.push("boundary labels must be unique".into());
        }
        if let Err(e) = self.model() {
            errs.push(e);
        }
        for b in &self.boundary {
            if let Some(r) = &b.reflector {
                if let Err(e) = PlanarReflector::new(Vec3::from(r.point), Vec3::from(r.normal), b.label, r.r0) {
                    errs.push(format!("boundary {}: {e}", b.label));
                }
            }
        }
        errs
    }

    fn model(&self) -> Result<AbsorptionModel, String> {
        let nb = self.bands.len();
        AbsorptionModel::new(
            self.bands.iter().map(|b| Band { lo: b.lo, hi: b.hi }).collect(),
            self.regions.iter().map(|r| r.tag).collect(),
            (0..nb)
                .map(|b| self.regions.iter().map(|r| r.kappa.get(b).copied().unwrap_or(f64::NAN)).collect())
                .collect(),
            (0..nb)
                .map(|b| self.regions.iter().map(|r| r.scatter.get(b).copied().unwrap_or(0.0)).collect())
                .collect(),
        )
        .map_err(|e| e.to_string())
    }

    /// Builds the problem, reading meshes when the config names them.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let errs = self.validate();
        if !errs.is_empty() {
            return Err(CliError::Invalid(errs));
        }
        if let Some(test) = self.builtin_test() {
            let h = spacing_for_vertices(self.scenario.vertices);
            return Ok(kobayashi(test, h, self.scenario.variant));
        }
        let vpath = self.scenario.volume_mesh.as_ref().expect("validated");
        let spath = self.scenario.surface_mesh.as_ref().expect("validated");
        let volume = VolumeMesh::load(vpath).map_err(|e| mesh_error(vpath, e))?;
        let surface = SurfaceMesh::load(spath).map_err(|e| mesh_error(spath, e))?;
        let mut errs = Vec::new();
        for b in &self.boundary {
            if surface.labelled(b.label).next().is_none() {
                errs.push(format!("boundary label {} does not occur in {}", b.label, spath.display()));
            }
        }
        let model = self.model().map_err(|e| CliError::Invalid(vec![e]))?;
        for (t, r) in volume.regions.iter().enumerate() {
            if model.region_index(*r).is_none() {
                errs.push(format!("tet {t} has region {r}, which has no [[regions]] entry"));
                break;
            }
        }
        if !errs.is_empty() {
            return Err(CliError::Invalid(errs));
        }
        let reflectors = self
            .boundary
            .iter()
            .filter_map(|b| {
                b.reflector.as_ref().map(|r| {
                    PlanarReflector::new(Vec3::from(r.point), Vec3::from(r.normal), b.label, r.r0).expect("validated")
                })
            })
            .collect();
        let sources = (0..model.num_bands())
            .map(|band| SourceField {
                q0: self
                    .boundary
                    .iter()
                    .filter_map(|b| b.q0.as_ref().map(|q| (b.label, q[band])))
                    .filter(|(_, q)| *q > 0.0)
                    .collect(),
            })
            .collect();
        let name = vpath.file_stem().map_or("mesh".into(), |s| s.to_string_lossy().into_owned());
        Ok(Scenario {
            name,
            volume,
            surface,
            model,
            reflectors,
            sources,
        })
    }
}

fn mesh_error(path: &Path, e: MeshError) -> CliError {
    match e {
        MeshError::Io { source, .. } => CliError::MissingFile {
            path: path.to_path_buf(),
            reason: source.to_string(),
        },
        other => CliError::Invalid(vec![format!("{}: {other}", path.display())]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_config_round_trips() {
        let mut c = Config::builtin("kobayashi-test3");
        c.hmatrix.eta = 1.5;
        c.ladder.vertices = vec![500, 900];
        let text = c.to_toml();
        assert_eq!(Config::from_toml(&text).unwrap(), c);
        assert!(c.validate().is_empty());
    }

    #[test]
    fn file_config_round_trips_with_infinite_band() {
        let text = r#"
[scenario]
volume_mesh = "v.tet"
surface_mesh = "s.tri"

[[bands]]
lo = 0.0
hi = inf

[[regions]]
tag = 1
kappa = [0.5]

[[boundary]]
label = 3
q0 = [1.0]

[[boundary]]
label = 4
reflector = { point = [0.0, 0.0, 0.0], normal = [-1.0, 0.0, 0.0], r0 = 1.0 }
"#;
        let c = Config::from_toml(text).unwrap();
        assert_eq!(c.bands[0].hi, f64::INFINITY);
        assert!(c.validate().is_empty(), "{:?}", c.validate());
        assert_eq!(Config::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn validation_lists_every_problem() {
        let text = r#"
[scenario]
volume_mesh = "v.tet"
surface_mesh = "s.tri"

[[bands]]
lo = 0.0
hi = 1.0

[[regions]]
tag = 1
kappa = [0.5, 0.2]

[[boundary]]
label = 3

[solver]
tol = 0.0
max_iters = 0
"#;
        let errs = Config::from_toml(text).unwrap().validate();
        assert!(errs.iter().any(|e| e.contains("kappa values")));
        assert!(errs.iter().any(|e| e.contains("needs q0 or reflector")));
        assert!(errs.iter().any(|e| e.contains("solver.tol")));
        assert!(errs.iter().any(|e| e.contains("max_iters")));
    }

    #[test]
    fn unknown_keys_and_scenarios_are_rejected() {
        assert!(Config::from_toml("[solver]\ntolerance = 1.0\n").is_err());
        let c = Config::builtin("kobayashi-test9");
        assert_eq!(c.validate().len(), 1);
    }
}
