//! The four subcommands, as library calls returning their results.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rte_core::operators::{assemble, Operators};
use rte_core::scenario::{kobayashi, spacing_for_vertices, symmetrize, Scenario};
use rte_core::solver::{probe_csv, probe_line, run, IterationTrace, ProbeSample, SolveConfig, SpectralState, System};
use rte_core::{Vec3, VolumeMesh};
use rte_hmatrix::CompressionReport;

use crate::config::{Config, ProbeSpec, Quantity};
use crate::output::{loglog_slope, nodal_csv, relative_l2, transfer, vtk};
use crate::CliError;

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

/// A converged (or stopped) run and what it cost.
#[derive(Debug, Clone)]
pub struct Solution {
    pub scenario: Scenario,
    pub state: SpectralState,
    pub trace: IterationTrace,
    pub volume: CompressionReport,
    pub surface: CompressionReport,
    pub warnings: Vec<String>,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
}

impl Solution {
    pub fn field(&self, q: Quantity) -> Vec<f64> {
        match q {
            Quantity::J => self.state.total_intensity(),
            Quantity::T => self.state.t.clone(),
        }
    }

    pub fn probe(&self, p: &ProbeSpec) -> Vec<ProbeSample> {
        probe_line(
            &self.field(p.quantity),
            &self.scenario.volume,
            Vec3::from(p.from),
            Vec3::from(p.to),
            p.samples,
        )
    }

    pub fn vertices(&self) -> usize {
        self.scenario.volume.num_vertices()
    }
}

/// Assembles the operators of `sc` with the settings of `cfg`.
pub fn assemble_scenario(sc: &Scenario, cfg: &Config) -> Result<Operators, CliError> {
    assemble(sc, &cfg.assembly_options()).map_err(run_err)
}

/// Runs the fixed point on already assembled operators.
pub fn solve_assembled(sc: Scenario, ops: &Operators, solver: &SolveConfig) -> Result<Solution, CliError> {
    let t0 = Instant::now();
    let (state, trace) = run(&System::from_operators(ops), solver).map_err(run_err)?;
    Ok(Solution {
        scenario: sc,
        state,
        trace,
        volume: ops.volume_report(),
        surface: ops.surface_report(),
        warnings: ops.warnings.clone(),
        assembly_seconds: ops.seconds,
        solve_seconds: t0.elapsed().as_secs_f64(),
    })
}

pub fn solve_scenario(sc: Scenario, cfg: &Config) -> Result<Solution, CliError> {
    let ops = assemble_scenario(&sc, cfg)?;
    solve_assembled(sc, &ops, &cfg.solve_config())
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Run(format!("cannot create {}: {e}", dir.display())))
}

/// Writes fields, the iteration trace, probes and the effective config under `dir`.
pub fn write_solution(sol: &Solution, cfg: &Config, dir: &Path) -> Result<(), CliError> {
    create_dir(dir)?;
    if cfg.output.fields {
        let j = sol.field(Quantity::J);
        let mut fields: Vec<(String, &[f64])> = vec![("J".into(), &j), ("T".into(), &sol.state.t)];
        if sol.state.j.len() > 1 {
            for (b, jb) in sol.state.j.iter().enumerate() {
                fields.push((format!("J_{b}"), jb));
            }
        }
        let named: Vec<(&str, &[f64])> = fields.iter().map(|(n, f)| (n.as_str(), *f)).collect();
        write(dir, "field.vtk", &vtk(&sol.scenario.volume, &sol.scenario.name, &named))?;
        write(dir, "field.csv", &nodal_csv(&sol.scenario.volume, &named))?;
    }
    write(dir, "trace.csv", &sol.trace.to_csv())?;
    for p in &cfg.output.probes {
        write(dir, &format!("probe_{}.csv", p.name), &probe_csv(&sol.probe(p)))?;
    }
    write(dir, "config.toml", &cfg.to_toml())
}

/// `solve`: one run, written to the output directory.
pub fn solve(cfg: &Config) -> Result<Solution, CliError> {
    let sol = solve_scenario(cfg.scenario()?, cfg)?;
    write_solution(&sol, cfg, &cfg.output.dir)?;
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub vertices: usize,
    pub surface_cl: f64,
    pub volume_cl: f64,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
    pub normalized: f64,
    pub iterations: usize,
}

impl BenchRow {
    pub fn of(sol: &Solution) -> Self {
        let n = sol.vertices();
        let cpu = sol.assembly_seconds + sol.solve_seconds;
        Self {
            vertices: n,
            surface_cl: sol.surface.ratio,
            volume_cl: sol.volume.ratio,
            assembly_seconds: sol.assembly_seconds,
            solve_seconds: sol.solve_seconds,
            normalized: normalized_cpu(cpu, n),
            iterations: sol.trace.records.len(),
        }
    }
}

/// `1e5 · cpu / (N · N^{1/3} · ln N)`.
pub fn normalized_cpu(cpu: f64, n: usize) -> f64 {
    let n = n as f64;
    1e5 * cpu / (n * n.cbrt() * n.ln())
}

pub fn bench_tsv(rows: &[BenchRow]) -> String {
    let mut s = String::from("N\tsurface_CL\tvolume_CL\tassembly_s\tsolve_s\tnormalized_cpu\titerations\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{:.4}\t{:.4}\t{:.3}\t{:.3}\t{:.4}\t{}",
            r.vertices, r.surface_cl, r.volume_cl, r.assembly_seconds, r.solve_seconds, r.normalized, r.iterations
        );
    }
    s
}

/// The ladder scenarios: the built-in problem at each `ladder.vertices`.
pub fn ladder_scenarios(cfg: &Config) -> Result<Vec<Scenario>, CliError> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(CliError::Invalid(errs));
    }
    let Some(test) = cfg.builtin_test() else {
        return Err(CliError::Invalid(vec!["ladders need a built-in scenario".into()]));
    };
    Ok(cfg
        .ladder
        .vertices
        .iter()
        .map(|&n| kobayashi(test, spacing_for_vertices(n), cfg.scenario.variant))
        .collect())
}

/// Solves every ladder mesh, coarse to fine.
pub fn solve_ladder(cfg: &Config) -> Result<Vec<Solution>, CliError> {
    let mut out: Vec<Solution> = ladder_scenarios(cfg)?
        .into_iter()
        .map(|sc| solve_scenario(sc, cfg))
        .collect::<Result<_, _>>()?;
    out.sort_by_key(Solution::vertices);
    Ok(out)
}

/// `bench`: one row per ladder mesh.
pub fn bench(cfg: &Config) -> Result<Vec<BenchRow>, CliError> {
    if cfg.ladder.vertices.len() < 2 {
        return Err(CliError::Invalid(vec!["bench needs at least 2 ladder meshes".into()]));
    }
    let rows: Vec<BenchRow> = solve_ladder(cfg)?.iter().map(BenchRow::of).collect();
    create_dir(&cfg.output.dir)?;
    write(&cfg.output.dir, "bench.tsv", &bench_tsv(&rows))?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    pub vertices: usize,
    pub h: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderReport {
    /// Coarse meshes only; the finest is the reference.
    pub rows: Vec<LadderRow>,
    pub reference_vertices: usize,
    pub slope: f64,
}

impl LadderReport {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("N\th\trel_L2_error\n");
        for r in &self.rows {
            let _ = writeln!(s, "{}\t{:.6}\t{:e}", r.vertices, r.h, r.error);
        }
        let _ = writeln!(s, "# reference N = {}, slope = {:.4}", self.reference_vertices, self.slope);
        s
    }
}

/// Relative L² error of each coarse field against the finest one, measured on
/// the finest mesh, with the least-squares slope against `h = N^{-1/3}`.
pub fn error_ladder_fields(fields: &[(&VolumeMesh, &[f64])]) -> Result<LadderReport, CliError> {
    if fields.len() < 3 {
        return Err(CliError::Invalid(vec![format!(
            "an error ladder needs at least 3 meshes, got {}",
            fields.len()
        )]));
    }
    let mut sorted: Vec<&(&VolumeMesh, &[f64])> = fields.iter().collect();
    sorted.sort_by_key(|(m, _)| m.num_vertices());
    if sorted.windows(2).any(|w| w[0].0.num_vertices() == w[1].0.num_vertices()) {
        return Err(CliError::Invalid(vec![
            "error ladder meshes must have distinct vertex counts; identical meshes give zero error rows".into(),
        ]));
    }
    let (fine, fine_f) = *sorted.pop().expect("at least 3");
    let rows = sorted
        .iter()
        .map(|(m, f)| {
            let n = m.num_vertices();
            LadderRow {
                vertices: n,
                h: (n as f64).powf(-1.0 / 3.0),
                error: relative_l2(fine, &transfer(m, f, fine), fine_f),
            }
        })
        .collect::<Vec<_>>();
    if let Some(r) = rows.iter().find(|r| !(r.error > 0.0)) {
        return Err(CliError::Run(format!("mesh with N = {} has zero error against the reference", r.vertices)));
    }
    let slope = loglog_slope(&rows.iter().map(|r| (r.h, r.error)).collect::<Vec<_>>());
    Ok(LadderReport {
        rows,
        reference_vertices: fine.num_vertices(),
        slope,
    })
}

pub fn error_ladder_of(solutions: &[Solution], q: Quantity) -> Result<LadderReport, CliError> {
    let fields: Vec<Vec<f64>> = solutions.iter().map(|s| s.field(q)).collect();
    let pairs: Vec<(&VolumeMesh, &[f64])> = solutions
        .iter()
        .zip(&fields)
        .map(|(s, f)| (&s.scenario.volume, f.as_slice()))
        .collect();
    error_ladder_fields(&pairs)
}

/// `error-ladder`: relative errors against the finest ladder mesh.
pub fn error_ladder(cfg: &Config) -> Result<LadderReport, CliError> {
    if cfg.ladder.vertices.len() < 3 {
        return Err(CliError::Invalid(vec!["an error ladder needs at least 3 meshes".into()]));
    }
    let report = error_ladder_of(&solve_ladder(cfg)?, cfg.ladder.quantity)?;
    create_dir(&cfg.output.dir)?;
    write(&cfg.output.dir, "error_ladder.tsv", &report.to_tsv())?;
    Ok(report)
}

/// Differences of the reflective run and the mirror-free run from the
/// symmetrized-domain run, on the original domain.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub reflective: f64,
    pub no_reflection: f64,
    pub probes: Vec<(String, String)>,
    pub solutions: [Solution; 3],
}

impl CompareReport {
    pub fn to_tsv(&self) -> String {
        format!(
            "run\trel_L2_vs_symmetrized\nreflective\t{:e}\nno_reflection\t{:e}\n",
            self.reflective, self.no_reflection
        )
    }
}

/// Solves the three runs and compares them; `sym` must cover the domain of `rc`.
pub fn compare_runs(rc: Scenario, sym: Scenario, norc: Scenario, cfg: &Config) -> Result<CompareReport, CliError> {
    let q = cfg.ladder.quantity;
    let rc = solve_scenario(rc, cfg)?;
    let sym = solve_scenario(sym, cfg)?;
    let norc = solve_scenario(norc, cfg)?;
    let mesh = &rc.scenario.volume;
    let reference: Vec<f64> = transfer(&sym.scenario.volume, &sym.field(q), mesh)
        .into_iter()
        .enumerate()
        .map(|(v, x)| x.ok_or_else(|| CliError::Run(format!("vertex {v} lies outside the symmetrized mesh"))))
        .collect::<Result<_, _>>()?;
    let diff = |s: &Solution| relative_l2(mesh, &s.field(q).into_iter().map(Some).collect::<Vec<_>>(), &reference);
    let probes = cfg
        .output
        .probes
        .iter()
        .map(|p| {
            let cols = [rc.probe(p), sym.probe(p), norc.probe(p)];
            let mut s = String::from("s,x,y,z,reflective,symmetrized,no_reflection\n");
            for k in 0..cols[0].len() {
                let pt = cols[0][k];
                let _ = write!(s, "{},{},{},{}", pt.s, pt.point.x, pt.point.y, pt.point.z);
                for c in &cols {
                    let _ = write!(s, ",{}", c[k].value.map(|v| format!("{v:e}")).unwrap_or_default());
                }
                s.push('\n');
            }
            (p.name.clone(), s)
        })
        .collect();
    Ok(CompareReport {
        reflective: diff(&rc),
        no_reflection: diff(&norc),
        probes,
        solutions: [rc, sym, norc],
    })
}

/// `compare-sym`: the scenario must have exactly one mirror.
pub fn compare_sym(cfg: &Config) -> Result<CompareReport, CliError> {
    let rc = cfg.scenario()?;
    if rc.reflectors.len() != 1 {
        return Err(CliError::Invalid(vec![format!(
            "compare-sym needs exactly one reflector, the scenario has {}",
            rc.reflectors.len()
        )]));
    }
    let sym = symmetrize(&rc, 0).map_err(run_err)?;
    let mut norc = rc.clone();
    norc.reflectors.clear();
    norc.name.push_str("-norc");
    let report = compare_runs(rc, sym, norc, cfg)?;
    let dir = &cfg.output.dir;
    create_dir(dir)?;
    write(dir, "compare.tsv", &report.to_tsv())?;
    for (name, text) in &report.probes {
        write(dir, &format!("compare_{name}.csv"), text)?;
    }
    Ok(report)
}
