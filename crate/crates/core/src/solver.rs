//! Fixed-point iteration between the integral operator and the temperature map.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use rte_hmatrix::{DenseGenerator, HMatrix};
use thiserror::Error;

use crate::mesh::VolumeMesh;
use crate::operators::Operators;
use crate::spectral::{band_planck, solve_temperature, NodalMedium, SpectralError};
use crate::vec3::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("non-finite value in iterate {iter}")]
    NonFinite { iter: usize },
    #[error("operator mismatch: {0}")]
    Mismatch(String),
    #[error("node {node}: {source}")]
    Temperature { node: usize, source: SpectralError },
    #[error("invalid solver settings: {0}")]
    Config(String),
}

/// Anything that can be applied to a nodal vector.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

impl LinearOperator for HMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x).expect("dimension checked by the solver")
    }
}

impl LinearOperator for DenseGenerator {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }
}

/// What one iteration needs: per band an operator and the source vector.
pub struct System<'a, Op: LinearOperator> {
    pub operators: Vec<&'a Op>,
    pub sources: Vec<&'a [f64]>,
    pub medium: &'a NodalMedium,
}

impl<'a> System<'a, HMatrix> {
    pub fn from_operators(ops: &'a Operators) -> Self {
        Self {
            operators: (0..ops.bands.len()).map(|b| ops.volume_of(b)).collect(),
            sources: ops.bands.iter().map(|b| b.source.as_slice()).collect(),
            medium: &ops.medium,
        }
    }
}

impl<Op: LinearOperator> System<'_, Op> {
    fn check(&self, state: &SpectralState) -> Result<(), SolveError> {
        let n = state.t.len();
        let nb = self.medium.bands.len();
        let bad = |m: String| Err(SolveError::Mismatch(m));
        if self.operators.len() != nb || self.sources.len() != nb || state.j.len() != nb {
            return bad(format!(
                "{nb} bands, {} operators, {} sources, {} intensity fields",
                self.operators.len(),
                self.sources.len(),
                state.j.len()
            ));
        }
        if self.medium.absorption.len() != n {
            return bad(format!("{} nodes in the medium, {n} in the state", self.medium.absorption.len()));
        }
        for b in 0..nb {
            if self.operators[b].dim() != n || self.sources[b].len() != n || state.j[b].len() != n {
                return bad(format!("band {b} sized for another mesh"));
            }
        }
        Ok(())
    }
}

/// Band-integrated mean intensities and nodal temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    /// `[band][node]`
    pub j: Vec<Vec<f64>>,
    pub t: Vec<f64>,
}

impl SpectralState {
    /// `J = 0`, `T = t0` everywhere.
    pub fn initial(nodes: usize, bands: usize, t0: f64) -> Self {
        Self {
            j: vec![vec![0.0; nodes]; bands],
            t: vec![t0; nodes],
        }
    }

    /// Frequency-integrated mean intensity per node.
    pub fn total_intensity(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.t.len()];
        for band in &self.j {
            for (o, v) in out.iter_mut().zip(band) {
                *o += v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub t0: f64,
    pub max_iters: usize,
    /// Stop once `|T^{k+1} - T^k|_∞ <= tol |T^k|_∞`.
    pub tol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            t0: 0.001,
            max_iters: 50,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Increasing,
    Decreasing,
    Stationary,
    Mixed,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Increasing => "increasing",
            Verdict::Decreasing => "decreasing",
            Verdict::Stationary => "stationary",
            Verdict::Mixed => "mixed",
        }
    }

    /// Node-by-node comparison of two temperature fields.
    pub fn of(before: &[f64], after: &[f64]) -> Self {
        let up = before.iter().zip(after).any(|(a, b)| b > a);
        let down = before.iter().zip(after).any(|(a, b)| b < a);
        match (up, down) {
            (true, false) => Verdict::Increasing,
            (false, true) => Verdict::Decreasing,
            (false, false) => Verdict::Stationary,
            (true, true) => Verdict::Mixed,
        }
    }

    /// Compatible with a nondecreasing sequence.
    pub fn is_nondecreasing(self) -> bool {
        matches!(self, Verdict::Increasing | Verdict::Stationary)
    }

    pub fn is_nonincreasing(self) -> bool {
        matches!(self, Verdict::Decreasing | Verdict::Stationary)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub dt_sup: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub verdict: Verdict,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl IterationTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,dT_sup,Tmin,Tmax,verdict,seconds\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{},{:.6}",
                r.iter,
                r.dt_sup,
                r.t_min,
                r.t_max,
                r.verdict.as_str(),
                r.seconds
            );
        }
        s
    }

    pub fn all(&self, f: impl Fn(Verdict) -> bool) -> bool {
        self.records.iter().all(|r| f(r.verdict))
    }
}

/// One sweep: `S_b = a_b J_b + (1 - a_b) ∫_b B(T)`, `J_b' = S̄^E_b + G_b S_b`,
/// then the temperature map node by node.
pub fn fixed_point_step<Op: LinearOperator>(
    state: &SpectralState,
    sys: &System<'_, Op>,
) -> Result<SpectralState, SolveError> {
    sys.check(state)?;
    let medium = sys.medium;
    let j: Vec<Vec<f64>> = (0..medium.bands.len())
        .map(|b| {
            let band = &medium.bands[b];
            let s: Vec<f64> = (0..state.t.len())
                .into_par_iter()
                .map(|i| {
                    let a = medium.albedo[i][b];
                    let emit = if a < 1.0 { (1.0 - a) * band_planck(band, state.t[i]) } else { 0.0 };
                    a * state.j[b][i] + emit
                })
                .collect();
            let mut out = sys.operators[b].apply(&s);
            for (o, e) in out.iter_mut().zip(sys.sources[b]) {
                *o += e;
            }
            out
        })
        .collect();
    let t = (0..state.t.len())
        .into_par_iter()
        .map(|i| {
            let ji: Vec<f64> = j.iter().map(|band| band[i]).collect();
            solve_temperature(&ji, &medium.grid(i)).map_err(|source| SolveError::Temperature { node: i, source })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(SpectralState { j, t })
}

/// Iterates from `J = 0`, `T = t0` until the temperature settles.
pub fn run<Op: LinearOperator>(
    sys: &System<'_, Op>,
    cfg: &SolveConfig,
) -> Result<(SpectralState, IterationTrace), SolveError> {
    if !(cfg.tol > 0.0) || cfg.max_iters == 0 || !(cfg.t0 >= 0.0) {
        return Err(SolveError::Config(format!(
            "need tol > 0, max_iters >= 1, t0 >= 0 (got {}, {}, {})",
            cfg.tol, cfg.max_iters, cfg.t0
        )));
    }
    let n = sys.medium.absorption.len();
    let mut state = SpectralState::initial(n, sys.medium.bands.len(), cfg.t0);
    let mut trace = IterationTrace::default();
    for iter in 1..=cfg.max_iters {
        let t0 = Instant::now();
        let next = fixed_point_step(&state, sys)?;
        let finite = next.t.iter().chain(next.j.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(SolveError::NonFinite { iter });
        }
        let dt_sup = state.t.iter().zip(&next.t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = state.t.iter().fold(0.0, |m: f64, v| m.max(v.abs())).max(1e-300);
        trace.records.push(IterationRecord {
            iter,
            dt_sup,
            t_min: next.t.iter().copied().fold(f64::INFINITY, f64::min),
            t_max: next.t.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            verdict: Verdict::of(&state.t, &next.t),
            seconds: t0.elapsed().as_secs_f64(),
        });
        state = next;
        if dt_sup <= cfg.tol * scale {
            trace.converged = true;
            break;
        }
    }
    Ok((state, trace))
}

/// Budget residual `Σ_b κ_b (1 - a_b) (J_b - ∫_b B(T))` per node.
pub fn budget_residual(state: &SpectralState, medium: &NodalMedium) -> Vec<f64> {
    (0..state.t.len())
        .map(|i| {
            let j: Vec<f64> = state.j.iter().map(|b| b[i]).collect();
            medium.grid(i).residual(&j, state.t[i])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSample {
    /// Arc length from the first point.
    pub s: f64,
    pub point: Vec3,
    /// `None` outside the mesh.
    pub value: Option<f64>,
}

/// P1 interpolation of `field` at `n` equally spaced points of `[p0, p1]`.
pub fn probe_line(field: &[f64], mesh: &VolumeMesh, p0: Vec3, p1: Vec3, n: usize) -> Vec<ProbeSample> {
    let mut hint = None;
    let len = p0.dist(p1);
    (0..n)
        .map(|k| {
            let f = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
            let point = p0 + (p1 - p0) * f;
            let t = mesh.locate(point, hint);
            hint = t.or(hint);
            let value = t.map(|t| {
                let l = mesh.barycentric(t, point);
                (0..4).map(|m| l[m] * field[mesh.tets[t][m]]).sum()
            });
            ProbeSample { s: f * len, point, value }
        })
        .collect()
}

/// `s,x,y,z,value` rows; missing samples leave the value empty.
pub fn probe_csv(samples: &[ProbeSample]) -> String {
    let mut out = String::from("s,x,y,z,value\n");
    for p in samples {
        let v = p.value.map(|v| format!("{v:e}")).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{},{}", p.s, p.point.x, p.point.y, p.point.z, v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgen::box_mesh;
    use crate::spectral::{grey_temperature, SIGMA};
    use crate::transport::Band;

    fn grey_medium(n: usize) -> NodalMedium {
        NodalMedium {
            bands: vec![Band {
                lo: 0.0,
                hi: f64::INFINITY,
            }],
            absorption: vec![vec![1.0]; n],
            albedo: vec![vec![0.0]; n],
        }
    }

    fn dense(n: usize, f: impl Fn(usize, usize) -> f64) -> DenseGenerator {
        let mut data = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                data[i + j * n] = f(i, j);
            }
        }
        DenseGenerator { nrows: n, ncols: n, data }
    }

    #[test]
    fn zero_problem_is_a_fixed_point() {
        let g = dense(5, |i, j| 0.01 * (1 + i + j) as f64);
        let src = vec![0.0; 5];
        let medium = grey_medium(5);
        let sys = System {
            operators: vec![&g],
            sources: vec![&src],
            medium: &medium,
        };
        let s0 = SpectralState::initial(5, 1, 0.0);
        assert_eq!(fixed_point_step(&s0, &sys).unwrap(), s0);
    }

    #[test]
    fn grey_step_formula() {
        let n = 4;
        let g = dense(n, |i, j| 0.02 + 0.01 * ((i * 3 + j) % 5) as f64);
        let src: Vec<f64> = (0..n).map(|i| 0.1 * (i + 1) as f64).collect();
        let medium = grey_medium(n);
        let sys = System {
            operators: vec![&g],
            sources: vec![&src],
            medium: &medium,
        };
        let mut s0 = SpectralState::initial(n, 1, 0.0);
        s0.t = vec![0.3, 0.5, 0.7, 0.9];
        let s1 = fixed_point_step(&s0, &sys).unwrap();
        for i in 0..n {
            let mut j = src[i];
            for k in 0..n {
                j += g.data[i + k * n] * SIGMA * s0.t[k].powi(4);
            }
            assert!((s1.j[0][i] - j).abs() <= 1e-14 * j);
            assert!((s1.t[i] - grey_temperature(j)).abs() <= 1e-14);
        }
    }

    #[test]
    fn doubling_source_with_frozen_t_doubles_j() {
        let n = 3;
        let g = dense(n, |_, _| 0.05);
        let src = vec![0.2, 0.4, 0.1];
        let src2: Vec<f64> = src.iter().map(|v| 2.0 * v).collect();
        let medium = grey_medium(n);
        let s0 = SpectralState::initial(n, 1, 0.0);
        let one = fixed_point_step(&s0, &System { operators: vec![&g], sources: vec![&src], medium: &medium }).unwrap();
        let two = fixed_point_step(&s0, &System { operators: vec![&g], sources: vec![&src2], medium: &medium }).unwrap();
        for i in 0..n {
            assert_eq!(two.j[0][i], 2.0 * one.j[0][i]);
        }
    }

    #[test]
    fn monotone_from_both_sides() {
        let n = 6;
        let g = dense(n, |i, j| 0.08 / (1.0 + (i as f64 - j as f64).abs()));
        let src = vec![0.3; n];
        let medium = grey_medium(n);
        let sys = System {
            operators: vec![&g],
            sources: vec![&src],
            medium: &medium,
        };
        let cfg = |t0| SolveConfig { t0, max_iters: 200, tol: 1e-12 };
        let (lo, tl) = run(&sys, &cfg(0.0)).unwrap();
        let (hi, th) = run(&sys, &cfg(5.0)).unwrap();
        assert!(tl.converged && th.converged);
        assert!(tl.all(Verdict::is_nondecreasing));
        assert!(th.all(Verdict::is_nonincreasing));
        for (a, b) in lo.t.iter().zip(&hi.t) {
            assert!((a - b).abs() <= 1e-10 * a);
        }
        assert!(budget_residual(&lo, &medium).iter().all(|r| r.abs() <= 1e-12));
    }

    #[test]
    fn mismatched_sizes_are_reported() {
        let g = dense(3, |_, _| 0.0);
        let src = vec![0.0; 4];
        let medium = grey_medium(3);
        let sys = System {
            operators: vec![&g],
            sources: vec![&src],
            medium: &medium,
        };
        let s0 = SpectralState::initial(3, 1, 0.0);
        assert!(matches!(fixed_point_step(&s0, &sys), Err(SolveError::Mismatch(_))));
        assert!(matches!(
            run(&sys, &SolveConfig { t0: 0.0, max_iters: 0, tol: 1e-8 }),
            Err(SolveError::Config(_))
        ));
    }

    #[test]
    fn probe_reproduces_linear_fields() {
        let mesh = box_mesh(Vec3::ZERO, Vec3::new(2.0, 1.0, 1.0), [4, 2, 2]);
        let field: Vec<f64> = mesh.vertices.iter().map(|v| 3.0 * v.x - v.z + 0.5).collect();
        let samples = probe_line(&field, &mesh, Vec3::new(0.0, 0.3, 0.2), Vec3::new(2.0, 0.7, 0.9), 11);
        assert_eq!(samples.len(), 11);
        for p in &samples {
            let want = 3.0 * p.point.x - p.point.z + 0.5;
            assert!((p.value.unwrap() - want).abs() < 1e-12);
        }
        let out = probe_line(&field, &mesh, Vec3::new(1.0, 0.5, 0.5), Vec3::new(3.0, 0.5, 0.5), 5);
        assert!(out[0].value.is_some());
        assert!(out[4].value.is_none());
        assert!(probe_csv(&out).lines().last().unwrap().ends_with(','));
    }
}
