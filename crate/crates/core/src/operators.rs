//! Per-band assembly of the compressed volume operator and the source vector.

use std::time::Instant;

use rte_hmatrix::{ClusterTree, CompressionReport, HMatrix, HMatrixError, HOptions};
use thiserror::Error;

use crate::kernels::{surface_column_points, KernelContext, QuadratureOptions, SurfaceKernel, VolumeKernel};
use crate::scenario::Scenario;
use crate::spectral::NodalMedium;
use crate::transport::{GeometryError, ReflectorSet, TransportGeometry};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    HMatrix(#[from] HMatrixError),
    #[error("{sources} source tables for {bands} bands")]
    Sources { sources: usize, bands: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    pub eta: f64,
    pub eps: f64,
    pub leaf_size: usize,
    pub quadrature: QuadratureOptions,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            eta: 2.0,
            eps: 1e-4,
            leaf_size: 64,
            quadrature: QuadratureOptions::default(),
        }
    }
}

/// Operators of one band.
#[derive(Debug, Clone)]
pub struct BandOperator {
    /// Index into [`Operators::volume`]; bands with equal κ tables share it.
    pub volume: usize,
    pub surface: HMatrix,
    /// `S̄^E_i = Σ_l S_il Q⁰_l`.
    pub source: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Operators {
    pub volume: Vec<HMatrix>,
    pub bands: Vec<BandOperator>,
    pub medium: NodalMedium,
    pub warnings: Vec<String>,
    pub seconds: f64,
}

impl Operators {
    pub fn volume_of(&self, band: usize) -> &HMatrix {
        &self.volume[self.bands[band].volume]
    }

    /// Storage-weighted compression over every volume operator.
    pub fn volume_report(&self) -> CompressionReport {
        merge(self.volume.iter().map(HMatrix::report))
    }

    pub fn surface_report(&self) -> CompressionReport {
        merge(self.bands.iter().map(|b| b.surface.report()))
    }
}

fn merge(reports: impl Iterator<Item = CompressionReport>) -> CompressionReport {
    let mut out = CompressionReport::default();
    let mut full = 0.0;
    for r in reports {
        full += (r.nrows * r.ncols) as f64;
        out.nrows = r.nrows;
        out.ncols += r.ncols;
        out.stored += r.stored;
        out.dense_leaves += r.dense_leaves;
        out.low_rank_leaves += r.low_rank_leaves;
        out.zero_leaves += r.zero_leaves;
        out.downgraded += r.downgraded;
        out.assembly_entries += r.assembly_entries;
        out.assembly_seconds += r.assembly_seconds;
    }
    out.ratio = if full > 0.0 { 1.0 - out.stored as f64 / full } else { 0.0 };
    out
}

/// Assembles `G` and `S̄^E` for every band of `sc`.
pub fn assemble(sc: &Scenario, opts: &AssemblyOptions) -> Result<Operators, AssemblyError> {
    let t0 = Instant::now();
    let nb = sc.model.num_bands();
    if sc.sources.len() != nb {
        return Err(AssemblyError::Sources {
            sources: sc.sources.len(),
            bands: nb,
        });
    }
    let geometry = TransportGeometry::new(&sc.volume, &sc.surface, &sc.model)?;
    let reflectors = ReflectorSet::new(sc.reflectors.clone(), &sc.surface)?;
    let points: Vec<[f64; 3]> = sc.volume.vertices.iter().map(|v| v.to_array()).collect();
    let rows = ClusterTree::build(&points, opts.leaf_size);
    let hopts = HOptions {
        eta: opts.eta,
        eps: opts.eps,
    };
    let mut volume: Vec<HMatrix> = Vec::new();
    let mut owner: Vec<usize> = Vec::new();
    let mut bands = Vec::with_capacity(nb);
    for b in 0..nb {
        let ctx = KernelContext {
            mesh: &sc.volume,
            surface: &sc.surface,
            geometry: &geometry,
            model: &sc.model,
            reflectors: &reflectors,
            band: b,
            quadrature: opts.quadrature,
        };
        let shared = owner.iter().position(|&o| sc.model.kappa[o] == sc.model.kappa[b]);
        let vol = match shared {
            Some(v) => v,
            None => {
                let g = HMatrix::assemble(&VolumeKernel::new(&ctx), rows.clone(), rows.clone(), hopts)?;
                volume.push(g);
                owner.push(b);
                volume.len() - 1
            }
        };
        let sk = SurfaceKernel::new(&ctx, &sc.sources[b]);
        let cols = ClusterTree::build(&surface_column_points(&sc.surface, &sk), opts.leaf_size);
        let surface = HMatrix::assemble(&sk, rows.clone(), cols, hopts)?;
        let source = surface.matvec(&sk.source_values(&sc.sources[b]))?;
        bands.push(BandOperator {
            volume: vol,
            surface,
            source,
        });
    }
    let medium = NodalMedium::from_model(&sc.model, &sc.volume, &geometry.tet_region);
    Ok(Operators {
        volume,
        bands,
        medium,
        warnings: reflectors.warnings.clone(),
        seconds: t0.elapsed().as_secs_f64(),
    })
}
