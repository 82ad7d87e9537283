pub mod bvh;
pub mod kernels;
pub mod mesh;
pub mod meshgen;
pub mod operators;
pub mod quadrature;
pub mod scenario;
pub mod solver;
pub mod spectral;
pub mod transport;
pub mod vec3;

pub use mesh::{MeshError, SurfaceMesh, VolumeMesh};
pub use transport::{
    mirror_point, AbsorptionModel, Band, Depth, ExitPoint, GeometryError, OpticalPath, PlanarReflector,
    ReflectorSet, TransportGeometry,
};
pub use vec3::Vec3;
