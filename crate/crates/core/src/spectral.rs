//! Planck function, band integrals and the temperature map.
//!
//! Mean intensities are stored band-integrated: `J_b = ∫_band J_ν dν`. The
//! grey case is then the single band `(0, ∞)` with `J̄ = J_0`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::transport::{AbsorptionModel, Band};

/// Stefan–Boltzmann constant in the rescaled units, `π⁴/15`.
pub const SIGMA: f64 = PI * PI * PI * PI / 15.0;

/// Frequencies beyond `lo + NU_SPAN * T` carry less than `e^{-60}` of the band.
const NU_SPAN: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("temperature undetermined: no band absorbs (all kappa (1 - a) vanish)")]
    Undetermined,
    #[error("band data mismatch: {0}")]
    Mismatch(String),
}

/// `B_ν(T) = ν³ / (e^{ν/T} - 1)`; zero for `T = 0`.
pub fn planck(nu: f64, t: f64) -> f64 {
    if t <= 0.0 || nu <= 0.0 {
        return 0.0;
    }
    let x = nu / t;
    if x < 1e-4 {
        // ν³/(e^x - 1) = ν² T / (1 + x/2 + x²/6 + ...)
        return nu * nu * t / (1.0 + x * (0.5 + x / 6.0));
    }
    nu * nu * nu / x.exp_m1()
}

/// `∂B_ν/∂T`.
pub fn planck_dt(nu: f64, t: f64) -> f64 {
    if t <= 0.0 || nu <= 0.0 {
        return 0.0;
    }
    let x = nu / t;
    if x > 700.0 {
        return 0.0;
    }
    let e = x.exp_m1();
    nu * nu * nu * x * (e + 1.0) / (t * e * e)
}

// Gauss-Kronrod 7-15 nodes on [-1, 1] (positive half, centre last).
const XK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights for the odd Kronrod nodes XK[1], XK[3], XK[5], XK[7].
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let fs = f(c - h * XK[i]) + f(c + h * XK[i]);
        k += WK[i] * fs;
        if i % 2 == 1 {
            g += WG[i / 2] * fs;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod quadrature to `rel` relative accuracy.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let (total, err) = gk15(&f, a, b);
    let mut parts = vec![(a, b, total, err)];
    let mut sum = total;
    let mut err_sum = err;
    for _ in 0..2000 {
        if err_sum <= rel * sum.abs() || err_sum == 0.0 {
            break;
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, v, e) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        sum += v1 + v2 - v;
        err_sum += e1 + e2 - e;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    parts.iter().map(|p| p.2).sum()
}

fn band_span(band: &Band, t: f64) -> (f64, f64) {
    let lo = band.lo.max(0.0);
    (lo, band.hi.min(lo + NU_SPAN * t))
}

/// `∫_band B_ν(T) dν`.
pub fn band_planck(band: &Band, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if band.lo <= 0.0 && band.hi == f64::INFINITY {
        return SIGMA * t.powi(4);
    }
    let (lo, hi) = band_span(band, t);
    integrate(|nu| planck(nu, t), lo, hi, 1e-12)
}

/// `d/dT ∫_band B_ν(T) dν`.
pub fn band_planck_dt(band: &Band, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if band.lo <= 0.0 && band.hi == f64::INFINITY {
        return 4.0 * SIGMA * t.powi(3);
    }
    let (lo, hi) = band_span(band, t);
    integrate(|nu| planck_dt(nu, t), lo, hi, 1e-12)
}

/// `T = (J̄ / σ)^{1/4}`.
pub fn grey_temperature(jbar: f64) -> f64 {
    if jbar <= 0.0 {
        return 0.0;
    }
    (jbar / SIGMA).sqrt().sqrt()
}

/// Bands with the absorption weights `κ_b (1 - a_b)` at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    pub bands: Vec<Band>,
    /// `κ_b (1 - a_b)`.
    pub weights: Vec<f64>,
}

impl SpectralGrid {
    pub fn new(bands: Vec<Band>, weights: Vec<f64>) -> Result<Self, SpectralError> {
        if bands.len() != weights.len() {
            return Err(SpectralError::Mismatch(format!(
                "{} bands but {} weights",
                bands.len(),
                weights.len()
            )));
        }
        Ok(Self { bands, weights })
    }

    /// Single band `(0, ∞)`.
    pub fn grey() -> Self {
        Self {
            bands: vec![Band {
                lo: 0.0,
                hi: f64::INFINITY,
            }],
            weights: vec![1.0],
        }
    }

    fn is_grey(&self) -> bool {
        self.bands.len() == 1 && self.bands[0].lo <= 0.0 && self.bands[0].hi == f64::INFINITY
    }

    /// `Σ_b w_b ∫_band B_ν(T) dν`.
    pub fn emission(&self, t: f64) -> f64 {
        self.bands
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(b, w)| w * band_planck(b, t))
            .sum()
    }

    fn emission_dt(&self, t: f64) -> f64 {
        self.bands
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(b, w)| w * band_planck_dt(b, t))
            .sum()
    }

    /// Budget residual `Σ_b w_b (J_b - ∫_band B_ν(T) dν)`.
    pub fn residual(&self, j: &[f64], t: f64) -> f64 {
        let absorbed: f64 = self.weights.iter().zip(j).map(|(w, j)| w * j).sum();
        absorbed - self.emission(t)
    }
}

/// Temperature balancing absorption and emission at one node.
///
/// The residual is strictly decreasing in `T`, so the root is unique. Newton
/// steps start from the grey estimate inside a bracket and fall back to
/// bisection whenever a step leaves it.
pub fn solve_temperature(j: &[f64], grid: &SpectralGrid) -> Result<f64, SpectralError> {
    if j.len() != grid.bands.len() {
        return Err(SpectralError::Mismatch(format!(
            "{} band values for {} bands",
            j.len(),
            grid.bands.len()
        )));
    }
    let wsum: f64 = grid.weights.iter().filter(|w| **w > 0.0).sum();
    if !(wsum > 0.0) {
        return Err(SpectralError::Undetermined);
    }
    let absorbed: f64 = grid.weights.iter().zip(j).map(|(w, j)| w * j).sum();
    if absorbed <= 0.0 {
        return Ok(0.0);
    }
    if grid.is_grey() {
        return Ok(grey_temperature(j[0]));
    }
    let f = |t: f64| absorbed - grid.emission(t);
    let guess = grey_temperature(absorbed / wsum).max(f64::MIN_POSITIVE);
    let (mut lo, mut hi) = (0.0, guess);
    let mut grow = 0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 10.0;
        grow += 1;
        if grow > 60 {
            return Err(SpectralError::Undetermined);
        }
    }
    let tol = 1e-12 * absorbed;
    let mut t = if lo > 0.0 { 0.5 * (lo + hi) } else { guess.min(hi) };
    for iter in 0..200 {
        let r = f(t);
        if r.abs() <= tol {
            return Ok(t);
        }
        if r > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let d = grid.emission_dt(t);
        let newton = if iter < 50 && d > 0.0 { t + r / d } else { f64::NAN };
        t = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * hi {
            return Ok(t);
        }
    }
    Ok(t)
}

/// Per-node band weights `κ_b (1 - a_b)` and albedos `a_b`.
///
/// A vertex shared by regions takes the volume-weighted mean over the tets
/// around it.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalMedium {
    pub bands: Vec<Band>,
    /// `[node][band]`
    pub absorption: Vec<Vec<f64>>,
    /// `[node][band]`
    pub albedo: Vec<Vec<f64>>,
}

impl NodalMedium {
    pub fn from_model(
        model: &AbsorptionModel,
        mesh: &crate::mesh::VolumeMesh,
        tet_region: &[u32],
    ) -> Self {
        let nb = model.num_bands();
        let mut absorption = Vec::with_capacity(mesh.num_vertices());
        let mut albedo = Vec::with_capacity(mesh.num_vertices());
        for v in 0..mesh.num_vertices() {
            let mut vol = 0.0;
            let mut ka = vec![0.0; nb];
            let mut al = vec![0.0; nb];
            for &t in mesh.vertex_tets(v) {
                let w = mesh.volume(t);
                let r = tet_region[t] as usize;
                vol += w;
                for b in 0..nb {
                    ka[b] += w * model.kappa[b][r] * (1.0 - model.scatter[b][r]);
                    al[b] += w * model.scatter[b][r];
                }
            }
            if vol > 0.0 {
                ka.iter_mut().chain(al.iter_mut()).for_each(|x| *x /= vol);
            }
            absorption.push(ka);
            albedo.push(al);
        }
        Self {
            bands: model.bands.clone(),
            absorption,
            albedo,
        }
    }

    pub fn grid(&self, node: usize) -> SpectralGrid {
        SpectralGrid {
            bands: self.bands.clone(),
            weights: self.absorption[node].clone(),
        }
    }
}
