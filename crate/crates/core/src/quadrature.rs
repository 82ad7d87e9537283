//! Fixed symmetric rules on the reference tetrahedron and triangle, plus
//! Gauss–Legendre on [0, 1].

use std::sync::OnceLock;

/// Points in barycentric form; weights sum to 1 (scale by element measure).
#[derive(Debug, Clone)]
pub struct QuadratureRule<const D: usize> {
    pub degree: usize,
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
}

pub type TetRule = QuadratureRule<4>;
pub type TriRule = QuadratureRule<3>;

fn perm4_group(a: f64) -> Vec<[f64; 4]> {
    let b = 1.0 - 3.0 * a;
    vec![[b, a, a, a], [a, b, a, a], [a, a, b, a], [a, a, a, b]]
}

fn pair_group(a: f64) -> Vec<[f64; 4]> {
    let b = 0.5 - a;
    vec![
        [a, a, b, b],
        [a, b, a, b],
        [a, b, b, a],
        [b, a, a, b],
        [b, a, b, a],
        [b, b, a, a],
    ]
}

fn tet_rule(degree: usize) -> TetRule {
    match degree {
        2 => {
            let pts = perm4_group(0.138_196_601_125_010_5);
            TetRule {
                degree: 2,
                weights: vec![0.25; 4],
                points: pts,
            }
        }
        5 => {
            // Keast/Walkington 14-point rule; weights given for volume 1/6
            let groups: [(Vec<[f64; 4]>, f64); 3] = [
                (perm4_group(0.092_735_250_310_891_2), 0.012_248_840_519_393_66),
                (perm4_group(0.310_885_919_263_300_6), 0.018_781_320_953_002_64),
                (pair_group(0.045_503_704_125_649_6), 0.007_091_003_462_846_911),
            ];
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for (pts, w) in groups {
                for p in pts {
                    points.push(p);
                    weights.push(6.0 * w);
                }
            }
            TetRule {
                degree: 5,
                points,
                weights,
            }
        }
        _ => panic!("unsupported tetrahedron rule degree {degree}"),
    }
}

fn tri_rule(degree: usize) -> TriRule {
    match degree {
        2 => {
            let (a, b) = (1.0 / 6.0, 2.0 / 3.0);
            TriRule {
                degree: 2,
                points: vec![[b, a, a], [a, b, a], [a, a, b]],
                weights: vec![1.0 / 3.0; 3],
            }
        }
        5 => {
            let t = 1.0 / 3.0;
            let a = 0.470_142_064_105_115;
            let b = 0.101_286_507_323_456;
            let (wa, wb) = (0.132_394_152_788_506, 0.125_939_180_544_827);
            TriRule {
                degree: 5,
                points: vec![
                    [t, t, t],
                    [1.0 - 2.0 * a, a, a],
                    [a, 1.0 - 2.0 * a, a],
                    [a, a, 1.0 - 2.0 * a],
                    [1.0 - 2.0 * b, b, b],
                    [b, 1.0 - 2.0 * b, b],
                    [b, b, 1.0 - 2.0 * b],
                ],
                weights: vec![0.225, wa, wa, wa, wb, wb, wb],
            }
        }
        _ => panic!("unsupported triangle rule degree {degree}"),
    }
}

static TET2: OnceLock<TetRule> = OnceLock::new();
static TET5: OnceLock<TetRule> = OnceLock::new();
static TRI2: OnceLock<TriRule> = OnceLock::new();
static TRI5: OnceLock<TriRule> = OnceLock::new();

/// Degree 2 (4 points) or degree 5 (14 points). Panics on other degrees.
pub fn tet(degree: usize) -> &'static TetRule {
    match degree {
        2 => TET2.get_or_init(|| tet_rule(2)),
        5 => TET5.get_or_init(|| tet_rule(5)),
        _ => panic!("unsupported tetrahedron rule degree {degree}"),
    }
}

/// Degree 2 (3 points) or degree 5 (7 points).
pub fn tri(degree: usize) -> &'static TriRule {
    match degree {
        2 => TRI2.get_or_init(|| tri_rule(2)),
        5 => TRI5.get_or_init(|| tri_rule(5)),
        _ => panic!("unsupported triangle rule degree {degree}"),
    }
}

/// Gauss–Legendre nodes and weights mapped to [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for k in 0..n {
        // Newton on P_n from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[k] = 0.5 * (1.0 - x);
        ws[k] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    // ∫ over the reference tet of x^a y^b z^c = a! b! c! / (a+b+c+3)!
    fn fact(n: u32) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    fn tet_moment(a: u32, b: u32, c: u32) -> f64 {
        fact(a) * fact(b) * fact(c) / fact(a + b + c + 3)
    }

    fn apply_tet(rule: &TetRule, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w / 6.0 * f(p[1], p[2], p[3]))
            .sum()
    }

    #[test]
    fn tet_rules_have_the_advertised_sizes() {
        assert_eq!(tet(2).points.len(), 4);
        assert_eq!(tet(5).points.len(), 14);
        for d in [2, 5] {
            let r = tet(d);
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(r.points.iter().flatten().all(|&l| l > 0.0));
        }
    }

    #[test]
    fn tet_rules_are_exact_up_to_their_degree() {
        for d in [2usize, 5] {
            let r = tet(d);
            for a in 0..=d as u32 {
                for b in 0..=(d as u32 - a) {
                    for c in 0..=(d as u32 - a - b) {
                        let q = apply_tet(r, |x, y, z| x.powi(a as i32) * y.powi(b as i32) * z.powi(c as i32));
                        let e = tet_moment(a, b, c);
                        assert!((q - e).abs() <= 1e-13 * e, "deg {d} ({a},{b},{c}) {q} vs {e}");
                    }
                }
            }
        }
        let q = apply_tet(tet(5), |x, y, _| x * x * y);
        assert!((q - 1.0 / 360.0).abs() < 1e-16);
    }

    #[test]
    fn degree_two_rule_misses_quintics() {
        let q = apply_tet(tet(2), |x, _, _| x.powi(5));
        let e = tet_moment(5, 0, 0);
        assert!((q - e).abs() > 1e-3 * e);
    }

    #[test]
    fn triangle_rules_are_exact_up_to_their_degree() {
        // ∫ over the reference triangle of x^a y^b = a! b! / (a+b+2)!
        for d in [2usize, 5] {
            let r = tri(d);
            for a in 0..=d as u32 {
                for b in 0..=(d as u32 - a) {
                    let q: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| 0.5 * w * p[1].powi(a as i32) * p[2].powi(b as i32))
                        .sum();
                    let e = fact(a) * fact(b) / fact(a + b + 2);
                    assert!((q - e).abs() <= 1e-13 * e.max(1e-3), "deg {d} ({a},{b})");
                }
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..10 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for p in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-13, "n {n} p {p}");
            }
        }
    }
}
