use proptest::prelude::*;
use rte_core::operators::{assemble, AssemblyOptions};
use rte_core::scenario::{kobayashi, KobayashiTest, Scenario, Variant};
use rte_core::solver::{budget_residual, run, SolveConfig, System};
use rte_core::spectral::{band_planck, grey_temperature, solve_temperature, SpectralGrid, SIGMA};
use rte_core::Band;

fn bands(edges: &[f64]) -> Vec<Band> {
    edges.windows(2).map(|w| Band { lo: w[0], hi: w[1] }).collect()
}

fn partition(cuts: &[f64]) -> Vec<f64> {
    let mut e: Vec<f64> = cuts.to_vec();
    e.sort_by(f64::total_cmp);
    e.dedup();
    e.insert(0, 0.0);
    e.push(f64::INFINITY);
    e
}

proptest! {
    #[test]
    fn band_partition_recovers_stefan_boltzmann(cuts in prop::collection::vec(0.01f64..40.0, 0..6), t in 0.05f64..3.0) {
        let total: f64 = bands(&partition(&cuts)).iter().map(|b| band_planck(b, t)).sum();
        let want = SIGMA * t.powi(4);
        prop_assert!((total - want).abs() <= 1e-8 * want, "{total} vs {want}");
    }

    #[test]
    fn temperature_is_monotone_in_each_band(
        cuts in prop::collection::vec(0.1f64..20.0, 1..4),
        j in prop::collection::vec(0.0f64..5.0, 5),
        w in prop::collection::vec(0.01f64..2.0, 5),
        bump in 0usize..5,
        extra in 0.01f64..1.0,
    ) {
        let b = bands(&partition(&cuts));
        let nb = b.len();
        let grid = SpectralGrid::new(b, w[..nb].to_vec()).unwrap();
        let j = &j[..nb];
        let t = solve_temperature(j, &grid).unwrap();
        prop_assert!(grid.residual(j, t).abs() <= 1e-9 * grid.emission(t).max(1e-300));
        let mut up = j.to_vec();
        up[bump % nb] += extra;
        prop_assert!(solve_temperature(&up, &grid).unwrap() > t);
    }

    #[test]
    fn grey_temperature_inverts_stefan_boltzmann(t in 0.0f64..50.0) {
        prop_assert!((grey_temperature(SIGMA * t.powi(4)) - t).abs() <= 1e-12 * t.max(1.0));
    }
}

fn small(test: KobayashiTest, scale: f64) -> Scenario {
    let mut sc = kobayashi(test, 15.0, Variant::Reflective);
    for s in &mut sc.sources {
        for q in &mut s.q0 {
            q.1 *= scale;
        }
    }
    sc
}

#[test]
fn iterates_are_monotone_and_positive_from_both_sides() {
    let sc = small(KobayashiTest::Test3, 1.0);
    let ops = assemble(&sc, &AssemblyOptions::default()).unwrap();
    let sys = System::from_operators(&ops);
    let cfg = SolveConfig {
        t0: 0.0,
        max_iters: 400,
        tol: 1e-10,
    };
    let (low, up_trace) = run(&sys, &cfg).unwrap();
    assert!(up_trace.converged);
    assert!(up_trace.all(|v| v.is_nondecreasing()));
    assert!(low.t.iter().chain(low.j.iter().flatten()).all(|v| *v >= 0.0));
    let (high, down_trace) = run(&sys, &SolveConfig { t0: 1.0, ..cfg }).unwrap();
    assert!(down_trace.converged);
    assert!(down_trace.all(|v| v.is_nonincreasing()));
    let scale = high.t.iter().fold(0.0f64, |m, v| m.max(*v));
    for (a, b) in low.t.iter().zip(&high.t) {
        assert!(a <= b || (a - b).abs() <= 1e-12 * scale);
        assert!((a - b).abs() <= 1e-7 * scale, "{a} vs {b}");
    }
    let absorbed = (0..low.t.len()).map(|i| ops.medium.absorption[i][0] * low.j[0][i]).fold(0.0, f64::max);
    for r in budget_residual(&low, &ops.medium) {
        assert!(r.abs() <= 1e-6 * absorbed);
    }
}

#[test]
fn brighter_source_gives_pointwise_larger_intensity() {
    let cfg = SolveConfig {
        t0: 0.0,
        max_iters: 300,
        tol: 1e-10,
    };
    let solve = |scale: f64| {
        let sc = small(KobayashiTest::Test1, scale);
        let ops = assemble(&sc, &AssemblyOptions::default()).unwrap();
        run(&System::from_operators(&ops), &cfg).unwrap().0
    };
    let (a, b) = (solve(1.0), solve(2.0));
    for (x, y) in a.j[0].iter().zip(&b.j[0]) {
        assert!(y >= x);
    }
    for (x, y) in a.t.iter().zip(&b.t) {
        assert!(y >= x);
    }
}
