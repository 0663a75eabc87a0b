use approx::assert_relative_eq;

use opportunity_core::duality::dual_process;
use opportunity_core::market::{simulate_paths, simulate_returns, wealth_path, LevyMarket, PathBundle, Preferences, Strategy, TimeGrid};
use opportunity_core::montecarlo::{
    dual_supermartingale_test, dual_supermartingale_test_blocks, minimal_measure_constant, minimal_measure_density, optimal_dual_rhq, rhq_estimate,
    ItoModel, McConfig, Verdict, SE_BAND,
};
use opportunity_core::opportunity::l_closed_form;

fn merton_setup(p: f64, steps: usize) -> (LevyMarket<f64>, Preferences<f64>, opportunity_core::Curve, Strategy<f64>) {
    let market = LevyMarket::black_scholes(0.05, 0.2, 1.0).unwrap();
    let prefs = Preferences::standard(p, 1.0).unwrap();
    // y* = b / ((1-p) c), ḡ = b² / (2 (1-p) c)
    let y = 0.05 / ((1.0 - p) * 0.04);
    let g = 0.05 * 0.05 / (2.0 * (1.0 - p) * 0.04);
    let curve = l_closed_form(p * g / (1.0 - p), p, &TimeGrid::new(1.0, steps).unwrap()).unwrap();
    let strat = Strategy::new(vec![y], curve.kappa.clone());
    (market, prefs, curve, strat)
}

#[test]
fn constant_deflator_integrates_the_clock() {
    let grid = TimeGrid::new(1.0, 50).unwrap();
    let market = LevyMarket::black_scholes(0.05, 0.2, 1.0).unwrap();
    let mut bundle = simulate_returns(&market, &grid, 10, 1);
    bundle.set_dual(vec![1.0; 10 * 51]);
    let prefs = Preferences::standard(-1.0, 1.0).unwrap();
    let r = rhq_estimate(&bundle, 0.3, &prefs, &grid.checkpoints(5), Some(1.0)).unwrap();
    for (t, e) in r.tau_grid.iter().zip(&r.estimates) {
        assert_relative_eq!(e.mean, 2.0 - t, epsilon = 1e-12);
    }
    assert!(r.holds);
}

#[test]
fn geometric_brownian_reverse_hoelder() {
    // Y = exp(σW - σ²t/2): ∫_0^1 e^{σ² s} ds + e^{σ²}
    let sigma: f64 = 0.2;
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let model = ItoModel::constant(sigma, 0.0, grid).unwrap();
    let returns = model.simulate(0, 100_000, 17);
    let n = grid.n_steps;
    let dt = grid.dt();
    let mut y = vec![0.0; returns.n_paths * (n + 1)];
    for i in 0..returns.n_paths {
        y[i * (n + 1)] = 1.0;
        for k in 0..n {
            let dw = returns.increment(i, k)[0] / sigma;
            y[i * (n + 1) + k + 1] = y[i * (n + 1) + k] * (sigma * dw - 0.5 * sigma * sigma * dt).exp();
        }
    }
    let mut bundle: PathBundle<f64> = returns;
    bundle.set_dual(y);
    let prefs = Preferences::standard(0.5, 1.0).unwrap();
    let r = rhq_estimate(&bundle, -1.0, &prefs, &[0], None).unwrap();
    let s2 = sigma * sigma;
    let exact = s2.exp_m1() / s2 + s2.exp();
    assert_relative_eq!(exact, 2.061080129002094, epsilon = 1e-12);
    // the trapezoid rule adds O(dt²)
    assert!(r.estimates[0].within(exact, SE_BAND) || (r.estimates[0].mean - exact).abs() < 1e-4);
}

#[test]
fn merton_dual_rhq_is_bracketed_by_dual_opportunity() {
    let (market, prefs, curve, strat) = merton_setup(0.5, 100);
    let idx = curve.grid.checkpoints(5);
    let mc = McConfig { n_paths: 50_000, seed: 4, checkpoints: 5 };
    let r = optimal_dual_rhq(&market, &prefs, &curve, &strat.pi, 1.0, &[prefs.q()], &idx, &mc).unwrap().remove(0);
    // D ≡ 1: the functional at the conjugate exponent equals L_τ^β
    for (e, &k) in r.estimates.iter().zip(&idx) {
        assert!(e.within(curve.lstar[k], SE_BAND), "τ index {k}: {e:?} vs {}", curve.lstar[k]);
    }
}

#[test]
fn deflator_product_is_a_martingale_at_the_optimum() {
    let (market, prefs, curve, strat) = merton_setup(0.5, 100);
    let mc = McConfig { n_paths: 50_000, seed: 8, checkpoints: 10 };
    let z = dual_supermartingale_test_blocks(&market, &prefs, &strat, &strat, &curve, 1.0, &mc).unwrap();
    assert!(z.is_martingale(), "{:?}", z.increments);
    let y0 = curve.l[0];
    for (m, se) in z.means.iter().zip(&z.standard_errors) {
        assert!((m - y0).abs() <= SE_BAND * se + 1e-12, "{m} vs {y0}");
    }
    // no risky position with the optimal deflator
    let idle = Strategy::new(vec![0.0], curve.kappa.clone());
    let z0 = dual_supermartingale_test_blocks(&market, &prefs, &strat, &idle, &curve, 1.0, &mc).unwrap();
    assert!(z0.is_supermartingale());
}

#[test]
fn deflated_levered_wealth_is_a_supermartingale() {
    let (market, prefs, curve, strat) = merton_setup(-1.0, 50);
    let grid = curve.grid;
    let returns = simulate_paths(&market, &grid, 0, 20_000, 3);
    let opt = wealth_path(&returns, &strat, 1.0, prefs.mode).unwrap();
    let dual = dual_process(&curve, &prefs, &opt).unwrap();
    let levered = wealth_path(&returns, &strat.shifted(&[2.0]), 1.0, prefs.mode).unwrap();
    let z = dual_supermartingale_test(&levered, &dual.paths, 5).unwrap();
    assert!(z.verdicts.iter().all(|v| *v != Verdict::Violation));
}

#[test]
fn minimal_measure_satisfies_reverse_hoelder() {
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let prefs = Preferences::standard(0.5, 1.0).unwrap();
    let flat = ItoModel::constant(0.2, 0.0, grid).unwrap();
    let z = minimal_measure_density(&flat, &flat.simulate(0, 100, 1)).unwrap();
    let r = rhq_estimate(&z, -1.0, &prefs, &[0], Some(2.0)).unwrap();
    assert_relative_eq!(r.estimates[0].mean, 2.0, epsilon = 1e-12);

    let model = ItoModel::from_fn(0.2, grid, |t| 0.25 * (1.0 - t)).unwrap();
    let z = minimal_measure_density(&model, &model.simulate(0, 50_000, 2)).unwrap();
    let c = minimal_measure_constant(-1.0, model.theta_bound(), 1.0, 2.0);
    let r = rhq_estimate(&z, -1.0, &prefs, &grid.checkpoints(10), Some(c)).unwrap();
    assert!(r.holds, "{:?} vs {c}", r.estimates);
}
