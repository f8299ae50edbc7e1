use dampwave_core::ergodic::*;
use dampwave_core::math::linspace;
use dampwave_core::oracle::*;

fn ou() -> ToyDynamics {
    ToyDynamics::new(ToyModel::ou(1.0, 1.0).unwrap(), 0.01).unwrap()
}

#[test]
fn ou_linear_potential_pressure_is_half_beta_squared() {
    let d = ou();
    let opts = PopulationOptions::new(500, 12, 40.0, 7);
    let curve = pressure_population(&d, &0.0, &|x: &f64| *x, &[-0.5, 0.0, 0.5], &opts).unwrap();
    assert_eq!(curve.q[1], 0.0);
    for (b, (q, se)) in curve.betas.iter().zip(curve.q.iter().zip(&curve.stderr)) {
        assert!((q - b * b / 2.0).abs() <= 3.0 * se + 1e-12, "beta {b}: {q} +- {se}");
    }
    assert!(curve.convexity_violations().is_empty());
}

#[test]
fn ou_level_one_deviations_match_gaussian_rate() {
    let d = ou();
    let betas = linspace(-2.0, 2.0, 41);
    let q: Vec<f64> = betas.iter().map(|b| b * b / 2.0).collect();
    let rate = legendre(&PressureCurve::exact(betas, q), None);
    let rows =
        ldp_level1_check(&d, &0.0, &|x: &f64| *x, &[(0.4, 0.6), (-0.1, 0.1)], &rate, &LdpOptions::new(20000, 3)).unwrap();
    assert!((rows[0].predicted + 0.08).abs() < 1e-3);
    assert!(rows[0].pass, "{:?}", rows[0]);
    assert!(rows[1].contains_mean && rows[1].pass, "{:?}", rows[1]);
}

#[test]
fn ou_time_average_laws() {
    let model = ToyModel::ou(1.0, 1.0).unwrap();
    let paths = 400;
    let horizon = 64.0;
    let trajs: Vec<ToyTrajectory> =
        (0..paths).map(|i| simulate_toy_stream(&model, 0.0, 0.01, horizon, 17, i as u64, 10).unwrap()).collect();
    let times = trajs[0].times.clone();
    let series: Vec<Vec<f64>> = trajs.iter().map(|t| t.values.clone()).collect();
    let slln = slln_check(&times, &series, 0.0, 5).unwrap();
    assert!((slln.exponent + 0.5).abs() < 0.1, "{}", slln.exponent);
    let integrals: Vec<f64> = series
        .iter()
        .map(|s| occupation_measure(&times, &[s.clone()], None).unwrap().integrals[0])
        .collect();
    let clt = clt_check(&integrals, horizon, 0.0).unwrap();
    // sigma^2 = 2 int_0^inf e^{-s}/2 ds = 1, less an O(1/t) start-up correction
    assert!((clt.sigma - 1.0).abs() < 0.1, "{}", clt.sigma);
    assert!(clt.pass);
    let squares: Vec<Vec<f64>> = series.iter().map(|s| s.iter().map(|x| x * x).collect()).collect();
    let occ = occupation_measure(&times, &squares, None).unwrap();
    let finals = occ.final_averages();
    let m = dampwave_core::math::Estimate::from_samples(&finals);
    assert!(m.agrees_with(0.5, 3.0, 1.0 / (2.0 * horizon)), "{m:?}");
}

#[test]
fn chain_monte_carlo_pressure_matches_eigentriple() {
    let chain = FiniteChain::new(&[vec![-1.0, 0.6, 0.4], vec![0.5, -0.5, 0.0], vec![0.2, 0.8, -1.0]], vec![0.3, -0.1, 0.2])
        .unwrap();
    let exact = fk_eigen_exact(&chain).unwrap();
    assert!(exact.residual_right <= 1e-10 && exact.residual_left <= 1e-10);
    let d = ChainDynamics { chain: chain.clone(), dt: 0.1 };
    let v = chain.potential().to_vec();
    let est = feynman_kac_population(&d, &0usize, &|x: &usize| v[*x], &PopulationOptions::new(300, 10, 30.0, 4)).unwrap();
    assert!((est.value - exact.log_lambda).abs() <= 3.0 * est.std_err + 1e-3, "{est:?} vs {}", exact.log_lambda);
}
