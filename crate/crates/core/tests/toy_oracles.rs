use dampwave_core::oracle::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn doublewell_histogram_matches_exact_density() {
    let model = builtin_doublewell();
    let eps = 0.5;
    let density = gradient_sde_exact_density(&model, eps).unwrap();
    let n = 3000;
    let xs = toy_endpoints(&model.clone().with_eps(eps), 1.0, 1e-3, 12.0, 5, n).unwrap();
    let edges: Vec<f64> = (0..=16).map(|k| -0.8 + 3.6 * k as f64 / 16.0).collect();
    let mut chi2 = 0.0;
    let mut dof = 0;
    let mut covered = 0.0;
    for w in edges.windows(2) {
        let p = density.prob(w[0], w[1]);
        covered += p;
        let expected = p * n as f64;
        if expected < 5.0 {
            continue;
        }
        let observed = xs.iter().filter(|x| **x >= w[0] && **x < w[1]).count() as f64;
        chi2 += (observed - expected).powi(2) / expected;
        dof += 1;
    }
    assert!(covered > 0.999);
    let p_value = 1.0 - ChiSquared::new((dof - 1) as f64).unwrap().cdf(chi2);
    assert!(p_value > 0.01, "chi2 = {chi2}, dof = {dof}, p = {p_value}");
}

#[test]
fn doublewell_transitions_satisfy_detailed_balance() {
    let model = builtin_doublewell().with_eps(0.5);
    let density = gradient_sde_exact_density(&model, 0.5).unwrap();
    let path = simulate_toy(&model, 0.0, 1e-3, 400.0, 8, 50).unwrap();
    let edges = [-0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5];
    let rows = detailed_balance_check(&density, &path.values, &edges);
    assert!(rows.len() >= 4);
    for r in &rows {
        assert!((r.ratio - 1.0).abs() <= 3.0 * r.std_err + 0.05, "{r:?}");
    }
}

#[test]
fn ou_toy_variance_from_a_single_long_path() {
    let model = ToyModel::ou(1.0, 2.0).unwrap();
    let path = simulate_toy(&model, 0.0, 0.01, 2000.0, 4, 100).unwrap();
    let tail = &path.values[10..];
    let var = tail.iter().map(|x| x * x).sum::<f64>() / tail.len() as f64;
    // samples one time unit apart have correlation e^{-1}
    let rho = (-1.0f64).exp();
    let se = 2.0 * (2.0 / tail.len() as f64 * (1.0 + rho * rho) / (1.0 - rho * rho)).sqrt();
    assert!((var - 2.0).abs() < 3.0 * se, "{var} +- {se}");
}

#[test]
fn cubic_density_oracle_values() {
    let model = builtin_cubic();
    let d = gradient_sde_exact_density(&model, 1.0).unwrap();
    assert!((d.mass() - 1.0).abs() < 1e-10);
    let a = model.potential().unwrap();
    // ratio of densities at the two wells is exp(-2 (A(0) - A(3)) / eps)
    let ratio = d.pdf(0.0) / d.pdf(3.0);
    assert!((ratio.ln() + 2.0 * (a.eval(0.0) - a.eval(3.0))).abs() < 1e-12);
}
