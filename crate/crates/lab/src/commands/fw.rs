use crate::config::RunConfig;
use crate::error::{LabError, LabResult};
use crate::output::{num, sig12, Artifacts, Verdict};
use dampwave_core::fw::{
    boundary_chain as run_chain, find_equilibria, fw_rate_at_node, gradient_quasipotential_1d, quasipotential as solve,
    smallnoise_exact, smallnoise_mc_toy, toy_equilibria, toy_fw_rate, toy_network, BoundaryChainConfig,
    EquilibriumNetwork, EquilibriumOptions, GraphVariant, McOptions, QuasipotentialOptions, QuasipotentialResult,
    ToyControl, VSource, WaveControl,
};
use dampwave_core::parallel::par_map;
use dampwave_core::spectral::PhaseState;
use serde_json::json;

fn solver_options(cfg: &RunConfig) -> QuasipotentialOptions {
    QuasipotentialOptions { horizons: cfg.list("horizons"), ..QuasipotentialOptions::default() }
}

fn ladder_csv(a: &mut Artifacts, r: &QuasipotentialResult) -> LabResult<()> {
    a.csv(
        "ladder",
        &["eta", "action", "miss", "converged"],
        r.ladder.iter().map(|l| vec![l.eta, l.action, l.miss, l.converged as u8 as f64]),
    )
}

/// Wave equilibria sorted by energy, with their states.
fn wave_equilibria(cfg: &RunConfig) -> LabResult<(dampwave_core::sim::WaveModel, Vec<(PhaseState, bool)>)> {
    let model = cfg.wave_model()?;
    let search = find_equilibria(&model, &EquilibriumOptions::new(16, cfg.seed))?;
    let mut eq: Vec<(f64, PhaseState, bool)> =
        search.equilibria.into_iter().map(|e| (model.energy(&e.state), e.state, e.stable)).collect();
    eq.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok((model, eq.into_iter().map(|(_, s, st)| (s, st)).collect()))
}

fn index(cfg: &RunConfig, key: &str, n: usize) -> LabResult<usize> {
    let i = cfg.count(key)?;
    if i >= n {
        return Err(LabError::config(format!("`{key}` = {i} but only {n} equilibria were found")));
    }
    Ok(i)
}

pub fn quasipotential(cfg: &RunConfig, v: &mut Verdict, a: &mut Artifacts) -> LabResult<()> {
    let dt = cfg.num("solver_dt");
    let opts = solver_options(cfg);
    if cfg.is_nlw() {
        let (model, eq) = wave_equilibria(cfg)?;
        let (i, j) = (index(cfg, "from", eq.len())?, index(cfg, "to", eq.len())?);
        let ctl = WaveControl::new(&model, dt)?;
        let r = solve(&ctl, &WaveControl::state_of(&eq[i].0), &WaveControl::state_of(&eq[j].0), &opts)?;
        ladder_csv(a, &r)?;
        a.csv(
            "path",
            &["t", "normH"],
            r.states.iter().enumerate().map(|(k, x)| vec![k as f64 * dt, model.phase_norm_sq(&ctl.phase_state(x)).sqrt()]),
        )?;
        v.metric("action", r.value).metric("horizon", r.horizon).metric("endpoint_miss", r.endpoint_miss);
        v.note("no closed-form quasipotential for the wave model; convergence and monotonicity are asserted");
        v.require(r.converged, "solver converged");
        v.require(r.monotone, "action is monotone along the penalty ladder");
        return Ok(());
    }
    let toy = cfg.toy_model()?;
    let eq = toy_equilibria(&toy);
    let (i, j) = (index(cfg, "from", eq.len())?, index(cfg, "to", eq.len())?);
    let (x, y) = (eq[i].x, eq[j].x);
    let ctl = ToyControl::new(&toy, dt)?;
    let r = solve(&ctl, &[x], &[y], &opts)?;
    ladder_csv(a, &r)?;
    a.csv("path", &["t", "u"], r.states.iter().enumerate().map(|(k, s)| vec![k as f64 * dt, s[0]]))?;
    let oracle = gradient_quasipotential_1d(toy.potential().expect("gradient toy"), x, y);
    let tol = cfg.num("rel_tol");
    let err = (r.value - oracle).abs();
    v.metric("from", x)
        .metric("to", y)
        .metric("action", r.value)
        .metric("oracle", oracle)
        .metric("rel_error", if oracle != 0.0 { err / oracle } else { f64::NAN })
        .metric("horizon", r.horizon)
        .metric("endpoint_miss", r.endpoint_miss)
        .tolerance("rel_tol", tol);
    v.require(r.converged, "solver converged");
    v.require(r.monotone, "action is monotone along the penalty ladder");
    v.require(err <= tol * oracle.abs() + 1e-9, "action within rel_tol of 2 x the potential rise");
    Ok(())
}

fn network_json(net: &EquilibriumNetwork, rates: &[f64]) -> serde_json::Value {
    let nodes: Vec<_> = (0..net.points.len())
        .map(|i| {
            json!({
                "label": net.labels[i],
                "coefficients": net.points[i].iter().map(|x| num(*x)).collect::<Vec<_>>(),
                "stable": net.stable[i],
                "graph_node": net.graph_nodes.contains(&i),
                "W": num(sig12(net.w[i])),
                "rate": num(sig12(rates[i])),
            })
        })
        .collect();
    let v: Vec<Vec<_>> = net.v.iter().map(|r| r.iter().map(|x| num(sig12(*x))).collect()).collect();
    json!({
        "variant": match net.variant { GraphVariant::Arborescence => "arborescence", GraphVariant::Chain => "chain" },
        "nodes": nodes,
        "V": v,
        "min_W": num(sig12(net.min_w())),
    })
}

fn variant(cfg: &RunConfig) -> LabResult<GraphVariant> {
    match cfg.text("variant") {
        "arborescence" => Ok(GraphVariant::Arborescence),
        "chain" => Ok(GraphVariant::Chain),
        other => Err(LabError::config(format!("unknown graph variant `{other}` (arborescence, chain)"))),
    }
}

pub fn fw_graph(cfg: &RunConfig, v: &mut Verdict, a: &mut Artifacts) -> LabResult<()> {
    let variant = variant(cfg)?;
    let stable_only = cfg.flag("stable_only");
    let dt = cfg.num("solver_dt");
    let net = if cfg.is_nlw() {
        if cfg.text("source") != "solver" {
            v.note("the wave model has no oracle quasipotential; the solver is used");
        }
        let (model, eq) = wave_equilibria(cfg)?;
        let ctl = WaveControl::new(&model, dt)?;
        let n = eq.len();
        let opts = QuasipotentialOptions::default();
        let vals = par_map(n * n, |k| {
            let (i, j) = (k / n, k % n);
            let needed = i != j && (!stable_only || (eq[i].1 && eq[j].1));
            if !needed {
                return Ok(if i == j { 0.0 } else { f64::INFINITY });
            }
            solve(&ctl, &WaveControl::state_of(&eq[i].0), &WaveControl::state_of(&eq[j].0), &opts).map(|r| r.value)
        });
        let mut vm = vec![vec![0.0; n]; n];
        for (k, r) in vals.into_iter().enumerate() {
            vm[k / n][k % n] = r?;
        }
        EquilibriumNetwork::new(
            (0..n).map(|i| format!("e{i}")).collect(),
            eq.iter().map(|(s, _)| s.position.coeffs().to_vec()).collect(),
            eq.iter().map(|(_, st)| *st).collect(),
            vm,
            stable_only,
            variant,
        )?
    } else {
        let toy = cfg.toy_model()?;
        let source = match cfg.text("source") {
            "oracle" => VSource::Oracle,
            "solver" => VSource::Solver { dt, options: QuasipotentialOptions::default() },
            other => return Err(LabError::config(format!("unknown source `{other}` (oracle, solver)"))),
        };
        let net = toy_network(&toy, &source, stable_only, variant)?;
        let pts = cfg.list("eval_points");
        let mut rows = Vec::new();
        for u in pts {
            rows.push(vec![u, toy_fw_rate(&toy, &net, u, &source)?.value]);
        }
        a.csv("rate", &["u", "rate"], rows)?;
        net
    };
    let rates: Vec<f64> =
        (0..net.points.len()).map(|k| fw_rate_at_node(&net, k).map(|r| r.value)).collect::<Result<_, _>>()?;
    a.json("network", &network_json(&net, &rates))?;
    a.csv(
        "nodes",
        &["node", "stable", "W", "rate"],
        (0..rates.len()).map(|i| vec![i as f64, net.stable[i] as u8 as f64, net.w[i], rates[i]]),
    )?;
    for (i, r) in rates.iter().enumerate() {
        v.metric(&format!("V({})", net.labels[i]), sig12(*r));
    }
    let min_rate = net.graph_nodes.iter().map(|i| rates[*i]).fold(f64::INFINITY, f64::min);
    v.metric("min_rate_on_graph", min_rate).tolerance("min_rate", 0.0);
    v.require(min_rate == 0.0, "the rate vanishes at some graph node");
    Ok(())
}

pub fn stationary_smallnoise(cfg: &RunConfig, v: &mut Verdict, a: &mut Artifacts) -> LabResult<()> {
    let toy = cfg.toy_model()?;
    let eps = cfg.list("eps");
    let sets = cfg.pairs("sets")?;
    let eta = cfg.num("eta");
    let rep = match cfg.text("mode") {
        "exact" => smallnoise_exact(&toy, &eps, &sets, eta)?,
        "mc" => {
            let mut o = McOptions::new(cfg.num("sample_horizon"), cfg.seed);
            o.eta = eta;
            o.stride = cfg.integrator.stride;
            smallnoise_mc_toy(&toy, cfg.dt(), &eps, &sets, &o)?
        }
        other => return Err(LabError::config(format!("unknown mode `{other}` (exact, mc)"))),
    };
    a.csv(
        "levels",
        &["eps", "lo", "hi", "eps_log_mu", "stderr", "hits", "runs_agree"],
        rep.rows.iter().map(|r| {
            vec![r.eps, r.lo, r.hi, r.eps_log_mu, r.std_err, r.hits.map_or(f64::NAN, |h| h as f64), r.runs_agree as u8 as f64]
        }),
    )?;
    a.csv(
        "sets",
        &["lo", "hi", "target", "intercept", "gap_at_smallest", "rel_error"],
        rep.sets.iter().map(|s| {
            vec![s.lo, s.hi, s.target, s.intercept.unwrap_or(f64::NAN), s.gap_at_smallest, s.rel_error.unwrap_or(f64::NAN)]
        }),
    )?;
    a.csv("concentration", &["eps", "mass_near_stable"], rep.concentration.iter().map(|(e, m)| vec![*e, *m]))?;
    if cfg.text("mode") == "exact" {
        let tol = cfg.num("gap_tol");
        v.tolerance("gap_tol", tol);
        for (k, s) in rep.sets.iter().enumerate() {
            v.metric(&format!("gap_{k}"), s.gap_at_smallest).metric(&format!("target_{k}"), s.target);
            v.require(s.gap_at_smallest <= tol, &format!("|eps log mu + inf V| on [{}, {}]", s.lo, s.hi));
        }
    } else {
        let tol = cfg.num("rel_tol");
        v.tolerance("rel_tol", tol);
        for (k, s) in rep.sets.iter().enumerate() {
            v.metric(&format!("intercept_{k}"), s.intercept.unwrap_or(f64::NAN))
                .metric(&format!("target_{k}"), s.target)
                .metric(&format!("rel_error_{k}"), s.rel_error.unwrap_or(f64::NAN));
            v.require(s.rel_error.is_some_and(|e| e <= tol), &format!("intercept on [{}, {}]", s.lo, s.hi));
        }
        if rep.rows.iter().any(|r| !r.runs_agree) {
            v.note("the two sampling runs disagree at some noise level");
        }
    }
    Ok(())
}

pub fn boundary_chain(cfg: &RunConfig, v: &mut Verdict, a: &mut Artifacts) -> LabResult<()> {
    let toy = cfg.toy_model()?;
    let mut bc = BoundaryChainConfig::new(cfg.list("eps"), cfg.seed);
    bc.rho1_prime = cfg.num("rho1_prime");
    bc.rho0_prime = cfg.num("rho0_prime");
    bc.rho1 = cfg.num("rho1");
    bc.rho0 = cfg.num("rho0");
    bc.rho_star = cfg.num("rho_star");
    bc.max_transitions = cfg.count("cycles")?;
    bc.dt = cfg.dt();
    let rep = run_chain(&toy, &bc)?;
    let mut rows = Vec::new();
    for l in &rep.levels {
        for c in &l.cells {
            rows.push(vec![
                l.eps,
                c.from as f64,
                c.to as f64,
                c.count as f64,
                c.prob,
                c.std_err,
                c.eps_log_p,
                c.target,
                c.undersampled as u8 as f64,
            ]);
        }
    }
    a.csv("transitions", &["eps", "from", "to", "count", "prob", "stderr", "eps_log_p", "target", "undersampled"], rows)?;
    let (tol, k) = (cfg.num("rel_tol"), cfg.num("se_factor"));
    v.tolerance("rel_tol", tol).tolerance("se_factor", k);
    let n = rep.nodes.len();
    for l in &rep.levels {
        for i in 0..n {
            for j in 0..n {
                let Some(c) = rep.cell(l.eps, i, j) else { continue };
                if i == j || !c.target.is_finite() {
                    continue;
                }
                let key = format!("eps_log_p({i}->{j})@{}", l.eps);
                v.metric(&key, c.eps_log_p);
                if c.undersampled {
                    continue;
                }
                v.require((c.eps_log_p - c.target).abs() <= tol * c.target.abs(), &format!("{key} vs {}", c.target));
                if i < j {
                    if let Some(z) = rep.symmetry_z(l.eps, i, j) {
                        v.metric(&format!("symmetry_z({i},{j})@{}", l.eps), z);
                        if (rep.v_tilde[i][j] - rep.v_tilde[j][i]).abs() <= 1e-9 * rep.v_tilde[i][j].abs() {
                            v.require(z <= k, &format!("P({i}->{j}) = P({j}->{i}) within k SE"));
                        }
                    }
                }
            }
        }
    }
    if rep.undersampled() && v.status == crate::output::Status::Pass {
        v.status(crate::output::Status::Inconclusive).note("some transition cells are undersampled");
    }
    Ok(())
}
