use super::equilibria::toy_equilibria;
use super::graph::{w_graph_weights, GraphVariant};
use super::quasipotential::{quasipotential, QuasipotentialOptions, ToyControl};
use crate::error::{Error, Result};
use crate::oracle::{Poly, ToyModel};
use crate::prelude::*;

/// Equilibria with their pairwise quasipotentials and W-graph weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumNetwork {
    pub labels: Vec<String>,
    /// State coordinates of each equilibrium.
    pub points: Vec<Vec<f64>>,
    pub stable: Vec<bool>,
    /// `V(i, j)`, `+inf` where unreachable.
    pub v: Vec<Vec<f64>>,
    /// Quasipotential avoiding the other graph nodes, when computed.
    pub v_tilde: Option<Vec<Vec<f64>>>,
    /// Nodes the graphs are built on.
    pub graph_nodes: Vec<usize>,
    pub variant: GraphVariant,
    /// `W(i)` on graph nodes, `+inf` elsewhere.
    pub w: Vec<f64>,
}

impl EquilibriumNetwork {
    pub fn new(
        labels: Vec<String>,
        points: Vec<Vec<f64>>,
        stable: Vec<bool>,
        v: Vec<Vec<f64>>,
        stable_only: bool,
        variant: GraphVariant,
    ) -> Result<Self> {
        let n = points.len();
        if labels.len() != n || stable.len() != n || v.len() != n || v.iter().any(|r| r.len() != n) {
            return Err(Error::input("network parts have inconsistent sizes"));
        }
        if (0..n).any(|i| v[i][i] != 0.0) {
            return Err(Error::input("V(i, i) must be zero"));
        }
        let graph_nodes: Vec<usize> = (0..n).filter(|i| !stable_only || stable[*i]).collect();
        if graph_nodes.is_empty() {
            return Err(Error::input("no equilibrium qualifies as a graph node"));
        }
        let sub: Vec<Vec<f64>> = graph_nodes.iter().map(|&i| graph_nodes.iter().map(|&j| v[i][j]).collect()).collect();
        let g = w_graph_weights(&sub, variant)?;
        let mut w = vec![f64::INFINITY; n];
        for (k, &i) in graph_nodes.iter().enumerate() {
            w[i] = g.w[k];
        }
        Ok(EquilibriumNetwork { labels, points, stable, v, v_tilde: None, graph_nodes, variant, w })
    }

    pub fn min_w(&self) -> f64 {
        self.graph_nodes.iter().map(|i| self.w[*i]).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateValue {
    pub value: f64,
    /// Equilibrium attaining the minimum.
    pub argmin: Option<usize>,
}

/// `min_i [W(i) + V(u_i, u)] - min_i W(i)` over the graph nodes, given
/// `v_to_u[i] = V(u_i, u)` for every equilibrium.
pub fn fw_rate(net: &EquilibriumNetwork, v_to_u: &[f64]) -> Result<RateValue> {
    if v_to_u.len() != net.points.len() {
        return Err(Error::Dimension { expected: net.points.len(), found: v_to_u.len() });
    }
    let base = net.min_w();
    let mut best = (f64::INFINITY, None);
    for &i in &net.graph_nodes {
        let c = net.w[i] + v_to_u[i];
        if c < best.0 {
            best = (c, Some(i));
        }
    }
    if !base.is_finite() || !best.0.is_finite() {
        return Ok(RateValue { value: f64::INFINITY, argmin: best.1 });
    }
    Ok(RateValue { value: (best.0 - base).max(0.0), argmin: best.1 })
}

/// Rate at equilibrium `k` of the network.
pub fn fw_rate_at_node(net: &EquilibriumNetwork, k: usize) -> Result<RateValue> {
    let col: Vec<f64> = net.v.iter().map(|r| r[k]).collect();
    fw_rate(net, &col)
}

/// Global minimum of a polynomial potential by multistart descent.
pub fn potential_infimum(a: &Poly) -> (f64, f64) {
    let da = a.derivative();
    let lead = da.coeffs.last().copied().unwrap_or(0.0).abs().max(1e-300);
    let bound = 1.0 + da.coeffs[..da.coeffs.len().saturating_sub(1)].iter().map(|c| c.abs() / lead).fold(0.0, f64::max);
    let mut best = (0.0, f64::INFINITY);
    for k in 0..=40 {
        let mut x = -bound + 2.0 * bound * k as f64 / 40.0;
        let mut step = 0.1 / (1.0 + da.eval(x).abs());
        for _ in 0..10_000 {
            let g = da.eval(x);
            if g.abs() < 1e-13 {
                break;
            }
            let trial = x - step * g;
            if a.eval(trial) < a.eval(x) {
                x = trial;
                step *= 1.2;
            } else {
                step *= 0.5;
                if step < 1e-18 {
                    break;
                }
            }
        }
        let v = a.eval(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

/// `2 (A(u) - inf A)`.
pub fn gradient_rate_oracle(a: &Poly, u: f64) -> f64 {
    2.0 * (a.eval(u) - potential_infimum(a).1)
}

/// `2 x` the positive variation of `A` along the segment from `a` to `b`:
/// the 1D gradient quasipotential.
pub fn gradient_quasipotential_1d(potential: &Poly, a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut pts: Vec<f64> = potential.derivative().real_roots().into_iter().filter(|x| *x > lo && *x < hi).collect();
    pts.push(b);
    pts.sort_by(|x, y| if a <= b { x.total_cmp(y) } else { y.total_cmp(x) });
    let mut acc = 0.0;
    let mut prev = potential.eval(a);
    for x in pts {
        let v = potential.eval(x);
        acc += (v - prev).max(0.0);
        prev = v;
    }
    2.0 * acc
}

/// Where quasipotential entries come from.
#[derive(Debug, Clone, PartialEq)]
pub enum VSource {
    /// Exact gradient-case value.
    Oracle,
    /// Collocation solver at step `dt`.
    Solver { dt: f64, options: QuasipotentialOptions },
}

pub fn toy_quasipotential(model: &ToyModel, a: f64, b: f64, source: &VSource) -> Result<f64> {
    let potential = model.potential().ok_or_else(|| Error::input("toy network needs a gradient toy"))?;
    match source {
        VSource::Oracle => Ok(gradient_quasipotential_1d(potential, a, b)),
        VSource::Solver { dt, options } => {
            if a == b {
                return Ok(0.0);
            }
            let d = ToyControl::new(model, *dt)?;
            Ok(quasipotential(&d, &[a], &[b], options)?.value)
        }
    }
}

/// Network of a 1D gradient toy.
pub fn toy_network(model: &ToyModel, source: &VSource, stable_only: bool, variant: GraphVariant) -> Result<EquilibriumNetwork> {
    let eq = toy_equilibria(model);
    if eq.is_empty() {
        return Err(Error::input("toy has no equilibria"));
    }
    let n = eq.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let needed = |i: usize, j: usize| i != j && (!stable_only || (eq[i].stable && eq[j].stable));
    let vals = crate::parallel::par_map(pairs.len(), |k| {
        let (i, j) = pairs[k];
        if needed(i, j) { toy_quasipotential(model, eq[i].x, eq[j].x, source) } else { Ok(if i == j { 0.0 } else { f64::NAN }) }
    });
    let mut v = vec![vec![0.0; n]; n];
    for (k, r) in vals.into_iter().enumerate() {
        let (i, j) = pairs[k];
        v[i][j] = r?;
    }
    // entries off the graph are filled from the oracle so the matrix is complete
    if let Some(p) = model.potential() {
        for (i, j) in pairs {
            if v[i][j].is_nan() {
                v[i][j] = gradient_quasipotential_1d(p, eq[i].x, eq[j].x);
            }
        }
    }
    let labels = eq.iter().map(|e| alloc::format!("{}", e.x)).collect();
    let points = eq.iter().map(|e| vec![e.x]).collect();
    let stable = eq.iter().map(|e| e.stable).collect();
    EquilibriumNetwork::new(labels, points, stable, v, stable_only, variant)
}

/// Rate of a 1D gradient toy at `u`, with `V(u_i, u)` from `source`.
pub fn toy_fw_rate(model: &ToyModel, net: &EquilibriumNetwork, u: f64, source: &VSource) -> Result<RateValue> {
    let col = net
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| if net.graph_nodes.contains(&i) { toy_quasipotential(model, p[0], u, source) } else { Ok(f64::INFINITY) })
        .collect::<Result<Vec<f64>>>()?;
    fw_rate(net, &col)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::builtin_cubic;
    use crate::rng::{stream, uniform};

    #[test]
    fn cubic_oracle_values() {
        let a = builtin_cubic().potential().unwrap().clone();
        let (x, v) = potential_infimum(&a);
        assert!((x - 3.0).abs() < 1e-9 && (v + 2.25).abs() < 1e-12);
        assert!((gradient_rate_oracle(&a, 0.0) - 4.5).abs() < 1e-12);
        assert!((gradient_rate_oracle(&a, 1.0) - 16.0 / 3.0).abs() < 1e-12);
        assert!(gradient_rate_oracle(&a, 3.0).abs() < 1e-12);
        assert!((gradient_quasipotential_1d(&a, 0.0, 3.0) - 5.0 / 6.0).abs() < 1e-12);
        assert!((gradient_quasipotential_1d(&a, 3.0, 0.0) - 16.0 / 3.0).abs() < 1e-12);
        assert!((gradient_quasipotential_1d(&a, 1.0, 0.5)).abs() < 1e-12);
    }

    #[test]
    fn cubic_graph_arithmetic() {
        let m = builtin_cubic();
        let net = toy_network(&m, &VSource::Oracle, true, GraphVariant::Arborescence).unwrap();
        assert_eq!(net.graph_nodes, vec![0, 2]);
        assert!((net.w[0] - 16.0 / 3.0).abs() < 1e-12 && (net.w[2] - 5.0 / 6.0).abs() < 1e-12);
        let r0 = fw_rate_at_node(&net, 0).unwrap();
        assert!((r0.value - 4.5).abs() < 1e-12);
        let r3 = fw_rate_at_node(&net, 2).unwrap();
        assert_eq!((r3.value, r3.argmin), (0.0, Some(2)));
        let all = toy_network(&m, &VSource::Oracle, false, GraphVariant::Arborescence).unwrap();
        assert!((fw_rate_at_node(&all, 0).unwrap().value - 4.5).abs() < 1e-12);
    }

    #[test]
    fn exact_entries_give_exact_rates() {
        let v = vec![vec![0.0, 5.0 / 6.0], vec![16.0 / 3.0, 0.0]];
        let net = EquilibriumNetwork::new(
            vec!["0".into(), "3".into()],
            vec![vec![0.0], vec![3.0]],
            vec![true, true],
            v,
            true,
            GraphVariant::Arborescence,
        )
        .unwrap();
        assert_eq!(fw_rate_at_node(&net, 0).unwrap().value, 4.5);
        assert_eq!(fw_rate_at_node(&net, 1).unwrap().value, 0.0);
    }

    #[test]
    fn network_rate_matches_gradient_formula() {
        let m = builtin_cubic();
        let a = m.potential().unwrap().clone();
        let net = toy_network(&m, &VSource::Oracle, true, GraphVariant::Arborescence).unwrap();
        let mut rng = stream(4, 0);
        for _ in 0..20 {
            let u = -0.5 + 4.0 * uniform(&mut rng);
            let r = toy_fw_rate(&m, &net, u, &VSource::Oracle).unwrap().value;
            let g = gradient_rate_oracle(&a, u);
            assert!(r >= 0.0 && (r - g).abs() <= 1e-12 * (1.0 + g), "{u}: {r} vs {g}");
        }
    }
}
