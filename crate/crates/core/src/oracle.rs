//! Exactly solvable toy models: one-dimensional gradient diffusions
//! `du = -b(u) dt + sqrt(eps) dW` with stationary density
//! `m(u) ~ exp(-2 A(u) / eps)`, the Ornstein-Uhlenbeck process and finite
//! chains.

use crate::ergodic::{ChainDynamics, Dynamics, FiniteChain};
use crate::error::{Error, Result};
use crate::parallel::par_map;
use crate::prelude::*;
use crate::rng::{normal, stream, StreamRng};

/// Real polynomial, coefficients in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Poly { coeffs };
        while p.coeffs.len() > 1 && *p.coeffs.last().unwrap() == 0.0 {
            p.coeffs.pop();
        }
        p
    }

    /// Monic polynomial with the given real roots.
    pub fn from_roots(roots: &[f64]) -> Self {
        let mut c = vec![1.0];
        for r in roots {
            let mut next = vec![0.0; c.len() + 1];
            for (i, a) in c.iter().enumerate() {
                next[i + 1] += a;
                next[i] -= r * a;
            }
            c = next;
        }
        Poly::new(c)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::new(vec![0.0]);
        }
        Poly::new(self.coeffs.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect())
    }

    /// Antiderivative vanishing at 0.
    pub fn integral(&self) -> Poly {
        let mut c = vec![0.0];
        c.extend(self.coeffs.iter().enumerate().map(|(i, a)| a / (i + 1) as f64));
        Poly::new(c)
    }

    /// Real roots by sign-change bracketing inside the Cauchy bound. Roots
    /// of even multiplicity are found through the roots of the derivative.
    pub fn real_roots(&self) -> Vec<f64> {
        let n = self.degree();
        if n == 0 {
            return Vec::new();
        }
        let lead = self.coeffs[n];
        let bound = 1.0 + self.coeffs[..n].iter().map(|c| (c / lead).abs()).fold(0.0, f64::max);
        let mut cands: Vec<f64> = Vec::new();
        let grid = 20_000;
        let h = 2.0 * bound / grid as f64;
        let mut a = -bound;
        let mut fa = self.eval(a);
        for k in 1..=grid {
            let b = -bound + k as f64 * h;
            let fb = self.eval(b);
            if fa == 0.0 {
                cands.push(a);
            } else if fa * fb < 0.0 {
                cands.push(bisect(|x| self.eval(x), a, b));
            }
            a = b;
            fa = fb;
        }
        if fa == 0.0 {
            cands.push(a);
        }
        let scale = self.coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max);
        for r in self.derivative().real_roots() {
            if self.eval(r).abs() <= 1e-12 * scale {
                cands.push(r);
            }
        }
        cands.sort_by(|a, b| a.total_cmp(b));
        cands.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
        cands
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a).abs() <= 1e-15 * (1.0 + m.abs()) {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ToyKind {
    /// `du = -b(u) dt + sqrt(eps) dW` with `A' = b`.
    GradientSde { drift: Poly, potential: Poly },
    /// `du = -theta u dt + sigma dW`; `eps` is not used.
    Ou { theta: f64, sigma: f64 },
    FiniteChain(FiniteChain),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub name: String,
    pub kind: ToyKind,
    pub eps: f64,
}

impl ToyModel {
    /// Gradient toy with `A` built as the antiderivative of `b` and checked on a grid.
    pub fn gradient(name: &str, drift: Poly, eps: f64) -> Result<Self> {
        let potential = drift.integral();
        let m = ToyModel { name: name.to_string(), kind: ToyKind::GradientSde { drift, potential }, eps };
        m.check_potential(-5.0, 5.0)?;
        Ok(m)
    }

    pub fn ou(theta: f64, sigma: f64) -> Result<Self> {
        if !(theta > 0.0) || !(sigma >= 0.0) {
            return Err(Error::config("OU needs theta > 0 and sigma >= 0"));
        }
        Ok(ToyModel { name: "ou".to_string(), kind: ToyKind::Ou { theta, sigma }, eps: sigma * sigma })
    }

    pub fn chain(chain: FiniteChain) -> Self {
        ToyModel { name: "chain".to_string(), kind: ToyKind::FiniteChain(chain), eps: 0.0 }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn drift(&self) -> Option<&Poly> {
        match &self.kind {
            ToyKind::GradientSde { drift, .. } => Some(drift),
            _ => None,
        }
    }

    pub fn potential(&self) -> Option<&Poly> {
        match &self.kind {
            ToyKind::GradientSde { potential, .. } => Some(potential),
            _ => None,
        }
    }

    /// `max |A' - b|` on 1000 points of `[lo, hi]`; errors above `1e-10`.
    pub fn check_potential(&self, lo: f64, hi: f64) -> Result<f64> {
        let (b, a) = match &self.kind {
            ToyKind::GradientSde { drift, potential } => (drift, potential),
            _ => return Ok(0.0),
        };
        let da = a.derivative();
        let err = (0..1000)
            .map(|k| lo + (hi - lo) * k as f64 / 999.0)
            .map(|x| (da.eval(x) - b.eval(x)).abs())
            .fold(0.0, f64::max);
        if err > 1e-10 {
            return Err(Error::config(alloc::format!("A' differs from b by {err}")));
        }
        Ok(err)
    }

    /// Deterministic equilibria `b(u) = 0` (the origin for OU).
    pub fn equilibria(&self) -> Vec<f64> {
        match &self.kind {
            ToyKind::GradientSde { drift, .. } => drift.real_roots(),
            ToyKind::Ou { .. } => vec![0.0],
            ToyKind::FiniteChain(_) => Vec::new(),
        }
    }

    fn noise_scale(&self) -> f64 {
        match &self.kind {
            ToyKind::Ou { sigma, .. } => *sigma,
            _ => self.eps.max(0.0).sqrt(),
        }
    }
}

/// `du = -u(u-1)(u-3) dt + sqrt(eps) dW`.
pub fn builtin_cubic() -> ToyModel {
    ToyModel::gradient("cubic", Poly::from_roots(&[0.0, 1.0, 3.0]), 0.5).expect("cubic toy")
}

/// `du = -u(u-1)(u-2) dt + sqrt(eps) dW`, barrier `1/2` from either well.
pub fn builtin_doublewell() -> ToyModel {
    ToyModel::gradient("doublewell", Poly::from_roots(&[0.0, 1.0, 2.0]), 0.5).expect("double-well toy")
}

/// Looks up `cubic`, `doublewell`, `ou` or `chain` (symmetric 2-state).
pub fn builtin(name: &str) -> Result<ToyModel> {
    match name {
        "cubic" => Ok(builtin_cubic()),
        "doublewell" | "double-well" => Ok(builtin_doublewell()),
        "ou" => ToyModel::ou(1.0, 1.0),
        "chain" => Ok(ToyModel::chain(FiniteChain::two_state(1.0, 1.0, [1.0, 0.0])?)),
        _ => Err(Error::config(alloc::format!("unknown toy model `{name}`"))),
    }
}

/// Normalized stationary density of a gradient toy.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDensity {
    potential: Poly,
    eps: f64,
    a_min: f64,
    log_norm: f64,
    /// Support window outside which the density is below `exp(-70)` of its peak.
    pub lo: f64,
    pub hi: f64,
}

impl ToyDensity {
    fn exponent(&self, u: f64) -> f64 {
        -2.0 * (self.potential.eval(u) - self.a_min) / self.eps
    }

    pub fn log_pdf(&self, u: f64) -> f64 {
        self.exponent(u) - self.log_norm
    }

    pub fn pdf(&self, u: f64) -> f64 {
        self.log_pdf(u).exp()
    }

    /// `mu([a, b])` by adaptive Simpson quadrature.
    pub fn prob(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(self.lo), b.min(self.hi));
        if a >= b {
            return 0.0;
        }
        integrate(&|u| self.pdf(u), a, b, 1e-13)
    }

    /// `log mu([a, b])`, accurate where `prob` underflows.
    pub fn log_prob(&self, a: f64, b: f64) -> f64 {
        if a >= b {
            return f64::NEG_INFINITY;
        }
        let crit = self.potential.derivative().real_roots();
        let floor = crit
            .iter()
            .filter(|u| **u > a && **u < b)
            .chain([a, b].iter())
            .map(|u| self.potential.eval(*u))
            .fold(f64::INFINITY, f64::min);
        let inner = integrate(&|u| (-2.0 * (self.potential.eval(u) - floor) / self.eps).exp(), a, b, 1e-12);
        -2.0 * (floor - self.a_min) / self.eps + inner.ln() - self.log_norm
    }

    pub fn mass(&self) -> f64 {
        self.prob(self.lo, self.hi)
    }

    /// `int u^k m(u) du`.
    pub fn moment(&self, k: i32) -> f64 {
        integrate(&|u| u.powi(k) * self.pdf(u), self.lo, self.hi, 1e-13)
    }
}

fn simpson_step(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol.max(1e-11 * (left + right).abs()) {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, fa, m, fm, flm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, fm, b, fb, frm, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson on `[a, b]` to relative accuracy `rel_tol`, started from
/// 64 panels so narrow peaks are seen.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let panels = 64;
    let h = (b - a) / panels as f64;
    let cells: Vec<(f64, f64, f64, f64, f64)> = (0..panels)
        .map(|k| {
            let x0 = a + k as f64 * h;
            let x1 = x0 + h;
            let (f0, f1, fm) = (f(x0), f(x1), f(0.5 * (x0 + x1)));
            (x0, x1, f0, f1, fm)
        })
        .collect();
    let coarse: f64 = cells.iter().map(|c| h / 6.0 * (c.2 + 4.0 * c.4 + c.3)).sum();
    let tol = (rel_tol * coarse.abs()).max(f64::MIN_POSITIVE) / panels as f64;
    cells
        .iter()
        .map(|&(x0, x1, f0, f1, fm)| simpson_step(f, x0, f0, x1, f1, fm, h / 6.0 * (f0 + 4.0 * fm + f1), tol, 24))
        .sum()
}

/// Stationary density `exp(-2A/eps) / Z` of a gradient toy.
pub fn gradient_sde_exact_density(model: &ToyModel, eps: f64) -> Result<ToyDensity> {
    let potential = model.potential().ok_or_else(|| Error::input("exact density needs a gradient toy"))?.clone();
    if !(eps > 0.0) {
        return Err(Error::config("eps must be positive"));
    }
    let n = potential.degree();
    if n == 0 || n % 2 == 1 || potential.coeffs[n] <= 0.0 {
        return Err(Error::input("potential does not grow at both ends; exp(-2A/eps) is not integrable"));
    }
    let crit = potential.derivative().real_roots();
    let a_min = crit.iter().map(|u| potential.eval(*u)).fold(f64::INFINITY, f64::min);
    let (c_lo, c_hi) = crit.iter().fold((0.0f64, 0.0f64), |(l, h), u| (l.min(*u), h.max(*u)));
    let cut = |u: f64| -2.0 * (potential.eval(u) - a_min) / eps < -70.0;
    let mut lo = c_lo - 0.1;
    while !cut(lo) {
        lo -= 0.05 * (1.0 + lo.abs());
    }
    let mut hi = c_hi + 0.1;
    while !cut(hi) {
        hi += 0.05 * (1.0 + hi.abs());
    }
    let mut d = ToyDensity { potential, eps, a_min, log_norm: 0.0, lo, hi };
    let z = integrate(&|u| d.exponent(u).exp(), lo, hi, 1e-13);
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::NoConvergence("density normalization failed".to_string()));
    }
    d.log_norm = z.ln();
    Ok(d)
}

/// Sampled scalar path of a toy.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// One-step simulator for a toy. Gradient toys use Euler-Maruyama, the OU
/// process its exact Gaussian transition, chains exact jump sampling with
/// the state index stored as `f64`.
#[derive(Debug, Clone)]
pub struct ToyDynamics {
    pub model: ToyModel,
    pub dt: f64,
    chain: Option<ChainDynamics>,
    ou: (f64, f64),
}

impl ToyDynamics {
    pub fn new(model: ToyModel, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::config("dt must be positive"));
        }
        let chain = match &model.kind {
            ToyKind::FiniteChain(c) => Some(ChainDynamics { chain: c.clone(), dt }),
            _ => None,
        };
        let ou = match &model.kind {
            ToyKind::Ou { theta, sigma } => {
                let decay = (-theta * dt).exp();
                (decay, sigma * ((1.0 - decay * decay) / (2.0 * theta)).sqrt())
            }
            _ => (0.0, 0.0),
        };
        Ok(ToyDynamics { model, dt, chain, ou })
    }
}

impl Dynamics for ToyDynamics {
    type State = f64;

    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&self, x: &mut f64, rng: &mut StreamRng) -> Result<()> {
        match &self.model.kind {
            ToyKind::GradientSde { drift, .. } => {
                let s = self.model.noise_scale();
                let xi = if s > 0.0 { normal(rng) } else { 0.0 };
                *x += -drift.eval(*x) * self.dt + s * self.dt.sqrt() * xi;
            }
            ToyKind::Ou { sigma, .. } => {
                let xi = if *sigma > 0.0 { normal(rng) } else { 0.0 };
                *x = self.ou.0 * *x + self.ou.1 * xi;
            }
            ToyKind::FiniteChain(_) => {
                let mut i = *x as usize;
                self.chain.as_ref().unwrap().step(&mut i, rng)?;
                *x = i as f64;
            }
        }
        if !x.is_finite() {
            return Err(Error::NonFinite { step: 0, what: "toy state".to_string() });
        }
        Ok(())
    }

    fn step_integrate(&self, x: &mut f64, rng: &mut StreamRng, v: &(dyn Fn(&f64) -> f64 + Sync)) -> Result<f64> {
        if let Some(c) = &self.chain {
            let mut i = *x as usize;
            let out = c.step_integrate(&mut i, rng, &|s: &usize| v(&(*s as f64)))?;
            *x = i as f64;
            return Ok(out);
        }
        let a = v(x);
        self.step(x, rng)?;
        Ok(0.5 * self.dt * (a + v(x)))
    }
}

/// Path of a toy on stream `(seed, 0)`, recorded every `stride` steps.
pub fn simulate_toy(model: &ToyModel, x0: f64, dt: f64, horizon: f64, seed: u64, stride: usize) -> Result<ToyTrajectory> {
    simulate_toy_stream(model, x0, dt, horizon, seed, 0, stride)
}

pub fn simulate_toy_stream(
    model: &ToyModel,
    x0: f64,
    dt: f64,
    horizon: f64,
    seed: u64,
    index: u64,
    stride: usize,
) -> Result<ToyTrajectory> {
    let d = ToyDynamics::new(model.clone(), dt)?;
    let steps = (horizon / dt).round() as usize;
    let stride = stride.max(1);
    let mut rng = stream(seed, index);
    let mut x = x0;
    let mut times = vec![0.0];
    let mut values = vec![x0];
    for k in 1..=steps {
        d.step(&mut x, &mut rng).map_err(|e| match e {
            Error::NonFinite { what, .. } => Error::NonFinite { step: k, what },
            other => other,
        })?;
        if k % stride == 0 || k == steps {
            times.push(k as f64 * dt);
            values.push(x);
        }
    }
    Ok(ToyTrajectory { times, values })
}

/// Terminal values of `n` independent toy paths.
pub fn toy_endpoints(model: &ToyModel, x0: f64, dt: f64, horizon: f64, seed: u64, n: usize) -> Result<Vec<f64>> {
    par_map(n, |i| simulate_toy_stream(model, x0, dt, horizon, seed, i as u64, usize::MAX).map(|t| *t.values.last().unwrap()))
        .into_iter()
        .collect()
}

/// Forward/backward transition counts between adjacent bins of a gradient
/// toy, compared with the exact ratio `mu(B_j) / mu(B_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceRow {
    pub from: (f64, f64),
    pub to: (f64, f64),
    pub forward: usize,
    pub backward: usize,
    /// `(P_ij / P_ji) / (mu_j / mu_i)` estimated from occupation-normalized counts.
    pub ratio: f64,
    /// Standard error of `ratio` from Poisson counts.
    pub std_err: f64,
}

pub fn detailed_balance_check(density: &ToyDensity, path: &[f64], edges: &[f64]) -> Vec<BalanceRow> {
    let nb = edges.len().saturating_sub(1);
    let bin = |x: f64| (0..nb).find(|&k| x >= edges[k] && x < edges[k + 1]);
    let mut occ = vec![0usize; nb];
    let mut trans = vec![vec![0usize; nb]; nb];
    let mut prev = path.first().and_then(|x| bin(*x));
    for &x in &path[1..] {
        let cur = bin(x);
        if let Some(p) = prev {
            occ[p] += 1;
            if let Some(c) = cur {
                trans[p][c] += 1;
            }
        }
        prev = cur;
    }
    let mass: Vec<f64> = (0..nb).map(|k| density.prob(edges[k], edges[k + 1])).collect();
    let mut rows = Vec::new();
    for i in 0..nb.saturating_sub(1) {
        let j = i + 1;
        let (f, b) = (trans[i][j], trans[j][i]);
        if f == 0 || b == 0 || occ[i] == 0 || occ[j] == 0 {
            continue;
        }
        let pij = f as f64 / occ[i] as f64;
        let pji = b as f64 / occ[j] as f64;
        let ratio = (pij / pji) / (mass[j] / mass[i]);
        let rel = (1.0 / f as f64 + 1.0 / b as f64).sqrt();
        rows.push(BalanceRow {
            from: (edges[i], edges[i + 1]),
            to: (edges[j], edges[j + 1]),
            forward: f,
            backward: b,
            ratio,
            std_err: ratio * rel,
        });
    }
    rows
}
