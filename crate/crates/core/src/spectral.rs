//! Dirichlet-Laplacian eigenbases on intervals and rectangles, spectral
//! fields, Sobolev and phase-space norms, and pseudo-spectral evaluation of
//! pointwise nonlinearities.
//!
//! Fields are stored as coefficient vectors in the orthonormal eigenbasis,
//! ordered by nondecreasing eigenvalue. The collocation grid has `4M`
//! intervals per axis (interior nodes only, the boundary values vanish), so
//! the trapezoid rule integrates every product of up to four retained modes
//! exactly. Truncating the analysed grid values back to `M` modes is the
//! dealiasing step.

use crate::error::{check_len, Error, Result};
use crate::prelude::*;
use crate::sim::Nonlinearity;
use core::f64::consts::PI;

const GRID_FACTOR: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
}

impl Domain {
    pub fn dimension(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            Domain::Interval { length } => length,
            Domain::Rectangle { lx, ly } => lx * ly,
        }
    }
}

#[derive(Debug, Clone)]
struct Axis {
    length: f64,
    modes: usize,
    /// interior nodes, `GRID_FACTOR * modes - 1` of them
    nodes: usize,
    /// `table[j * nodes + k] = sqrt(2/L) sin((j+1) pi x_k / L)`
    table: Vec<f64>,
    weight: f64,
}

impl Axis {
    fn new(length: f64, modes: usize) -> Self {
        let intervals = GRID_FACTOR * modes;
        let nodes = intervals - 1;
        let norm = (2.0 / length).sqrt();
        let mut table = vec![0.0; modes * nodes];
        for j in 0..modes {
            for k in 0..nodes {
                let x = (k + 1) as f64 * length / intervals as f64;
                table[j * nodes + k] = norm * ((j + 1) as f64 * PI * x / length).sin();
            }
        }
        Axis { length, modes, nodes, table, weight: length / intervals as f64 }
    }

    fn node(&self, k: usize) -> f64 {
        (k + 1) as f64 * self.length / (GRID_FACTOR * self.modes) as f64
    }
}

/// Orthonormal Dirichlet eigenbasis with its collocation grid.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    domain: Domain,
    axes: Vec<Axis>,
    /// 1-based multi-indices in eigenvalue order; the second entry is 1 in 1D.
    modes: Vec<(usize, usize)>,
    eigenvalues: Vec<f64>,
}

impl SpectralBasis {
    /// Sine basis on `(0, length)` with `modes` retained modes.
    pub fn interval(length: f64, modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::config("mode count must be at least 1"));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::config("interval length must be positive"));
        }
        let axis = Axis::new(length, modes);
        let eigenvalues = (1..=modes).map(|j| (j as f64 * PI / length).powi(2)).collect();
        Ok(SpectralBasis {
            domain: Domain::Interval { length },
            axes: vec![axis],
            modes: (1..=modes).map(|j| (j, 1)).collect(),
            eigenvalues,
        })
    }

    /// Product sine basis on `(0, lx) x (0, ly)` with `mx * my` retained modes.
    pub fn rectangle(lx: f64, ly: f64, mx: usize, my: usize) -> Result<Self> {
        if mx == 0 || my == 0 {
            return Err(Error::config("mode count must be at least 1 per axis"));
        }
        if !(lx > 0.0 && ly > 0.0) || !(lx.is_finite() && ly.is_finite()) {
            return Err(Error::config("rectangle side lengths must be positive"));
        }
        let mut modes: Vec<(usize, usize)> =
            (1..=mx).flat_map(|a| (1..=my).map(move |b| (a, b))).collect();
        let eig = |&(a, b): &(usize, usize)| {
            (a as f64 * PI / lx).powi(2) + (b as f64 * PI / ly).powi(2)
        };
        modes.sort_by(|p, q| eig(p).total_cmp(&eig(q)).then(p.cmp(q)));
        let eigenvalues = modes.iter().map(eig).collect();
        Ok(SpectralBasis {
            domain: Domain::Rectangle { lx, ly },
            axes: vec![Axis::new(lx, mx), Axis::new(ly, my)],
            modes,
            eigenvalues,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn mode_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    pub fn mode_index(&self, j: usize) -> (usize, usize) {
        self.modes[j]
    }

    /// Number of interior collocation nodes.
    pub fn grid_len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    /// Nodes per axis.
    pub fn grid_shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.nodes).collect()
    }

    /// Trapezoid weight of each interior node (uniform grid).
    pub fn quad_weight(&self) -> f64 {
        self.axes.iter().map(|a| a.weight).product()
    }

    /// Coordinates of every interior node, row-major in the axes.
    pub fn grid_points(&self) -> Vec<Vec<f64>> {
        match self.axes.as_slice() {
            [a] => (0..a.nodes).map(|k| vec![a.node(k)]).collect(),
            [a, b] => (0..a.nodes)
                .flat_map(|k1| (0..b.nodes).map(move |k2| vec![a.node(k1), b.node(k2)]))
                .collect(),
            _ => unreachable!(),
        }
    }

    /// Eigenfunction `e_j` (0-based `j`) at an arbitrary point.
    pub fn eval_mode(&self, j: usize, x: &[f64]) -> f64 {
        let (a, b) = self.modes[j];
        let ax = &self.axes[0];
        let mut v = (2.0 / ax.length).sqrt() * (a as f64 * PI * x[0] / ax.length).sin();
        if let Some(ay) = self.axes.get(1) {
            v *= (2.0 / ay.length).sqrt() * (b as f64 * PI * x[1] / ay.length).sin();
        }
        v
    }

    /// Eigenvalues and the eigenfunctions sampled on the collocation grid.
    pub fn eigenpairs(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut sampled = Vec::with_capacity(self.mode_count());
        let mut unit = vec![0.0; self.mode_count()];
        let mut grid = vec![0.0; self.grid_len()];
        for j in 0..self.mode_count() {
            unit.iter_mut().for_each(|c| *c = 0.0);
            unit[j] = 1.0;
            self.synthesize_into(&unit, &mut grid);
            sampled.push(grid.clone());
        }
        (self.eigenvalues.clone(), sampled)
    }

    /// Quadrature Gram matrix `(e_j, e_k)`; the identity up to rounding.
    pub fn orthonormality_matrix(&self) -> Vec<Vec<f64>> {
        let (_, sampled) = self.eigenpairs();
        let w = self.quad_weight();
        sampled
            .iter()
            .map(|a| sampled.iter().map(|b| w * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()).collect())
            .collect()
    }

    /// Grid values of the field with the given coefficients.
    pub fn synthesize_into(&self, coeffs: &[f64], grid: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), self.mode_count());
        grid.iter_mut().for_each(|g| *g = 0.0);
        match self.axes.as_slice() {
            [a] => {
                for (j, &c) in coeffs.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let row = &a.table[j * a.nodes..(j + 1) * a.nodes];
                    for (g, t) in grid.iter_mut().zip(row) {
                        *g += c * t;
                    }
                }
            }
            [a, b] => {
                // coefficients -> (j1, k2) -> (k1, k2)
                let mut partial = vec![0.0; a.modes * b.nodes];
                for (idx, &c) in coeffs.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let (j1, j2) = self.modes[idx];
                    let row = &b.table[(j2 - 1) * b.nodes..j2 * b.nodes];
                    let dst = &mut partial[(j1 - 1) * b.nodes..j1 * b.nodes];
                    for (d, t) in dst.iter_mut().zip(row) {
                        *d += c * t;
                    }
                }
                for j1 in 0..a.modes {
                    let src = &partial[j1 * b.nodes..(j1 + 1) * b.nodes];
                    for k1 in 0..a.nodes {
                        let s = a.table[j1 * a.nodes + k1];
                        let dst = &mut grid[k1 * b.nodes..(k1 + 1) * b.nodes];
                        for (d, p) in dst.iter_mut().zip(src) {
                            *d += s * p;
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    /// Quadrature projection of grid values onto the retained modes.
    pub fn analyze_into(&self, grid: &[f64], coeffs: &mut [f64]) {
        match self.axes.as_slice() {
            [a] => {
                for (j, c) in coeffs.iter_mut().enumerate() {
                    let row = &a.table[j * a.nodes..(j + 1) * a.nodes];
                    *c = a.weight * row.iter().zip(grid).map(|(t, g)| t * g).sum::<f64>();
                }
            }
            [a, b] => {
                // (k1, k2) -> (j1, k2) -> coefficients
                let mut partial = vec![0.0; a.modes * b.nodes];
                for j1 in 0..a.modes {
                    let dst = &mut partial[j1 * b.nodes..(j1 + 1) * b.nodes];
                    for k1 in 0..a.nodes {
                        let s = a.table[j1 * a.nodes + k1];
                        let src = &grid[k1 * b.nodes..(k1 + 1) * b.nodes];
                        for (d, g) in dst.iter_mut().zip(src) {
                            *d += s * g;
                        }
                    }
                }
                let w = a.weight * b.weight;
                for (idx, c) in coeffs.iter_mut().enumerate() {
                    let (j1, j2) = self.modes[idx];
                    let row = &b.table[(j2 - 1) * b.nodes..j2 * b.nodes];
                    let src = &partial[(j1 - 1) * b.nodes..j1 * b.nodes];
                    *c = w * row.iter().zip(src).map(|(t, p)| t * p).sum::<f64>();
                }
            }
            _ => unreachable!(),
        }
    }

    pub fn synthesize(&self, f: &Field) -> Vec<f64> {
        let mut grid = vec![0.0; self.grid_len()];
        self.synthesize_into(f.coeffs(), &mut grid);
        grid
    }

    pub fn analyze(&self, grid: &[f64]) -> Field {
        let mut c = vec![0.0; self.mode_count()];
        self.analyze_into(grid, &mut c);
        Field::from_coeffs(c)
    }

    /// Trapezoid integral of grid values over the domain.
    pub fn integrate_grid(&self, grid: &[f64]) -> f64 {
        self.quad_weight() * crate::math::sum(grid.iter().copied())
    }

    /// Apply a pointwise map on the grid and project back onto the basis.
    pub fn apply_pointwise_into<F: Fn(f64) -> f64>(
        &self,
        coeffs: &[f64],
        map: F,
        scratch: &mut Vec<f64>,
        out: &mut [f64],
    ) {
        scratch.resize(self.grid_len(), 0.0);
        self.synthesize_into(coeffs, scratch);
        for g in scratch.iter_mut() {
            *g = map(*g);
        }
        self.analyze_into(scratch, out);
    }

    pub fn apply_pointwise<F: Fn(f64) -> f64>(&self, f: &Field, map: F) -> Field {
        let mut scratch = Vec::new();
        let mut out = vec![0.0; self.mode_count()];
        self.apply_pointwise_into(f.coeffs(), map, &mut scratch, &mut out);
        Field::from_coeffs(out)
    }

    /// Pseudo-spectral `P_M f(u)`.
    pub fn evaluate_nonlinearity(&self, f: &Field, nl: &Nonlinearity) -> Field {
        self.apply_pointwise(f, |u| nl.value(u))
    }

    pub fn check_field(&self, f: &Field) -> Result<()> {
        check_len(self.mode_count(), f.len())
    }

    pub fn check_state(&self, y: &PhaseState) -> Result<()> {
        self.check_field(&y.position)?;
        self.check_field(&y.velocity)
    }

    /// `sqrt(sum lambda_j^s c_j^2)`.
    pub fn sobolev_norm(&self, f: &Field, s: f64) -> f64 {
        self.sobolev_norm_sq(f.coeffs(), s).sqrt()
    }

    pub fn sobolev_norm_sq(&self, c: &[f64], s: f64) -> f64 {
        if s == 0.0 {
            return c.iter().map(|x| x * x).sum();
        }
        c.iter().zip(&self.eigenvalues).map(|(x, l)| l.powf(s) * x * x).sum()
    }

    /// Squared weighted phase norm `||u1||_1^2 + ||u2 + alpha u1||^2`.
    pub fn phase_norm_sq(&self, y: &PhaseState, alpha: f64) -> f64 {
        self.phase_norm_s_sq(y, alpha, 0.0)
    }

    pub fn phase_norm(&self, y: &PhaseState, alpha: f64) -> Result<f64> {
        self.check_state(y)?;
        Ok(self.phase_norm_sq(y, alpha).sqrt())
    }

    /// Squared `H^s` phase norm `||u1||_{s+1}^2 + ||u2 + alpha u1||_s^2`.
    pub fn phase_norm_s_sq(&self, y: &PhaseState, alpha: f64, s: f64) -> f64 {
        let q = y.position.coeffs();
        let p = y.velocity.coeffs();
        let mut acc = 0.0;
        for j in 0..q.len() {
            let l = self.eigenvalues[j];
            let w = p[j] + alpha * q[j];
            let ls = if s == 0.0 { 1.0 } else { l.powf(s) };
            acc += ls * (l * q[j] * q[j] + w * w);
        }
        acc
    }

    /// Unweighted norm `sqrt(||grad u1||^2 + ||u2||^2)`.
    pub fn plain_phase_norm(&self, y: &PhaseState) -> f64 {
        self.phase_norm_sq(y, 0.0).sqrt()
    }

    /// Coordinates in which the phase norm is Euclidean:
    /// `X_j = sqrt(lambda_j) q_j`, `Y_j = p_j + alpha q_j`.
    pub fn isometric_coordinates(&self, y: &PhaseState, alpha: f64) -> (Vec<f64>, Vec<f64>) {
        let q = y.position.coeffs();
        let p = y.velocity.coeffs();
        let x = q.iter().zip(&self.eigenvalues).map(|(a, l)| l.sqrt() * a).collect();
        let v = q.iter().zip(p).map(|(a, b)| b + alpha * a).collect();
        (x, v)
    }

    /// `E(y) = |y|_H^2 + 2 int F(y_1) dx` with the trapezoid rule on the grid.
    pub fn energy(&self, y: &PhaseState, nl: &Nonlinearity, alpha: f64) -> f64 {
        let mut scratch = vec![0.0; self.grid_len()];
        self.energy_with(y, nl, alpha, &mut scratch)
    }

    pub fn energy_with(&self, y: &PhaseState, nl: &Nonlinearity, alpha: f64, scratch: &mut Vec<f64>) -> f64 {
        let base = self.phase_norm_sq(y, alpha);
        if nl.is_zero() {
            return base;
        }
        scratch.resize(self.grid_len(), 0.0);
        self.synthesize_into(y.position.coeffs(), scratch);
        let potential = self.quad_weight() * crate::math::sum(scratch.iter().map(|&u| nl.primitive(u)));
        base + 2.0 * potential
    }

    pub fn project_low(&self, f: &Field, n: usize) -> Result<Field> {
        self.check_field(f)?;
        f.project_low(n)
    }
}

/// Coefficients of a scalar field in the eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    coeffs: Vec<f64>,
}

impl Field {
    pub fn zeros(modes: usize) -> Self {
        Field { coeffs: vec![0.0; modes] }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        Field { coeffs }
    }

    /// `amplitude * e_j` for a 1-based mode number `j`.
    pub fn single_mode(modes: usize, j: usize, amplitude: f64) -> Self {
        let mut f = Field::zeros(modes);
        f.coeffs[j - 1] = amplitude;
        f
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add(&self, other: &Field) -> Field {
        Field { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Field) -> Field {
        Field { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect() }
    }

    /// `P_N`: keep modes `1..=n`, zero the rest.
    pub fn project_low(&self, n: usize) -> Result<Field> {
        if n > self.coeffs.len() {
            return Err(Error::input(alloc::format!(
                "projection cutoff {} exceeds mode count {}",
                n,
                self.coeffs.len()
            )));
        }
        let mut out = self.clone();
        out.coeffs[n..].iter_mut().for_each(|c| *c = 0.0);
        Ok(out)
    }
}

/// Phase-space point `[u, du/dt]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub position: Field,
    pub velocity: Field,
}

impl PhaseState {
    pub fn new(position: Field, velocity: Field) -> Self {
        PhaseState { position, velocity }
    }

    pub fn zeros(modes: usize) -> Self {
        PhaseState { position: Field::zeros(modes), velocity: Field::zeros(modes) }
    }

    /// `[u, 0]`, a stationary point candidate.
    pub fn at_rest(position: Field) -> Self {
        let m = position.len();
        PhaseState { position, velocity: Field::zeros(m) }
    }

    pub fn modes(&self) -> usize {
        self.position.len()
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite()
    }

    pub fn sub(&self, other: &PhaseState) -> PhaseState {
        PhaseState { position: self.position.sub(&other.position), velocity: self.velocity.sub(&other.velocity) }
    }

    pub fn add(&self, other: &PhaseState) -> PhaseState {
        PhaseState { position: self.position.add(&other.position), velocity: self.velocity.add(&other.velocity) }
    }

    pub fn scaled(&self, s: f64) -> PhaseState {
        PhaseState { position: self.position.scaled(s), velocity: self.velocity.scaled(s) }
    }

    /// `P_N` applied to both components.
    pub fn project_low(&self, n: usize) -> Result<PhaseState> {
        Ok(PhaseState { position: self.position.project_low(n)?, velocity: self.velocity.project_low(n)? })
    }
}

/// Default damping-weighted norm parameter `min(gamma/4, lambda_1/(4 gamma))`.
pub fn default_alpha(gamma: f64, lambda1: f64) -> f64 {
    (gamma / 4.0).min(lambda1 / (4.0 * gamma))
}

/// Equivalence constant between the weighted and unweighted phase norms.
pub fn norm_equivalence_constant(alpha: f64, lambda1: f64) -> f64 {
    1.0 + alpha / lambda1.sqrt() + alpha * alpha / lambda1
}
