use crate::error::{Error, Result};
use crate::prelude::*;
use crate::rng::uniform;
use rand::Rng;

/// Maximal coupling of two distributions on `{0, .., n-1}`: `X = Y` with
/// probability `1 - TV(p, q)`, and on disagreement `X` and `Y` are drawn
/// independently from the normalized positive and negative parts of `p - q`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximalCoupling {
    overlap: Vec<f64>,
    p_excess: Vec<f64>,
    q_excess: Vec<f64>,
    tv: f64,
}

fn check_simplex(p: &[f64], name: &str) -> Result<()> {
    if p.is_empty() || p.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::input(alloc::format!("{name} must be a nonnegative finite vector")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::input(alloc::format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

fn draw_from<R: Rng + ?Sized>(w: &[f64], total: f64, rng: &mut R) -> usize {
    let target = uniform(rng) * total;
    let mut acc = 0.0;
    for (i, x) in w.iter().enumerate() {
        acc += x;
        if target < acc {
            return i;
        }
    }
    w.iter().rposition(|x| *x > 0.0).unwrap_or(0)
}

pub fn maximal_coupling_discrete(p: &[f64], q: &[f64]) -> Result<MaximalCoupling> {
    check_simplex(p, "p")?;
    check_simplex(q, "q")?;
    if p.len() != q.len() {
        return Err(Error::Dimension { expected: p.len(), found: q.len() });
    }
    let overlap: Vec<f64> = p.iter().zip(q).map(|(a, b)| a.min(*b)).collect();
    let p_excess: Vec<f64> = p.iter().zip(&overlap).map(|(a, o)| a - o).collect();
    let q_excess: Vec<f64> = q.iter().zip(&overlap).map(|(b, o)| b - o).collect();
    let tv = 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(MaximalCoupling { overlap, p_excess, q_excess, tv })
}

impl MaximalCoupling {
    /// `TV(p, q) = P(X != Y)`.
    pub fn tv(&self) -> f64 {
        self.tv
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let same = 1.0 - self.tv;
        if self.tv == 0.0 || (same > 0.0 && uniform(rng) < same) {
            let x = draw_from(&self.overlap, same, rng);
            return (x, x);
        }
        let x = draw_from(&self.p_excess, self.tv, rng);
        let y = draw_from(&self.q_excess, self.tv, rng);
        (x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn trivial_and_disjoint_cases() {
        let mut rng = stream(1, 0);
        let c = maximal_coupling_discrete(&[0.3, 0.7], &[0.3, 0.7]).unwrap();
        for _ in 0..1000 {
            let (x, y) = c.sample(&mut rng);
            assert_eq!(x, y);
        }
        let c = maximal_coupling_discrete(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        for _ in 0..1000 {
            assert_eq!(c.sample(&mut rng), (0, 1));
        }
    }

    #[test]
    fn disagreement_frequency_is_tv() {
        let c = maximal_coupling_discrete(&[0.5, 0.5], &[0.75, 0.25]).unwrap();
        assert!((c.tv() - 0.25).abs() < 1e-15);
        let mut rng = stream(2, 0);
        let n = 200_000;
        let mut diff = 0;
        let mut xs = [0usize; 2];
        let mut ys = [0usize; 2];
        for _ in 0..n {
            let (x, y) = c.sample(&mut rng);
            diff += (x != y) as usize;
            xs[x] += 1;
            ys[y] += 1;
        }
        let f = diff as f64 / n as f64;
        let se = (0.25 * 0.75 / n as f64).sqrt();
        assert!((f - 0.25).abs() < 4.0 * se);
        assert!((xs[0] as f64 / n as f64 - 0.5).abs() < 0.005);
        assert!((ys[0] as f64 / n as f64 - 0.75).abs() < 0.005);
    }

    #[test]
    fn rejects_non_simplex() {
        assert!(maximal_coupling_discrete(&[0.5, 0.6], &[0.5, 0.5]).is_err());
        assert!(maximal_coupling_discrete(&[-0.1, 1.1], &[0.5, 0.5]).is_err());
    }
}
