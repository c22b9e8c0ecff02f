//! Slice sampling of the discount and strength of every hierarchy level.
//!
//! Priors: discount uniform on (0, 1), strength exponential with mean
//! `strength_scale`. The class restaurant's parameters and `p_geom` are not
//! resampled.

use rand::Rng;

use crate::model::{HyperLevel, Model};
use crate::pyp::{PypParams, SeatingStats};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperPrior {
    /// Mean of the exponential prior on strengths.
    pub strength_scale: f64,
    /// Slice-sampling rounds per level and call.
    pub rounds: u32,
}

impl Default for HyperPrior {
    fn default() -> Self {
        HyperPrior {
            strength_scale: 10.0,
            rounds: 3,
        }
    }
}

/// One univariate slice-sampling update of `x` on `(lo, hi)`.
fn slice<R: Rng + ?Sized>(x: f64, lo: f64, hi: f64, width: f64, f: impl Fn(f64) -> f64, rng: &mut R) -> f64 {
    let y = f(x) + rng.random::<f64>().ln();
    let mut left = (x - width * rng.random::<f64>()).max(lo);
    let mut right = (left + width).min(hi);
    let mut steps = 64;
    while left > lo && f(left) > y && steps > 0 {
        left = (left - width).max(lo);
        steps -= 1;
    }
    steps = 64;
    while right < hi && f(right) > y && steps > 0 {
        right = (right + width).min(hi);
        steps -= 1;
    }
    loop {
        let cand = left + rng.random::<f64>() * (right - left);
        if cand > lo && cand < hi && f(cand) > y {
            return cand;
        }
        if cand < x {
            left = cand;
        } else {
            right = cand;
        }
        if right - left < 1e-12 {
            return x;
        }
    }
}

/// Posterior draw of `(a, b)` for restaurants summarized by `stats`.
pub(crate) fn sample_level<R: Rng + ?Sized>(
    stats: &SeatingStats,
    current: PypParams,
    prior: &HyperPrior,
    rng: &mut R,
) -> PypParams {
    let (mut a, mut b) = (current.discount, current.strength);
    // Start strictly inside the supports.
    a = a.clamp(1e-6, 1.0 - 1e-6);
    b = b.max(1e-6);
    let lp = |a: f64, b: f64| stats.log_prob(PypParams { discount: a, strength: b });
    for _ in 0..prior.rounds {
        a = slice(a, 0.0, 1.0, 1.0, |x| lp(x, b), rng);
        b = slice(b, 0.0, f64::INFINITY, 1.0, |x| lp(a, x) - x / prior.strength_scale, rng);
    }
    PypParams { discount: a, strength: b }
}

/// Resamples the `(a, b)` pair of every level that has customers.
pub fn resample_hyperparameters<R: Rng + ?Sized>(model: &mut Model, prior: &HyperPrior, rng: &mut R) {
    let mut hyper = *model.hyper();
    let s = model.structure();
    let mut stats: Vec<(HyperLevel, SeatingStats)> = HyperLevel::ALL.iter().map(|&l| (l, SeatingStats::default())).collect();
    for (i, r) in model.franchise().restaurants().iter().enumerate() {
        let level = s.level_of(i as u32);
        let slot = HyperLevel::ALL.iter().position(|&l| l == level).expect("known level");
        stats[slot].1.add(r);
    }
    for (level, st) in &stats {
        if !st.is_empty() {
            *hyper.level_mut(*level) = sample_level(st, hyper.level(*level), prior, rng);
        }
    }
    model.set_hyper(hyper);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pyp::{seat, Franchise, Level, SeatingDelta};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stats_of(f: &Franchise<u32>) -> SeatingStats {
        let mut st = SeatingStats::default();
        st.add(f.restaurant(0));
        st
    }

    #[test]
    fn single_table_pulls_discount_towards_zero() {
        // 30 customers at one table: a discount of zero is most likely.
        let mut f = Franchise::new(1);
        let p = PypParams::new(0.5, 1.0).unwrap();
        let chain = [Level::new(0, p)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        seat(&mut f, &chain, 0, 1.0, &mut rng, &mut SeatingDelta::new());
        for _ in 1..30 {
            let mut d = SeatingDelta::new();
            // Force joining by giving the dish a base of zero elsewhere.
            seat(&mut f, &chain, 0, 1e-300, &mut rng, &mut d);
        }
        let st = stats_of(&f);
        assert_eq!(f.restaurant(0).tables(), 1);
        let grid: Vec<f64> = (1..10)
            .map(|i| st.log_prob(PypParams { discount: f64::from(i) / 10.0, strength: 1.0 }))
            .collect();
        assert!(grid.windows(2).all(|w| w[0] > w[1]));

        let prior = HyperPrior::default();
        let mut cur = p;
        let mut sum = 0.0;
        for _ in 0..2000 {
            cur = sample_level(&st, cur, &prior, &mut rng);
            sum += cur.discount;
        }
        assert!(sum / 2000.0 < 0.2, "mean discount {}", sum / 2000.0);
    }

    /// Slice sampler against a known density: Beta(2, 5) on (0, 1).
    #[test]
    fn slice_sampler_matches_beta_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = |x: f64| (x).ln() + 4.0 * (1.0 - x).ln();
        let mut x = 0.5;
        let (mut m1, mut m2) = (0.0, 0.0);
        let n = 100_000;
        for _ in 0..n {
            x = slice(x, 0.0, 1.0, 1.0, f, &mut rng);
            m1 += x;
            m2 += x * x;
        }
        let mean = m1 / f64::from(n);
        let var = m2 / f64::from(n) - mean * mean;
        assert!((mean - 2.0 / 7.0).abs() < 0.005, "mean {mean}");
        assert!((var - 10.0 / 392.0).abs() < 0.002, "var {var}");
    }

    #[test]
    fn slice_sampler_on_half_line_matches_gamma_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // Gamma(3, 2): mean 6.
        let f = |x: f64| 2.0 * x.ln() - x / 2.0;
        let mut x = 1.0;
        let mut m = 0.0;
        let n = 100_000;
        for _ in 0..n {
            x = slice(x, 0.0, f64::INFINITY, 1.0, f, &mut rng);
            m += x;
        }
        assert!((m / f64::from(n) - 6.0).abs() < 0.15, "mean {}", m / f64::from(n));
    }
}
