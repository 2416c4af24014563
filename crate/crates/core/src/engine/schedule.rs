use rand::Rng;

/// Iterations at which priors arrive under random timing.
///
/// The first prior arrives right after the initial design. At every later
/// iteration `m` a prior arrives with probability `1 - exp(-rate * (m - last))`,
/// where `last` is the previous arrival.
pub fn random_prior_schedule<R: Rng + ?Sized>(rng: &mut R, budget: usize, n_init: usize, rate: f64) -> Vec<usize> {
    if n_init >= budget {
        return Vec::new();
    }
    let mut out = vec![n_init];
    let mut last = n_init;
    for m in n_init + 1..budget {
        let p = 1.0 - (-rate * (m - last) as f64).exp();
        if rng.random::<f64>() < p {
            out.push(m);
            last = m;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn saturated_and_zero_hazard() {
        let mut rng = stream(0, Purpose::PriorTiming, 0);
        assert_eq!(random_prior_schedule(&mut rng, 12, 5, f64::INFINITY), (5..12).collect::<Vec<_>>());
        assert_eq!(random_prior_schedule(&mut rng, 200, 5, 0.0), vec![5]);
    }

    #[test]
    fn strictly_increasing() {
        for seed in 0..20 {
            let s = random_prior_schedule(&mut stream(seed, Purpose::PriorTiming, 0), 100, 10, 0.15);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert!(s.iter().all(|&t| (10..100).contains(&t)));
        }
    }

    #[test]
    fn mean_gap_matches_hazard_distribution() {
        let rate = 0.15;
        // P(gap = g) = (1 - e^{-rate g}) * prod_{j<g} e^{-rate j}
        let mut analytic = 0.0;
        let mut survive = 1.0;
        for g in 1..400 {
            let hazard = 1.0 - (-rate * g as f64).exp();
            analytic += g as f64 * hazard * survive;
            survive *= (-rate * g as f64).exp();
        }
        let mut gaps = Vec::new();
        let mut seed = 0;
        while gaps.len() < 100_000 {
            let s = random_prior_schedule(&mut stream(seed, Purpose::PriorTiming, 0), 10_000, 0, rate);
            gaps.extend(s.windows(2).map(|w| (w[1] - w[0]) as f64));
            seed += 1;
        }
        gaps.truncate(100_000);
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!((mean - analytic).abs() / analytic < 0.02, "{mean} vs {analytic}");
    }
}
