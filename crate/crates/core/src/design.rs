//! Space-filling initial designs from a digit-scrambled Halton sequence.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::space::{ConfigSpace, EncodedVector, INACTIVE};

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131,
];

/// Initial design size for a space of `dim` hyperparameters.
pub fn default_initial_size(dim: usize) -> usize {
    (2 * dim).max(5)
}

/// Halton sequence in `[0, 1)^dims` with an independent random permutation
/// of the digits at every (dimension, digit position).
pub struct ScrambledHalton {
    bases: Vec<u64>,
    perms: Vec<Vec<Vec<u64>>>,
}

impl ScrambledHalton {
    pub fn new<R: Rng + ?Sized>(dims: usize, rng: &mut R) -> Self {
        assert!(dims <= PRIMES.len(), "at most {} dimensions", PRIMES.len());
        let bases = PRIMES[..dims].to_vec();
        let perms = bases
            .iter()
            .map(|&b| {
                let digits = (53.0 / (b as f64).log2()).ceil() as usize;
                (0..digits)
                    .map(|_| {
                        let mut p: Vec<u64> = (0..b).collect();
                        p.shuffle(rng);
                        p
                    })
                    .collect()
            })
            .collect();
        Self { bases, perms }
    }

    pub fn point(&self, index: u64) -> Vec<f64> {
        self.bases
            .iter()
            .zip(&self.perms)
            .map(|(&b, perms)| {
                let mut n = index;
                let mut scale = 1.0 / b as f64;
                let mut value = 0.0;
                for perm in perms {
                    value += perm[(n % b) as usize] as f64 * scale;
                    n /= b;
                    scale /= b as f64;
                }
                value.min(1.0 - f64::EPSILON)
            })
            .collect()
    }
}

/// `n` encoded configurations covering `space`. Inactive children get the
/// sentinel; categorical dims take the unit coordinate's category bucket.
pub fn initial_design<R: Rng + ?Sized>(space: &ConfigSpace, n: usize, rng: &mut R) -> Vec<EncodedVector> {
    let seq = ScrambledHalton::new(space.dim(), rng);
    (0..n as u64)
        .map(|k| {
            let u = seq.point(k);
            let mut coords = vec![INACTIVE; space.dim()];
            for pass in 0..2 {
                for i in 0..space.dim() {
                    let conditional = space.is_conditional(i);
                    if (pass == 0) == conditional || (conditional && !space.is_active_encoded(&coords, i)) {
                        continue;
                    }
                    let p = &space.params()[i];
                    coords[i] = if p.is_numeric() {
                        space.from_unit(i, u[i])
                    } else {
                        let k = p.categories().len();
                        ((u[i] * k as f64) as usize).min(k - 1) as f64
                    };
                }
            }
            EncodedVector(coords)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::space::HyperparameterDef;

    #[test]
    fn points_cover_strata() {
        let seq = ScrambledHalton::new(2, &mut stream(1, Purpose::InitialDesign, 0));
        let pts: Vec<Vec<f64>> = (0..16).map(|k| seq.point(k)).collect();
        // base 2: every aligned block of 4 hits each quarter of the first axis once
        for block in pts.chunks(4) {
            let mut quarters: Vec<usize> = block.iter().map(|p| (p[0] * 4.0) as usize).collect();
            quarters.sort();
            assert_eq!(quarters, vec![0, 1, 2, 3]);
        }
        assert!(pts.iter().flatten().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn design_is_valid_and_seeded() {
        let space = ConfigSpace::new(vec![
            HyperparameterDef::log_float("lr", 1e-4, 1.0),
            HyperparameterDef::categorical("c", &["a", "b", "c"]),
            HyperparameterDef::int("k", 1, 5).when("c", "b"),
        ])
        .unwrap();
        let a = initial_design(&space, 9, &mut stream(2, Purpose::InitialDesign, 0));
        let b = initial_design(&space, 9, &mut stream(2, Purpose::InitialDesign, 0));
        assert_eq!(a, b);
        for v in &a {
            space.decode(v).unwrap();
        }
        let cats: std::collections::BTreeSet<u64> = a.iter().map(|v| v[1] as u64).collect();
        assert_eq!(cats.len(), 3);
    }

    #[test]
    fn default_size() {
        assert_eq!(default_initial_size(2), 5);
        assert_eq!(default_initial_size(6), 12);
    }
}
