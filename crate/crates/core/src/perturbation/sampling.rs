use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n x d` Bernoulli(`p_keep`) masks; row 0 is always all ones so the
/// original instance is part of every sample.
pub fn sample_masks(d: usize, n: usize, seed: u64, p_keep: f64) -> Vec<Vec<bool>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = p_keep.clamp(0.0, 1.0);
    (0..n)
        .map(|i| {
            if i == 0 {
                vec![true; d]
            } else {
                (0..d).map(|_| rng.random_bool(p)).collect()
            }
        })
        .collect()
}

/// Cosine distance between a mask and the all-ones vector; 1 for the empty mask.
pub fn cosine_distance_to_ones(mask: &[bool]) -> f64 {
    let on = mask.iter().filter(|&&b| b).count();
    if on == 0 {
        return 1.0;
    }
    1.0 - (on as f64 / mask.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keep_all() {
        assert!(sample_masks(7, 50, 1, 1.0).iter().flatten().all(|&b| b));
    }

    #[test]
    fn seeded_and_first_row_full() {
        let a = sample_masks(5, 20, 9, 0.5);
        assert_eq!(a, sample_masks(5, 20, 9, 0.5));
        assert_ne!(a, sample_masks(5, 20, 10, 0.5));
        assert!(a[0].iter().all(|&b| b));
    }

    #[test]
    fn column_means_concentrate() {
        let m = sample_masks(10, 10_000, 4, 0.5);
        for j in 0..10 {
            let mean = m.iter().filter(|r| r[j]).count() as f64 / m.len() as f64;
            assert!((mean - 0.5).abs() < 0.02, "column {j}: {mean}");
        }
    }

    #[test]
    fn cosine_distance_extremes() {
        assert_eq!(cosine_distance_to_ones(&[true; 4]), 0.0);
        assert_eq!(cosine_distance_to_ones(&[false; 4]), 1.0);
        assert!((cosine_distance_to_ones(&[true, false, false, false]) - 0.5).abs() < 1e-12);
    }
}
