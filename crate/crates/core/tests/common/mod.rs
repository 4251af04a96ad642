#![allow(dead_code)]

use monopsc::model::random_instance;
use monopsc::{parse_instance, Instance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> Instance {
    let path = format!("{}/../../data/fixtures/{name}.txt", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    parse_instance(&text).unwrap()
}

/// Random instances with `n <= max_n`, `2 <= m <= max_m`, `k <= min(max_k, m)`.
pub fn random_instances(seed: u64, count: usize, max_n: u64, max_m: usize, max_k: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=max_n);
            let m = rng.gen_range(2..=max_m);
            let k = rng.gen_range(1..=max_k.min(m));
            random_instance(&mut rng, n, m, k).unwrap()
        })
        .collect()
}
