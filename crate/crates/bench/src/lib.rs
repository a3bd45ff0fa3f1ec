//! Seeded instance generators shared by the benchmarks.

use cvrp_qptas::{CvrpInstance, Eps, MPathsInstance, Point, Square};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_points(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Point::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi))).collect()
}

pub fn cvrp(seed: u64, n: usize, c: usize) -> CvrpInstance {
    CvrpInstance::new(Point::new(0.0, 0.0), random_points(seed, n, -1.0, 1.0), c, Eps::from_inverse(2).unwrap())
        .expect("valid instance")
}

pub fn mpaths(seed: u64, n: usize, m: usize) -> MPathsInstance {
    MPathsInstance {
        square: Square::unit(),
        a: Point::new(0.0, 0.1),
        b: Point::new(1.0, 0.9),
        m,
        points: random_points(seed, n, 0.0, 1.0),
        eps: Eps::from_inverse(2).unwrap(),
    }
}
