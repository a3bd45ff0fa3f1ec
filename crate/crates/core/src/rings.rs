//! Randomized ring decomposition around the depot, and the merge of per-ring
//! solutions back into one solution.

use crate::error::{Error, Result};
use crate::model::{CvrpInstance, CvrpSolution, Tour};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct RingPartition {
    /// a = 2/ε.
    pub a_param: f64,
    /// Random offset b in [0,1).
    pub b_sample: f64,
    /// x_0 = 0 < x_1 < ... < x_μ in rescaled units.
    pub radii: Vec<f64>,
    /// rings[i-1] holds the point indices of V_i.
    pub rings: Vec<Vec<usize>>,
    /// Factor applied to depot distances so that the closest point sits at
    /// distance >= 1 (1.0 when no rescaling was needed).
    pub scale: f64,
}

impl RingPartition {
    pub fn mu(&self) -> usize {
        self.rings.len()
    }
}

/// A sub-instance made of the points of a single ring.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundedInstance {
    pub instance: CvrpInstance,
    /// original[k] is the index in the full instance of sub-instance point k.
    pub original: Vec<usize>,
    /// 1-based ring number.
    pub ring: usize,
    /// Outer radius bound D in original units.
    pub d_outer: f64,
    /// Inner/outer ratio δ (0 for the innermost ring).
    pub delta: f64,
}

/// Scale factor that makes every depot distance at least 1.
pub fn rescale_factor(inst: &CvrpInstance) -> Result<f64> {
    let dmin = inst
        .points
        .iter()
        .map(|p| p.dist(inst.depot))
        .fold(f64::INFINITY, f64::min);
    if dmin <= 0.0 {
        return Err(Error::Precondition(
            "a point coincides with the depot; ring radii need positive distances".into(),
        ));
    }
    Ok(if dmin < 1.0 { 1.0 / dmin } else { 1.0 })
}

pub fn sample_rings(inst: &CvrpInstance, rng_seed: u64) -> Result<RingPartition> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let b: f64 = rng.gen_range(0.0..1.0);
    rings_with_offset(inst, b)
}

/// Deterministic variant of `sample_rings` with an explicit offset b.
pub fn rings_with_offset(inst: &CvrpInstance, b: f64) -> Result<RingPartition> {
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::Precondition(format!("ring offset b = {b} outside [0,1]")));
    }
    let scale = rescale_factor(inst)?;
    let a = 2.0 * inst.eps.inv() as f64;
    let d: Vec<f64> = inst.points.iter().map(|p| p.dist(inst.depot) * scale).collect();
    let dmax = d.iter().cloned().fold(0.0, f64::max);
    let mut radii = vec![0.0];
    let mut i = 1usize;
    loop {
        let x = (a * ((i - 1) as f64 + b)).exp();
        radii.push(x);
        if dmax < x {
            break;
        }
        i += 1;
    }
    let mu = radii.len() - 1;
    let mut rings = vec![Vec::new(); mu];
    for (j, &dj) in d.iter().enumerate() {
        // Half-open: x_{i-1} <= d < x_i. A point sitting exactly on x_i lands
        // in ring i+1, which keeps δD <= d < D true for every ring.
        let r = (1..=mu).find(|&r| dj < radii[r]).expect("x_mu exceeds d_max");
        rings[r - 1].push(j);
    }
    Ok(RingPartition {
        a_param: a,
        b_sample: b,
        radii,
        rings,
        scale,
    })
}

pub fn partition_instance(inst: &CvrpInstance, rp: &RingPartition) -> Vec<BoundedInstance> {
    let mut out = Vec::new();
    for (k, members) in rp.rings.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let ring = k + 1;
        let instance = CvrpInstance {
            depot: inst.depot,
            points: members.iter().map(|&j| inst.points[j]).collect(),
            capacity: inst.capacity,
            eps: inst.eps,
        };
        out.push(BoundedInstance {
            instance,
            original: members.clone(),
            ring,
            d_outer: rp.radii[ring] / rp.scale,
            delta: rp.radii[ring - 1] / rp.radii[ring],
        });
    }
    out
}

/// Union of per-ring solutions with indices mapped back to the full instance.
pub fn merge_solutions(
    inst: &CvrpInstance,
    parts: &[(&BoundedInstance, &CvrpSolution)],
) -> Result<CvrpSolution> {
    let mut used = vec![false; inst.n()];
    let mut tours = Vec::new();
    for (b, sol) in parts {
        for t in &sol.tours {
            let mut visits = Vec::with_capacity(t.visits.len());
            for &k in &t.visits {
                let j = *b.original.get(k).ok_or(Error::InvalidIndex {
                    index: k,
                    len: b.original.len(),
                })?;
                if j >= used.len() {
                    return Err(Error::InvalidIndex {
                        index: j,
                        len: used.len(),
                    });
                }
                if used[j] {
                    return Err(Error::Precondition(format!(
                        "point {j} appears in more than one ring solution"
                    )));
                }
                used[j] = true;
                visits.push(j);
            }
            tours.push(Tour::new(visits));
        }
    }
    CvrpSolution::from_tours(inst, tours)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_cvrp_solution, Eps, Point};
    use crate::oracle::{brute_force_cvrp, OracleBudget};
    use proptest::prelude::*;

    fn inst(points: Vec<Point>, c: usize) -> CvrpInstance {
        CvrpInstance::new(Point::default(), points, c, Eps::from_inverse(2).unwrap()).unwrap()
    }

    #[test]
    fn radii_examples() {
        let i = inst(vec![Point::new(1.0, 0.0)], 1);
        let rp = rings_with_offset(&i, 0.5).unwrap();
        assert!((rp.radii[1] - 2f64.exp()).abs() < 1e-9);
        assert_eq!(rp.rings, vec![vec![0]]);
        let far = inst(vec![Point::new(1.0, 0.0), Point::new(100.0, 0.0)], 1);
        let rp = rings_with_offset(&far, 0.5).unwrap();
        assert!((rp.radii[2] - 6f64.exp()).abs() < 1e-9);
        assert!((rp.radii[2] - 403.428_793).abs() < 1e-5);
        assert_eq!(rp.mu(), 2);
        for b in [0.01, 0.3, 0.99] {
            let rp = rings_with_offset(&i, b).unwrap();
            assert_eq!(rp.rings[0], vec![0]);
        }
    }

    #[test]
    fn zero_distance_rejected() {
        let i = inst(vec![Point::new(0.0, 0.0)], 1);
        assert!(sample_rings(&i, 1).is_err());
    }

    #[test]
    fn tie_goes_outward() {
        let i = inst(vec![Point::new(1.0, 0.0)], 1);
        // b = 0 puts x_1 = 1 exactly on the point.
        let rp = rings_with_offset(&i, 0.0).unwrap();
        assert!(rp.rings[0].is_empty());
        assert_eq!(rp.rings[1], vec![0]);
    }

    #[test]
    fn delta_for_second_ring() {
        let i = inst(vec![Point::new(1.5, 0.0), Point::new(200.0, 0.0)], 1);
        let rp = rings_with_offset(&i, 0.2).unwrap();
        let parts = partition_instance(&i, &rp);
        let second = parts.iter().find(|b| b.ring >= 2).unwrap();
        assert!((second.delta - (-4f64).exp()).abs() < 1e-12);
        assert!((second.delta - 0.0183).abs() < 1e-4);
        assert_eq!(parts[0].delta, 0.0);
    }

    #[test]
    fn rescaling_reported() {
        let i = inst(vec![Point::new(0.25, 0.0), Point::new(0.0, 3.0)], 1);
        let rp = sample_rings(&i, 4).unwrap();
        assert!((rp.scale - 4.0).abs() < 1e-12);
    }

    #[test]
    fn merge_examples() {
        let i = inst(vec![Point::new(3.0, 0.0), Point::new(0.0, 2.0)], 1);
        let rp = rings_with_offset(&i, 0.9).unwrap();
        let parts = partition_instance(&i, &rp);
        let sols: Vec<CvrpSolution> = parts
            .iter()
            .map(|b| brute_force_cvrp(&b.instance, OracleBudget::default()).unwrap())
            .collect();
        let pairs: Vec<_> = parts.iter().zip(sols.iter()).collect();
        let merged = merge_solutions(&i, &pairs).unwrap();
        assert!((merged.cost - 10.0).abs() < 1e-9);
        assert!(validate_cvrp_solution(&i, &merged).is_ok());
        let dup: Vec<_> = vec![pairs[0], pairs[0]];
        assert!(merge_solutions(&i, &dup).is_err());
    }

    proptest! {
        #[test]
        fn partition_is_exact_and_bounded(
            pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..12),
            seed in any::<u64>(),
        ) {
            let points: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
            prop_assume!(points.iter().all(|p| p.dist(Point::default()) > 1e-6));
            let i = inst(points, 2);
            let rp = sample_rings(&i, seed).unwrap();
            let mut seen = vec![0; i.n()];
            for r in &rp.rings {
                for &j in r {
                    seen[j] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
            prop_assert!(*rp.radii.last().unwrap() > i.points.iter().map(|p| p.dist(i.depot) * rp.scale).fold(0.0, f64::max));
            for b in partition_instance(&i, &rp) {
                for p in &b.instance.points {
                    let d = p.dist(i.depot);
                    prop_assert!(b.delta * b.d_outer <= d * (1.0 + 1e-12));
                    prop_assert!(d < b.d_outer * (1.0 + 1e-12));
                }
            }
        }
    }
}
