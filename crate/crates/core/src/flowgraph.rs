//! Directed outer-planar flow graphs on the portals of a square, their
//! boundary-walk encoding over {0,1,2,3}, flow labelings, the rounding set F
//! and configuration derivation.

use crate::error::{Error, Result};
use crate::model::Eps;
use std::collections::BTreeSet;

/// Portals are numbered 0..k in walk order around the square boundary.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowGraph {
    pub k: usize,
    /// Directed arcs, kept sorted. Opposite parallels are allowed, identical
    /// duplicates are not.
    pub arcs: Vec<(usize, usize)>,
}

fn chords_cross(a: (usize, usize), b: (usize, usize)) -> bool {
    let (a0, a1) = (a.0.min(a.1), a.0.max(a.1));
    let (b0, b1) = (b.0.min(b.1), b.0.max(b.1));
    (a0 < b0 && b0 < a1 && a1 < b1) || (b0 < a0 && a0 < b1 && b1 < a1)
}

impl FlowGraph {
    pub fn new(k: usize, mut arcs: Vec<(usize, usize)>) -> Result<Self> {
        arcs.sort_unstable();
        let g = FlowGraph { k, arcs };
        g.check()?;
        Ok(g)
    }

    pub fn empty(k: usize) -> Self {
        FlowGraph { k, arcs: Vec::new() }
    }

    fn check(&self) -> Result<()> {
        for w in self.arcs.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Encoding(format!("duplicate arc {:?}", w[0])));
            }
        }
        for &(u, v) in &self.arcs {
            if u >= self.k || v >= self.k {
                return Err(Error::Encoding(format!("arc ({u},{v}) beyond k = {}", self.k)));
            }
            if u == v {
                return Err(Error::Encoding(format!("self-loop at portal {u}")));
            }
        }
        for (i, &a) in self.arcs.iter().enumerate() {
            for &b in &self.arcs[i + 1..] {
                if chords_cross(a, b) {
                    return Err(Error::Encoding(format!("arcs {a:?} and {b:?} cross")));
                }
            }
        }
        Ok(())
    }

    pub fn is_outer_planar(&self) -> bool {
        self.check().is_ok()
    }

    pub fn max_arcs(k: usize) -> usize {
        if k < 2 {
            0
        } else {
            4 * k - 6
        }
    }
}

/// Walk the portals in order. At each portal: close arcs that end here ('3',
/// innermost first), open arcs to later portals ('1' outgoing, '2' incoming,
/// farthest target first, '1' before '2' on a doubled chord), then '0'.
pub fn encode(g: &FlowGraph) -> Result<String> {
    g.check()?;
    let mut s = String::new();
    for p in 0..g.k {
        let closing = g
            .arcs
            .iter()
            .filter(|&&(u, v)| u.max(v) == p)
            .count();
        for _ in 0..closing {
            s.push('3');
        }
        let mut opening: Vec<(usize, char)> = g
            .arcs
            .iter()
            .filter(|&&(u, v)| u.min(v) == p)
            .map(|&(u, v)| (u.max(v), if u == p { '1' } else { '2' }))
            .collect();
        opening.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
        for (_, c) in opening {
            s.push(c);
        }
        s.push('0');
    }
    Ok(s)
}

/// Inverse of `encode`. Trailing move symbols may be omitted.
pub fn decode(s: &str, k: usize) -> Result<FlowGraph> {
    let mut stack: Vec<(usize, bool)> = Vec::new();
    let mut arcs = Vec::new();
    let mut p = 0usize;
    let mut opened_here = 0usize;
    for (i, ch) in s.chars().enumerate() {
        match ch {
            '0' => {
                p += 1;
                opened_here = 0;
                if p > k {
                    return Err(Error::Encoding(format!("more than {k} moves at symbol {i}")));
                }
            }
            '1' | '2' => {
                if p >= k {
                    return Err(Error::Encoding(format!("arc opened past the last portal at {i}")));
                }
                stack.push((p, ch == '1'));
                opened_here += 1;
            }
            '3' => {
                if p >= k {
                    return Err(Error::Encoding(format!("closure past the last portal at {i}")));
                }
                if opened_here > 0 {
                    return Err(Error::Encoding(format!(
                        "closure at symbol {i} would form a self-loop"
                    )));
                }
                let (q, out) = stack
                    .pop()
                    .ok_or_else(|| Error::Encoding(format!("'3' at symbol {i} with no open arc")))?;
                arcs.push(if out { (q, p) } else { (p, q) });
            }
            c => return Err(Error::Encoding(format!("invalid symbol {c:?} at {i}"))),
        }
    }
    if !stack.is_empty() {
        return Err(Error::Encoding(format!("{} arcs never closed", stack.len())));
    }
    FlowGraph::new(k, arcs)
}

/// All outer-planar flow graphs on k portals, at most `cap` of them (an
/// overflow is reported as a cap error). `max_arcs` bounds the arc count.
pub fn enumerate_flow_graphs(k: usize, cap: usize, max_arcs: Option<usize>) -> Result<Vec<FlowGraph>> {
    let chords: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .collect();
    let limit = max_arcs.unwrap_or(usize::MAX);
    let mut out = Vec::new();
    let mut cur: Vec<(usize, usize)> = Vec::new();
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    fn rec(
        idx: usize,
        chords: &[(usize, usize)],
        k: usize,
        limit: usize,
        cap: usize,
        cur: &mut Vec<(usize, usize)>,
        chosen: &mut Vec<(usize, usize)>,
        out: &mut Vec<FlowGraph>,
    ) -> Result<()> {
        if idx == chords.len() {
            if out.len() >= cap {
                return Err(Error::cap("flow graphs", cap as u64));
            }
            let mut arcs = cur.clone();
            arcs.sort_unstable();
            out.push(FlowGraph { k, arcs });
            return Ok(());
        }
        rec(idx + 1, chords, k, limit, cap, cur, chosen, out)?;
        let c = chords[idx];
        if chosen.iter().any(|&d| chords_cross(c, d)) {
            return Ok(());
        }
        chosen.push(c);
        let options: [&[(usize, usize)]; 3] = [&[(c.0, c.1)], &[(c.1, c.0)], &[(c.0, c.1), (c.1, c.0)]];
        for opt in options {
            if cur.len() + opt.len() > limit {
                continue;
            }
            cur.extend_from_slice(opt);
            rec(idx + 1, chords, k, limit, cap, cur, chosen, out)?;
            cur.truncate(cur.len() - opt.len());
        }
        chosen.pop();
        Ok(())
    }
    rec(0, &chords, k, limit, cap, &mut cur, &mut chosen, &mut out)?;
    Ok(out)
}

/// A random non-crossing chord set with random arc states; used for
/// sampled round-trip checks at larger k.
pub fn random_flow_graph<R: rand::Rng>(k: usize, rng: &mut R) -> FlowGraph {
    let mut chords: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .collect();
    use rand::seq::SliceRandom;
    chords.shuffle(rng);
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    let mut arcs = Vec::new();
    for c in chords {
        if rng.gen_bool(0.5) && !chosen.iter().any(|&d| chords_cross(c, d)) {
            chosen.push(c);
            match rng.gen_range(0..3) {
                0 => arcs.push(c),
                1 => arcs.push((c.1, c.0)),
                _ => {
                    arcs.push(c);
                    arcs.push((c.1, c.0));
                }
            }
        }
    }
    arcs.sort_unstable();
    FlowGraph { k, arcs }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowLabeling {
    /// One positive value per arc of the graph, in the graph's arc order.
    pub values: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    pub inflow: Vec<u64>,
    pub outflow: Vec<u64>,
    /// Touched portals grouped by connected component (directions ignored),
    /// each sorted, components ordered by smallest portal.
    pub comps: Vec<Vec<usize>>,
}

impl Configuration {
    /// Net flow entering the square: Σ_p max(in_p − out_p, 0). A portal that
    /// a path leaves and re-enters contributes nothing.
    pub fn flow_value(&self) -> u64 {
        self.inflow
            .iter()
            .zip(&self.outflow)
            .map(|(&i, &o)| i.saturating_sub(o))
            .sum()
    }

    pub fn is_conserving(&self) -> bool {
        self.inflow.iter().sum::<u64>() == self.outflow.iter().sum::<u64>()
    }
}

/// Portal sums of the labeled arcs (an arc u->v enters the square at u and
/// leaves at v) and the component partition of the touched portals.
pub fn derive_configuration(g: &FlowGraph, labels: &FlowLabeling) -> Result<Configuration> {
    if labels.values.len() != g.arcs.len() {
        return Err(Error::Precondition(format!(
            "{} labels for {} arcs",
            labels.values.len(),
            g.arcs.len()
        )));
    }
    let mut inflow = vec![0u64; g.k];
    let mut outflow = vec![0u64; g.k];
    let mut parent: Vec<usize> = (0..g.k).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let n = p[y];
            p[y] = r;
            y = n;
        }
        r
    }
    for (&(u, v), &f) in g.arcs.iter().zip(&labels.values) {
        if f == 0 {
            return Err(Error::Precondition("arc flows must be positive".into()));
        }
        inflow[u] += f;
        outflow[v] += f;
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        parent[ru.max(rv)] = ru.min(rv);
    }
    let touched: BTreeSet<usize> = g.arcs.iter().flat_map(|&(u, v)| [u, v]).collect();
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<(usize, usize)> = Vec::new();
    for p in touched {
        let r = find(&mut parent, p);
        match root_of.iter().find(|(rr, _)| *rr == r) {
            Some(&(_, ci)) => comps[ci].push(p),
            None => {
                root_of.push((r, comps.len()));
                comps.push(vec![p]);
            }
        }
    }
    Ok(Configuration {
        inflow,
        outflow,
        comps,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundingSet {
    pub alpha: f64,
    pub n_f: u32,
    /// Sorted, deduplicated, always containing 0, 1 and n.
    pub values: Vec<u64>,
}

/// ρ = ⌊log2(n/ε)⌋ computed exactly on integers (n/ε = n·inv).
pub fn rho_for(n: usize, eps: Eps) -> u32 {
    let v = (n as u64) * eps.inv() as u64;
    63 - v.leading_zeros()
}

/// α with α² − 1 = ε·ln(1+ε²)/(8ρ²).
pub fn paper_alpha(eps: Eps, rho: u32) -> f64 {
    let e = eps.value();
    (1.0 + e * (1.0 + e * e).ln() / (8.0 * (rho as f64).powi(2))).sqrt()
}

pub fn build_rounding_set(n: usize, eps: Eps, alpha_override: Option<f64>) -> Result<RoundingSet> {
    if n == 0 {
        return Err(Error::Precondition("rounding set needs n >= 1".into()));
    }
    let alpha = match alpha_override {
        Some(a) if !(a > 1.0) || !a.is_finite() => {
            return Err(Error::Precondition(format!("alpha must exceed 1; got {a}")))
        }
        Some(a) => a,
        None => {
            let rho = rho_for(n, eps).max(1);
            paper_alpha(eps, rho)
        }
    };
    Ok(rounding_set_from_alpha(n as u64, alpha))
}

/// F = {0} ∪ {⌊α^i⌋ : 0 <= i <= N_F} where N_F is the first exponent with
/// ⌊α^i⌋ >= n; n itself is added so that n ∈ F even when the powers skip it.
pub fn rounding_set_from_alpha(n: u64, alpha: f64) -> RoundingSet {
    let mut vals = BTreeSet::new();
    vals.insert(0u64);
    let mut i = 0u32;
    loop {
        let v = alpha.powi(i as i32).floor() as u64;
        if v >= n {
            break;
        }
        vals.insert(v);
        i += 1;
    }
    vals.insert(n);
    RoundingSet {
        alpha,
        n_f: i,
        values: vals.into_iter().collect(),
    }
}

impl RoundingSet {
    pub fn contains(&self, v: u64) -> bool {
        self.values.binary_search(&v).is_ok()
    }

    /// Largest element of F that is <= v.
    pub fn round_down(&self, v: u64) -> u64 {
        match self.values.binary_search(&v) {
            Ok(_) => v,
            Err(pos) => self.values[pos - 1],
        }
    }
}

pub fn round_down_to_f(v: u64, f: &RoundingSet) -> u64 {
    f.round_down(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn encoding_examples() {
        assert_eq!(encode(&FlowGraph::empty(4)).unwrap(), "0000");
        let g = FlowGraph::new(2, vec![(0, 1)]).unwrap();
        assert_eq!(encode(&g).unwrap(), "1030");
        assert_eq!(decode("103", 2).unwrap(), g);
        assert_eq!(decode("0000", 4).unwrap(), FlowGraph::empty(4));
        assert!(decode("3", 1).is_err());
        assert!(decode("13", 2).is_err());
        assert!(decode("10", 2).is_err());
        let both = FlowGraph::new(2, vec![(0, 1), (1, 0)]).unwrap();
        assert_eq!(encode(&both).unwrap(), "120330");
    }

    #[test]
    fn crossing_rejected() {
        assert!(FlowGraph::new(4, vec![(0, 2), (1, 3)]).is_err());
        assert!(FlowGraph::new(4, vec![(0, 2), (2, 3), (3, 0)]).is_ok());
        assert!(FlowGraph::new(3, vec![(1, 1)]).is_err());
    }

    #[test]
    fn enumeration_small_counts() {
        assert_eq!(enumerate_flow_graphs(1, 100, None).unwrap().len(), 1);
        let two = enumerate_flow_graphs(2, 100, None).unwrap();
        assert_eq!(two.len(), 4);
        // Triangle: 3 independent chords, 4 states each.
        assert_eq!(enumerate_flow_graphs(3, 1000, None).unwrap().len(), 64);
        assert!(enumerate_flow_graphs(5, 10, None).unwrap_err().is_cap());
    }

    /// Independent count: sum over non-crossing chord sets of 3^|set|,
    /// by brute force over all chord subsets.
    fn brute_count(k: usize) -> usize {
        let chords: Vec<(usize, usize)> = (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .collect();
        let mut total = 0;
        for mask in 0u32..(1 << chords.len()) {
            let set: Vec<_> = (0..chords.len()).filter(|&i| mask & (1 << i) != 0).collect();
            let ok = set
                .iter()
                .all(|&i| set.iter().all(|&j| i == j || !chords_cross(chords[i], chords[j])));
            if ok {
                total += 3usize.pow(set.len() as u32);
            }
        }
        total
    }

    #[test]
    fn enumeration_matches_brute_count_and_roundtrips() {
        for k in 1..=6 {
            let all = enumerate_flow_graphs(k, 10_000_000, None).unwrap();
            assert_eq!(all.len(), brute_count(k), "k = {k}");
            let distinct: BTreeSet<_> = all.iter().collect();
            assert_eq!(distinct.len(), all.len());
            for g in &all {
                assert!(g.arcs.len() <= FlowGraph::max_arcs(k).max(0));
                let s = encode(g).unwrap();
                assert_eq!(s.len(), k + 2 * g.arcs.len());
                assert_eq!(&decode(&s, k).unwrap(), g);
            }
        }
    }

    #[test]
    fn sampled_roundtrip_k12() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let g = random_flow_graph(12, &mut rng);
            assert!(g.is_outer_planar());
            assert!(g.arcs.len() <= FlowGraph::max_arcs(12));
            assert_eq!(decode(&encode(&g).unwrap(), 12).unwrap(), g);
        }
    }

    #[test]
    fn rounding_set_examples() {
        let eps = Eps::from_inverse(2).unwrap();
        let f = build_rounding_set(16, eps, Some(2.0)).unwrap();
        assert_eq!(f.values, vec![0, 1, 2, 4, 8, 16]);
        assert_eq!(f.round_down(13), 8);
        assert_eq!(f.round_down(1), 1);
        assert_eq!(f.round_down(0), 0);
        let paper = build_rounding_set(16, eps, None).unwrap();
        let a2 = paper.alpha * paper.alpha - 1.0;
        assert!((a2 - 0.5 * 1.25f64.ln() / 200.0).abs() < 1e-15);
        assert!((a2 - 5.58e-4).abs() < 1e-6);
        assert_eq!(paper.values, (0..=16).collect::<Vec<u64>>());
        assert_eq!(build_rounding_set(1, eps, None).unwrap().values, vec![0, 1]);
        assert!(build_rounding_set(4, eps, Some(1.0)).is_err());
        // n not a power of the override base is still a member.
        assert!(build_rounding_set(6, eps, Some(2.0)).unwrap().contains(6));
    }

    #[test]
    fn configuration_examples() {
        let c = derive_configuration(&FlowGraph::empty(4), &FlowLabeling { values: vec![] }).unwrap();
        assert_eq!(c.flow_value(), 0);
        assert!(c.comps.is_empty());
        let g = FlowGraph::new(4, vec![(0, 1), (1, 2)]).unwrap();
        let c = derive_configuration(&g, &FlowLabeling { values: vec![5, 5] }).unwrap();
        assert_eq!((c.inflow[1], c.outflow[1]), (5, 5));
        assert_eq!(c.comps, vec![vec![0, 1, 2]]);
        assert_eq!(c.flow_value(), 5);
        assert!(c.is_conserving());
    }

    proptest! {
        #[test]
        fn round_down_monotone_idempotent(v in 0u64..200, w in 0u64..200, alpha in 1.01f64..3.0) {
            let f = rounding_set_from_alpha(200, alpha);
            let r = f.round_down(v);
            prop_assert!(r <= v);
            prop_assert!(f.contains(r));
            prop_assert_eq!(f.round_down(r), r);
            if v > 0 { prop_assert!(r > 0); }
            if v <= w { prop_assert!(r <= f.round_down(w)); }
        }

        #[test]
        fn rounded_labels_conserve(seed in any::<u64>(), alpha in 1.1f64..3.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = random_flow_graph(8, &mut rng);
            let f = rounding_set_from_alpha(50, alpha);
            use rand::Rng;
            let exact: Vec<u64> = g.arcs.iter().map(|_| rng.gen_range(1..50)).collect();
            let rounded: Vec<u64> = exact.iter().map(|&v| f.round_down(v)).collect();
            for vals in [exact, rounded] {
                let c = derive_configuration(&g, &FlowLabeling { values: vals }).unwrap();
                prop_assert!(c.is_conserving());
            }
        }
    }
}
