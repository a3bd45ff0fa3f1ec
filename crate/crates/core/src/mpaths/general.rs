//! General m-paths: several anchor pairs in one square, each with its own
//! path count and point count. Points are split across the pairs
//! exhaustively and every part is solved on its own.

use super::{solve_mpaths, MPathsConfig};
use crate::error::{Error, Result};
use crate::model::{Eps, MPathsInstance, MPathsSolution, Point, Square};
use std::collections::HashMap;

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralPair {
    pub a: Point,
    pub b: Point,
    /// Paths for this pair.
    pub m: usize,
    /// Points this pair must visit.
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralSolution {
    /// Point indices (into the shared point list) per pair.
    pub assignment: Vec<Vec<usize>>,
    /// Per-pair solutions; path entries index into `assignment[i]`.
    pub solutions: Vec<MPathsSolution>,
    pub cost: f64,
    /// Number of point splits evaluated.
    pub splits: usize,
}

fn multinomial(n: usize, parts: &[usize]) -> f64 {
    let mut ln = 0.0;
    let lf = |k: usize| (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
    ln += lf(n);
    for &p in parts {
        ln -= lf(p);
    }
    ln.exp()
}

/// Exhaustive split with a caller-supplied per-pair solver.
pub fn solve_general_with(
    square: Square,
    eps: Eps,
    pairs: &[GeneralPair],
    points: &[Point],
    split_cap: usize,
    solver: &mut dyn FnMut(&MPathsInstance) -> Result<MPathsSolution>,
) -> Result<GeneralSolution> {
    let total: usize = pairs.iter().map(|p| p.n).sum();
    if total != points.len() {
        return Err(Error::Infeasible(format!(
            "pair point counts sum to {total}, square holds {}",
            points.len()
        )));
    }
    if let Some(p) = pairs.iter().find(|p| p.m == 0 && p.n > 0) {
        return Err(Error::Infeasible(format!("pair without paths must visit {} points", p.n)));
    }
    let counts: Vec<usize> = pairs.iter().map(|p| p.n).collect();
    let splits = multinomial(points.len(), &counts);
    if splits > split_cap as f64 + 0.5 {
        return Err(Error::cap("point splits across anchor pairs", split_cap as u64));
    }
    let mut memo: HashMap<(usize, Vec<usize>), MPathsSolution> = HashMap::new();
    let mut best: Option<GeneralSolution> = None;
    let mut assign: Vec<Vec<usize>> = vec![Vec::new(); pairs.len()];
    let mut evaluated = 0usize;
    #[allow(clippy::too_many_arguments)]
    fn rec(
        j: usize,
        points: &[Point],
        pairs: &[GeneralPair],
        square: Square,
        eps: Eps,
        assign: &mut Vec<Vec<usize>>,
        memo: &mut HashMap<(usize, Vec<usize>), MPathsSolution>,
        best: &mut Option<GeneralSolution>,
        evaluated: &mut usize,
        solver: &mut dyn FnMut(&MPathsInstance) -> Result<MPathsSolution>,
    ) -> Result<()> {
        if j == points.len() {
            *evaluated += 1;
            let mut sols = Vec::with_capacity(pairs.len());
            let mut cost = 0.0;
            for (i, p) in pairs.iter().enumerate() {
                let key = (i, assign[i].clone());
                let sol = match memo.get(&key) {
                    Some(s) => s.clone(),
                    None => {
                        let s = if p.m == 0 {
                            MPathsSolution::default()
                        } else {
                            let inst = MPathsInstance {
                                square,
                                a: p.a,
                                b: p.b,
                                m: p.m,
                                points: assign[i].iter().map(|&k| points[k]).collect(),
                                eps,
                            };
                            solver(&inst)?
                        };
                        memo.insert(key, s.clone());
                        s
                    }
                };
                cost += sol.cost;
                sols.push(sol);
            }
            if best.as_ref().is_none_or(|b| cost < b.cost) {
                *best = Some(GeneralSolution {
                    assignment: assign.clone(),
                    solutions: sols,
                    cost,
                    splits: 0,
                });
            }
            return Ok(());
        }
        for i in 0..pairs.len() {
            if assign[i].len() < pairs[i].n {
                assign[i].push(j);
                rec(j + 1, points, pairs, square, eps, assign, memo, best, evaluated, solver)?;
                assign[i].pop();
            }
        }
        Ok(())
    }
    rec(
        0,
        points,
        pairs,
        square,
        eps,
        &mut assign,
        &mut memo,
        &mut best,
        &mut evaluated,
        solver,
    )?;
    let mut out = best.ok_or_else(|| Error::Infeasible("no point split".into()))?;
    out.splits = evaluated;
    Ok(out)
}

/// General m-paths with the DP solver on every part.
pub fn solve_general_mpaths(
    square: Square,
    eps: Eps,
    pairs: &[GeneralPair],
    points: &[Point],
    cfg: &MPathsConfig,
    split_cap: usize,
) -> Result<GeneralSolution> {
    solve_general_with(square, eps, pairs, points, split_cap, &mut |inst| {
        solve_mpaths(inst, cfg).map(|r| r.solution)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{brute_force_mpaths, OracleBudget};

    fn bf(inst: &MPathsInstance) -> Result<MPathsSolution> {
        brute_force_mpaths(inst, OracleBudget::default())
    }

    fn eps() -> Eps {
        Eps::from_inverse(2).unwrap()
    }

    #[test]
    fn single_pair_matches_plain_solver() {
        let pts = vec![Point::new(0.5, 0.5), Point::new(0.2, 0.8)];
        let pair = GeneralPair { a: Point::new(0.0, 0.25), b: Point::new(0.0, 0.75), m: 1, n: 2 };
        let g = solve_general_with(Square::unit(), eps(), &[pair.clone()], &pts, 100, &mut bf).unwrap();
        let direct = bf(&MPathsInstance {
            square: Square::unit(),
            a: pair.a,
            b: pair.b,
            m: 1,
            points: pts.clone(),
            eps: eps(),
        })
        .unwrap();
        assert!((g.cost - direct.cost).abs() < 1e-12);
        assert_eq!(g.splits, 1);
    }

    #[test]
    fn both_splits_explored_and_cheaper_kept() {
        let pts = vec![Point::new(0.1, 0.5), Point::new(0.9, 0.5)];
        let left = GeneralPair { a: Point::new(0.0, 0.0), b: Point::new(0.0, 1.0), m: 1, n: 1 };
        let right = GeneralPair { a: Point::new(1.0, 0.0), b: Point::new(1.0, 1.0), m: 1, n: 1 };
        let g = solve_general_with(Square::unit(), eps(), &[left, right], &pts, 100, &mut bf).unwrap();
        assert_eq!(g.splits, 2);
        assert_eq!(g.assignment, vec![vec![0], vec![1]]);
        let expect = 4.0 * (0.1f64 * 0.1 + 0.25).sqrt();
        assert!((g.cost - expect).abs() < 1e-12);
    }

    #[test]
    fn counts_must_add_up() {
        let pts = vec![Point::new(0.5, 0.5)];
        let p = GeneralPair { a: Point::new(0.0, 0.0), b: Point::new(0.0, 1.0), m: 1, n: 2 };
        assert!(matches!(
            solve_general_with(Square::unit(), eps(), &[p], &pts, 100, &mut bf),
            Err(Error::Infeasible(_))
        ));
    }
}
