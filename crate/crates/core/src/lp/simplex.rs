//! Exact rational simplex (Bland's rule) and brute-force vertex enumeration
//! for polytopes {x : Ax = b, x ≥ 0}.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Equality-form system Ax = b with x ≥ 0.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardForm {
    pub a: Vec<Vec<Q>>,
    pub b: Vec<Q>,
}

impl StandardForm {
    pub fn rows(&self) -> usize {
        self.a.len()
    }

    pub fn cols(&self) -> usize {
        self.a.first().map_or(0, Vec::len)
    }

    pub fn is_feasible_point(&self, x: &[Q]) -> bool {
        if x.len() != self.cols() || x.iter().any(|v| v.is_negative()) {
            return false;
        }
        self.a.iter().zip(&self.b).all(|(row, rhs)| {
            let lhs: Q = row.iter().zip(x).map(|(a, v)| a * v).sum();
            &lhs == rhs
        })
    }
}

/// A basic feasible solution.
#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub x: Vec<Q>,
    /// Basic columns (one per independent row).
    pub basis: Vec<usize>,
    pub pivots: usize,
}

struct Tableau {
    /// rows × (cols + 1); last column is the right-hand side.
    t: Vec<Vec<Q>>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c].clone();
        for v in self.t[r].iter_mut() {
            *v = &*v / &p;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&prow) {
                if !pv.is_zero() {
                    *v = &*v - &f * pv;
                }
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Minimizes cost·x over the columns in `allowed` with Bland's rule.
    fn optimize(&mut self, cost: &[Q], allowed: &dyn Fn(usize) -> bool, max_pivots: usize) -> Result<()> {
        let ncols = self.t[0].len() - 1;
        loop {
            // Reduced costs: c_j − c_B B⁻¹ A_j.
            let mut entering = None;
            for j in 0..ncols {
                if !allowed(j) || self.basis.contains(&j) {
                    continue;
                }
                let mut rc = cost[j].clone();
                for (i, &bi) in self.basis.iter().enumerate() {
                    if !cost[bi].is_zero() && !self.t[i][j].is_zero() {
                        rc -= &cost[bi] * &self.t[i][j];
                    }
                }
                if rc.is_negative() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else { return Ok(()) };
            let mut leave: Option<(usize, Q)> = None;
            for i in 0..self.t.len() {
                let a = &self.t[i][j];
                if a.is_positive() {
                    let ratio = &self.t[i][ncols] / a;
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Internal("linear program is unbounded".into()));
            };
            self.pivot(r, j);
            if self.pivots > max_pivots {
                return Err(Error::cap("simplex pivots", max_pivots as u64));
            }
        }
    }
}

/// Finds a vertex of {Ax = b, x ≥ 0} minimizing `cost` (all zeros when
/// `None`). Two-phase method with Bland's rule throughout, so it terminates
/// and returns a true basic solution.
pub fn solve_vertex(sf: &StandardForm, cost: Option<&[Q]>) -> Result<Vertex> {
    let m = sf.rows();
    let n = sf.cols();
    if m == 0 {
        return Ok(Vertex { x: vec![Q::zero(); n], basis: Vec::new(), pivots: 0 });
    }
    // Phase 1 tableau: [A | I | b] with b ≥ 0.
    let mut t = Vec::with_capacity(m);
    for i in 0..m {
        let neg = sf.b[i].is_negative();
        let mut row: Vec<Q> = sf.a[i].iter().map(|v| if neg { -v } else { v.clone() }).collect();
        for k in 0..m {
            row.push(if k == i { Q::one() } else { Q::zero() });
        }
        row.push(if neg { -&sf.b[i] } else { sf.b[i].clone() });
        t.push(row);
    }
    let mut tab = Tableau { t, basis: (n..n + m).collect(), pivots: 0 };
    let mut c1 = vec![Q::zero(); n + m];
    for c in c1.iter_mut().skip(n) {
        *c = Q::one();
    }
    let max_pivots = 100_000;
    tab.optimize(&c1, &|_| true, max_pivots)?;
    let infeas: Q = (0..m).filter(|&i| tab.basis[i] >= n).map(|i| tab.t[i][n + m].clone()).sum();
    if infeas.is_positive() {
        return Err(Error::Infeasible("linear system has no nonnegative solution".into()));
    }
    // Drive artificials out of the basis; rows where that is impossible are
    // redundant and dropped.
    let mut i = 0;
    while i < tab.t.len() {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| !tab.t[i][j].is_zero() && !tab.basis.contains(&j)) {
                tab.pivot(i, j);
            } else {
                tab.t.remove(i);
                tab.basis.remove(i);
                continue;
            }
        }
        i += 1;
    }
    for row in tab.t.iter_mut() {
        row.drain(n..n + m);
    }
    if let Some(cost) = cost {
        tab.optimize(cost, &|j| j < n, max_pivots)?;
    }
    let mut x = vec![Q::zero(); n];
    for (i, &bi) in tab.basis.iter().enumerate() {
        x[bi] = tab.t[i][n].clone();
    }
    debug_assert!(sf.is_feasible_point(&x));
    Ok(Vertex { x, basis: tab.basis, pivots: tab.pivots })
}

/// Row-reduces [A | b]; returns the independent rows and the rank, or an
/// error if the system is inconsistent.
fn independent_rows(sf: &StandardForm) -> Result<StandardForm> {
    let n = sf.cols();
    let mut rows: Vec<Vec<Q>> = sf
        .a
        .iter()
        .zip(&sf.b)
        .map(|(r, b)| {
            let mut v = r.clone();
            v.push(b.clone());
            v
        })
        .collect();
    let mut rank = 0;
    for col in 0..n {
        let Some(p) = (rank..rows.len()).find(|&i| !rows[i][col].is_zero()) else { continue };
        rows.swap(rank, p);
        let pv = rows[rank][col].clone();
        for v in rows[rank].iter_mut() {
            *v = &*v / &pv;
        }
        let prow = rows[rank].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != rank && !row[col].is_zero() {
                let f = row[col].clone();
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v = &*v - &f * pv;
                }
            }
        }
        rank += 1;
    }
    if rows[rank..].iter().any(|r| !r[n].is_zero()) {
        return Err(Error::Infeasible("inconsistent equality system".into()));
    }
    rows.truncate(rank);
    Ok(StandardForm {
        b: rows.iter().map(|r| r[n].clone()).collect(),
        a: rows.into_iter().map(|mut r| {
            r.pop();
            r
        }).collect(),
    })
}

/// Solves the square system restricted to `cols`; None when singular.
fn solve_square(sf: &StandardForm, cols: &[usize]) -> Option<Vec<Q>> {
    let r = sf.rows();
    let mut m: Vec<Vec<Q>> = (0..r)
        .map(|i| {
            let mut v: Vec<Q> = cols.iter().map(|&j| sf.a[i][j].clone()).collect();
            v.push(sf.b[i].clone());
            v
        })
        .collect();
    for col in 0..r {
        let p = (col..r).find(|&i| !m[i][col].is_zero())?;
        m.swap(col, p);
        let pv = m[col][col].clone();
        for v in m[col].iter_mut() {
            *v = &*v / &pv;
        }
        let prow = m[col].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != col && !row[col].is_zero() {
                let f = row[col].clone();
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v = &*v - &f * pv;
                }
            }
        }
    }
    Some(m.into_iter().map(|row| row[r].clone()).collect())
}

/// Every vertex of {Ax = b, x ≥ 0}, by trying all column bases. Refuses
/// systems with more than `max_bases` candidate bases.
pub fn enumerate_vertices(sf: &StandardForm, max_bases: u64) -> Result<Vec<Vec<Q>>> {
    let red = independent_rows(sf)?;
    let n = red.cols();
    let r = red.rows();
    let mut count: u64 = 1;
    for i in 0..r as u64 {
        count = count.saturating_mul(n as u64 - i) / (i + 1);
    }
    if count > max_bases {
        return Err(Error::cap("candidate bases in vertex enumeration", max_bases));
    }
    let mut out: Vec<Vec<Q>> = Vec::new();
    let mut cols: Vec<usize> = (0..r).collect();
    if r == 0 {
        return Ok(vec![vec![Q::zero(); n]]);
    }
    loop {
        if let Some(xb) = solve_square(&red, &cols) {
            if xb.iter().all(|v| !v.is_negative()) {
                let mut x = vec![Q::zero(); n];
                for (k, &j) in cols.iter().enumerate() {
                    x[j] = xb[k].clone();
                }
                if !out.contains(&x) {
                    out.push(x);
                }
            }
        }
        // Next r-combination of 0..n.
        let mut i = r;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if cols[i] < n - r + i {
                cols[i] += 1;
                for k in i + 1..r {
                    cols[k] = cols[k - 1] + 1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sf(a: &[&[i64]], b: &[i64]) -> StandardForm {
        StandardForm {
            a: a.iter().map(|r| r.iter().map(|&v| q(v)).collect()).collect(),
            b: b.iter().map(|&v| q(v)).collect(),
        }
    }

    #[test]
    fn simplex_square_example() {
        // x + y + s = 1 in 2D: vertices (0,0,1), (1,0,0), (0,1,0).
        let s = sf(&[&[1, 1, 1]], &[1]);
        let v = enumerate_vertices(&s, 1000).unwrap();
        assert_eq!(v.len(), 3);
        let best = solve_vertex(&s, Some(&[q(-1), q(-2), q(0)])).unwrap();
        assert_eq!(best.x, vec![q(0), q(1), q(0)]);
    }

    #[test]
    fn redundant_rows_are_handled() {
        let s = sf(&[&[1, 1, 0], &[2, 2, 0], &[0, 0, 1]], &[2, 4, 3]);
        let v = solve_vertex(&s, None).unwrap();
        assert!(s.is_feasible_point(&v.x));
        assert_eq!(enumerate_vertices(&s, 1000).unwrap().len(), 2);
    }

    #[test]
    fn infeasible_detected() {
        let s = sf(&[&[1, 1]], &[-1]);
        assert!(matches!(solve_vertex(&s, None), Err(Error::Infeasible(_))));
    }

    #[test]
    fn degenerate_cycle_prone_system_terminates() {
        // A classic degenerate system; Bland's rule must terminate.
        let s = StandardForm {
            a: vec![
                vec![q_frac(1, 4), q(-8), q(-1), q(9), q(1), q(0), q(0)],
                vec![q_frac(1, 2), q(-12), q_frac(-1, 2), q(3), q(0), q(1), q(0)],
                vec![q(0), q(0), q(1), q(0), q(0), q(0), q(1)],
            ],
            b: vec![q(0), q(0), q(1)],
        };
        let cost = [q_frac(-3, 4), q(20), q_frac(-1, 2), q(6), q(0), q(0), q(0)];
        let v = solve_vertex(&s, Some(&cost)).unwrap();
        let obj: Q = v.x.iter().zip(&cost).map(|(a, b)| a * b).sum();
        assert_eq!(obj, q_frac(-5, 4));
    }
}
