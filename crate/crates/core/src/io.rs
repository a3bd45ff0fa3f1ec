//! Plain-text instance format.
//!
//! ```text
//! cvrp <n> <c> <epsilon>        mpaths <n> <m> <epsilon>
//! <depot x> <depot y>           <a x> <a y>
//! <x> <y>   (n lines)           <b x> <b y>
//!                               <x> <y>   (n lines)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. The m-paths square is
//! the unit square when every coordinate lies in [0,1], otherwise the
//! smallest axis-aligned square anchored at the minimum coordinates that
//! holds them all.

use crate::error::{Error, Result};
use crate::model::{CvrpInstance, Eps, MPathsInstance, Point, Square};
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq)]
pub enum Instance {
    Cvrp(CvrpInstance),
    MPaths(MPathsInstance),
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| perr(line, format!("bad {what} `{tok}`")))
}

fn parse_point(line: usize, text: &str) -> Result<Point> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.len() != 2 {
        return Err(perr(line, format!("expected `x y`, found {} field(s)", toks.len())));
    }
    let p = Point::new(parse_num(toks[0], line, "x")?, parse_num(toks[1], line, "y")?);
    if !p.is_finite() {
        return Err(perr(line, "coordinates must be finite"));
    }
    Ok(p)
}

/// Square used for an m-paths instance read from text.
pub fn enclosing_square(coords: &[Point]) -> Square {
    if coords.iter().all(|p| (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y)) {
        return Square::unit();
    }
    let x0 = coords.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let y0 = coords.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let x1 = coords.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let y1 = coords.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let side = (x1 - x0).max(y1 - y0);
    Square::new(Point::new(x0, y0), if side > 0.0 { side } else { 1.0 })
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 4 {
        return Err(perr(hl, "header must be `cvrp <n> <c> <epsilon>` or `mpaths <n> <m> <epsilon>`"));
    }
    let n: usize = parse_num(toks[1], hl, "n")?;
    let k: usize = parse_num(toks[2], hl, if toks[0] == "cvrp" { "c" } else { "m" })?;
    let e: f64 = parse_num(toks[3], hl, "epsilon")?;
    let eps = Eps::from_f64(e).map_err(|err| perr(hl, err.to_string()))?;
    let lead = match toks[0] {
        "cvrp" => 1,
        "mpaths" => 2,
        other => return Err(perr(hl, format!("unknown problem kind `{other}`"))),
    };
    let mut pts = Vec::with_capacity(n + lead);
    let mut last = hl;
    for _ in 0..n + lead {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| perr(last + 1, format!("expected {} coordinate lines, found {}", n + lead, pts.len())))?;
        pts.push(parse_point(ln, l)?);
        last = ln;
    }
    if let Some((ln, _)) = lines.next() {
        return Err(perr(ln, "unexpected trailing line"));
    }
    let body = pts.split_off(lead);
    match lead {
        1 => {
            if k == 0 {
                return Err(perr(hl, "capacity must be at least 1"));
            }
            if n == 0 {
                return Err(perr(hl, "a cvrp instance needs at least one point"));
            }
            Ok(Instance::Cvrp(CvrpInstance::new(pts[0], body, k, eps).map_err(|err| perr(hl, err.to_string()))?))
        }
        _ => {
            if k == 0 {
                return Err(perr(hl, "m must be at least 1"));
            }
            let mut all = pts.clone();
            all.extend_from_slice(&body);
            Ok(Instance::MPaths(MPathsInstance {
                square: enclosing_square(&all),
                a: pts[0],
                b: pts[1],
                m: k,
                points: body,
                eps,
            }))
        }
    }
}

pub fn emit_instance(inst: &Instance) -> String {
    let mut s = String::new();
    let pt = |p: &Point, s: &mut String| {
        let _ = writeln!(s, "{} {}", p.x, p.y);
    };
    match inst {
        Instance::Cvrp(i) => {
            let _ = writeln!(s, "cvrp {} {} {}", i.n(), i.capacity, i.eps.value());
            pt(&i.depot, &mut s);
            i.points.iter().for_each(|p| pt(p, &mut s));
        }
        Instance::MPaths(i) => {
            let _ = writeln!(s, "mpaths {} {} {}", i.n(), i.m, i.eps.value());
            pt(&i.a, &mut s);
            pt(&i.b, &mut s);
            i.points.iter().for_each(|p| pt(p, &mut s));
        }
    }
    s
}

pub fn read_instance(path: &std::path::Path) -> Result<Instance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

/// Solutions are written one tour (or path) per line as space-separated
/// 0-based point indices; a `-` line is an empty path. Lines starting with
/// `#` are comments.
pub fn emit_routes(routes: &[Vec<usize>]) -> String {
    let mut s = String::new();
    for r in routes {
        if r.is_empty() {
            s.push_str("-\n");
        } else {
            let v: Vec<String> = r.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(s, "{}", v.join(" "));
        }
    }
    s
}

pub fn parse_routes(text: &str) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if l == "-" {
            out.push(Vec::new());
            continue;
        }
        out.push(l.split_whitespace().map(|t| parse_num(t, i + 1, "point index")).collect::<Result<Vec<usize>>>()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_point_cvrp() {
        let i = parse_instance("cvrp 1 1 0.5\n0 0\n1 2\n").unwrap();
        let Instance::Cvrp(c) = &i else { panic!() };
        assert_eq!(c.n(), 1);
        assert_eq!(c.capacity, 1);
        assert_eq!(c.eps.inv(), 2);
        assert_eq!(c.points[0], Point::new(1.0, 2.0));
    }

    #[test]
    fn empty_mpaths() {
        let i = parse_instance("mpaths 0 2 0.5\n0 0.1\n1 0.9\n").unwrap();
        let Instance::MPaths(m) = &i else { panic!() };
        assert_eq!(m.n(), 0);
        assert_eq!(m.m, 2);
        assert_eq!(m.square, Square::unit());
        assert!(m.assumption_violations().is_empty());
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_instance("cvrp 2 1 0.5\n0 0\n1\n2 2\n") {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_instance("cvrp 2 1 0.5\n0 0\n1 1\n") {
            Err(Error::Parse { line: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_instance("cvrp 1 1 0.4\n0 0\n1 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_instance("tsp 1 1 0.5\n0 0\n1 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_instance("cvrp 1 1 0.5\n0 0\n1 x"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_instance(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_instance("cvrp 1 1 0.5\n0 0\n1 1\n2 2"), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let i = parse_instance("# demo\ncvrp 1 2 0.25\n\n0 0\n# the point\n3 4\n").unwrap();
        assert_eq!(emit_instance(&i), "cvrp 1 2 0.25\n0 0\n3 4\n");
    }

    #[test]
    fn square_grows_beyond_unit() {
        let i = parse_instance("mpaths 1 1 0.5\n0 0\n2 1\n1 0.5\n").unwrap();
        let Instance::MPaths(m) = i else { panic!() };
        assert_eq!(m.square, Square::new(Point::new(0.0, 0.0), 2.0));
    }

    #[test]
    fn routes_round_trip() {
        let r = vec![vec![2, 0], vec![], vec![1]];
        let t = emit_routes(&r);
        assert_eq!(t, "2 0\n-\n1\n");
        assert_eq!(parse_routes(&t).unwrap(), r);
        assert!(matches!(parse_routes("# x\n1 2\n3 y\n"), Err(Error::Parse { line: 3, .. })));
    }

    fn coord() -> impl Strategy<Value = f64> {
        prop_oneof![(-1000i32..1000).prop_map(|v| v as f64 / 7.0), -1e3f64..1e3]
    }

    proptest! {
        #[test]
        fn round_trip(kind in 0u8..2, pts in proptest::collection::vec((coord(), coord()), 1..10),
                      k in 1usize..5, inv in 2u32..9) {
            let eps = Eps::from_inverse(inv).unwrap();
            let p: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
            let inst = if kind == 0 {
                Instance::Cvrp(CvrpInstance::new(Point::new(0.5, -0.25), p, k, eps).unwrap())
            } else {
                let text = format!("mpaths 0 {k} {}\n0 0\n1 1\n", eps.value());
                let Instance::MPaths(mut m) = parse_instance(&text).unwrap() else { unreachable!() };
                m.points = p;
                let mut all = vec![m.a, m.b];
                all.extend_from_slice(&m.points);
                m.square = enclosing_square(&all);
                Instance::MPaths(m)
            };
            let text = emit_instance(&inst);
            let back = parse_instance(&text).unwrap();
            prop_assert_eq!(&back, &inst);
            prop_assert_eq!(emit_instance(&back), text);
        }
    }
}
