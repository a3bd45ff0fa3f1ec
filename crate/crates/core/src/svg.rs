//! Deterministic SVG rendering of dissections, portals, anchor grids and
//! solutions.

use crate::anchor::AnchorGrid;
use crate::dissection::{Dissection, LayoutMode, PortalKey, PortalLayout};
use crate::model::{CvrpInstance, CvrpSolution, MPathsInstance, MPathsSolution, Point};
use std::fmt::Write as _;

const CANVAS: f64 = 800.0;
const PALETTE: [&str; 8] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// World-coordinate drawing collected into an SVG document.
#[derive(Clone, Debug)]
pub struct Scene {
    min: Point,
    max: Point,
    body: String,
}

fn f(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

impl Scene {
    /// A scene showing at least the given world box.
    pub fn new(min: Point, max: Point) -> Self {
        Scene { min, max, body: String::new() }
    }

    fn extent(&self) -> f64 {
        (self.max.x - self.min.x).max(self.max.y - self.min.y).max(1e-12)
    }

    fn map(&self, p: Point) -> (f64, f64) {
        let s = CANVAS / self.extent();
        (20.0 + (p.x - self.min.x) * s, 20.0 + (self.max.y - p.y) * s)
    }

    /// World length of one canvas pixel.
    pub fn px(&self) -> f64 {
        self.extent() / CANVAS
    }

    pub fn line(&mut self, a: Point, b: Point, class: &str, stroke: &str, width: f64) {
        let (x1, y1) = self.map(a);
        let (x2, y2) = self.map(b);
        let _ = writeln!(
            self.body,
            r#"<line class="{class}" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}" stroke-width="{}"/>"#,
            f(x1),
            f(y1),
            f(x2),
            f(y2),
            f(width)
        );
    }

    pub fn arrow(&mut self, a: Point, b: Point, class: &str, stroke: &str) {
        let (x1, y1) = self.map(a);
        let (x2, y2) = self.map(b);
        let _ = writeln!(
            self.body,
            r#"<line class="{class}" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}" stroke-width="1" marker-end="url(#head)"/>"#,
            f(x1),
            f(y1),
            f(x2),
            f(y2)
        );
    }

    pub fn polyline(&mut self, pts: &[Point], class: &str, stroke: &str) {
        let coords: Vec<String> = pts
            .iter()
            .map(|p| {
                let (x, y) = self.map(*p);
                format!("{},{}", f(x), f(y))
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline class="{class}" points="{}" fill="none" stroke="{stroke}" stroke-width="2"/>"#,
            coords.join(" ")
        );
    }

    pub fn dot(&mut self, p: Point, class: &str, fill: &str, r: f64) {
        let (x, y) = self.map(p);
        let _ = writeln!(self.body, r#"<circle class="{class}" cx="{}" cy="{}" r="{}" fill="{fill}"/>"#, f(x), f(y), f(r));
    }

    pub fn marker(&mut self, p: Point, class: &str, fill: &str) {
        let (x, y) = self.map(p);
        let _ = writeln!(
            self.body,
            r#"<rect class="{class}" x="{}" y="{}" width="10" height="10" fill="{fill}"/>"#,
            f(x - 5.0),
            f(y - 5.0)
        );
    }

    pub fn to_svg(&self) -> String {
        let size = CANVAS + 40.0;
        format!(
            concat!(
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}">"#,
                "\n",
                r##"<defs><marker id="head" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#444"/></marker></defs>"##,
                "\n",
                r#"<rect width="100%" height="100%" fill="white"/>"#,
                "\n{body}</svg>\n"
            ),
            s = f(size),
            body = self.body
        )
    }
}

/// Every surviving portal of a layout with its tick in grid units: the tick
/// starts at the portal and points in its allowed crossing direction (both
/// directions give a tick straddling the line). Intersection portals are
/// nudged along their edge so the split pair stays visible.
pub fn portal_ticks(layout: &PortalLayout) -> Vec<(PortalKey, Point, Point)> {
    let len = 0.15;
    let mut out = Vec::new();
    let top = layout.l0 * layout.p;
    for vertical in [true, false] {
        for line in 0..=layout.l0 {
            for pos in 0..=top {
                for k in layout.keys_at(vertical, line, pos) {
                    let (plus, minus) = layout.dirs(k);
                    if !plus && !minus {
                        continue;
                    }
                    let mut p = layout.point(k);
                    let nudge = 0.08 * k.side as f64;
                    if vertical {
                        p.y += nudge;
                    } else {
                        p.x += nudge;
                    }
                    let step = |s: f64| {
                        if vertical {
                            Point::new(p.x + s, p.y)
                        } else {
                            Point::new(p.x, p.y + s)
                        }
                    };
                    let (a, b) = match (plus, minus) {
                        (true, false) => (p, step(len)),
                        (false, true) => (p, step(-len)),
                        _ => (step(-len / 2.0), step(len / 2.0)),
                    };
                    out.push((k, a, b));
                }
            }
        }
    }
    out
}

/// Dissection lines of B0 (thicker for coarser levels), the instance box
/// and the portal ticks, in grid units.
pub fn dissection_scene(d: &Dissection, layout: &PortalLayout) -> Scene {
    let l0 = d.l0 as f64;
    let mut s = Scene::new(Point::new(0.0, 0.0), Point::new(l0, l0));
    for c in 0..=d.l0 {
        let level = layout.line_level(c);
        let w = (3.0 - 0.5 * level as f64).max(0.5);
        let x = c as f64;
        s.line(Point::new(x, 0.0), Point::new(x, l0), &format!("grid level{level}"), "#888", w);
        s.line(Point::new(0.0, x), Point::new(l0, x), &format!("grid level{level}"), "#888", w);
    }
    let (x0, y0) = (d.shift.0 as f64, d.shift.1 as f64);
    let l1 = d.l1 as f64;
    s.polyline(
        &[
            Point::new(x0, y0),
            Point::new(x0 + l1, y0),
            Point::new(x0 + l1, y0 + l1),
            Point::new(x0, y0 + l1),
            Point::new(x0, y0),
        ],
        "box",
        "#000",
    );
    let color = if layout.mode == LayoutMode::Restricted { "#c00" } else { "#06c" };
    for (_, a, b) in portal_ticks(layout) {
        s.line(a, b, "portal", color, 1.0);
    }
    s
}

/// Anchor grid cells and oriented anchors in original coordinates.
pub fn anchor_grid_scene(g: &AnchorGrid) -> Scene {
    let n = g.per_side();
    let side = n as f64 * g.tau;
    let max = Point::new(g.origin.x + side, g.origin.y + side);
    let mut s = Scene::new(g.origin, max);
    for i in 0..=n {
        let t = i as f64 * g.tau;
        s.line(Point::new(g.origin.x + t, g.origin.y), Point::new(g.origin.x + t, max.y), "cell", "#888", 1.5);
        s.line(Point::new(g.origin.x, g.origin.y + t), Point::new(max.x, g.origin.y + t), "cell", "#888", 1.5);
    }
    let len = g.spacing() * 0.4;
    for a in g.anchors() {
        let p = g.anchor_point(a);
        let sign = if g.orientation(a) { 1.0 } else { -1.0 };
        let q = if a.vertical {
            Point::new(p.x + sign * len, p.y)
        } else {
            Point::new(p.x, p.y + sign * len)
        };
        s.arrow(p, q, "anchor", "#444");
    }
    s
}

fn colour(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// An m-paths solution, over its dissection and portals when given.
pub fn mpaths_svg(inst: &MPathsInstance, sol: Option<&MPathsSolution>, dis: Option<(&Dissection, &PortalLayout)>) -> String {
    let (mut s, to): (Scene, Box<dyn Fn(Point) -> Point>) = match dis {
        Some((d, layout)) => {
            let d2 = d.clone();
            (dissection_scene(d, layout), Box::new(move |p| d2.to_grid(p)))
        }
        None => {
            let sq = inst.square;
            let mut s = Scene::new(sq.ll, Point::new(sq.ll.x + sq.side, sq.ll.y + sq.side));
            let c = [
                sq.ll,
                Point::new(sq.ll.x + sq.side, sq.ll.y),
                Point::new(sq.ll.x + sq.side, sq.ll.y + sq.side),
                Point::new(sq.ll.x, sq.ll.y + sq.side),
                sq.ll,
            ];
            s.polyline(&c, "box", "#000");
            (s, Box::new(|p| p))
        }
    };
    if let Some(sol) = sol {
        for (i, path) in sol.paths.iter().enumerate() {
            let mut pts = vec![to(inst.a)];
            pts.extend(path.iter().filter_map(|&k| inst.points.get(k)).map(|p| to(*p)));
            pts.push(to(inst.b));
            s.polyline(&pts, "path", colour(i));
        }
    }
    for p in &inst.points {
        s.dot(to(*p), "point", "#000", 3.0);
    }
    s.marker(to(inst.a), "terminal", "#080");
    s.marker(to(inst.b), "terminal", "#080");
    s.to_svg()
}

/// A CVRP solution, over an anchor grid when given.
pub fn cvrp_svg(inst: &CvrpInstance, sol: Option<&CvrpSolution>, grid: Option<&AnchorGrid>) -> String {
    let mut s = match grid {
        Some(g) => anchor_grid_scene(g),
        None => {
            let all = inst.points.iter().chain(std::iter::once(&inst.depot));
            let (mut lo, mut hi) = (inst.depot, inst.depot);
            for p in all {
                lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
            }
            let pad = 0.05 * (hi.x - lo.x).max(hi.y - lo.y).max(1e-9);
            Scene::new(Point::new(lo.x - pad, lo.y - pad), Point::new(hi.x + pad, hi.y + pad))
        }
    };
    if let Some(sol) = sol {
        for (i, t) in sol.tours.iter().enumerate() {
            let mut pts = vec![inst.depot];
            pts.extend(t.visits.iter().filter_map(|&k| inst.points.get(k)));
            pts.push(inst.depot);
            s.polyline(&pts, "tour", colour(i));
        }
    }
    for p in &inst.points {
        s.dot(*p, "point", "#000", 3.0);
    }
    s.marker(inst.depot, "depot", "#000");
    s.to_svg()
}
