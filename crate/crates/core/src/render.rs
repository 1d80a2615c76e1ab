//! Output forms for derivations: JSON, a Graphviz tree, and an SVG sketch
//! of the model a derivation builds, unrolled to a fixed depth.
//!
//! Sketch layout: a join splits its region along the seam; a limit puts
//! three fabricated quadrants around a smaller copy of itself in the
//! corner it converges to; a shuffle places its parts on the diagonal in
//! the central third and repeats itself in the two outer thirds. Triangles
//! are drawn above the anti-diagonal of their box, corner at the top right.
//! Whatever lies below the depth is marked with an ellipsis.

use std::fmt::Write as _;

use crate::derivation::{Derivation, Kind, Label};

pub fn to_json(d: &Derivation) -> String {
    serde_json::to_string_pretty(d).expect("derivation serializes")
}

pub fn caption(label: &Label) -> String {
    match label {
        Label::Boundary(m) => format!("{} -{} +{}", m.domain(), m.minus, m.plus),
        Label::Bi(m) => format!("bi {} -{} +{}", m.domain(), m.minus, m.plus),
        Label::Triangle(t) => match t.openness() {
            Some(o) => format!("{o} triangle +{}", t.plus),
            None => format!("triangle +{}", t.plus),
        },
        Label::Point(m) => format!("point {:x}", m.0),
    }
}

fn kind_name(kind: Kind) -> String {
    serde_json::to_value(kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// The derivation tree in Graphviz syntax, nodes numbered in preorder.
pub fn to_dot(d: &Derivation) -> String {
    fn walk(d: &Derivation, next: &mut usize, out: &mut String) -> usize {
        let id = *next;
        *next += 1;
        let style = if d.phi_occurs { ", style=bold" } else { "" };
        let _ = writeln!(
            out,
            "  n{id} [label=\"{}\\n{}\"{style}];",
            kind_name(d.kind),
            caption(&d.map).replace('"', "\\\"")
        );
        for c in &d.children {
            let child = walk(c, next, out);
            let _ = writeln!(out, "  n{id} -> n{child};");
        }
        id
    }
    let mut out = String::from("digraph derivation {\n  node [shape=box, fontname=\"monospace\"];\n");
    walk(d, &mut 0, &mut out);
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, Copy)]
struct Area {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl Area {
    fn sub(self, fx: f64, fy: f64, fw: f64, fh: f64) -> Area {
        // fy counts from the bottom; SVG y grows downwards.
        Area {
            x: self.x + fx * self.w,
            y: self.y + (1.0 - fy - fh) * self.h,
            w: fw * self.w,
            h: fh * self.h,
        }
    }
}

const SIZE: f64 = 600.0;

/// An SVG sketch of the model built by `d`, with limits and shuffles
/// unrolled `depth` times.
pub fn to_svg(d: &Derivation, depth: usize) -> String {
    let depth = depth.max(1);
    let mut body = String::new();
    draw(d, Area { x: 10.0, y: 10.0, w: SIZE, h: SIZE }, depth, &mut body);
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{w}\" viewBox=\"0 0 {w} {w}\" \
         font-family=\"monospace\">\n{body}</svg>\n",
        w = SIZE + 20.0
    )
}

fn is_triangle(d: &Derivation) -> bool {
    matches!(d.map, Label::Triangle(_))
}

fn shape(d: &Derivation, r: Area, out: &mut String) {
    let fill = if d.phi_occurs { "#fde9c8" } else { "#e8eef7" };
    if is_triangle(d) {
        let _ = writeln!(
            out,
            "<polygon points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\" fill=\"{fill}\" stroke=\"#333\"/>",
            r.x,
            r.y,
            r.x + r.w,
            r.y,
            r.x + r.w,
            r.y + r.h
        );
    } else {
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\" stroke=\"#333\"/>",
            r.x, r.y, r.w, r.h
        );
    }
}

fn text(r: Area, s: &str, out: &mut String) {
    let size = (r.w.min(r.h) / 8.0).clamp(2.0, 12.0);
    let (x, y) = if r.w > 0.0 { (r.x + r.w * 0.5, r.y + r.h * 0.5) } else { (r.x, r.y) };
    let _ = writeln!(
        out,
        "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"{size:.2}\" text-anchor=\"middle\">{}</text>",
        s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
    );
}

fn elide(r: Area, out: &mut String) {
    let _ = writeln!(
        out,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#ddd\" stroke=\"#999\" stroke-dasharray=\"3,2\"/>",
        r.x, r.y, r.w, r.h
    );
    text(r, "...", out);
}

fn leaf(d: &Derivation, r: Area, out: &mut String) {
    shape(d, r, out);
    let spot = if is_triangle(d) { r.sub(0.5, 0.5, 0.5, 0.5) } else { r };
    text(spot, &caption(&d.map), out);
}

fn draw(d: &Derivation, r: Area, depth: usize, out: &mut String) {
    let c = &d.children;
    match d.kind {
        Kind::Simple | Kind::TriSimple | Kind::OnePoint => leaf(d, r, out),
        Kind::JoinN => {
            draw(&c[0], r.sub(0.0, 0.0, 1.0, 0.5), depth, out);
            draw(&c[1], r.sub(0.0, 0.5, 1.0, 0.5), depth, out);
        }
        Kind::JoinE => {
            draw(&c[0], r.sub(0.0, 0.0, 0.5, 1.0), depth, out);
            draw(&c[1], r.sub(0.5, 0.0, 0.5, 1.0), depth, out);
        }
        Kind::LimitSe | Kind::LimitNe => {
            shape(d, r, out);
            // Children are the north-west, north-east, south-west and
            // south-east quadrants; the north-eastern limit is the mirror
            // image in the diagonal.
            let ne = d.kind == Kind::LimitNe;
            let q = |fx: f64, fy: f64| if ne { r.sub(1.0 - fy - 0.5, 1.0 - fx - 0.5, 0.5, 0.5) } else { r.sub(fx, fy, 0.5, 0.5) };
            draw(&c[0], q(0.0, 0.5), depth, out);
            draw(&c[1], q(0.5, 0.5), depth, out);
            draw(&c[2], q(0.0, 0.0), depth, out);
            let corner = q(0.5, 0.0);
            if depth > 1 {
                draw(d, corner, depth - 1, out);
            } else {
                elide(corner, out);
            }
        }
        Kind::Shuffle | Kind::TriShuffle => {
            shape(d, r, out);
            let k = c.len() as f64;
            let step = 1.0 / (3.0 * k);
            for (i, part) in c.iter().enumerate() {
                let f = 1.0 / 3.0 + step * i as f64;
                let at = if d.kind == Kind::TriShuffle {
                    // Along the diagonal of the triangle, just above it.
                    r.sub(f, 1.0 - f - step, step, step)
                } else {
                    r.sub(f, f, step, step)
                };
                draw(part, at, depth, out);
            }
            let gaps = if d.kind == Kind::TriShuffle {
                [r.sub(0.0, 2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), r.sub(2.0 / 3.0, 0.0, 1.0 / 3.0, 1.0 / 3.0)]
            } else {
                [r.sub(0.0, 0.0, 1.0 / 3.0, 1.0 / 3.0), r.sub(2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)]
            };
            for g in gaps {
                if depth > 1 {
                    draw(d, g, depth - 1, out);
                } else {
                    elide(g, out);
                }
            }
        }
        Kind::TriJoin => {
            shape(d, r, out);
            draw(&c[0], r.sub(0.0, 0.5, 0.5, 0.5), depth, out);
            draw(&c[1], r.sub(0.5, 0.5, 0.5, 0.5), depth, out);
            draw(&c[2], r.sub(0.5, 0.0, 0.5, 0.5), depth, out);
        }
        Kind::TriLimitSe | Kind::TriLimitNw => {
            shape(d, r, out);
            let se = d.kind == Kind::TriLimitSe;
            let (fixed, again) = if se {
                (r.sub(0.0, 0.5, 0.5, 0.5), r.sub(0.5, 0.0, 0.5, 0.5))
            } else {
                (r.sub(0.5, 0.0, 0.5, 0.5), r.sub(0.0, 0.5, 0.5, 0.5))
            };
            draw(&c[0], fixed, depth, out);
            draw(&c[1], r.sub(0.5, 0.5, 0.5, 0.5), depth, out);
            if depth > 1 {
                draw(d, again, depth - 1, out);
            } else {
                elide(again, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::BoundaryMap;
    use crate::mcs::Analysis;
    use crate::Formula;

    fn p() -> Analysis {
        Analysis::new(&Formula::parse("p").unwrap()).unwrap()
    }

    #[test]
    fn simple_map_is_one_rectangle() {
        let a = p();
        let d = Derivation::leaf(&a, Kind::Simple, Label::Boundary(BoundaryMap::open(0, 0)));
        let svg = to_svg(&d, 1);
        assert_eq!(svg.matches("<rect").count(), 1);
        assert!(svg.contains(&caption(&d.map)));
        assert_eq!(to_dot(&d).matches("->").count(), 0);
    }

    #[test]
    fn northern_join_stacks_two_rectangles() {
        let a = p();
        let m = a.mcs[0];
        let cell = crate::bi_boundary::BiBoundary::uniform(0, m);
        let d = Derivation::node(
            &a,
            Kind::JoinN,
            Label::Bi(cell.clone()),
            vec![
                Derivation::leaf(&a, Kind::Simple, Label::Bi(cell.clone())),
                Derivation::leaf(&a, Kind::Simple, Label::Bi(cell)),
            ],
        );
        let svg = to_svg(&d, 1);
        assert!(svg.contains("<rect x=\"10.00\" y=\"310.00\" width=\"600.00\" height=\"300.00\""));
        assert!(svg.contains("<rect x=\"10.00\" y=\"10.00\" width=\"600.00\" height=\"300.00\""));
        assert_eq!(to_dot(&d).matches("->").count(), 2);
    }

    #[test]
    fn shuffle_unrolls_into_the_outer_thirds() {
        let a = p();
        let m = a.mcs[0];
        let d = Derivation::node(
            &a,
            Kind::Shuffle,
            Label::Boundary(BoundaryMap::open(0, 0)),
            vec![Derivation::leaf(&a, Kind::OnePoint, Label::Point(m))],
        );
        let one = to_svg(&d, 1);
        assert_eq!(one.matches("...").count(), 2);
        let two = to_svg(&d, 2);
        assert_eq!(two.matches("...").count(), 4);
        // The part sits in the central third.
        assert!(two.contains("<rect x=\"210.00\" y=\"210.00\" width=\"200.00\" height=\"200.00\""));
        assert_eq!(two, to_svg(&d, 2));
    }
}
