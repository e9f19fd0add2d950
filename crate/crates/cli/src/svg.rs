use std::fmt::Write;

use pu3_core::geom::nearest;
use pu3_core::PointSet;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 20.0;

/// Blue to red by `t ∈ [0, 1]`.
fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let mix = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(44.0, 215.0),
        mix(123.0, 25.0),
        mix(182.0, 28.0)
    )
}

/// SVG 1.1 scatter of `points` (first two coordinates), one circle per
/// point, colored by distance to the nearest `reference` point.
pub fn scatter_svg(points: &PointSet, reference: &PointSet) -> String {
    let dist: Vec<f64> = nearest(points, reference)
        .iter()
        .map(|&(_, d)| d.sqrt())
        .collect();
    let max = dist.iter().copied().fold(0.0, f64::max);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points.iter().chain(reference.iter()) {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::EPSILON);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">"
    );
    let _ = writeln!(
        s,
        "<title>{} points, max distance to reference {max:.3e}</title>",
        points.len()
    );
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (p, d) in points.iter().zip(&dist) {
        let x = MARGIN + (p[0] - lo[0]) * scale;
        let y = SIZE - MARGIN - (p[1] - lo[1]) * scale;
        let t = if max > 0.0 { d / max } else { 0.0 };
        let _ = writeln!(
            s,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2\" fill=\"{}\"/>",
            color(t)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_circle_per_point() {
        let p = PointSet::new(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 2.0]).unwrap();
        let q = PointSet::new(2, vec![0.0, 0.0]).unwrap();
        let svg = scatter_svg(&p, &q);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        // Exact match is blue, the farthest point is red.
        assert!(svg.contains("fill=\"#2c7bb6\""));
        assert!(svg.contains("fill=\"#d7191c\""));
    }

    #[test]
    fn colors_span_the_ramp() {
        assert_eq!(color(0.0), "#2c7bb6");
        assert_eq!(color(1.0), "#d7191c");
        assert_eq!(color(7.0), "#d7191c");
    }
}
