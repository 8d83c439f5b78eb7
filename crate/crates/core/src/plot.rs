//! Top-down SVG of the planned and executed paths with obstacle outlines.

use std::fmt::Write;

use crate::apf::Mode;
use crate::scene::{Primitive, Scene};
use crate::sim::SimTrace;
use crate::trajectory::PlannedTrajectory;
use crate::Vec2;

/// Drawing width in pixels; the height follows the aspect ratio of the view.
const WIDTH: f64 = 900.0;
/// Margin around the drawn content, metres.
const MARGIN: f64 = 2.0;

/// Plane-to-pixel mapping with y pointing up.
struct View {
    min: Vec2,
    max: Vec2,
    scale: f64,
}

impl View {
    fn fit(points: impl Iterator<Item = Vec2>) -> Self {
        let mut min = Vec2::repeat(f64::INFINITY);
        let mut max = Vec2::repeat(f64::NEG_INFINITY);
        for p in points {
            min = min.inf(&p);
            max = max.sup(&p);
        }
        if !min.x.is_finite() {
            min = Vec2::zeros();
            max = Vec2::zeros();
        }
        min -= Vec2::repeat(MARGIN);
        max += Vec2::repeat(MARGIN);
        let scale = WIDTH / (max.x - min.x).max(1e-9);
        View { min, max, scale }
    }

    fn height(&self) -> f64 {
        (self.max.y - self.min.y) * self.scale
    }

    fn px(&self, p: Vec2) -> (f64, f64) {
        ((p.x - self.min.x) * self.scale, (self.max.y - p.y) * self.scale)
    }

    fn polyline(&self, points: impl Iterator<Item = Vec2>) -> String {
        let mut s = String::new();
        for p in points {
            let (x, y) = self.px(p);
            let _ = write!(s, "{x:.2},{y:.2} ");
        }
        s.pop();
        s
    }
}

/// Renders the X-Y projection of `scene`, the planned path and the executed
/// path. Stretches flown with avoidance active are drawn in a second colour.
pub fn render_svg(title: &str, scene: &Scene, plan: &PlannedTrajectory, trace: &SimTrace) -> String {
    let xy = |v: &crate::Vec3| Vec2::new(v.x, v.y);
    let corners = scene.obstacles.iter().flat_map(|o| {
        let b = o.bounding_box();
        [xy(&b.min), xy(&b.max)]
    });
    let view = View::fit(
        plan.path()
            .vertices()
            .iter()
            .map(xy)
            .chain(trace.records.iter().map(|r| xy(&r.position)))
            .chain(corners),
    );

    let mut svg = String::new();
    let (w, h) = (WIDTH, view.height());
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let _ = writeln!(svg, "<title>{}</title>", escape(title));
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);

    for o in &scene.obstacles {
        match o {
            Primitive::Box(b) => {
                let (x0, y0) = view.px(Vec2::new(b.min.x, b.max.y));
                let (x1, y1) = view.px(Vec2::new(b.max.x, b.min.y));
                let _ = writeln!(
                    svg,
                    r##"<rect class="obstacle" x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="#bbbbbb" stroke="#333333"/>"##,
                    x1 - x0,
                    y1 - y0
                );
            }
            Primitive::Cylinder(c) => {
                let (cx, cy) = view.px(c.center_xy);
                let _ = writeln!(
                    svg,
                    r##"<circle class="obstacle" cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="#bbbbbb" stroke="#333333"/>"##,
                    c.radius * view.scale
                );
            }
        }
    }

    let _ = writeln!(
        svg,
        r##"<polyline class="plan" points="{}" fill="none" stroke="#1f77b4" stroke-width="2" stroke-dasharray="8 5"/>"##,
        view.polyline(plan.path().vertices().iter().map(xy))
    );

    // split the executed path into runs of equal supervisor mode
    let records = &trace.records;
    let mut start = 0;
    while start < records.len() {
        let mode = records[start].mode;
        let mut end = start;
        while end + 1 < records.len() && records[end + 1].mode == mode {
            end += 1;
        }
        // overlap one sample so consecutive runs join up
        let stop = (end + 2).min(records.len());
        let (class, colour) = match mode {
            Mode::FollowTrajectory => ("executed", "#2ca02c"),
            Mode::ApfActive => ("executed avoiding", "#d62728"),
        };
        let _ = writeln!(
            svg,
            r##"<polyline class="{class}" points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"##,
            view.polyline(records[start..stop].iter().map(|r| xy(&r.position)))
        );
        start = end + 1;
    }

    for (p, colour) in [(plan.path().vertices().first(), "#1f77b4"), (plan.path().vertices().last(), "#000000")] {
        if let Some(p) = p {
            let (cx, cy) = view.px(xy(p));
            let _ = writeln!(svg, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="5" fill="{colour}"/>"#);
        }
    }
    let _ = writeln!(
        svg,
        r##"<text x="10" y="20" font-family="sans-serif" font-size="14" fill="#000000">{} ({})</text>"##,
        escape(title),
        trace.mode
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
