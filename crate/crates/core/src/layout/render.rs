//! Orthographic SVG views of a placed scene.
//!
//! Boxes are projected corner by corner, drawn as the convex hull of the
//! projection, and painted far to near. Output depends only on the scene,
//! the viewpoint and the canvas size.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{LayoutScene, PlacedObject};
use crate::error::{Error, Result};
use crate::graph::ObjectId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Viewpoint {
    Front,
    Side,
    Top,
    ThreeQuarter,
}

impl Viewpoint {
    pub const ALL: [Viewpoint; 4] = [
        Viewpoint::Front,
        Viewpoint::Side,
        Viewpoint::Top,
        Viewpoint::ThreeQuarter,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Viewpoint::Front => "front",
            Viewpoint::Side => "side",
            Viewpoint::Top => "top",
            Viewpoint::ThreeQuarter => "threequarter",
        }
    }

    /// Screen coordinates (right, up) and a depth that grows toward the viewer.
    fn project(self, p: [f64; 3]) -> ([f64; 2], f64) {
        let [x, y, z] = p;
        match self {
            Viewpoint::Front => ([x, z], y),
            Viewpoint::Side => ([-y, z], x),
            Viewpoint::Top => ([x, -y], z),
            Viewpoint::ThreeQuarter => {
                let c = 3f64.sqrt() / 2.0;
                ([(x - y) * c, z - 0.5 * (x + y)], x + y + z)
            }
        }
    }
}

impl FromStr for Viewpoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Viewpoint::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown viewpoint `{s}`")))
    }
}

impl std::fmt::Display for Viewpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One projected object, in pixel coordinates with y pointing down.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub id: ObjectId,
    pub label: String,
    pub points: Vec<[f64; 2]>,
}

impl Shape {
    /// (min x, min y, max x, max y) in pixels.
    pub fn bounds(&self) -> [f64; 4] {
        self.points.iter().fold(
            [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
            |b, p| [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])],
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pub viewpoint: Viewpoint,
    pub width: u32,
    pub height: u32,
    /// Standalone SVG document.
    pub document: String,
    /// Shapes in paint order.
    pub shapes: Vec<Shape>,
}

impl RenderedView {
    pub fn shape(&self, id: &ObjectId) -> Option<&Shape> {
        self.shapes.iter().find(|s| &s.id == id)
    }
}

pub trait Renderer {
    fn render(&self, scene: &LayoutScene, viewpoint: Viewpoint) -> Result<RenderedView>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvgRenderer {
    pub width: u32,
    pub height: u32,
}

impl Default for SvgRenderer {
    fn default() -> Self {
        SvgRenderer {
            width: 512,
            height: 512,
        }
    }
}

impl Renderer for SvgRenderer {
    fn render(&self, scene: &LayoutScene, viewpoint: Viewpoint) -> Result<RenderedView> {
        render_view(scene, viewpoint, (self.width, self.height))
    }
}

const MARGIN: f64 = 16.0;
const PALETTE: [&str; 10] = [
    "#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5",
    "#d9d9d9", "#bc80bd",
];

pub fn render_view(scene: &LayoutScene, viewpoint: Viewpoint, size: (u32, u32)) -> Result<RenderedView> {
    let (width, height) = size;
    if width == 0 || height == 0 {
        return Err(Error::RenderFailed(format!("empty canvas {width}x{height}")));
    }
    let mut items: Vec<(f64, &PlacedObject, Vec<[f64; 2]>)> = Vec::new();
    for o in scene.objects().values() {
        let b = o.aabb();
        let mut pts = Vec::with_capacity(8);
        for i in 0..8 {
            let corner = [0, 1, 2].map(|a| if i >> a & 1 == 0 { b.min[a] } else { b.max[a] });
            pts.push(viewpoint.project(corner).0);
        }
        if pts.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::RenderFailed(format!("non-finite geometry for {}", o.id)));
        }
        items.push((viewpoint.project(b.center()).1, o, convex_hull(pts)));
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));

    let (w, h) = (f64::from(width), f64::from(height));
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in items.iter().flat_map(|i| i.2.iter()) {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let span = [hi[0] - lo[0], hi[1] - lo[1]];
    let fit = |avail: f64, s: f64| if s > 0.0 { (avail - 2.0 * MARGIN).max(1.0) / s } else { f64::INFINITY };
    let mut k = fit(w, span[0]).min(fit(h, span[1]));
    if !k.is_finite() {
        k = 1.0;
    }
    let off = [
        0.5 * (w - span[0].max(0.0) * k),
        0.5 * (h - span[1].max(0.0) * k),
    ];
    let to_px = |p: &[f64; 2]| [off[0] + (p[0] - lo[0]) * k, h - off[1] - (p[1] - lo[1]) * k];

    let mut doc = String::new();
    let _ = writeln!(
        doc,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(doc, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##);
    let mut shapes = Vec::with_capacity(items.len());
    for (_, o, hull) in &items {
        let points: Vec<[f64; 2]> = hull.iter().map(to_px).collect();
        let coords: Vec<String> = points.iter().map(|p| format!("{:.3},{:.3}", p[0], p[1])).collect();
        let _ = writeln!(
            doc,
            r##"<polygon id="{}" points="{}" fill="{}" fill-opacity="0.85" stroke="#202020" stroke-width="1"/>"##,
            escape(o.id.as_str()),
            coords.join(" "),
            PALETTE[fnv(o.id.as_str()) as usize % PALETTE.len()],
        );
        let shape = Shape {
            id: o.id.clone(),
            label: o.name.clone(),
            points,
        };
        let b = shape.bounds();
        let _ = writeln!(
            doc,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
            0.5 * (b[0] + b[2]),
            0.5 * (b[1] + b[3]),
            escape(&o.name),
        );
        shapes.push(shape);
    }
    doc.push_str("</svg>\n");
    Ok(RenderedView {
        viewpoint,
        width,
        height,
        document: doc,
        shapes,
    })
}

fn fnv(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Andrew's monotone chain, counter-clockwise, collinear points dropped.
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}
