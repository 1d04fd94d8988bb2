//! Static SVG pictures of planar boxes: geodesic trees coloured by depth,
//! competition partitions coloured by label, and scalar heat maps.
//!
//! Output depends only on the input document, so equal inputs give
//! byte-identical files.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{GeodesyError, Result};
use crate::geostruct::{LabelValue, PartitionDocument, TreeDocument};
use crate::lattice::{LatticeBox, Vertex};
use crate::passage::{GeodesicPath, PassageMap};

const LEGEND_WIDTH: f64 = 150.0;
const PAD: f64 = 10.0;
const LABEL_COLOURS: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
const CONTESTED: &str = "#000000";
const UNREACHED: &str = "#dddddd";
const PATH_COLOURS: [&str; 4] = ["#ffffff", "#ff00ff", "#00ffff", "#ffff00"];
const RAMP: [(u8, u8, u8); 5] = [(68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37)];

/// Scalar values over a box, in vertex-index order; `null` marks missing values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapDocument {
    #[serde(rename = "box")]
    pub bbox: LatticeBox,
    pub values: Vec<Option<f64>>,
}

impl HeatmapDocument {
    pub fn from_passage(map: &PassageMap) -> Self {
        HeatmapDocument {
            bbox: map.bbox().clone(),
            values: (0..map.bbox().vertex_count()).map(|i| map.dist_at(i)).collect(),
        }
    }
}

/// Any document the renderer accepts, told apart by its fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RenderInput {
    Tree(TreeDocument),
    Partition(PartitionDocument),
    Heatmap(HeatmapDocument),
}

/// Parses a tree, partition or heat-map document and renders it.
pub fn render_json(text: &str, highlights: &[GeodesicPath]) -> Result<String> {
    let input: RenderInput = serde_json::from_str(text).map_err(|e| {
        GeodesyError::InvalidInput(format!("not a tree, partition or heat-map document: {e}"))
    })?;
    render(&input, highlights)
}

pub fn render(input: &RenderInput, highlights: &[GeodesicPath]) -> Result<String> {
    match input {
        RenderInput::Tree(d) => tree_svg(d, highlights),
        RenderInput::Partition(d) => partition_svg(d, highlights),
        RenderInput::Heatmap(d) => heatmap_svg(d, highlights),
    }
}

fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (RAMP.len() - 1) as f64;
    let i = (x.floor() as usize).min(RAMP.len() - 2);
    let f = x - i as f64;
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * f).round() as u8;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

struct Canvas {
    bbox: LatticeBox,
    cell: f64,
    out: String,
}

impl Canvas {
    fn new(bbox: &LatticeBox, title: &str) -> Result<Self> {
        if bbox.dim() != 2 {
            return Err(GeodesyError::DimensionMismatch { expected: 2, got: bbox.dim() });
        }
        let ext = [bbox.extent(0), bbox.extent(1)];
        let cell = (640.0 / ext[0].max(ext[1]) as f64).clamp(1.0f64, 40.0);
        let w = ext[0] as f64 * cell + 2.0 * PAD + LEGEND_WIDTH;
        let h = (ext[1] as f64 * cell + 2.0 * PAD).max(160.0);
        let mut out = String::new();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" shape-rendering="crispEdges">"#
        )
        .unwrap();
        writeln!(out, "<title>{title}</title>").unwrap();
        writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##).unwrap();
        Ok(Canvas {
            bbox: bbox.clone(),
            cell,
            out,
        })
    }

    /// Centre of the cell of `v` in picture coordinates; `y` grows upward on the lattice.
    fn centre(&self, v: &Vertex) -> (f64, f64) {
        let lo = self.bbox.lo();
        let hi = self.bbox.hi();
        let x = PAD + (v.0[0] - lo[0]) as f64 * self.cell + self.cell / 2.0;
        let y = PAD + (hi[1] - v.0[1]) as f64 * self.cell + self.cell / 2.0;
        (x, y)
    }

    fn cell(&mut self, v: &Vertex, fill: &str) {
        let (cx, cy) = self.centre(v);
        let h = self.cell / 2.0;
        writeln!(
            self.out,
            r#"<rect class="cell" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
            cx - h,
            cy - h,
            self.cell,
            self.cell
        )
        .unwrap();
    }

    fn segment(&mut self, a: &Vertex, b: &Vertex) {
        let (x1, y1) = self.centre(a);
        let (x2, y2) = self.centre(b);
        writeln!(
            self.out,
            r##"<line class="edge" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#333333" stroke-opacity="0.5" stroke-width="{:.2}"/>"##,
            (self.cell / 8.0).max(0.3)
        )
        .unwrap();
    }

    fn paths(&mut self, paths: &[GeodesicPath]) -> Result<()> {
        for (k, p) in paths.iter().enumerate() {
            if let Some(v) = p.vertices.iter().find(|v| v.dim() != 2 || !self.bbox.contains(v)) {
                return Err(GeodesyError::OutOfBox(format!("highlighted vertex {v} is outside the picture")));
            }
            let pts: Vec<String> = p
                .vertices
                .iter()
                .map(|v| {
                    let (x, y) = self.centre(v);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let colour = PATH_COLOURS[k % PATH_COLOURS.len()];
            let width = (self.cell / 3.0).clamp(1.0, 6.0);
            writeln!(
                self.out,
                r##"<polyline class="path" points="{}" fill="none" stroke="#000000" stroke-width="{:.2}" stroke-linejoin="round"/>"##,
                pts.join(" "),
                width + 2.0
            )
            .unwrap();
            writeln!(
                self.out,
                r#"<polyline class="path" points="{}" fill="none" stroke="{colour}" stroke-width="{width:.2}" stroke-linejoin="round"/>"#,
                pts.join(" ")
            )
            .unwrap();
        }
        Ok(())
    }

    fn legend_x(&self) -> f64 {
        2.0 * PAD + self.bbox.extent(0) as f64 * self.cell
    }

    fn swatch(&mut self, row: usize, fill: &str, text: &str) {
        let x = self.legend_x();
        let y = PAD + row as f64 * 20.0;
        writeln!(
            self.out,
            r##"<rect class="legend" x="{x:.2}" y="{y:.2}" width="14" height="14" fill="{fill}" stroke="#333333"/>"##
        )
        .unwrap();
        writeln!(
            self.out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{text}</text>"#,
            x + 20.0,
            y + 11.0
        )
        .unwrap();
    }

    fn gradient(&mut self, row: usize, lo: f64, hi: f64, what: &str) {
        let steps = 5;
        for k in 0..steps {
            let t = k as f64 / (steps - 1) as f64;
            let value = lo + (hi - lo) * (1.0 - t);
            self.swatch(row + k, &ramp(1.0 - t), &format!("{what} {value:.3}"));
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

pub fn tree_svg(doc: &TreeDocument, highlights: &[GeodesicPath]) -> Result<String> {
    let mut c = Canvas::new(&doc.bbox, "geodesic tree")?;
    let max_depth = doc.nodes.iter().filter_map(|n| n.depth).max().unwrap_or(0);
    for n in &doc.nodes {
        let fill = match n.depth {
            Some(d) if max_depth > 0 => ramp(d as f64 / max_depth as f64),
            Some(_) => ramp(0.0),
            None => UNREACHED.to_string(),
        };
        c.cell(&n.v, &fill);
    }
    if c.cell >= 4.0 {
        for n in &doc.nodes {
            if let Some(p) = &n.parent {
                c.segment(&n.v, p);
            }
        }
    }
    let (rx, ry) = c.centre(&doc.root);
    writeln!(
        c.out,
        r##"<circle class="root" cx="{rx:.2}" cy="{ry:.2}" r="{:.2}" fill="#ffffff" stroke="#000000"/>"##,
        (c.cell / 3.0).max(1.5)
    )
    .unwrap();
    c.paths(highlights)?;
    c.swatch(0, "#ffffff", "root");
    c.gradient(1, 0.0, max_depth as f64, "depth");
    Ok(c.finish())
}

pub fn partition_svg(doc: &PartitionDocument, highlights: &[GeodesicPath]) -> Result<String> {
    let mut c = Canvas::new(&doc.bbox, "competition partition")?;
    for e in &doc.labels {
        let fill = match e.label {
            LabelValue::Seed(k) => LABEL_COLOURS[(k.max(1) - 1) % LABEL_COLOURS.len()],
            LabelValue::Contested(_) => CONTESTED,
        };
        c.cell(&e.v, fill);
    }
    for s in &doc.seeds {
        let (x, y) = c.centre(s);
        writeln!(
            c.out,
            r##"<circle class="seed" cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="#ffffff" stroke="#000000"/>"##,
            (c.cell / 3.0).max(1.5)
        )
        .unwrap();
    }
    c.paths(highlights)?;
    for k in 0..doc.seeds.len() {
        let reach = if doc.boundary_reach.get(k).copied().unwrap_or(false) { " (reaches boundary)" } else { "" };
        c.swatch(k, LABEL_COLOURS[k % LABEL_COLOURS.len()], &format!("seed {}{reach}", k + 1));
    }
    c.swatch(doc.seeds.len(), CONTESTED, "contested");
    Ok(c.finish())
}

pub fn heatmap_svg(doc: &HeatmapDocument, highlights: &[GeodesicPath]) -> Result<String> {
    if doc.values.len() != doc.bbox.vertex_count() {
        return Err(GeodesyError::InvalidInput(format!(
            "heat map has {} values for {} vertices",
            doc.values.len(),
            doc.bbox.vertex_count()
        )));
    }
    let mut c = Canvas::new(&doc.bbox, "passage times")?;
    let finite = doc.values.iter().flatten().filter(|x| x.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    for (i, v) in doc.values.iter().enumerate() {
        let fill = match v {
            Some(x) if x.is_finite() => ramp((x - lo) / span),
            _ => UNREACHED.to_string(),
        };
        c.cell(&doc.bbox.vertex_at(i), &fill);
    }
    c.paths(highlights)?;
    if lo.is_finite() {
        c.gradient(0, lo, hi, "T =");
        c.swatch(5, UNREACHED, "unreachable");
    } else {
        c.swatch(0, UNREACHED, "unreachable");
    }
    Ok(c.finish())
}
