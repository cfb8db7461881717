//! PNG rendering of a graphics recording.
//!
//! Commands are first lowered to pixel-space shapes (same geometry as the
//! SVG renderer), then every raster row is filled independently, so rows
//! can be painted in parallel. No anti-aliasing: a pixel is painted when its
//! center falls inside a shape.

use super::font::{glyph, ASCENT, GLYPH_HEIGHT, GLYPH_WIDTH};
use super::svg::Frame;
use super::{FormatError, FormatResult};
use crate::lang::graphics::{parse_color, Anchor, DrawCommand, GraphicsRecording};
use crate::par::{self, Parallelism};

type Rgb = [u8; 3];

const BLACK: Rgb = [0, 0, 0];

#[derive(Clone, Copy, Debug)]
enum Shape {
    /// Axis-aligned box, inclusive of its left/top edge.
    Fill { x0: f64, y0: f64, x1: f64, y1: f64, color: Rgb },
    /// Segment with half-width `hw`.
    Segment { ax: f64, ay: f64, bx: f64, by: f64, hw: f64, color: Rgb },
    /// Circle outline of radius `r` and half-width `hw`.
    Ring { cx: f64, cy: f64, r: f64, hw: f64, color: Rgb },
}

impl Shape {
    /// Vertical pixel-center extent.
    fn rows(&self) -> (f64, f64) {
        match *self {
            Shape::Fill { y0, y1, .. } => (y0, y1),
            Shape::Segment { ay, by, hw, .. } => (ay.min(by) - hw, ay.max(by) + hw),
            Shape::Ring { cy, r, hw, .. } => (cy - r - hw, cy + r + hw),
        }
    }

    fn cols(&self) -> (f64, f64) {
        match *self {
            Shape::Fill { x0, x1, .. } => (x0, x1),
            Shape::Segment { ax, bx, hw, .. } => (ax.min(bx) - hw, ax.max(bx) + hw),
            Shape::Ring { cx, r, hw, .. } => (cx - r - hw, cx + r + hw),
        }
    }

    fn color(&self) -> Rgb {
        match *self {
            Shape::Fill { color, .. } | Shape::Segment { color, .. } | Shape::Ring { color, .. } => color,
        }
    }

    fn covers(&self, px: f64, py: f64) -> bool {
        match *self {
            Shape::Fill { x0, y0, x1, y1, .. } => px >= x0 && px < x1 && py >= y0 && py < y1,
            Shape::Segment { ax, ay, bx, by, hw, .. } => {
                let (dx, dy) = (bx - ax, by - ay);
                let len2 = dx * dx + dy * dy;
                let t = if len2 == 0.0 {
                    0.0
                } else {
                    (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
                };
                let (qx, qy) = (ax + t * dx - px, ay + t * dy - py);
                qx * qx + qy * qy <= hw * hw
            }
            Shape::Ring { cx, cy, r, hw, .. } => {
                let d = ((px - cx).powi(2) + (py - cy).powi(2)).sqrt();
                (d - r).abs() <= hw
            }
        }
    }
}

fn color(s: &str) -> Rgb {
    parse_color(s).unwrap_or(BLACK)
}

struct Lowering {
    frame: Frame,
    shapes: Vec<Shape>,
}

impl Lowering {
    fn line(&mut self, ax: f64, ay: f64, bx: f64, by: f64, width: f64, c: Rgb) {
        let hw = (width * self.frame.scale() / 2.0).max(0.5);
        self.shapes.push(Shape::Segment { ax, ay, bx, by, hw, color: c });
    }

    /// Text with its baseline at `y`. Glyphs are scaled by a whole factor.
    fn text(&mut self, x: f64, y: f64, px: f64, anchor: Anchor, s: &str) {
        let k = (px / GLYPH_HEIGHT as f64).round().max(1.0);
        let advance = (GLYPH_WIDTH + 1) as f64 * k;
        let n = s.chars().count() as f64;
        let width = (n * advance - k).max(0.0);
        let left = match anchor {
            Anchor::Start => x,
            Anchor::Middle => x - width / 2.0,
            Anchor::End => x - width,
        }
        .round();
        let top = (y - ASCENT as f64 * k).round();
        for (i, c) in s.chars().enumerate() {
            let gx = left + i as f64 * advance;
            for (col, bits) in glyph(c).iter().enumerate() {
                for row in 0..GLYPH_HEIGHT {
                    if bits >> row & 1 == 1 {
                        let x0 = gx + col as f64 * k;
                        let y0 = top + row as f64 * k;
                        self.shapes.push(Shape::Fill { x0, y0, x1: x0 + k, y1: y0 + k, color: BLACK });
                    }
                }
            }
        }
    }

    fn command(&mut self, cmd: &DrawCommand) {
        let f = self.frame;
        match cmd {
            DrawCommand::Canvas { .. } => {}
            DrawCommand::Points { xs, ys, radius, color: c } => {
                let r = f.point_radius(*radius);
                let hw = (f.scale() / 2.0).max(0.5);
                for (x, y) in xs.iter().zip(ys) {
                    self.shapes.push(Shape::Ring { cx: f.x(*x), cy: f.y(*y), r, hw, color: color(c) });
                }
            }
            DrawCommand::Polyline { xs, ys, width, color: c } => {
                let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (f.x(*x), f.y(*y))).collect();
                for w in pts.windows(2) {
                    self.line(w[0].0, w[0].1, w[1].0, w[1].1, *width, color(c));
                }
            }
            DrawCommand::Rect { x0, y0, x1, y1, fill } => {
                let (ax, bx) = (f.x(*x0).min(f.x(*x1)), f.x(*x0).max(f.x(*x1)));
                let (ay, by) = (f.y(*y0).min(f.y(*y1)), f.y(*y0).max(f.y(*y1)));
                self.shapes.push(Shape::Fill { x0: ax, y0: ay, x1: bx, y1: by, color: color(fill) });
                for (p, q, r, s) in [(ax, ay, bx, ay), (bx, ay, bx, by), (bx, by, ax, by), (ax, by, ax, ay)] {
                    self.line(p, q, r, s, 1.0, BLACK);
                }
            }
            DrawCommand::Axis { side, ticks, labels } => {
                let (Some(first), Some(last)) = (ticks.first(), ticks.last()) else {
                    return;
                };
                let t = f.tick_len();
                let px = f.font_px(0.9);
                if *side == 1 {
                    self.line(f.x(*first), f.bottom, f.x(*last), f.bottom, 1.0, BLACK);
                    for (tick, label) in ticks.iter().zip(labels) {
                        let x = f.x(*tick);
                        self.line(x, f.bottom, x, f.bottom + t, 1.0, BLACK);
                        self.text(x, f.bottom + t + px * 1.2, px, Anchor::Middle, label);
                    }
                } else {
                    self.line(f.left, f.y(*first), f.left, f.y(*last), 1.0, BLACK);
                    for (tick, label) in ticks.iter().zip(labels) {
                        let y = f.y(*tick);
                        self.line(f.left - t, y, f.left, y, 1.0, BLACK);
                        self.text(f.left - t * 1.5, y + px * 0.35, px, Anchor::End, label);
                    }
                }
            }
            DrawCommand::Text { x, y, text, size, anchor } => {
                self.text(f.x(*x), f.y(*y), f.font_px(*size), *anchor, text);
            }
            DrawCommand::Title { text } => {
                let (x, y) = f.title_pos();
                self.text(x, y, f.font_px(1.2), Anchor::Middle, text);
            }
        }
    }
}

/// Rasterizes to packed RGB rows.
pub fn rasterize(g: &GraphicsRecording, width: u32, height: u32, mode: Parallelism) -> Vec<u8> {
    let mut low = Lowering {
        frame: Frame::new(g, width, height),
        shapes: Vec::new(),
    };
    for cmd in &g.commands {
        low.command(cmd);
    }
    let shapes = low.shapes;
    let (w, h) = (width as usize, height as usize);
    let mut pixels = vec![255u8; w * h * 3];
    par::for_each_chunk_mut(mode, &mut pixels, w * 3, |row, buf| {
        let py = row as f64 + 0.5;
        for s in &shapes {
            let (top, bottom) = s.rows();
            if py < top || py > bottom {
                continue;
            }
            let (left, right) = s.cols();
            let x0 = left.floor().max(0.0) as usize;
            let x1 = (right.ceil().max(0.0) as usize).min(w);
            let c = s.color();
            for x in x0..x1 {
                if s.covers(x as f64 + 0.5, py) {
                    buf[x * 3..x * 3 + 3].copy_from_slice(&c);
                }
            }
        }
    });
    debug_assert_eq!(pixels.len(), w * h * 3);
    pixels
}

pub fn render_png(g: &GraphicsRecording, width: u32, height: u32, mode: Parallelism) -> FormatResult<Vec<u8>> {
    let pixels = rasterize(g, width, height, mode);
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, width, height);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let err = |e: png::EncodingError| FormatError::new(format!("png encoding failed: {e}"));
    let mut writer = enc.write_header().map_err(err)?;
    writer.write_image_data(&pixels).map_err(err)?;
    writer.finish().map_err(err)?;
    Ok(out)
}

/// Width and height from a PNG's IHDR chunk.
pub fn png_dimensions(bytes: &[u8]) -> Option<(u32, u32)> {
    if bytes.len() < 24 || &bytes[1..4] != b"PNG" || &bytes[12..16] != b"IHDR" {
        return None;
    }
    let be = |i: usize| u32::from_be_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    Some((be(16), be(20)))
}
