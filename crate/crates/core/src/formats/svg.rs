//! Canonical SVG rendering of a graphics recording.
//!
//! Output is a pure function of the recording and the pixel size: elements
//! follow command order and every coordinate is printed with two decimals.

use std::fmt::Write;

use crate::lang::graphics::{Anchor, DrawCommand, GraphicsRecording};

/// Pixel geometry shared by the SVG and PNG renderers.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Frame {
    pub width: f64,
    pub height: f64,
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
    xlim: [f64; 2],
    ylim: [f64; 2],
}

impl Frame {
    pub fn new(g: &GraphicsRecording, width: u32, height: u32) -> Frame {
        let (w, h) = (width as f64, height as f64);
        let (xlim, ylim) = g.window().unwrap_or(([0.0, 1.0], [0.0, 1.0]));
        Frame {
            width: w,
            height: h,
            left: 0.12 * w,
            right: w - 0.05 * w,
            top: 0.10 * h,
            bottom: h - 0.12 * h,
            xlim,
            ylim,
        }
    }

    /// Scale factor relative to a 480-pixel reference device.
    pub fn scale(&self) -> f64 {
        self.width.min(self.height) / 480.0
    }

    pub fn x(&self, x: f64) -> f64 {
        let span = self.xlim[1] - self.xlim[0];
        let t = if span == 0.0 { 0.5 } else { (x - self.xlim[0]) / span };
        self.left + t * (self.right - self.left)
    }

    pub fn y(&self, y: f64) -> f64 {
        let span = self.ylim[1] - self.ylim[0];
        let t = if span == 0.0 { 0.5 } else { (y - self.ylim[0]) / span };
        self.bottom - t * (self.bottom - self.top)
    }

    pub fn font_px(&self, size: f64) -> f64 {
        size * 12.0 * self.scale()
    }

    pub fn point_radius(&self, radius: f64) -> f64 {
        radius * self.width.min(self.height) / 160.0
    }

    pub fn tick_len(&self) -> f64 {
        6.0 * self.scale()
    }

    /// Baseline position of the title.
    pub fn title_pos(&self) -> (f64, f64) {
        (self.width / 2.0, 0.06 * self.height)
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn anchor_name(a: Anchor) -> &'static str {
    match a {
        Anchor::Start => "start",
        Anchor::Middle => "middle",
        Anchor::End => "end",
    }
}

fn text(out: &mut String, x: f64, y: f64, px: f64, anchor: &str, bold: bool, s: &str) {
    let weight = if bold { " font-weight=\"bold\"" } else { "" };
    let _ = writeln!(
        out,
        "<text x=\"{x:.2}\" y=\"{y:.2}\" font-family=\"sans-serif\" font-size=\"{px:.2}\" text-anchor=\"{anchor}\"{weight}>{}</text>",
        escape(s)
    );
}

fn line(out: &mut String, x1: f64, y1: f64, x2: f64, y2: f64) {
    let _ = writeln!(
        out,
        "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"#000000\"/>"
    );
}

fn axis(out: &mut String, f: &Frame, side: u8, ticks: &[f64], labels: &[String]) {
    let (Some(first), Some(last)) = (ticks.first(), ticks.last()) else {
        return;
    };
    let t = f.tick_len();
    let px = f.font_px(0.9);
    if side == 1 {
        line(out, f.x(*first), f.bottom, f.x(*last), f.bottom);
        for (tick, label) in ticks.iter().zip(labels) {
            let x = f.x(*tick);
            line(out, x, f.bottom, x, f.bottom + t);
            text(out, x, f.bottom + t + px * 1.2, px, "middle", false, label);
        }
    } else {
        line(out, f.left, f.y(*first), f.left, f.y(*last));
        for (tick, label) in ticks.iter().zip(labels) {
            let y = f.y(*tick);
            line(out, f.left - t, y, f.left, y);
            text(out, f.left - t * 1.5, y + px * 0.35, px, "end", false, label);
        }
    }
}

pub fn render_svg(g: &GraphicsRecording, width: u32, height: u32) -> String {
    let f = Frame::new(g, width, height);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    for cmd in &g.commands {
        match cmd {
            DrawCommand::Canvas { .. } => {}
            DrawCommand::Points { xs, ys, radius, color } => {
                let r = f.point_radius(*radius);
                for (x, y) in xs.iter().zip(ys) {
                    let _ = writeln!(
                        out,
                        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{r:.2}\" fill=\"none\" stroke=\"{}\"/>",
                        f.x(*x),
                        f.y(*y),
                        escape(color)
                    );
                }
            }
            DrawCommand::Polyline { xs, ys, width, color } => {
                let pts: Vec<String> = xs
                    .iter()
                    .zip(ys)
                    .map(|(x, y)| format!("{:.2},{:.2}", f.x(*x), f.y(*y)))
                    .collect();
                let _ = writeln!(
                    out,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{:.2}\"/>",
                    pts.join(" "),
                    escape(color),
                    width * f.scale()
                );
            }
            DrawCommand::Rect { x0, y0, x1, y1, fill } => {
                let (ax, bx) = (f.x(*x0), f.x(*x1));
                let (ay, by) = (f.y(*y0), f.y(*y1));
                let _ = writeln!(
                    out,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\" stroke=\"#000000\"/>",
                    ax.min(bx),
                    ay.min(by),
                    (bx - ax).abs(),
                    (by - ay).abs(),
                    escape(fill)
                );
            }
            DrawCommand::Axis { side, ticks, labels } => axis(&mut out, &f, *side, ticks, labels),
            DrawCommand::Text { x, y, text: s, size, anchor } => {
                text(&mut out, f.x(*x), f.y(*y), f.font_px(*size), anchor_name(*anchor), false, s);
            }
            DrawCommand::Title { text: s } => {
                let (x, y) = f.title_pos();
                text(&mut out, x, y, f.font_px(1.2), "middle", true, s);
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
