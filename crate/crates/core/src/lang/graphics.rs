//! Recording graphics device.
//!
//! Plotting builtins never rasterize. They append draw commands in user
//! coordinates to the current page; renderers in `formats` turn a finished
//! recording into SVG or PNG at whatever size the client asks for.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Start,
    Middle,
    End,
}

/// One drawing primitive. Sizes (`radius`, `width`, `size`) are unit-free
/// and scaled to the output by the renderer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DrawCommand {
    /// Starts a page; `xlim`/`ylim` set the user coordinate window.
    Canvas {
        width: f64,
        height: f64,
        xlim: [f64; 2],
        ylim: [f64; 2],
    },
    Points {
        xs: Vec<f64>,
        ys: Vec<f64>,
        radius: f64,
        color: String,
    },
    Polyline {
        xs: Vec<f64>,
        ys: Vec<f64>,
        width: f64,
        color: String,
    },
    Rect {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        fill: String,
    },
    /// `side` 1 is the bottom axis, 2 the left axis.
    Axis {
        side: u8,
        ticks: Vec<f64>,
        labels: Vec<String>,
    },
    Text {
        x: f64,
        y: f64,
        text: String,
        size: f64,
        anchor: Anchor,
    },
    Title {
        text: String,
    },
}

/// The command list of one page. Append-only while evaluating.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphicsRecording {
    pub commands: Vec<DrawCommand>,
}

impl GraphicsRecording {
    /// The user coordinate window of the page, if it has a canvas.
    pub fn window(&self) -> Option<([f64; 2], [f64; 2])> {
        self.commands.iter().find_map(|c| match c {
            DrawCommand::Canvas { xlim, ylim, .. } => Some((*xlim, *ylim)),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct GraphicsDevice {
    pages: Vec<GraphicsRecording>,
}

impl GraphicsDevice {
    pub fn new_page(&mut self, xlim: [f64; 2], ylim: [f64; 2]) -> &mut GraphicsRecording {
        self.pages.push(GraphicsRecording {
            commands: vec![DrawCommand::Canvas {
                width: 7.0,
                height: 7.0,
                xlim,
                ylim,
            }],
        });
        self.pages.last_mut().expect("page just pushed")
    }

    pub fn current(&mut self) -> Option<&mut GraphicsRecording> {
        self.pages.last_mut()
    }

    pub fn pages(&self) -> &[GraphicsRecording] {
        &self.pages
    }

    pub fn into_pages(self) -> Vec<GraphicsRecording> {
        self.pages
    }
}

const NAMED_COLORS: &[(&str, [u8; 3])] = &[
    ("black", [0, 0, 0]),
    ("white", [255, 255, 255]),
    ("red", [255, 0, 0]),
    ("green", [0, 255, 0]),
    ("blue", [0, 0, 255]),
    ("cyan", [0, 255, 255]),
    ("magenta", [255, 0, 255]),
    ("yellow", [255, 255, 0]),
    ("gray", [190, 190, 190]),
    ("grey", [190, 190, 190]),
    ("lightgray", [211, 211, 211]),
    ("lightgrey", [211, 211, 211]),
    ("darkgray", [169, 169, 169]),
    ("darkgrey", [169, 169, 169]),
    ("orange", [255, 165, 0]),
    ("purple", [160, 32, 240]),
    ("brown", [165, 42, 42]),
    ("pink", [255, 192, 203]),
    ("navy", [0, 0, 128]),
    ("steelblue", [70, 130, 180]),
    ("darkgreen", [0, 100, 0]),
    ("darkred", [139, 0, 0]),
];

/// Parses a color name or `#rrggbb` into RGB.
pub fn parse_color(s: &str) -> Option<[u8; 3]> {
    if let Some(hex) = s.strip_prefix('#') {
        if hex.len() != 6 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).ok();
        return Some([byte(0)?, byte(2)?, byte(4)?]);
    }
    NAMED_COLORS
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(s))
        .map(|(_, rgb)| *rgb)
}

/// `[min, max]` widened by 4% of the span on each side. A degenerate range
/// is widened around its single value.
pub fn padded_range(lo: f64, hi: f64) -> [f64; 2] {
    let span = hi - lo;
    if span > 0.0 {
        [lo - 0.04 * span, hi + 0.04 * span]
    } else if lo == 0.0 {
        [-1.0, 1.0]
    } else {
        let d = 0.04 * lo.abs();
        [lo - d, hi + d]
    }
}

fn nice_step(span: f64, intervals: usize) -> f64 {
    let cell = span / intervals.max(1) as f64;
    let base = 10f64.powf(cell.log10().floor());
    // Move to the next round unit only when it is clearly closer.
    let (h, h5) = (1.5, 0.5 + 1.5 * 1.5);
    let mut unit = base;
    if 2.0 * base - cell < h * (cell - unit) {
        unit = 2.0 * base;
        if 5.0 * base - cell < h5 * (cell - unit) {
            unit = 5.0 * base;
            if 10.0 * base - cell < h * (cell - unit) {
                unit = 10.0 * base;
            }
        }
    }
    unit
}

fn snap(k: i64, step: f64) -> f64 {
    let t = k as f64 * step;
    // Snap float noise such as 0.30000000000000004 to the grid.
    let snapped = (t / step).round() * step;
    if snapped.abs() < step * 1e-10 {
        0.0
    } else {
        snapped
    }
}

/// Round-number tick positions inside `[lo, hi]`, aiming for about five
/// intervals.
pub fn pretty_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return vec![lo];
    }
    let step = nice_step(span, 5);
    let first = (lo / step - 1e-10).ceil() as i64;
    let last = (hi / step + 1e-10).floor() as i64;
    (first..=last).map(|k| snap(k, step)).collect()
}

/// Round-number breakpoints covering `[lo, hi]` with about `intervals`
/// cells.
pub fn pretty_breaks(lo: f64, hi: f64, intervals: usize) -> Vec<f64> {
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        let d = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - d, hi + d)
    };
    let step = nice_step(hi - lo, intervals);
    let first = (lo / step + 1e-10).floor() as i64;
    let last = (hi / step - 1e-10).ceil() as i64;
    (first..=last.max(first + 1)).map(|k| snap(k, step)).collect()
}
