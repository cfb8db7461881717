//! `plot`, `hist` and `title`: builtins that append to the graphics device.

use super::builtins::{count, numbers};
use super::context::EvalContext;
use super::error::{LangError, LangResult};
use super::graphics::{padded_range, parse_color, pretty_breaks, pretty_ticks, Anchor, DrawCommand, GraphicsRecording};
use crate::formats::print::{format_numbers, PRINT_DIGITS};
use crate::value::{NamedList, Value};

fn tick_labels(ticks: &[f64]) -> Vec<String> {
    let xs: Vec<Option<f64>> = ticks.iter().map(|t| Some(*t)).collect();
    format_numbers(&xs, PRINT_DIGITS)
}

fn axes(xlim: [f64; 2], ylim: [f64; 2]) -> [DrawCommand; 2] {
    let xt = pretty_ticks(xlim[0], xlim[1]);
    let yt = pretty_ticks(ylim[0], ylim[1]);
    [
        DrawCommand::Axis {
            side: 1,
            labels: tick_labels(&xt),
            ticks: xt,
        },
        DrawCommand::Axis {
            side: 2,
            labels: tick_labels(&yt),
            ticks: yt,
        },
    ]
}

fn labels(page: &mut GraphicsRecording, xlim: [f64; 2], ylim: [f64; 2], xlab: &str, ylab: &str) {
    let yspan = ylim[1] - ylim[0];
    if !xlab.is_empty() {
        page.commands.push(DrawCommand::Text {
            x: (xlim[0] + xlim[1]) / 2.0,
            y: ylim[0] - 0.12 * yspan,
            text: xlab.to_string(),
            size: 1.0,
            anchor: Anchor::Middle,
        });
    }
    if !ylab.is_empty() {
        page.commands.push(DrawCommand::Text {
            x: xlim[0],
            y: ylim[1] + 0.03 * yspan,
            text: ylab.to_string(),
            size: 1.0,
            anchor: Anchor::Start,
        });
    }
}

fn check_color(col: &str) -> LangResult<()> {
    match parse_color(col) {
        Some(_) => Ok(()),
        None => Err(LangError::eval(format!("invalid color name '{col}'"))),
    }
}

fn range(xs: &[f64]) -> Option<(f64, f64)> {
    let mut it = xs.iter().copied();
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), x| (lo.min(x), hi.max(x))))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn plot(
    ctx: &mut EvalContext,
    x: &Value,
    y: Option<&Value>,
    kind: &str,
    main: Option<String>,
    xlab: &str,
    ylab: &str,
    col: &str,
) -> LangResult<Value> {
    if kind != "p" && kind != "l" {
        return Err(LangError::eval(format!("unsupported plot type '{kind}' (use \"p\" or \"l\")")));
    }
    check_color(col)?;
    let (xv, _) = numbers(x, "x")?;
    let (xs, ys): (Vec<Option<f64>>, Vec<Option<f64>>) = match y {
        Some(y) => {
            let (yv, _) = numbers(y, "y")?;
            if yv.len() != xv.len() {
                return Err(LangError::eval(format!(
                    "'x' and 'y' lengths differ ({} and {})",
                    xv.len(),
                    yv.len()
                )));
            }
            (xv.into_owned(), yv.into_owned())
        }
        None => ((1..=xv.len()).map(|i| Some(i as f64)).collect(), xv.into_owned()),
    };
    ctx.budget.charge(2 * xs.len() as u64)?;
    let (px, py): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(&ys)
        .filter_map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() => Some((*a, *b)),
            _ => None,
        })
        .unzip();
    let (Some((x0, x1)), Some((y0, y1))) = (range(&px), range(&py)) else {
        return Err(LangError::eval("need finite values to plot"));
    };
    let (xlim, ylim) = (padded_range(x0, x1), padded_range(y0, y1));
    let page = ctx.device.new_page(xlim, ylim);
    page.commands.extend(axes(xlim, ylim));
    page.commands.push(if kind == "p" {
        DrawCommand::Points {
            xs: px,
            ys: py,
            radius: 1.0,
            color: col.to_string(),
        }
    } else {
        DrawCommand::Polyline {
            xs: px,
            ys: py,
            width: 1.0,
            color: col.to_string(),
        }
    });
    if let Some(main) = main {
        page.commands.push(DrawCommand::Title { text: main });
    }
    labels(page, xlim, ylim, xlab, ylab);
    ctx.visible = false;
    Ok(Value::Null)
}

pub(crate) fn hist(
    ctx: &mut EvalContext,
    x: &Value,
    breaks: Option<&Value>,
    main: &str,
    xlab: &str,
    col: &str,
) -> LangResult<Value> {
    check_color(col)?;
    let (xv, _) = numbers(x, "x")?;
    let vals: Vec<f64> = xv.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    let Some((lo, hi)) = range(&vals) else {
        return Err(LangError::eval("'x' has no finite values"));
    };
    let sturges = || (vals.len() as f64).log2().ceil() as usize + 1;
    let breaks: Vec<f64> = match breaks {
        None => pretty_breaks(lo, hi, sturges()),
        Some(b) => {
            let (bv, scalar) = numbers(b, "breaks")?;
            if scalar || bv.len() == 1 {
                let k = count(b, "breaks")? as usize;
                pretty_breaks(lo, hi, k.max(1))
            } else {
                let mut bs: Vec<f64> = bv.iter().flatten().copied().collect();
                bs.sort_by(f64::total_cmp);
                bs.dedup();
                if bs.len() < 2 {
                    return Err(LangError::eval("'breaks' needs at least two distinct values"));
                }
                bs
            }
        }
    };
    ctx.budget.charge((vals.len() + 2 * breaks.len()) as u64)?;
    let mut counts = vec![0usize; breaks.len() - 1];
    for &v in &vals {
        if v < breaks[0] || v > breaks[breaks.len() - 1] {
            return Err(LangError::eval("some 'x' not counted; 'breaks' do not span the range of 'x'"));
        }
        // Right-closed cells; the first cell also includes its left edge.
        let i = breaks[1..].partition_point(|b| *b < v).min(counts.len() - 1);
        counts[i] += 1;
    }
    let maxc = counts.iter().copied().max().unwrap_or(0) as f64;
    let xlim = padded_range(breaks[0], breaks[breaks.len() - 1]);
    let ylim = padded_range(0.0, maxc.max(1.0));
    let page = ctx.device.new_page(xlim, ylim);
    page.commands.extend(axes(xlim, ylim));
    for (i, c) in counts.iter().enumerate() {
        page.commands.push(DrawCommand::Rect {
            x0: breaks[i],
            y0: 0.0,
            x1: breaks[i + 1],
            y1: *c as f64,
            fill: col.to_string(),
        });
    }
    if !main.is_empty() {
        page.commands.push(DrawCommand::Title { text: main.to_string() });
    }
    labels(page, xlim, ylim, xlab, "Frequency");
    ctx.visible = false;
    let list = NamedList::new(vec![
        ("breaks".into(), Value::numbers(breaks)),
        ("counts".into(), Value::numbers(counts.into_iter().map(|c| c as f64))),
    ])
    .expect("fixed names");
    Ok(Value::List(list))
}

pub(crate) fn title(ctx: &mut EvalContext, main: &str) -> LangResult<Value> {
    let page = ctx
        .device
        .current()
        .ok_or_else(|| LangError::eval("no plot to add a title to; call plot() or hist() first"))?;
    page.commands.push(DrawCommand::Title { text: main.to_string() });
    ctx.visible = false;
    Ok(Value::Null)
}
