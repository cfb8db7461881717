//! Numeric kernels behind the aggregation builtins and `lsfit`.

use super::error::{LangError, LangResult};

/// Relative pivot size below which the normal equations count as singular.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregate {
    Sum,
    Mean,
    Sd,
    Min,
    Max,
}

impl Aggregate {
    pub fn from_name(name: &str) -> Option<Aggregate> {
        Some(match name {
            "sum" => Aggregate::Sum,
            "mean" => Aggregate::Mean,
            "sd" => Aggregate::Sd,
            "min" => Aggregate::Min,
            "max" => Aggregate::Max,
            _ => return None,
        })
    }
}

/// Outcome of an aggregation: the value (`None` is NA) and an optional
/// warning for degenerate input.
#[derive(Clone, Debug, PartialEq)]
pub struct AggResult {
    pub value: Option<f64>,
    pub warning: Option<&'static str>,
}

/// Aggregates `xs`. Any NA gives NA unless `na_rm`, in which case NA
/// elements are dropped first. NaN is an ordinary value and is kept.
pub fn aggregate(op: Aggregate, xs: &[Option<f64>], na_rm: bool) -> AggResult {
    if !na_rm && xs.iter().any(Option::is_none) {
        return AggResult {
            value: None,
            warning: None,
        };
    }
    let vals: Vec<f64> = xs.iter().flatten().copied().collect();
    let ok = |v: f64| AggResult {
        value: Some(v),
        warning: None,
    };
    let n = vals.len();
    match op {
        Aggregate::Sum => ok(vals.iter().sum()),
        Aggregate::Mean => {
            if n == 0 {
                return AggResult {
                    value: Some(f64::NAN),
                    warning: Some("no non-missing values; returning NaN"),
                };
            }
            ok(vals.iter().sum::<f64>() / n as f64)
        }
        Aggregate::Sd => {
            if n < 2 {
                return AggResult {
                    value: Some(f64::NAN),
                    warning: Some("fewer than two non-missing values; returning NaN"),
                };
            }
            let m = vals.iter().sum::<f64>() / n as f64;
            let ss: f64 = vals.iter().map(|x| (x - m) * (x - m)).sum();
            ok((ss / (n - 1) as f64).sqrt())
        }
        Aggregate::Min | Aggregate::Max => {
            if n == 0 {
                let (v, w) = if op == Aggregate::Min {
                    (f64::INFINITY, "no non-missing values; returning Inf")
                } else {
                    (f64::NEG_INFINITY, "no non-missing values; returning -Inf")
                };
                return AggResult {
                    value: Some(v),
                    warning: Some(w),
                };
            }
            if vals.iter().any(|x| x.is_nan()) {
                return ok(f64::NAN);
            }
            let pick = if op == Aggregate::Min { f64::min } else { f64::max };
            ok(vals.iter().copied().fold(vals[0], pick))
        }
    }
}

/// Least-squares fit of `y` on the columns of `x` (plus a leading column of
/// ones when `intercept`), by Gaussian elimination with partial pivoting on
/// the normal equations. Returns the coefficients and residuals.
pub fn least_squares(x: &[Vec<f64>], y: &[f64], intercept: bool) -> LangResult<(Vec<f64>, Vec<f64>)> {
    let n = y.len();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(x.len() + 1);
    if intercept {
        cols.push(vec![1.0; n]);
    }
    cols.extend(x.iter().cloned());
    let p = cols.len();
    if p == 0 {
        return Err(LangError::eval("no columns to fit"));
    }
    if n < p {
        return Err(LangError::numeric(format!(
            "rank deficient: {n} observations cannot determine {p} coefficients"
        )));
    }
    let mut a = vec![vec![0.0; p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = dot(&cols[i], &cols[j]);
        }
        a[i][p] = dot(&cols[i], y);
    }
    let scale = (0..p).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    let tol = RANK_TOLERANCE * scale;
    for k in 0..p {
        let piv = (k..p)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .expect("non-empty pivot range");
        if !(a[piv][k].abs() > tol) {
            return Err(LangError::numeric(format!(
                "rank deficient: design matrix has linearly dependent columns (pivot {} of {p} vanished)",
                k + 1
            )));
        }
        a.swap(k, piv);
        for i in k + 1..p {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..=p {
                    a[i][j] -= f * a[k][j];
                }
            }
        }
    }
    let mut beta = vec![0.0; p];
    for k in (0..p).rev() {
        let s: f64 = (k + 1..p).map(|j| a[k][j] * beta[j]).sum();
        beta[k] = (a[k][p] - s) / a[k][k];
    }
    let residuals = (0..n)
        .map(|r| y[r] - (0..p).map(|j| cols[j][r] * beta[j]).sum::<f64>())
        .collect();
    Ok((beta, residuals))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
