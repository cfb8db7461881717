use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::error::{LangError, LangResult};
use super::graphics::GraphicsDevice;
use super::rng::Rng;
use crate::par::{self, Parallelism};
use crate::value::{FnEnv, Namespace};

/// Elements processed between two deadline checks in long element-wise
/// loops. Well under 10 ms of work per batch.
pub(crate) const CHECK_BATCH: usize = 1 << 18;

/// Resource limits of one evaluation.
///
/// Cells are counted cumulatively: every allocated element costs one cell
/// and is never refunded, so the limit bounds the total memory an
/// evaluation can request. Allocations are charged before they happen.
#[derive(Clone, Debug)]
pub struct Budget {
    deadline: Option<Instant>,
    timeout: Option<Duration>,
    cell_limit: u64,
    cells_used: u64,
    cancel: Arc<AtomicBool>,
}

impl Budget {
    pub fn new(timeout: Option<Duration>, cell_limit: u64) -> Budget {
        Budget {
            deadline: timeout.map(|t| Instant::now() + t),
            timeout,
            cell_limit,
            cells_used: 0,
            cancel: Arc::new(AtomicBool::new(false)),
        }
    }

    pub fn unlimited() -> Budget {
        Budget::new(None, u64::MAX)
    }

    /// Flag that stops the evaluation at its next check when set from
    /// another thread.
    pub fn cancel_handle(&self) -> Arc<AtomicBool> {
        self.cancel.clone()
    }

    /// Uses an externally owned cancel flag.
    pub fn with_cancel(mut self, cancel: Arc<AtomicBool>) -> Budget {
        self.cancel = cancel;
        self
    }

    pub fn cell_limit(&self) -> u64 {
        self.cell_limit
    }

    pub fn cells_used(&self) -> u64 {
        self.cells_used
    }

    pub fn check(&self) -> LangResult<()> {
        if self.cancel.load(Ordering::Relaxed) {
            return Err(LangError::resource(self.deadline_message()));
        }
        if let Some(d) = self.deadline {
            if Instant::now() >= d {
                return Err(LangError::resource(self.deadline_message()));
            }
        }
        Ok(())
    }

    fn deadline_message(&self) -> String {
        match self.timeout {
            Some(t) => format!(
                "deadline exceeded: evaluation exceeded the {} s wall-clock limit",
                t.as_secs_f64()
            ),
            None => "evaluation cancelled".to_string(),
        }
    }

    /// Reserves `cells` cells, failing without side effects when the limit
    /// would be exceeded.
    pub fn charge(&mut self, cells: u64) -> LangResult<()> {
        self.check()?;
        match self.cells_used.checked_add(cells) {
            Some(total) if total <= self.cell_limit => {
                self.cells_used = total;
                Ok(())
            }
            _ => Err(LangError::resource(format!(
                "cell limit exceeded: allocating {cells} cells would pass the limit of {} cells ({} in use)",
                self.cell_limit, self.cells_used
            ))),
        }
    }

    /// `charge` for a size computed in floating point (e.g. `rep` counts).
    pub fn charge_f64(&mut self, cells: f64) -> LangResult<()> {
        let c = if cells.is_finite() && cells >= 0.0 && cells < u64::MAX as f64 {
            cells as u64
        } else {
            u64::MAX
        };
        self.charge(c)
    }
}

/// One evaluation's private world.
pub struct EvalContext {
    /// Top-level bindings of the running script (initially the resolved
    /// arguments).
    pub namespace: Namespace,
    /// Read-only namespace of the container the call targets.
    pub base: Option<Arc<Namespace>>,
    pub stdout: String,
    pub device: GraphicsDevice,
    pub rng: Rng,
    pub budget: Budget,
    /// In-memory working directory: relative path → contents.
    pub workdir: BTreeMap<String, Vec<u8>>,
    pub parallelism: Parallelism,
    pub(crate) visible: bool,
    pub(crate) depth: usize,
    pub(crate) script_env: Option<Arc<FnEnv>>,
}

impl EvalContext {
    pub fn new(budget: Budget, seed: u64) -> EvalContext {
        EvalContext {
            namespace: Namespace::new(),
            base: None,
            stdout: String::new(),
            device: GraphicsDevice::default(),
            rng: Rng::seeded(seed),
            budget,
            workdir: BTreeMap::new(),
            parallelism: Parallelism::default(),
            visible: true,
            depth: 0,
            script_env: None,
        }
    }

    /// Unlimited budget, seed 0. Handy for tests and tools.
    pub fn unbudgeted() -> EvalContext {
        EvalContext::new(Budget::unlimited(), 0)
    }

    pub fn with_base(mut self, base: Arc<Namespace>) -> Self {
        self.base = Some(base);
        self
    }

    /// Whether the last evaluated top-level value should be echoed.
    pub fn visible(&self) -> bool {
        self.visible
    }

    /// Scope of closures created at top level. Created on first use.
    pub(crate) fn script_env(&mut self) -> Arc<FnEnv> {
        let base = self.base.clone();
        self.script_env.get_or_insert_with(|| FnEnv::new(None, base)).clone()
    }

    /// Freezes the top-level scope of closures created so far with the
    /// current namespace. Later top-level closures get a fresh scope.
    pub fn seal_script_env(&mut self) {
        if let Some(env) = self.script_env.take() {
            env.seal(self.namespace.clone());
        }
    }

    pub(crate) fn warn(&mut self, call: &str, message: &str) {
        self.stdout.push_str(&format!("Warning message:\nIn {call}(): {message}\n"));
    }

    /// `(0..n).map(f)` in deadline-checked batches, after charging `n` cells.
    pub(crate) fn map_checked<T, F>(&mut self, n: usize, f: F) -> LangResult<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.budget.charge(n as u64)?;
        let mut out = Vec::with_capacity(n);
        let mut start = 0;
        while start < n {
            self.budget.check()?;
            let len = CHECK_BATCH.min(n - start);
            out.extend(par::map_range(self.parallelism, len, |i| f(start + i)));
            start += len;
        }
        Ok(out)
    }
}
