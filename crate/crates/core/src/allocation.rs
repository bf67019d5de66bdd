//! Per-script slot allocation over concave saturation curves: the greedy
//! marginal solver, three ablation policies and an exhaustive oracle.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AllocationError {
    #[error("curve for {script} decreases at slot {slot}")]
    Decreasing { script: String, slot: usize },
    #[error("curve for {script} is not concave at slot {slot}")]
    NotConcave { script: String, slot: usize },
    #[error("budget {budget} exceeds total ceiling {capacity}")]
    Infeasible { budget: usize, capacity: usize },
    #[error("duplicate script {0}")]
    DuplicateScript(String),
}

/// Cumulative savings for one script: `cumulative[k - 1]` is the saving
/// from the top `k` candidates. The ceiling is the curve length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaturationCurve {
    pub script: String,
    pub cumulative: Vec<u64>,
}

impl SaturationCurve {
    /// Validates a cumulative sequence (non-decreasing, concave).
    pub fn new(script: impl Into<String>, cumulative: Vec<u64>) -> Result<Self, AllocationError> {
        let script = script.into();
        let mut prev_total = 0;
        let mut prev_gain = u64::MAX;
        for (k, &c) in cumulative.iter().enumerate() {
            let gain = c.checked_sub(prev_total).ok_or_else(|| AllocationError::Decreasing {
                script: script.clone(),
                slot: k + 1,
            })?;
            if gain > prev_gain {
                return Err(AllocationError::NotConcave { script, slot: k + 1 });
            }
            prev_total = c;
            prev_gain = gain;
        }
        Ok(SaturationCurve { script, cumulative })
    }

    /// Sorts candidate fire counts descending and accumulates them.
    pub fn from_fires(script: impl Into<String>, fires: impl IntoIterator<Item = u64>) -> Self {
        let mut fires: Vec<u64> = fires.into_iter().collect();
        fires.sort_unstable_by(|a, b| b.cmp(a));
        let mut total = 0u64;
        let cumulative = fires
            .into_iter()
            .map(|f| {
                total += f;
                total
            })
            .collect();
        SaturationCurve {
            script: script.into(),
            cumulative,
        }
    }

    pub fn ceiling(&self) -> usize {
        self.cumulative.len()
    }

    /// `c(x)`, with `c(0) = 0`.
    pub fn value(&self, x: usize) -> u64 {
        if x == 0 {
            0
        } else {
            self.cumulative[x - 1]
        }
    }

    /// `c(x + 1) - c(x)`, or `None` at the ceiling.
    pub fn marginal(&self, x: usize) -> Option<u64> {
        (x < self.ceiling()).then(|| self.value(x + 1) - self.value(x))
    }
}

/// Builds the curve from fires already ranked (or not) by the caller.
pub fn build_curve(script: impl Into<String>, fires: impl IntoIterator<Item = u64>) -> SaturationCurve {
    SaturationCurve::from_fires(script, fires)
}

/// Per-script side information used only by the ablation policies.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScriptStats {
    /// Baseline tokens per word; higher means worse served.
    pub fertility: f64,
    /// Share of the audit corpus, in `[0, 1]`.
    pub corpus_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    pub curves: Vec<SaturationCurve>,
    #[serde(default)]
    pub stats: Vec<ScriptStats>,
    pub budget: usize,
}

impl AllocationProblem {
    pub fn new(curves: Vec<SaturationCurve>, budget: usize) -> Result<Self, AllocationError> {
        for (i, c) in curves.iter().enumerate() {
            if curves[..i].iter().any(|d| d.script == c.script) {
                return Err(AllocationError::DuplicateScript(c.script.clone()));
            }
            SaturationCurve::new(c.script.clone(), c.cumulative.clone())?;
        }
        Ok(AllocationProblem {
            curves,
            stats: Vec::new(),
            budget,
        })
    }

    pub fn with_stats(mut self, stats: Vec<ScriptStats>) -> Self {
        self.stats = stats;
        self
    }

    pub fn capacity(&self) -> usize {
        self.curves.iter().map(SaturationCurve::ceiling).sum()
    }

    pub fn savings(&self, x: &[usize]) -> u64 {
        self.curves.iter().zip(x).map(|(c, &k)| c.value(k)).sum()
    }

    fn stat(&self, i: usize) -> ScriptStats {
        self.stats.get(i).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Greedy,
    WorstScriptFirst,
    FrequencyOnly,
    Equal,
}

impl Policy {
    pub const ALL: [Policy; 4] = [
        Policy::Greedy,
        Policy::WorstScriptFirst,
        Policy::FrequencyOnly,
        Policy::Equal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Greedy => "greedy",
            Policy::WorstScriptFirst => "worst-script-first",
            Policy::FrequencyOnly => "frequency-only",
            Policy::Equal => "equal",
        }
    }

    pub fn parse(s: &str) -> Option<Policy> {
        Policy::ALL.into_iter().find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub policy: Policy,
    pub scripts: Vec<String>,
    pub x: Vec<usize>,
    pub total_savings: u64,
}

impl AllocationResult {
    pub fn slots_used(&self) -> usize {
        self.x.iter().sum()
    }

    pub fn get(&self, script: &str) -> usize {
        self.scripts.iter().position(|s| s == script).map_or(0, |i| self.x[i])
    }
}

/// Solves the allocation under `policy`. Only greedy rejects a budget above
/// total capacity; the ablations report what they managed to place.
pub fn allocate(problem: &AllocationProblem, policy: Policy) -> Result<AllocationResult, AllocationError> {
    let x = match policy {
        Policy::Greedy => greedy(problem)?,
        Policy::WorstScriptFirst => worst_script_first(problem),
        Policy::FrequencyOnly => frequency_only(problem),
        Policy::Equal => equal(problem),
    };
    Ok(AllocationResult {
        policy,
        scripts: problem.curves.iter().map(|c| c.script.clone()).collect(),
        total_savings: problem.savings(&x),
        x,
    })
}

/// Next slot to the largest marginal; ties go to the lower current count,
/// then the lexicographically smaller script name.
fn greedy(p: &AllocationProblem) -> Result<Vec<usize>, AllocationError> {
    let capacity = p.capacity();
    if p.budget > capacity {
        return Err(AllocationError::Infeasible {
            budget: p.budget,
            capacity,
        });
    }
    let mut x = vec![0usize; p.curves.len()];
    for _ in 0..p.budget {
        let best = (0..p.curves.len())
            .filter_map(|i| p.curves[i].marginal(x[i]).map(|m| (i, m)))
            .max_by(|&(i, mi), &(j, mj)| {
                mi.cmp(&mj)
                    .then_with(|| x[j].cmp(&x[i]))
                    .then_with(|| p.curves[j].script.cmp(&p.curves[i].script))
            })
            .map(|(i, _)| i)
            .expect("budget within capacity");
        x[best] += 1;
    }
    Ok(x)
}

/// Scripts by descending baseline fertility, each filled to its ceiling in
/// turn until the budget runs out. Curve shape is ignored.
fn worst_script_first(p: &AllocationProblem) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.curves.len()).collect();
    order.sort_by(|&a, &b| {
        p.stat(b)
            .fertility
            .total_cmp(&p.stat(a).fertility)
            .then_with(|| p.curves[a].script.cmp(&p.curves[b].script))
    });
    let mut x = vec![0; p.curves.len()];
    let mut left = p.budget;
    for i in order {
        let take = left.min(p.curves[i].ceiling());
        x[i] = take;
        left -= take;
    }
    x
}

/// Slots proportional to corpus share, floored and clamped at each ceiling.
/// Slots a saturated script cannot absorb are not redistributed.
fn frequency_only(p: &AllocationProblem) -> Vec<usize> {
    let total: f64 = (0..p.curves.len()).map(|i| p.stat(i).corpus_share.max(0.0)).sum();
    (0..p.curves.len())
        .map(|i| {
            let share = if total > 0.0 {
                p.stat(i).corpus_share.max(0.0) / total
            } else {
                1.0 / p.curves.len() as f64
            };
            // non-negative, so the cast floors
            let want = (share * p.budget as f64) as usize;
            want.min(p.curves[i].ceiling())
        })
        .collect()
}

/// `floor(budget / |S|)` each, clamped; the remainder is left unused.
fn equal(p: &AllocationProblem) -> Vec<usize> {
    if p.curves.is_empty() {
        return Vec::new();
    }
    let each = p.budget / p.curves.len();
    p.curves.iter().map(|c| each.min(c.ceiling())).collect()
}

/// Exhaustive maximum of the objective under `Σx = budget`, `x ≤ K`.
/// Exponential; meant for small instances.
pub fn exhaustive_optimum(problem: &AllocationProblem) -> Option<u64> {
    fn go(curves: &[SaturationCurve], left: usize) -> Option<u64> {
        match curves.split_first() {
            None => (left == 0).then_some(0),
            Some((c, rest)) => (0..=left.min(c.ceiling()))
                .filter_map(|k| go(rest, left - k).map(|v| v + c.value(k)))
                .max(),
        }
    }
    go(&problem.curves, problem.budget)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub policy: Policy,
    pub slots_used: usize,
    pub total_savings: u64,
    /// Percent difference to greedy, `(p - g) / g * 100`.
    pub delta_pct: f64,
}

/// All four policies, greedy first.
pub fn compare_policies(problem: &AllocationProblem) -> Result<Vec<PolicyRow>, AllocationError> {
    let base = allocate(problem, Policy::Greedy)?.total_savings;
    Policy::ALL
        .into_iter()
        .map(|policy| {
            let r = allocate(problem, policy)?;
            let delta_pct = if base == 0 {
                0.0
            } else {
                (r.total_savings as f64 - base as f64) / base as f64 * 100.0
            };
            Ok(PolicyRow {
                policy,
                slots_used: r.slots_used(),
                total_savings: r.total_savings,
                delta_pct,
            })
        })
        .collect()
}

/// True when no single-slot transfer between two scripts would raise the
/// total.
pub fn is_exchange_stable(problem: &AllocationProblem, x: &[usize]) -> bool {
    let base = problem.savings(x);
    let n = x.len();
    for from in 0..n {
        for to in 0..n {
            if from == to || x[from] == 0 || x[to] >= problem.curves[to].ceiling() {
                continue;
            }
            let mut y = x.to_vec();
            y[from] -= 1;
            y[to] += 1;
            if problem.savings(&y).cmp(&base) == Ordering::Greater {
                return false;
            }
        }
    }
    true
}
