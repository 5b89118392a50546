//! Local deadlock and livelock screening on a transition model and policy,
//! with PageRank inspection reports.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::pagerank::{pagerank, PageRankOptions};
use crate::transition::{compose_H, patch_dangling, TransitionModel};
use crate::types::{DesiredStateSet, Policy};

/// Edges below this probability are listed as practically unreachable.
pub const DEFAULT_EDGE_CUTOFF: f64 = 1e-6;

/// States whose row of `H` is exactly zero: no action of the policy ever
/// moves a robot out of them.
pub fn static_states(h: &Array2<f64>) -> BTreeSet<usize> {
    static_states_among(h, &vec![true; h.nrows()])
}

/// [`static_states`] restricted to the states marked in `known`.
pub fn static_states_among(h: &Array2<f64>, known: &[bool]) -> BTreeSet<usize> {
    h.rows()
        .into_iter()
        .enumerate()
        .filter(|(i, row)| known[*i] && row.sum() == 0.0)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum DeadlockClass {
    NoDeadlock,
    StopsOnlyInDesired,
    PotentialDeadlock { offenders: Vec<usize> },
}

pub fn classify_deadlock(s_static: &BTreeSet<usize>, desired: &BTreeSet<usize>) -> DeadlockClass {
    if s_static.is_empty() {
        return DeadlockClass::NoDeadlock;
    }
    let offenders: Vec<usize> = s_static.difference(desired).copied().collect();
    if offenders.is_empty() {
        DeadlockClass::StopsOnlyInDesired
    } else {
        DeadlockClass::PotentialDeadlock { offenders }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropResult {
    pub holds: bool,
    /// `(from, to)` pairs with no directed path.
    pub missing_paths: Vec<(usize, usize)>,
    /// States that violate a per-state condition (no escape edge).
    pub failing_states: Vec<usize>,
}

impl PropResult {
    fn from_parts(missing_paths: Vec<(usize, usize)>, failing_states: Vec<usize>) -> Self {
        Self {
            holds: missing_paths.is_empty() && failing_states.is_empty(),
            missing_paths,
            failing_states,
        }
    }
}

/// Reflexive reachability from `source` over edges with weight > 0.
pub fn reachable_from(m: &Array2<f64>, source: usize) -> Vec<bool> {
    let n = m.nrows();
    let mut seen = vec![false; n];
    seen[source] = true;
    let mut queue = VecDeque::from([source]);
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if !seen[j] && m[[i, j]] > 0.0 {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

fn missing_paths(m: &Array2<f64>, sources: &[usize], targets: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for &s in sources {
        let reach = reachable_from(m, s);
        out.extend(targets.iter().filter(|&&t| t != s && !reach[t]).map(|&t| (s, t)));
    }
    out
}

/// Every known state outside the desired set has a path in `graph(H)` to
/// every known desired state.
pub fn check_prop1(h: &Array2<f64>, desired: &BTreeSet<usize>, known: &[bool]) -> PropResult {
    let n = h.nrows();
    let sources: Vec<usize> = (0..n).filter(|&s| known[s] && !desired.contains(&s)).collect();
    let targets: Vec<usize> = desired.iter().copied().filter(|&t| t < n && known[t]).collect();
    PropResult::from_parts(missing_paths(h, &sources, &targets), Vec::new())
}

/// Condition 1: each static, non-desired state has an environment edge to a
/// non-static state. Condition 2: each known non-static state reaches every
/// other known state in `graph(H)`.
pub fn check_prop2(
    h: &Array2<f64>,
    e: &Array2<f64>,
    s_static: &BTreeSet<usize>,
    desired: &BTreeSet<usize>,
    known: &[bool],
) -> (PropResult, PropResult) {
    let n = h.nrows();
    let stuck: Vec<usize> = s_static
        .difference(desired)
        .copied()
        .filter(|&s| !(0..n).any(|j| e[[s, j]] > 0.0 && !s_static.contains(&j)))
        .collect();
    let cond1 = PropResult::from_parts(Vec::new(), stuck);
    let sources: Vec<usize> = (0..n).filter(|&s| known[s] && !s_static.contains(&s)).collect();
    let targets: Vec<usize> = (0..n).filter(|&t| known[t]).collect();
    let cond2 = PropResult::from_parts(missing_paths(h, &sources, &targets), Vec::new());
    (cond1, cond2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageRankInspection {
    /// PageRank of the (dangling-patched) policy graph `H`.
    pub active: Vec<f64>,
    /// PageRank of the (dangling-patched) environment graph `E`.
    pub env: Vec<f64>,
    /// `active - reference active`, zero without a reference.
    pub delta_active: Vec<f64>,
    pub delta_env: Vec<f64>,
}

fn pr_of(m: &Array2<f64>) -> Result<Vec<f64>> {
    Ok(pagerank(&patch_dangling(m), &PageRankOptions::default())?.values)
}

/// Per-state PageRank of the policy and environment graphs, optionally
/// against a reference model and policy.
pub fn pagerank_inspection(
    model: &TransitionModel,
    policy: &Policy,
    reference: Option<(&TransitionModel, &Policy)>,
) -> Result<PageRankInspection> {
    let active = pr_of(&compose_H(model, policy)?)?;
    let env = pr_of(&model.env_matrix())?;
    let (ref_active, ref_env) = match reference {
        Some((m, p)) => (pr_of(&compose_H(m, p)?)?, pr_of(&m.env_matrix())?),
        None => (active.clone(), env.clone()),
    };
    if ref_active.len() != active.len() {
        return Err(Error::Shape("reference model has a different state count".into()));
    }
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(PageRankInspection {
        delta_active: diff(&active, &ref_active),
        delta_env: diff(&env, &ref_env),
        active,
        env,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub n_states: usize,
    pub desired: Vec<usize>,
    pub s_static: Vec<usize>,
    /// States with no outgoing observation; excluded from every check.
    pub unobserved: Vec<usize>,
    pub deadlock: DeadlockClass,
    pub prop1: PropResult,
    pub prop2_1: PropResult,
    pub prop2_2: PropResult,
    pub pagerank: PageRankInspection,
    /// Policy-graph edges with probability in `(0, cutoff)`.
    pub weak_edges: Vec<(usize, usize)>,
    pub notes: Vec<String>,
}

/// Runs every check for one (model, policy, desired set) triple.
pub fn verify(model: &TransitionModel, policy: &Policy, desired: &DesiredStateSet) -> Result<VerificationReport> {
    verify_with_cutoff(model, policy, desired, DEFAULT_EDGE_CUTOFF)
}

pub fn verify_with_cutoff(
    model: &TransitionModel,
    policy: &Policy,
    desired: &DesiredStateSet,
    cutoff: f64,
) -> Result<VerificationReport> {
    if desired.is_empty() {
        return Err(Error::EmptyDesiredSet);
    }
    let n = model.n_states();
    if let Some(&s) = desired.members().iter().find(|&&s| s >= n) {
        return Err(Error::StateOutOfRange { index: s, n_states: n });
    }
    let h = compose_H(model, policy)?;
    let e = model.env_matrix();
    let known = model.observed_states();
    let des = desired.members().clone();
    let s_static = static_states_among(&h, &known);
    let deadlock = classify_deadlock(&s_static, &des);
    let prop1 = check_prop1(&h, &des, &known);
    let (prop2_1, prop2_2) = check_prop2(&h, &e, &s_static, &des, &known);
    let unobserved: Vec<usize> = (0..n).filter(|&s| !known[s]).collect();
    let mut weak_edges = Vec::new();
    for ((i, j), &v) in h.indexed_iter() {
        if v > 0.0 && v < cutoff {
            weak_edges.push((i, j));
        }
    }
    let mut notes = Vec::new();
    if !unobserved.is_empty() {
        notes.push(format!("no information on states {}", fmt_set(&unobserved)));
    }
    let missing_desired: Vec<usize> = des.iter().copied().filter(|&s| !known[s]).collect();
    if !missing_desired.is_empty() {
        notes.push(format!("desired states never left in the data: {}", fmt_set(&missing_desired)));
    }
    Ok(VerificationReport {
        n_states: n,
        desired: des.into_iter().collect(),
        s_static: s_static.into_iter().collect(),
        unobserved,
        deadlock,
        prop1,
        prop2_1,
        prop2_2,
        pagerank: pagerank_inspection(model, policy, None)?,
        weak_edges,
        notes,
    })
}

fn fmt_set(items: &[usize]) -> String {
    let inner: Vec<String> = items.iter().map(|s| s.to_string()).collect();
    format!("{{{}}}", inner.join(", "))
}

/// Groups `(from, to)` pairs as `(from, {to, ...})`.
fn fmt_missing(pairs: &[(usize, usize)]) -> String {
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for &(f, t) in pairs {
        match groups.last_mut() {
            Some((g, ts)) if *g == f => ts.push(t),
            _ => groups.push((f, vec![t])),
        }
    }
    groups
        .iter()
        .map(|(f, ts)| format!("({f}, {})", fmt_set(ts)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn fmt_prop(p: &PropResult) -> String {
    if p.holds {
        return "True".into();
    }
    let mut s = "False".to_string();
    if !p.missing_paths.is_empty() {
        let _ = write!(s, "  missing paths: {}", fmt_missing(&p.missing_paths));
    }
    if !p.failing_states.is_empty() {
        let _ = write!(s, "  no escape from: {}", fmt_set(&p.failing_states));
    }
    s
}

impl VerificationReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let deadlock = match &self.deadlock {
            DeadlockClass::NoDeadlock => "no deadlock".to_string(),
            DeadlockClass::StopsOnlyInDesired => "stops only in desired states".to_string(),
            DeadlockClass::PotentialDeadlock { offenders } => {
                format!("potential deadlock in {}", fmt_set(offenders))
            }
        };
        let rows = [
            ("S_des", fmt_set(&self.desired)),
            ("S_static", if self.s_static.is_empty() { "{}".into() } else { fmt_set(&self.s_static) }),
            ("Deadlock", deadlock),
            ("P 1", fmt_prop(&self.prop1)),
            ("P 2.1", fmt_prop(&self.prop2_1)),
            ("P 2.2", fmt_prop(&self.prop2_2)),
        ];
        let _ = writeln!(out, "{:<10} Result", "Condition");
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<10} {v}");
        }
        for note in &self.notes {
            let _ = writeln!(out, "{:<10} {note}", "Note");
        }
        if !self.weak_edges.is_empty() {
            let pairs: Vec<String> = self.weak_edges.iter().map(|(i, j)| format!("{i}->{j}")).collect();
            let _ = writeln!(out, "{:<10} practically unreachable edges: {}", "Note", pairs.join(", "));
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<6} {:>12} {:>12}", "state", "PR(H)", "PR(E)");
        for s in 0..self.n_states {
            let _ = writeln!(out, "{s:<6} {:>12.6} {:>12.6}", self.pagerank.active[s], self.pagerank.env[s]);
        }
        out
    }

    /// Writes `verify.json` and `verify.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        io::write_json(&dir.join("verify.json"), self)?;
        io::write_text(&dir.join("verify.txt"), &self.render_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn static_rows() {
        let h = array![[0.0, 1.0], [0.0, 0.0]];
        assert_eq!(static_states(&h), set(&[1]));
        assert!(static_states(&array![[0.5, 0.5], [1.0, 0.0]]).is_empty());
    }

    #[test]
    fn deadlock_classes() {
        assert_eq!(classify_deadlock(&set(&[]), &set(&[1])), DeadlockClass::NoDeadlock);
        assert_eq!(classify_deadlock(&set(&[1]), &set(&[1, 2])), DeadlockClass::StopsOnlyInDesired);
        let c = classify_deadlock(&set(&[0, 2, 3, 4, 6, 9, 12]), &set(&[12, 13, 15, 16, 17, 18, 19, 20]));
        assert_eq!(
            c,
            DeadlockClass::PotentialDeadlock {
                offenders: vec![0, 2, 3, 4, 6, 9]
            }
        );
    }

    #[test]
    fn complete_graph_satisfies_prop1() {
        let h = Array2::from_elem((4, 4), 0.25);
        assert!(check_prop1(&h, &set(&[2]), &[true; 4]).holds);
    }

    #[test]
    fn text_report_groups_missing_paths() {
        let p = PropResult::from_parts(vec![(0, 3), (0, 4), (0, 5)], Vec::new());
        assert_eq!(fmt_prop(&p), "False  missing paths: (0, {3, 4, 5})");
    }
}
