//! Shared domain types: task identity, local state and action spaces,
//! tabular stochastic policies, state distributions and desired-state sets.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tolerance used for every row-stochasticity check.
pub const PROB_TOL: f64 = 1e-9;

/// The single generator type used by every seeded component.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child seed from `master` for stream `index`
/// (SplitMix64 finalizer over the combined words).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskId {
    /// Aggregation with omnidirectional neighbor counting.
    A,
    /// Aggregation with sector sensors and constant forward speed.
    B1,
    /// Aggregation with sector sensors and turn-then-straight motion.
    B2,
    /// Foraging with nest food-difference sensing.
    C,
}

impl TaskId {
    pub const ALL: [TaskId; 4] = [TaskId::A, TaskId::B1, TaskId::B2, TaskId::C];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::A => "A",
            TaskId::B1 => "B1",
            TaskId::B2 => "B2",
            TaskId::C => "C",
        }
    }

    /// Aggregation tasks share the cluster-ratio fitness.
    pub fn is_aggregation(self) -> bool {
        !matches!(self, TaskId::C)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(TaskId::A),
            "B1" => Ok(TaskId::B1),
            "B2" => Ok(TaskId::B2),
            "C" => Ok(TaskId::C),
            other => Err(Error::Config(format!("unknown task `{other}` (expected A, B1, B2 or C)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalStateSpace {
    pub task: TaskId,
    labels: Vec<String>,
}

impl LocalStateSpace {
    pub fn new(task: TaskId, labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Config("a local state space needs at least one state".into()));
        }
        Ok(Self { task, labels })
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }
}

/// Semantic meaning of one action index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Move,
    Stay,
    Explore,
    /// Turn rate in rad/s.
    Turn(f64),
}

impl Action {
    /// Whether taking this action can itself cause a local-state transition.
    pub fn is_active(self) -> bool {
        !matches!(self, Action::Stay)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub task: TaskId,
    values: Vec<Action>,
}

impl ActionSpace {
    pub fn new(task: TaskId, values: Vec<Action>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("an action space needs at least one action".into()));
        }
        Ok(Self { task, values })
    }

    pub fn size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Action] {
        &self.values
    }

    pub fn get(&self, index: usize) -> Option<Action> {
        self.values.get(index).copied()
    }
}

/// Row-stochastic N×M table: probability of each action given a local state.
///
/// For the act/stay tasks (A and C) column 0 holds the probability of acting
/// (move or explore) and column 1 its complement.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    table: Vec<f64>,
}

impl Policy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(Error::Shape("policy rows have different lengths".into()));
        }
        Self::from_flat(n_states, n_actions, rows.into_iter().flatten().collect())
    }

    pub fn from_flat(n_states: usize, n_actions: usize, table: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Shape(format!("policy shape {n_states}x{n_actions} is empty")));
        }
        if table.len() != n_states * n_actions {
            return Err(Error::Shape(format!(
                "policy table has {} entries, expected {}x{}",
                table.len(),
                n_states,
                n_actions
            )));
        }
        for (row, chunk) in table.chunks(n_actions).enumerate() {
            let sum: f64 = chunk.iter().sum();
            let in_range = chunk.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p));
            if !in_range || (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::NotStochastic { row, sum });
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            table,
        })
    }

    /// Two-column policy from per-state probabilities of acting.
    pub fn from_act_probabilities(act: &[f64]) -> Result<Self> {
        Self::new(act.iter().map(|&p| vec![p, 1.0 - p]).collect())
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        Self {
            n_states,
            n_actions,
            table: vec![p; n_states * n_actions],
        }
    }

    /// Each row drawn as M uniform(0,1) values, then normalized.
    pub fn uniform_random(space: &LocalStateSpace, actions: &ActionSpace, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        Self::random_with(space.size(), actions.size(), &mut rng)
    }

    pub fn random_with<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        let mut table = Vec::with_capacity(n_states * n_actions);
        for _ in 0..n_states {
            let row: Vec<f64> = (0..n_actions).map(|_| rng.random::<f64>()).collect();
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                table.extend(row.iter().map(|v| v / sum));
            } else {
                table.extend(std::iter::repeat_n(1.0 / n_actions as f64, n_actions));
            }
        }
        Self {
            n_states,
            n_actions,
            table,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.table
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.table.chunks(self.n_actions)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn row(&self, state: usize) -> Result<&[f64]> {
        if state >= self.n_states {
            return Err(Error::StateOutOfRange {
                index: state,
                n_states: self.n_states,
            });
        }
        Ok(&self.table[state * self.n_actions..(state + 1) * self.n_actions])
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.table[state * self.n_actions + action]
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> Result<usize> {
        Ok(sample_index(self.row(state)?, rng))
    }

    pub fn check_shape(&self, n_states: usize, n_actions: usize) -> Result<()> {
        if self.n_states != n_states || self.n_actions != n_actions {
            return Err(Error::Shape(format!(
                "policy is {}x{}, task expects {}x{}",
                self.n_states, self.n_actions, n_states, n_actions
            )));
        }
        Ok(())
    }

    /// Hex SHA-256 over the little-endian bytes of the table.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n_states as u64).to_le_bytes());
        hasher.update((self.n_actions as u64).to_le_bytes());
        for v in &self.table {
            hasher.update(v.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    pub fn to_document(&self, task: TaskId) -> PolicyDocument {
        PolicyDocument {
            task,
            n_states: self.n_states,
            n_actions: self.n_actions,
            table: self.to_rows(),
        }
    }

    pub fn save_json(&self, task: TaskId, path: &Path) -> Result<()> {
        crate::io::write_json(path, &self.to_document(task))
    }

    pub fn load_json(path: &Path) -> Result<(TaskId, Policy)> {
        let doc: PolicyDocument = crate::io::read_json(path)?;
        doc.into_policy()
    }
}

/// Inverse-CDF draw from a probability row. Zero-probability entries are never chosen.
pub fn sample_index<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, &p) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cumulative += p;
        last_positive = i;
        if u < cumulative {
            return i;
        }
    }
    last_positive
}

/// On-disk policy format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyDocument {
    pub task: TaskId,
    pub n_states: usize,
    pub n_actions: usize,
    pub table: Vec<Vec<f64>>,
}

impl PolicyDocument {
    pub fn into_policy(self) -> Result<(TaskId, Policy)> {
        let policy = Policy::new(self.table)?;
        policy.check_shape(self.n_states, self.n_actions)?;
        Ok((self.task, policy))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Fractions,
    Counts,
}

/// Distribution of local states across a swarm at one instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    values: Vec<f64>,
    normalization: Normalization,
}

impl StateDistribution {
    pub fn counts(states: &[usize], n_states: usize) -> Result<Self> {
        let mut values = vec![0.0; n_states];
        for &s in states {
            if s >= n_states {
                return Err(Error::StateOutOfRange { index: s, n_states });
            }
            values[s] += 1.0;
        }
        Ok(Self {
            values,
            normalization: Normalization::Counts,
        })
    }

    pub fn fractions(states: &[usize], n_states: usize) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Config("state distribution of an empty swarm".into()));
        }
        let mut dist = Self::counts(states, n_states)?;
        let n = states.len() as f64;
        dist.values.iter_mut().for_each(|v| *v /= n);
        dist.normalization = Normalization::Fractions;
        Ok(dist)
    }

    pub fn from_values(values: Vec<f64>, normalization: Normalization) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("state distribution entries must be finite and non-negative".into()));
        }
        if normalization == Normalization::Fractions {
            let sum: f64 = values.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::NotStochastic { row: 0, sum });
            }
        }
        Ok(Self { values, normalization })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesiredSource {
    Extracted,
    Manual,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DesiredStateSet {
    members: BTreeSet<usize>,
    pub source: DesiredSource,
}

impl DesiredStateSet {
    pub fn new(members: impl IntoIterator<Item = usize>, n_states: usize, source: DesiredSource) -> Result<Self> {
        let members: BTreeSet<usize> = members.into_iter().collect();
        if let Some(&bad) = members.iter().find(|&&m| m >= n_states) {
            return Err(Error::StateOutOfRange { index: bad, n_states });
        }
        Ok(Self { members, source })
    }

    pub fn from_indicator(bits: &[bool], source: DesiredSource) -> Self {
        Self {
            members: bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect(),
            source,
        }
    }

    pub fn members(&self) -> &BTreeSet<usize> {
        &self.members
    }

    pub fn contains(&self, state: usize) -> bool {
        self.members.contains(&state)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn indicator(&self, n_states: usize) -> Vec<bool> {
        (0..n_states).map(|s| self.members.contains(&s)).collect()
    }

    pub fn save_json(&self, task: TaskId, path: &Path) -> Result<()> {
        crate::io::write_json(
            path,
            &DesiredDocument {
                task,
                desired: self.members.iter().copied().collect(),
            },
        )
    }

    pub fn load_json(path: &Path, n_states: usize) -> Result<(TaskId, Self)> {
        let doc: DesiredDocument = crate::io::read_json(path)?;
        Ok((doc.task, Self::new(doc.desired, n_states, DesiredSource::Manual)?))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesiredDocument {
    pub task: TaskId,
    pub desired: Vec<usize>,
}
