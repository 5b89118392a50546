//! Run logs: 2 Hz fitness and state series plus every local-state transition.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::arena::Arena;
use super::config::TaskConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::types::{StateDistribution, TaskId};

/// What caused a local-state transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cause {
    Action(usize),
    Environment,
}

impl fmt::Display for Cause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cause::Action(k) => write!(f, "a{k}"),
            Cause::Environment => f.write_str("env"),
        }
    }
}

impl FromStr for Cause {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "env" {
            return Ok(Cause::Environment);
        }
        s.strip_prefix('a')
            .and_then(|k| k.parse().ok())
            .map(Cause::Action)
            .ok_or_else(|| format!("unknown transition cause `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    pub time: f64,
    pub robot: usize,
    pub from: usize,
    pub to: usize,
    pub cause: Cause,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub task: TaskId,
    pub n_robots: usize,
    pub seed: u64,
    pub policy_hash: String,
    pub config: TaskConfig,
    pub arena: Arena,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub meta: RunMeta,
    /// `(t, F_g(t))` at the logging rate, t = 0 included.
    pub fitness: Vec<(f64, f64)>,
    /// `(t, local state of every robot)`, aligned with `fitness`.
    pub states: Vec<(f64, Vec<usize>)>,
    pub events: Vec<TransitionEvent>,
}

impl RunLog {
    pub fn task(&self) -> TaskId {
        self.meta.task
    }

    pub fn n_states(&self) -> usize {
        self.meta.config.n_states()
    }

    pub fn final_fitness(&self) -> f64 {
        self.fitness.last().map_or(f64::NAN, |&(_, f)| f)
    }

    /// State distribution (fractions) at every logged sample.
    pub fn distributions(&self) -> Result<Vec<StateDistribution>> {
        let n = self.n_states();
        self.states.iter().map(|(_, s)| StateDistribution::fractions(s, n)).collect()
    }

    /// Hex SHA-256 over the full serialized contents.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.meta).expect("meta serializes"));
        for &(t, f) in &self.fitness {
            h.update(t.to_le_bytes());
            h.update(f.to_le_bytes());
        }
        for (t, states) in &self.states {
            h.update(t.to_le_bytes());
            for &s in states {
                h.update((s as u64).to_le_bytes());
            }
        }
        for e in &self.events {
            h.update(e.time.to_le_bytes());
            h.update((e.robot as u64).to_le_bytes());
            h.update((e.from as u64).to_le_bytes());
            h.update((e.to as u64).to_le_bytes());
            h.update(e.cause.to_string().as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        io::ensure_dir(dir)?;
        let mut w = io::csv_writer(&dir.join("fitness.csv"))?;
        w.write_record(["t", "F_g"])?;
        for &(t, f) in &self.fitness {
            w.write_record([io::fmt_f64(t), io::fmt_f64(f)])?;
        }
        w.flush().map_err(|e| Error::io(dir.join("fitness.csv"), e))?;

        let mut w = io::csv_writer(&dir.join("states.csv"))?;
        w.write_record(["t", "robot_id", "state"])?;
        for (t, states) in &self.states {
            for (robot, s) in states.iter().enumerate() {
                w.write_record([io::fmt_f64(*t), robot.to_string(), s.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(dir.join("states.csv"), e))?;

        write_events(&dir.join("events.csv"), None, &self.events)?;
        io::write_json(&dir.join("meta.json"), &self.meta)
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let meta: RunMeta = io::read_json(&dir.join("meta.json"))?;

        let path = dir.join("fitness.csv");
        let mut fitness = Vec::new();
        for rec in io::csv_reader(&path)?.records() {
            let rec = rec?;
            fitness.push((io::parse_f64(&path, &rec[0])?, io::parse_f64(&path, &rec[1])?));
        }

        let path = dir.join("states.csv");
        let mut states: Vec<(f64, Vec<usize>)> = Vec::new();
        for rec in io::csv_reader(&path)?.records() {
            let rec = rec?;
            let t = io::parse_f64(&path, &rec[0])?;
            let s = io::parse_usize(&path, &rec[2])?;
            match states.last_mut() {
                Some((last_t, row)) if *last_t == t => row.push(s),
                _ => states.push((t, vec![s])),
            }
        }

        let events = read_events(&dir.join("events.csv"))?.into_iter().map(|(_, e)| e).collect();
        Ok(Self {
            meta,
            fitness,
            states,
            events,
        })
    }
}

/// Writes `events.csv`; with `run_id` set, a leading run column is added.
pub fn write_events(path: &Path, run_id: Option<usize>, events: &[TransitionEvent]) -> Result<()> {
    let mut w = io::csv_writer(path)?;
    write_event_rows(&mut w, run_id, events, true)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_event_rows<W: std::io::Write>(
    w: &mut csv::Writer<W>,
    run_id: Option<usize>,
    events: &[TransitionEvent],
    header: bool,
) -> Result<()> {
    if header {
        match run_id {
            Some(_) => w.write_record(["run_id", "t", "robot_id", "from", "to", "cause"])?,
            None => w.write_record(["t", "robot_id", "from", "to", "cause"])?,
        }
    }
    for e in events {
        let mut row = Vec::with_capacity(6);
        if let Some(id) = run_id {
            row.push(id.to_string());
        }
        row.extend([
            io::fmt_f64(e.time),
            e.robot.to_string(),
            e.from.to_string(),
            e.to.to_string(),
            e.cause.to_string(),
        ]);
        w.write_record(&row)?;
    }
    Ok(())
}

/// Reads an events file with or without a leading `run_id` column.
pub fn read_events(path: &Path) -> Result<Vec<(usize, TransitionEvent)>> {
    let mut reader = io::csv_reader(path)?;
    let with_run = reader.headers()?.get(0) == Some("run_id");
    let off = usize::from(with_run);
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let run = if with_run { io::parse_usize(path, &rec[0])? } else { 0 };
        let cause = rec[off + 4].parse().map_err(|reason| Error::Parse {
            path: path.to_path_buf(),
            reason,
        })?;
        out.push((
            run,
            TransitionEvent {
                time: io::parse_f64(path, &rec[off])?,
                robot: io::parse_usize(path, &rec[off + 1])?,
                from: io::parse_usize(path, &rec[off + 2])?,
                to: io::parse_usize(path, &rec[off + 3])?,
                cause,
            },
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cause_round_trips_through_text() {
        for c in [Cause::Environment, Cause::Action(0), Cause::Action(7)] {
            assert_eq!(c.to_string().parse::<Cause>().unwrap(), c);
        }
        assert!("x1".parse::<Cause>().is_err());
    }
}
