//! Searching binary state-indicator vectors for the one the fitness model
//! rates highest; its members are the desired local states.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::mlp::MicroMacroModel;
use crate::error::{Error, Result};
use crate::evolve::{BinarySpace, Evolution, GAConfig, GenerationStats};
use crate::types::{DesiredSource, DesiredStateSet};

/// How an indicator vector is presented to the model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputScaling {
    /// Divided by its popcount, like a state-fraction distribution.
    #[default]
    Normalized,
    /// The raw 0/1 vector.
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub ga: GAConfig,
    /// States that may be selected; `None` allows all.
    pub explored: Option<Vec<bool>>,
    pub scaling: InputScaling,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            ga: GAConfig::default(),
            explored: None,
            scaling: InputScaling::Normalized,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub desired: DesiredStateSet,
    pub fitness: f64,
    pub history: Vec<GenerationStats>,
}

/// Model output for an indicator vector; the empty vector scores `-inf`.
pub fn score_indicator(model: &MicroMacroModel, bits: &[bool], scaling: InputScaling) -> Result<f64> {
    let count = bits.iter().filter(|&&b| b).count();
    if count == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let value = match scaling {
        InputScaling::Normalized => 1.0 / count as f64,
        InputScaling::Raw => 1.0,
    };
    let input: Vec<f64> = bits.iter().map(|&b| if b { value } else { 0.0 }).collect();
    model.forward(&input)
}

/// Total order on candidates: higher score first, then fewer members, then
/// the lexicographically smaller member list.
pub fn compare_candidates(a: (f64, &[bool]), b: (f64, &[bool])) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| {
            let pa = a.1.iter().filter(|&&x| x).count();
            let pb = b.1.iter().filter(|&&x| x).count();
            pa.cmp(&pb)
        })
        .then_with(|| {
            let ma = a.1.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i);
            let mb = b.1.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i);
            ma.cmp(mb)
        })
}

/// Evolves indicator vectors over the allowed states, then polishes the
/// winner by single-state removals, additions and swaps.
pub fn extract_desired_states(model: &MicroMacroModel, opts: &ExtractOptions) -> Result<Extraction> {
    let n = model.n_inputs();
    let allowed = opts.explored.clone().unwrap_or_else(|| vec![true; n]);
    if allowed.len() != n {
        return Err(Error::Shape(format!("explored mask has {} entries for {n} states", allowed.len())));
    }
    let candidates: Vec<usize> = (0..n).filter(|&i| allowed[i]).collect();
    if candidates.is_empty() {
        return Err(Error::EmptyDesiredSet);
    }
    let score = |bits: &Vec<bool>| score_indicator(model, bits, opts.scaling);

    let space = BinarySpace::masked(allowed.clone());
    let singletons: Vec<Vec<bool>> = candidates
        .iter()
        .map(|&i| (0..n).map(|j| j == i).collect())
        .collect();
    let mut evo = Evolution::new(&space, opts.ga.clone(), singletons)?;
    let mut best: Option<(f64, Vec<bool>)> = None;
    let generations = opts.ga.generations.max(1);
    for g in 0..generations {
        evo.evaluate(|bits, _| score(bits))?;
        for (bits, f) in evo.population().iter().zip(evo.fitness()) {
            let f = f.expect("evaluated");
            let better = best
                .as_ref()
                .is_none_or(|(bf, bb)| compare_candidates((f, bits), (*bf, bb)) == Ordering::Less);
            if better {
                best = Some((f, bits.clone()));
            }
        }
        if g + 1 < generations {
            evo.advance(Vec::new());
        }
    }
    let (mut best_f, mut best_bits) = best.expect("population is non-empty");

    loop {
        let mut improved = false;
        let mut neighbors = Vec::new();
        for &i in &candidates {
            let mut b = best_bits.clone();
            b[i] = !b[i];
            neighbors.push(b);
            if best_bits[i] {
                for &j in &candidates {
                    if !best_bits[j] {
                        let mut s = best_bits.clone();
                        s[i] = false;
                        s[j] = true;
                        neighbors.push(s);
                    }
                }
            }
        }
        for b in neighbors {
            let f = score(&b)?;
            if compare_candidates((f, &b), (best_f, &best_bits)) == Ordering::Less {
                best_f = f;
                best_bits = b;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }

    Ok(Extraction {
        desired: DesiredStateSet::from_indicator(&best_bits, DesiredSource::Extracted),
        fitness: best_f,
        history: evo.history().to_vec(),
    })
}
