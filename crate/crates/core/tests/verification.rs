//! Hand-built models with known flaws, and the counterexamples the checks
//! must report for them.

mod common;

use std::collections::BTreeSet;

use common::*;
use swarm_synth::evolve::PolicySpace;
use swarm_synth::evolve::GenomeSpace;
use swarm_synth::sim::Cause::{Action, Environment};
use swarm_synth::verify::{classify_deadlock, verify, DeadlockClass};
use swarm_synth::{rng_from_seed, DesiredSource, DesiredStateSet, Policy};

fn set(v: &[usize]) -> BTreeSet<usize> {
    v.iter().copied().collect()
}

fn desired(v: impl IntoIterator<Item = usize>, n: usize) -> DesiredStateSet {
    DesiredStateSet::new(v, n, DesiredSource::Manual).unwrap()
}

#[test]
fn planted_deadlock_is_reported_with_counterexamples() {
    // 0 -> 1 is a dead end: state 1 is only ever left by the environment.
    let m = model_from(
        4,
        2,
        &[
            (0, 1, Action(0), 5),
            (2, 3, Action(0), 5),
            (3, 0, Action(0), 5),
            (1, 0, Environment, 5),
        ],
    );
    let r = verify(&m, &Policy::uniform(4, 2), &desired([3], 4)).unwrap();
    assert_eq!(r.s_static, vec![1]);
    assert_eq!(r.deadlock, DeadlockClass::PotentialDeadlock { offenders: vec![1] });
    assert!(!r.prop1.holds);
    assert_eq!(r.prop1.missing_paths, vec![(0, 3), (1, 3)]);
    assert!(r.prop2_1.holds);
    assert!(!r.prop2_2.holds);
    assert_eq!(r.prop2_2.missing_paths, vec![(0, 2), (0, 3), (3, 2)]);
    assert!(r.unobserved.is_empty());
}

#[test]
fn static_state_without_environment_escape_fails_first_condition() {
    let m = model_from(
        4,
        2,
        &[
            (0, 1, Action(0), 5),
            (2, 3, Action(0), 5),
            (3, 0, Action(0), 5),
            (1, 2, Action(0), 5),
            (1, 3, Environment, 1),
        ],
    );
    // the policy never takes action 0 in state 1, so state 1 is static; its only
    // environment edge leads to the non-static state 3
    let p = Policy::new(vec![vec![0.5, 0.5], vec![0.0, 1.0], vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
    let r = verify(&m, &p, &desired([3], 4)).unwrap();
    assert_eq!(r.s_static, vec![1]);
    assert!(r.prop2_1.holds);

    let stuck = model_from(
        4,
        2,
        &[
            (0, 1, Action(0), 5),
            (2, 3, Action(0), 5),
            (3, 0, Action(0), 5),
            (1, 2, Action(0), 5),
        ],
    );
    let r = verify(&stuck, &p, &desired([3], 4)).unwrap();
    assert!(!r.prop2_1.holds);
    assert_eq!(r.prop2_1.failing_states, vec![1]);
}

#[test]
fn planted_missing_path_is_reported() {
    // two islands {0, 1} and {2, 3}; the desired state sits in the second
    let m = model_from(
        4,
        2,
        &[
            (0, 1, Action(0), 3),
            (1, 0, Action(1), 3),
            (2, 3, Action(0), 3),
            (3, 2, Action(1), 3),
        ],
    );
    let r = verify(&m, &Policy::uniform(4, 2), &desired([2], 4)).unwrap();
    assert!(r.s_static.is_empty());
    assert_eq!(r.deadlock, DeadlockClass::NoDeadlock);
    assert_eq!(r.prop1.missing_paths, vec![(0, 2), (1, 2)]);
    assert_eq!(r.prop2_2.missing_paths, vec![(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (2, 1), (3, 0), (3, 1)]);
}

#[test]
fn fully_connected_floored_models_pass_every_check() {
    for seed in 0..20 {
        let n = 4 + seed as usize % 10;
        let m = dense_random_model(n, 3, seed);
        let p = PolicySpace::new(n, 3, 0.05).unwrap().random(&mut rng_from_seed(seed));
        let r = verify(&m, &p, &desired([seed as usize % n], n)).unwrap();
        assert_eq!(r.deadlock, DeadlockClass::NoDeadlock);
        assert!(r.prop1.holds && r.prop2_1.holds && r.prop2_2.holds, "seed {seed}");
        assert!(r.notes.is_empty());
    }
}

/// Aggregation-shaped model: moving from 0 only reaches 1 and 2, states 1-4
/// are only left through the environment, and 6 and 7 were never seen.
#[test]
fn aggregation_shaped_model_reproduces_published_verdict() {
    let m = model_from(
        8,
        2,
        &[
            (0, 1, Action(0), 4),
            (0, 2, Action(0), 2),
            (5, 0, Action(0), 1),
            (5, 1, Action(0), 1),
            (5, 2, Action(0), 1),
            (5, 3, Action(0), 1),
            (5, 4, Action(0), 1),
            (1, 0, Environment, 3),
            (2, 1, Environment, 3),
            (3, 2, Environment, 3),
            (4, 3, Environment, 3),
        ],
    );
    let p = Policy::from_act_probabilities(&[0.7; 8]).unwrap();
    let r = verify(&m, &p, &desired(1..8, 8)).unwrap();
    assert_eq!(r.s_static, vec![1, 2, 3, 4]);
    assert_eq!(r.deadlock, DeadlockClass::StopsOnlyInDesired);
    assert_eq!(r.prop1.missing_paths, vec![(0, 3), (0, 4), (0, 5)]);
    assert!(r.prop2_1.holds);
    assert_eq!(r.prop2_2.missing_paths, vec![(0, 3), (0, 4), (0, 5)]);
    assert_eq!(r.unobserved, vec![6, 7]);

    let text = r.render_text();
    assert!(text.contains("S_static   {1, 2, 3, 4}"), "{text}");
    assert!(text.contains("stops only in desired states"));
    assert!(text.contains("P 1        False  missing paths: (0, {3, 4, 5})"));
    assert!(text.contains("P 2.1      True"));
    assert!(text.contains("P 2.2      False  missing paths: (0, {3, 4, 5})"));
    assert!(text.contains("no information on states {6, 7}"));
}

#[test]
fn foraging_static_sets_classify_as_published() {
    let s_static = set(&[0, 2, 3, 4, 6, 9, 12]);
    let mut des = set(&[12, 13]);
    des.extend(15..30);
    assert_eq!(
        classify_deadlock(&s_static, &des),
        DeadlockClass::PotentialDeadlock {
            offenders: vec![0, 2, 3, 4, 6, 9]
        }
    );
    assert_eq!(classify_deadlock(&set(&[1]), &set(&[1, 2])), DeadlockClass::StopsOnlyInDesired);
    assert_eq!(classify_deadlock(&set(&[]), &set(&[1, 2])), DeadlockClass::NoDeadlock);
}

/// Foraging-shaped model with those static states: exploring links every
/// other state in a ring, and each static state is left by the environment.
#[test]
fn foraging_shaped_model_satisfies_both_escape_conditions() {
    let n = 30;
    let s_static = [0, 2, 3, 4, 6, 9, 12];
    let moving: Vec<usize> = (0..n).filter(|s| !s_static.contains(s)).collect();
    let mut edges = Vec::new();
    for w in moving.windows(2) {
        edges.push((w[0], w[1], Action(0), 2));
    }
    edges.push((moving[moving.len() - 1], moving[0], Action(0), 2));
    for (from, to) in [(1, 0), (1, 2), (5, 3), (5, 4), (7, 6), (8, 9), (11, 12)] {
        edges.push((from, to, Action(0), 1));
    }
    for (from, to) in [(0, 1), (2, 5), (3, 5), (4, 5), (6, 7), (9, 10), (12, 13)] {
        edges.push((from, to, Environment, 1));
    }
    let m = model_from(n, 2, &edges);
    let mut members = vec![12, 13];
    members.extend(15..30);
    let r = verify(&m, &Policy::uniform(n, 2), &desired(members.clone(), n)).unwrap();
    assert_eq!(r.s_static, s_static.to_vec());
    assert_eq!(
        r.deadlock,
        DeadlockClass::PotentialDeadlock {
            offenders: vec![0, 2, 3, 4, 6, 9]
        }
    );
    assert!(r.prop2_1.holds);
    assert!(r.prop2_2.holds);
    let expected: Vec<(usize, usize)> = [0, 2, 3, 4, 6, 9]
        .iter()
        .flat_map(|&s| members.iter().map(move |&t| (s, t)))
        .collect();
    assert_eq!(r.prop1.missing_paths, expected);
}

#[test]
fn report_serializes_and_renders() {
    let m = dense_random_model(5, 2, 1);
    let r = verify(&m, &Policy::uniform(5, 2), &desired([4], 5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    r.write(dir.path()).unwrap();
    let back: swarm_synth::verify::VerificationReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(back, r);
    assert!(std::fs::read_to_string(dir.path().join("verify.txt")).unwrap().contains("P 2.2      True"));
    assert!(verify(&m, &Policy::uniform(5, 2), &desired([], 5)).is_err());
}
