//! Textual scene observer.
//!
//! Turns a [`Transition`] into a deterministic natural-language description
//! (the information channel between environment and evaluator) and answers
//! geometric `distance(a, b)` queries against an observation. Descriptions
//! are template-based on purpose: equal transitions must produce byte-equal
//! text so that prompts — and therefore runs — are reproducible.

use serde::{Deserialize, Serialize};

use crate::env::{Axis, Observation, TaskSpec, Transition, Vec3};
use crate::error::{Error, Result};

/// One (subject, relation, value) triple backing the rendered text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub subject: String,
    pub relation: String,
    pub value: String,
}

impl Fact {
    fn new(subject: impl Into<String>, relation: impl Into<String>, value: impl Into<String>) -> Self {
        Fact {
            subject: subject.into(),
            relation: relation.into(),
            value: value.into(),
        }
    }
}

/// Rendered description plus the structured facts it was generated from.
/// Every numeric value appearing in `text` also appears in `facts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub text: String,
    pub facts: Vec<Fact>,
}

/// A geometric query between two named points: object ids or "gripper".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceQuery {
    pub a: String,
    pub b: String,
}

impl DistanceQuery {
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Self {
        DistanceQuery { a: a.into(), b: b.into() }
    }
}

/// Euclidean distance between two named scene points.
pub fn distance(q: &DistanceQuery, state: &Observation) -> Result<f64> {
    let a = state
        .position_of(&q.a)
        .ok_or_else(|| Error::UnknownObject(q.a.clone()))?;
    let b = state
        .position_of(&q.b)
        .ok_or_else(|| Error::UnknownObject(q.b.clone()))?;
    Ok(a.distance(b))
}

fn fmt_point(p: Vec3) -> String {
    format!("({:.3}, {:.3}, {:.3})", p.x, p.y, p.z)
}

/// Signed displacement phrase for movement actions, `None` when the clamp
/// swallowed the whole step.
fn displacement_phrase(t: &Transition) -> Option<String> {
    let b = t.before.gripper.position;
    let a = t.after.gripper.position;
    for axis in Axis::ALL {
        let d = a.axis(axis) - b.axis(axis);
        if d != 0.0 {
            return Some(format!("{:+.3} along {}", d, axis.label()));
        }
    }
    None
}

/// Describe what just happened: positions before/after (3 decimals), the
/// action, gripper state, detected/grasped object, object layout, and
/// whether the episode ended.
pub fn describe_transition(t: &Transition, task: &TaskSpec) -> SceneDescription {
    let mut facts = Vec::new();

    let background = task.description();
    facts.push(Fact::new("task", "background", &background));

    let relevant = t
        .after
        .objects
        .first()
        .map(|_| task.target_object(&t.after))
        .flatten()
        .map(|o| o.id.clone());
    facts.push(Fact::new(
        "task",
        "relevant_object",
        relevant.as_deref().unwrap_or("none"),
    ));

    let step = t.after.step_index.to_string();
    facts.push(Fact::new("episode", "step", &step));
    facts.push(Fact::new("gripper", "action", t.action.label()));

    let pos_before = fmt_point(t.before.gripper.position);
    let pos_after = fmt_point(t.after.gripper.position);
    facts.push(Fact::new("gripper", "position_before", &pos_before));
    facts.push(Fact::new("gripper", "position_after", &pos_after));

    let motion_clause = if t.action.translation().is_some() {
        let phrase = displacement_phrase(t);
        facts.push(Fact::new(
            "gripper",
            "moved",
            phrase.as_deref().unwrap_or("none"),
        ));
        match phrase {
            Some(p) => format!("moving {p} from {pos_before} to {pos_after}"),
            None => format!("staying at {pos_after} (clamped at the workspace limit)"),
        }
    } else {
        format!("holding position at {pos_after}")
    };

    let grip_state = if t.after.gripper.open {
        "gripper open"
    } else {
        "gripper closed"
    };
    facts.push(Fact::new("gripper", "state", grip_state));

    let detected = t.after.gripper.detected.as_deref();
    facts.push(Fact::new("gripper", "detected", detected.unwrap_or("none")));
    let grasped = t.after.gripper.grasped.as_deref();
    facts.push(Fact::new("gripper", "grasped", grasped.unwrap_or("none")));

    let mut object_clauses = Vec::with_capacity(t.after.objects.len());
    for o in &t.after.objects {
        let pos = fmt_point(o.position);
        object_clauses.push(format!("{} at {}", o.id, pos));
        facts.push(Fact::new(&o.id, "position", pos));
    }

    let ended = t.terminal;
    facts.push(Fact::new("episode", "ended", if ended { "yes" } else { "no" }));

    let mut text = String::new();
    text.push_str(&background);
    text.push_str(&format!(
        " At step {step} the gripper executed action '{}', {motion_clause}.",
        t.action.label()
    ));
    text.push_str(&format!(
        " Status: {grip_state}; {}; {}.",
        match detected {
            Some(id) => format!("detected object {id}"),
            None => "no object detected".to_string(),
        },
        match grasped {
            Some(id) => format!("grasped object {id}"),
            None => "no object grasped".to_string(),
        },
    ));
    if !object_clauses.is_empty() {
        text.push_str(&format!(" Scene objects: {}.", object_clauses.join("; ")));
    }
    if let Some(id) = &relevant {
        text.push_str(&format!(" The relevant object for this task is {id}."));
    }
    text.push_str(if ended {
        " The episode has ended."
    } else {
        " The episode continues."
    });

    SceneDescription { text, facts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{reset, step, Action, GripperState, SceneObject};
    use proptest::prelude::*;

    fn scene_with(gripper: Vec3, objects: &[(&str, Vec3)]) -> Observation {
        Observation {
            gripper: GripperState {
                position: gripper,
                open: true,
                detected: None,
                grasped: None,
            },
            objects: objects
                .iter()
                .map(|(id, p)| SceneObject {
                    id: id.to_string(),
                    position: *p,
                    graspable: false,
                    goal_zone: None,
                })
                .collect(),
            step_index: 0,
        }
    }

    #[test]
    fn distance_zero_for_same_point() {
        let obs = scene_with(Vec3::new(0.2, 0.2, 0.2), &[("button1", Vec3::new(0.2, 0.2, 0.2))]);
        let d = distance(&DistanceQuery::new("gripper", "button1"), &obs).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn distance_three_four_five() {
        let obs = scene_with(Vec3::new(0.0, 0.0, 0.0), &[("box", Vec3::new(0.3, 0.4, 0.0))]);
        let d = distance(&DistanceQuery::new("gripper", "box"), &obs).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn distance_unknown_id_is_an_error() {
        let obs = scene_with(Vec3::new(0.0, 0.0, 0.0), &[("box", Vec3::new(0.3, 0.4, 0.0))]);
        let err = distance(&DistanceQuery::new("gripper", "lever"), &obs).unwrap_err();
        assert!(matches!(err, Error::UnknownObject(id) if id == "lever"));
    }

    #[test]
    fn distance_matches_brute_force_recomputation() {
        let task = TaskSpec::push_button();
        for seed in 0..20 {
            let obs = reset(&task, seed);
            let d = distance(&DistanceQuery::new("gripper", "button1"), &obs).unwrap();
            let g = obs.gripper.position;
            let b = obs.object("button1").unwrap().position;
            let expect =
                ((g.x - b.x).powi(2) + (g.y - b.y).powi(2) + (g.z - b.z).powi(2)).sqrt();
            assert_eq!(d, expect, "seed {seed}");
        }
    }

    #[test]
    fn close_far_from_objects_reads_as_closed_and_nothing_detected() {
        let task = TaskSpec::lift_object();
        let mut obs = reset(&task, 1);
        obs.gripper.position = Vec3::new(0.5, 0.5, 0.95);
        let t = step(&obs, Action::CloseGripper, &task).unwrap();
        let desc = describe_transition(&t, &task);
        assert!(desc.text.contains("gripper closed"), "{}", desc.text);
        assert!(desc.text.contains("no object detected"), "{}", desc.text);
    }

    #[test]
    fn grasping_shows_up_in_facts() {
        let task = TaskSpec::lift_object();
        let mut obs = reset(&task, 1);
        obs.gripper.position = obs.objects[0].position;
        let t = step(&obs, Action::CloseGripper, &task).unwrap();
        let desc = describe_transition(&t, &task);
        assert!(desc.facts.contains(&Fact::new("gripper", "grasped", "umbrella")));
        assert!(desc.text.contains("grasped object umbrella"), "{}", desc.text);
    }

    #[test]
    fn movement_is_reported_with_axis_and_amount() {
        let task = TaskSpec::push_button();
        let before = scene_with(Vec3::new(0.0, 0.0, 0.0), &[("button1", Vec3::new(0.9, 0.9, 0.05))]);
        let mut after = before.clone();
        after.gripper.position = Vec3::new(0.05, 0.0, 0.0);
        after.step_index = 1;
        let t = Transition {
            before,
            action: Action::IncX,
            after,
            r_env: 0.0,
            terminal: false,
        };
        let desc = describe_transition(&t, &task);
        assert!(desc.text.contains("0.050 along x"), "{}", desc.text);
        assert!(desc.text.contains("(0.000, 0.000, 0.000)"), "{}", desc.text);
        assert!(desc.text.contains("(0.050, 0.000, 0.000)"), "{}", desc.text);
    }

    #[test]
    fn terminal_transition_says_episode_ended() {
        let task = TaskSpec::push_button();
        let mut obs = reset(&task, 11);
        let b = obs.objects[0].position;
        obs.gripper.position = Vec3::new(b.x, b.y, b.z + task.press_radius + 0.01);
        let t = step(&obs, Action::DecZ, &task).unwrap();
        assert!(t.terminal);
        let desc = describe_transition(&t, &task);
        assert!(desc.text.contains("The episode has ended."), "{}", desc.text);
    }

    #[test]
    fn descriptions_are_deterministic() {
        let task = TaskSpec::push_button();
        let obs = reset(&task, 4);
        let t = step(&obs, Action::IncY, &task).unwrap();
        let a = describe_transition(&t, &task);
        let b = describe_transition(&t.clone(), &task);
        assert_eq!(a.text, b.text);
        assert_eq!(a.facts, b.facts);
    }

    #[test]
    fn every_number_in_text_is_backed_by_a_fact() {
        let task = TaskSpec::lift_object();
        let re = regex::Regex::new(r"[0-9]+(?:\.[0-9]+)?").unwrap();
        let mut obs = reset(&task, 2);
        for (i, action) in [Action::IncX, Action::DecZ, Action::CloseGripper, Action::IncZ]
            .into_iter()
            .enumerate()
        {
            let t = step(&obs, action, &task).unwrap();
            let desc = describe_transition(&t, &task);
            let haystack: Vec<&str> = desc.facts.iter().map(|f| f.value.as_str()).collect();
            for m in re.find_iter(&desc.text) {
                assert!(
                    haystack.iter().any(|v| v.contains(m.as_str())),
                    "step {i}: number {} in text has no backing fact: {}",
                    m.as_str(),
                    desc.text
                );
            }
            obs = t.after;
        }
    }

    fn arb_point() -> impl Strategy<Value = Vec3> {
        (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn distance_is_symmetric_nonnegative(g in arb_point(), a in arb_point(), b in arb_point()) {
            let obs = scene_with(g, &[("a", a), ("b", b)]);
            let ab = distance(&DistanceQuery::new("a", "b"), &obs).unwrap();
            let ba = distance(&DistanceQuery::new("b", "a"), &obs).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab >= 0.0);
            let aa = distance(&DistanceQuery::new("a", "a"), &obs).unwrap();
            prop_assert_eq!(aa, 0.0);
        }

        #[test]
        fn distance_obeys_triangle_inequality(g in arb_point(), a in arb_point(), b in arb_point()) {
            let obs = scene_with(g, &[("a", a), ("b", b)]);
            let ga = distance(&DistanceQuery::new("gripper", "a"), &obs).unwrap();
            let ab = distance(&DistanceQuery::new("a", "b"), &obs).unwrap();
            let gb = distance(&DistanceQuery::new("gripper", "b"), &obs).unwrap();
            prop_assert!(gb <= ga + ab + 1e-9);
        }
    }
}
