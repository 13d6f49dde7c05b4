//! Random roster edit sequences checked against a plain reference model.
#![allow(dead_code)]

use std::collections::BTreeMap;

use cohortlens_core::model::{Answer, Completion, ResponseSet, Wave};
use cohortlens_core::roster::item_id;
use cohortlens_core::{apply_roster_edit, instantiate, RelationalTemplate, RosterEdit};
use rand::Rng;

pub fn wave(n: usize) -> Wave {
    Wave {
        id: "w1".into(),
        questionnaire_id: "q".into(),
        version: 1,
        group_id: "g".into(),
        roster: (1..=n).map(|i| format!("S{i:02}")).collect(),
        opened_at: 0,
        label: "T1".into(),
        closed: false,
    }
}

/// Runs `steps` random edits on a roster of `n` and checks, after each step,
/// that every alter set is the roster minus self and that surviving answers
/// are unchanged.
pub fn run_sequence<R: Rng>(rng: &mut R, n: usize, steps: usize) -> Result<(), String> {
    let template: RelationalTemplate = RelationalTemplate::one_mode("F", "friendship", "Is {alter} your friend?");
    let labels: Vec<String> = template.tie_scale.iter().map(|o| o.label.clone()).collect();
    let mut wave = wave(n);
    let names: BTreeMap<String, String> = wave.roster.iter().map(|id| (id.clone(), format!("Name {id}"))).collect();
    let mut instance = instantiate(&template, &wave, &names).map_err(|e| e.to_string())?;

    let mut model: BTreeMap<String, BTreeMap<String, Answer>> = BTreeMap::new();
    let mut responses = Vec::new();
    for me in &wave.roster {
        let mut r = ResponseSet::new("w1", me.clone(), Completion::Submitted);
        for alter in wave.roster.iter().filter(|a| *a != me) {
            if rng.gen_bool(0.9) {
                let a = Answer::Choice(labels[rng.gen_range(0..labels.len())].clone());
                r.answers.insert(item_id("F", alter), a);
            }
        }
        r.answers.insert("OTHER.Q1".into(), Answer::Text(format!("free text {me}")));
        model.insert(me.clone(), r.answers.clone());
        responses.push(r);
    }

    let mut next_id = n + 1;
    for step in 0..steps {
        let roster = instance.roster.clone();
        let edit = match rng.gen_range(0..3) {
            0 => {
                let id = format!("S{next_id:02}");
                next_id += 1;
                RosterEdit::Add { id: id.clone(), display_name: format!("Name {id}") }
            }
            1 if roster.len() > 2 => RosterEdit::Remove { id: roster[rng.gen_range(0..roster.len())].clone() },
            _ => RosterEdit::Rename {
                id: roster[rng.gen_range(0..roster.len())].clone(),
                display_name: format!("Renamed {step}"),
            },
        };
        let out = apply_roster_edit(&instance, &wave, &responses, &edit).map_err(|e| e.to_string())?;
        match &edit {
            RosterEdit::Remove { id } => {
                model.remove(id);
                let gone = item_id("F", id);
                for answers in model.values_mut() {
                    answers.remove(&gone);
                }
                if out.retired.iter().any(|r| &r.respondent_id != id) {
                    return Err(format!("step {step}: retired someone other than {id}"));
                }
            }
            RosterEdit::Rename { id, display_name } => {
                if out.instance.labels.get(id) != Some(display_name) {
                    return Err(format!("step {step}: label of {id} not updated"));
                }
            }
            RosterEdit::Add { .. } => {}
        }
        instance = out.instance;
        responses = out.responses;
        wave.roster = out.roster;

        for me in &instance.roster {
            let expected: Vec<&str> = instance.roster.iter().filter(|a| *a != me).map(String::as_str).collect();
            if instance.alters_of(me) != expected {
                return Err(format!("step {step}: alters of {me} are {:?}, want {expected:?}", instance.alters_of(me)));
            }
        }
        if instance.items.len() != instance.roster.len() {
            return Err(format!("step {step}: {} item lists for {} members", instance.items.len(), instance.roster.len()));
        }
        let got: BTreeMap<String, BTreeMap<String, Answer>> =
            responses.iter().map(|r| (r.respondent_id.clone(), r.answers.clone())).collect();
        if got != model {
            return Err(format!("step {step}: answers diverged after {edit:?}"));
        }
    }
    Ok(())
}
