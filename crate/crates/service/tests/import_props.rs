mod common;

use std::collections::BTreeMap;

use cohortlens_core::model::{ElementRef, QuestionnaireDef};
use cohortlens_service::service::ImportRequest;
use cohortlens_service::csv_import::MappingSpec;
use common::*;
use proptest::prelude::*;

const AUDIT_ITEMS: usize = 10;

fn audit_questionnaire(fx: &Fixture) {
    let def = QuestionnaireDef {
        id: "QA".into(),
        title: "AUDIT only".into(),
        description: String::new(),
        elements: vec![ElementRef::Instrument("AUDIT".into())],
        version: 0,
    };
    fx.svc.create_questionnaire(&fx.alice, def).unwrap();
}

fn sheet(rows: &[Vec<u8>]) -> String {
    let mut out = String::from("respondent,name");
    for i in 1..=AUDIT_ITEMS {
        out.push_str(&format!(",AUDIT.Q{i}"));
    }
    out.push('\n');
    for (k, row) in rows.iter().enumerate() {
        out.push_str(&format!("X{k:03},Person {k}"));
        for v in row {
            // numeric cells and option labels are both accepted
            if k % 2 == 0 {
                out.push_str(&format!(",{v}"));
            } else {
                out.push_str(&format!(",Level {v}"));
            }
        }
        out.push('\n');
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every imported cell comes back as an `item:` row and every total is the
    /// plain sum of the imported values.
    #[test]
    fn import_round_trips_through_scores_csv(rows in prop::collection::vec(prop::collection::vec(0u8..5, AUDIT_ITEMS), 2..12)) {
        let fx = fixture();
        audit_questionnaire(&fx);
        let req = ImportRequest {
            questionnaire_id: "QA".into(),
            version: None,
            group_name: "g".into(),
            wave_label: "T1".into(),
            opened_at: Some(0),
            mapping: MappingSpec { strict: true, ..MappingSpec::default() },
            csv: sheet(&rows),
        };
        let summary = fx.svc.import_csv(&fx.alice, req).unwrap();
        prop_assert_eq!(summary.rows_imported, rows.len());
        prop_assert_eq!(summary.responses_scored, rows.len());
        let wave = summary.wave_id.unwrap();

        let reveal = fx.svc.pseudonym_map(&fx.admin).unwrap();
        let csv = fx.svc.export(&fx.alice, &wave, "scores-csv", None).unwrap();
        let mut reader = csv::Reader::from_reader(csv.bytes.as_slice());
        prop_assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), vec!["respondent", "scale", "score", "band"]);
        let mut items: BTreeMap<(String, String), String> = BTreeMap::new();
        let mut totals: BTreeMap<String, String> = BTreeMap::new();
        for rec in reader.records() {
            let rec = rec.unwrap();
            let raw = reveal[&rec[0]].clone();
            match rec[1].strip_prefix("item:") {
                Some(item) => {
                    items.insert((raw, item.to_string()), rec[2].to_string());
                }
                None if &rec[1] == "AUDIT.total" => {
                    totals.insert(raw, rec[2].to_string());
                }
                None => {}
            }
        }
        for (k, row) in rows.iter().enumerate() {
            let id = format!("X{k:03}");
            for (i, v) in row.iter().enumerate() {
                prop_assert_eq!(&items[&(id.clone(), format!("AUDIT.Q{}", i + 1))], &v.to_string());
            }
            let sum: u32 = row.iter().map(|&v| u32::from(v)).sum();
            prop_assert_eq!(&totals[&id], &sum.to_string());
        }
    }

    /// A single bad cell rejects a strict import and leaves the study as it was.
    #[test]
    fn strict_import_is_all_or_nothing(rows in prop::collection::vec(prop::collection::vec(0u8..5, AUDIT_ITEMS), 2..8), bad_row in 0usize..8, bad_col in 0usize..AUDIT_ITEMS) {
        let fx = fixture();
        audit_questionnaire(&fx);
        let bad_row = bad_row % rows.len();
        let mut text = sheet(&rows);
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let mut cells: Vec<String> = lines[bad_row + 1].split(',').map(str::to_string).collect();
        cells[bad_col + 2] = "7".into();
        lines[bad_row + 1] = cells.join(",");
        text = lines.join("\n");
        let before = fx.svc.snapshot();
        let req = ImportRequest {
            questionnaire_id: "QA".into(),
            version: None,
            group_name: "g".into(),
            wave_label: "T1".into(),
            opened_at: Some(0),
            mapping: MappingSpec { strict: true, ..MappingSpec::default() },
            csv: text,
        };
        match fx.svc.import_csv(&fx.alice, req) {
            Err(cohortlens_service::ServiceError::ImportRejected(s)) => {
                prop_assert_eq!(s.errors.len(), 1);
                prop_assert_eq!(s.errors[0].row, bad_row + 2);
            }
            other => prop_assert!(false, "unexpected {:?}", other),
        }
        let after = fx.svc.snapshot();
        prop_assert_eq!(before.respondents.len(), after.respondents.len());
        prop_assert_eq!(before.waves.len(), after.waves.len());
        prop_assert_eq!(before.pseudonyms.len(), after.pseudonyms.len());
    }
}
