#[path = "support/roster_check.rs"]
mod roster_check;

use cohortlens_core::roster::RosterError;
use cohortlens_core::{apply_roster_edit, instantiate, RelationalTemplate, RosterEdit};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn edits_keep_alters_and_answers_consistent(seed in any::<u64>(), steps in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Err(e) = roster_check::run_sequence(&mut rng, 20, steps) {
            prop_assert!(false, "{}", e);
        }
    }

    #[test]
    fn one_mode_items_are_n_minus_one(n in 2usize..40) {
        let w = roster_check::wave(n);
        let t: RelationalTemplate = RelationalTemplate::one_mode("F", "friendship", "{alter}?");
        let inst = instantiate(&t, &w, &Default::default()).unwrap();
        prop_assert!(inst.items.values().all(|v| v.len() == n - 1));
        prop_assert_eq!(inst.item_count(), n * (n - 1));
    }
}

#[test]
fn closed_wave_rejects_edits() {
    let mut w = roster_check::wave(5);
    let t: RelationalTemplate = RelationalTemplate::one_mode("F", "friendship", "{alter}?");
    let inst = instantiate(&t, &w, &Default::default()).unwrap();
    w.closed = true;
    let err = apply_roster_edit::<cohortlens_core::Score>(&inst, &w, &[], &RosterEdit::Remove { id: "S01".into() })
        .unwrap_err();
    assert_eq!(err, RosterError::WaveClosed("w1".into()));
}
