mod common;

use common::*;
use proptest::prelude::*;
use reflect_core::env::{generate_tasks, make_env, EnvKind, TaskParams, NOTHING_HAPPENS};

const KINDS: [EnvKind; 3] = [EnvKind::Gripper, EnvKind::Blocksworld, EnvKind::Gridworld];

#[test]
fn ten_thousand_rejected_actions_leave_state_untouched() {
    for kind in KINDS {
        fuzz_invalid_actions(kind, 10_000, 7).unwrap();
    }
}

#[test]
fn garbage_is_always_rejected() {
    for kind in KINDS {
        let task = &tasks_of(kind, 1, 3)[0];
        let mut env = make_env(kind);
        env.reset(task).unwrap();
        let start = env.state_hash();
        for junk in ["", "fly", "go to nowhere", "pick up ball1 rooma", "stack b1 b1", "turn"] {
            let step = env.step(junk).unwrap();
            assert_eq!(step.observation, NOTHING_HAPPENS, "{kind}: {junk:?}");
            assert_eq!(env.state_hash(), start);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generation_is_a_function_of_the_seed(seed in any::<u64>(), kind_i in 0usize..3, n in 1usize..4) {
        let kind = KINDS[kind_i];
        for t in kind.task_types() {
            let a = generate_tasks(kind, t, n, seed, &TaskParams::default()).unwrap();
            let b = generate_tasks(kind, t, n, seed, &TaskParams::default()).unwrap();
            prop_assert_eq!(&a, &b);
            for spec in &a {
                let mut e1 = make_env(kind);
                let mut e2 = make_env(kind);
                let r1 = e1.reset(spec).unwrap();
                let r2 = e2.reset(spec).unwrap();
                prop_assert_eq!(r1, r2);
                prop_assert_eq!(e1.state_hash(), e2.state_hash());
            }
        }
    }

    #[test]
    fn think_never_changes_state(seed in any::<u64>(), kind_i in 0usize..3, text in "[a-z ]{0,30}") {
        let kind = KINDS[kind_i];
        let task = &tasks_of(kind, 1, seed)[0];
        let mut env = make_env(kind);
        env.reset(task).unwrap();
        let before = env.state_hash();
        env.step(&format!("think: {text}")).unwrap();
        prop_assert_eq!(env.state_hash(), before);
    }
}
