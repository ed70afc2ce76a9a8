use tfrc_core::freeze::liveness::{run, single_drop_failures, Script};

#[test]
fn no_single_option_drop_deadlocks() {
    for script in [
        Script::default(),
        Script { delay: 0.1, capacity_pps: 40.0, freeze_at: 1.5, ..Script::default() },
        Script { load: 0.3, queue: 3, ..Script::default() },
    ] {
        let base = run(&script, None);
        assert!(base.live(), "{base:?}");
        let (n, failures) = single_drop_failures(&script);
        assert!(n >= 6, "only {n} option packets");
        assert!(failures.is_empty(), "{script:?}: stuck after dropping {failures:?}");
    }
}
