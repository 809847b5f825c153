mod common;

use common::golden;

fn ok(r: Result<String, String>) {
    if let Err(e) = r {
        panic!("{e}");
    }
}

#[test]
fn ab_final_program() {
    ok(golden::ab_final_program());
}

#[test]
fn ab_trace_passes_through_steps() {
    ok(golden::ab_trace_steps());
}

#[test]
fn state_dcg_rewrite_only_merges_into_one_handler() {
    ok(golden::state_dcg_rewrite_only());
}

#[test]
fn state_dcg_full_matches_listing() {
    ok(golden::state_dcg_full());
}

#[test]
fn state_dcg_foo_drops_unused_clause() {
    ok(golden::state_dcg_foo_drops_unused_clause());
}
