mod common;

#[test]
fn multi_shot_handlers_agree_with_oracle() {
    let report = common::checks::run_multishot(300).unwrap_or_else(|e| panic!("{e}"));
    eprintln!("{report}");
}
