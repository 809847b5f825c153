mod common;

#[test]
fn generated_programs_agree_across_levels_and_with_oracle() {
    let report = common::checks::run_differential(1000).unwrap_or_else(|e| panic!("{e}"));
    eprintln!("{report}");
}
