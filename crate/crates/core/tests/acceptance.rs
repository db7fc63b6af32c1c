use motility_core::acceptance::{run, DEFAULT_SEED};

#[test]
fn acceptance() {
    let report = run(DEFAULT_SEED, &[]);
    for o in &report.outcomes {
        println!("{}", o.line());
    }
    let failed: Vec<u8> = report.outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
