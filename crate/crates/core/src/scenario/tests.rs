use super::*;

#[test]
fn bundled_scenario_runs() {
    let out = run_script(SMART_BUILDING, &Options::default()).unwrap_or_else(|e| panic!("{e}"));
    assert!(out.report.transactions >= 200, "{}", out.report.transactions);
    assert_eq!(out.report.actuations_delivered, 2);
    assert_eq!(out.report.dead_letters, 1);
}

#[test]
fn expectations_are_enforced() {
    let script = "genesis fund=a:10\ndeploy as=a code=stats-v2 name=s\ncall as=a contract=s method=mean arg=ints:\n";
    match run_script(script, &Options::default()) {
        Err(ScenarioError::StepFailed { index, line, reason }) => {
            assert_eq!((index, line), (2, 3));
            assert!(reason.contains("EmptyWindow"), "{reason}");
        }
        Err(e) => panic!("{e}"),
        Ok(_) => panic!("expected failure"),
    }
}

#[test]
fn seed_override_changes_measurements_only() {
    let script = "genesis seed=1\ngateway seed=gw\nregister thing=t unit=C\nsimulate thing=t count=5\n";
    let a = run_script(script, &Options::default()).unwrap();
    let b = run_script(script, &Options::default()).unwrap();
    let c = run_script(script, &Options { seed: Some(2), export: None }).unwrap();
    assert_eq!(a.report, b.report);
    assert_ne!(a.report.state_digest, c.report.state_digest);
    assert_eq!(c.report.seed, 2);
}

#[test]
fn variables_and_milli_literals() {
    let script = "\
genesis fund=a:100
deploy as=a code=stats-v2 name=s
call as=a contract=s method=mean arg=ints:1,2 save=m
query contract=s method=mean arg=ints:3,4,4 eq=i64:4
query contract=s method=mean arg=ints: expect=EmptyWindow
";
    let out = run_script(script, &Options::default()).unwrap();
    assert_eq!(out.report.steps[2].detail, "i64:2");
    assert!("milli:-0.150".parse::<Value>().is_err());
}
