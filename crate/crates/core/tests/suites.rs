use exchangeable::crp::crp_validate;
use exchangeable::verify::{check_exchangeability_exact, run_suite, Suite, TestReport};
use exchangeable::weights::block_count_prob;
use exchangeable::{Error, UrnParams};

#[test]
fn exact_suites_pass_with_fixed_seed() {
    for name in ["polya-exact", "crp-exact", "limits"] {
        let reports = run_suite(name, 42).unwrap();
        assert!(!reports.is_empty());
        for r in &reports {
            assert!(r.passed, "{name}: {r:?}");
            assert_eq!(r.seed, 42);
        }
        assert!(reports.iter().any(|r| r.control), "{name} has no negative control");
    }
}

#[test]
fn unknown_suite_is_rejected() {
    assert!(matches!(run_suite("bogus", 42), Err(Error::UnknownSuite(s)) if s == "bogus"));
    assert_eq!("gem".parse::<Suite>().unwrap(), Suite::Gem);
}

#[test]
fn reports_round_trip_as_json_lines() {
    let reports = run_suite("limits", 7).unwrap();
    let lines: Vec<String> = reports.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
    assert!(lines.iter().all(|l| !l.contains('\n')));
    let back: Vec<TestReport> = lines.iter().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(back, reports);
}

#[test]
fn exchangeability_report() {
    let r = check_exchangeability_exact(&UrnParams::new(vec![1.0, 2.0, 3.0]).unwrap(), 4).unwrap();
    assert!(r.passed);
    assert!(r.statistic < 1e-12);
}

#[test]
fn block_count_small_cases() {
    // Three customers at (0.5, 0.5): P(blocks of sizes 2 and 1) = 0.4, and the
    // formula counts ordered matches over 2!.
    let p = crp_validate(0.5, 0.5).unwrap();
    assert!((block_count_prob(&p, 3, &[2, 1]).unwrap() - 0.2).abs() < 1e-14);
    // A single block of size n is the whole partition: 1 - alpha over 1 + theta at n = 2.
    assert!((block_count_prob(&p, 2, &[2]).unwrap() - 1.0 / 3.0).abs() < 1e-14);
    assert!(block_count_prob(&p, 2, &[2, 1]).is_err());
}
