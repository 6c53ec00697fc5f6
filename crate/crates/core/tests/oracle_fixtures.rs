use coplan::milp::{backend_from_env, SolveLimits};
use coplan::oracle::{run_fixture, tiny_fixtures};

#[test]
fn every_fixture_matches_the_oracle() {
    let backend = backend_from_env().unwrap();
    let fixtures = tiny_fixtures();
    assert!(fixtures.len() >= 30);
    let mut failures = Vec::new();
    let mut checks = 0;
    for f in &fixtures {
        let outcomes = run_fixture(backend.as_ref(), f, &SolveLimits::default()).unwrap();
        checks += outcomes.len();
        for o in outcomes {
            if !o.pass {
                failures.push(format!("{} {}: {}", o.fixture, o.check, o.detail));
            }
        }
    }
    assert!(checks >= 4 * fixtures.len());
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn fixtures_are_tiny_and_stable() {
    let a = tiny_fixtures();
    let b = tiny_fixtures();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    for f in &a {
        assert!(f.grid.rows <= 4 && f.grid.cols <= 4, "{}", f.name);
        assert!(f.horizon.len <= 10, "{}", f.name);
        assert!(f.requests.len() <= 2, "{}", f.name);
        f.validate().unwrap();
    }
}
