from srpt_ht.checks import CheckResult, check_names, run_checks


def test_names_unique_and_prefixed():
    names = check_names()
    assert len(names) == len(set(names))
    assert all(n.count(".") == 1 for n in names)


def test_quick_run_has_no_hard_failures():
    skip = {"harness.step_field_shape", "harness.theta_trend", "harness.concentration_trend"}
    results = run_checks(seed=1, scale=0.05, only=[n for n in check_names() if n not in skip])
    assert results and all(isinstance(r, CheckResult) for r in results)
    bad = [r.line() for r in results if r.hard and not r.passed]
    assert not bad, bad


def test_filter_by_module():
    res = run_checks(scale=0.05, only=["scaling"])
    assert {r.module for r in res} == {"scaling"}
