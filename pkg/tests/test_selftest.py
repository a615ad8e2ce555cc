from mstsvd.selftest import ALL_CHECKS, run_selftest


def test_all_checks_pass_quickly():
    results = run_selftest(n_instances=20, seed=7)
    assert len(results) == len(ALL_CHECKS) == 5
    for r in results:
        assert r.passed, r.line()
        assert r.instances == 20
        assert r.max_rel_err < r.tolerance


def test_lines_and_determinism():
    a = run_selftest(n_instances=10, seed=3)
    b = run_selftest(n_instances=10, seed=3)
    for ra, rb in zip(a, b):
        assert ra.max_rel_err == rb.max_rel_err
        assert ra.line().startswith("PASS ")


def test_distinct_check_names():
    names = [r.name for r in run_selftest(n_instances=5, seed=1)]
    assert len(set(names)) == 5
