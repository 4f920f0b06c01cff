import time

import pytest

from motionduet import checks


def test_full_suite_passes_within_budget():
    start = time.perf_counter()
    report, ok = checks.main_suite(seed=0)
    elapsed = time.perf_counter() - start
    assert ok, report
    assert elapsed < 60.0
    assert "all gradient checks passed" in report


def test_every_path_is_covered():
    assert checks.CHECK_NAMES == (
        "token_loss",
        "pair_loss",
        "dash_loss",
        "fourier_branch",
        "conv_branch",
        "denoiser_loss",
    )
    results = checks.run_all(points=2, seed=1)
    assert [r.name for r in results] == list(checks.CHECK_NAMES)
    for r in results:
        assert r.points == 2
        assert r.max_rel_err <= r.tol


def test_results_are_deterministic():
    a = checks.run_all(points=3, seed=5)
    b = checks.run_all(points=3, seed=5)
    assert [r.max_rel_err for r in a] == [r.max_rel_err for r in b]


def test_sign_flip_fault_fails_only_named_check():
    results = checks.run_all(points=2, fault="pair_loss")
    by_name = {r.name: r for r in results}
    assert not by_name["pair_loss"].passed
    for name, r in by_name.items():
        if name != "pair_loss":
            assert r.passed, name
    report = checks.format_report(results)
    assert "FAILED: pair_loss" in report


@pytest.mark.parametrize("name", checks.CHECK_NAMES)
def test_each_check_fails_under_fault(name):
    result = checks.run_check(name, points=1, sabotage=True)
    assert not result.passed


def test_unknown_names_rejected():
    with pytest.raises(ValueError, match="unknown check"):
        checks.run_check("softmax")
    with pytest.raises(ValueError, match="unknown fault"):
        checks.run_all(fault="softmax")


def test_report_format_one_line_per_check():
    results = checks.run_all(points=1)
    report = checks.format_report(results, elapsed=1.0)
    lines = report.splitlines()
    assert len(lines) == len(checks.CHECK_NAMES) + 2
    for name, line in zip(checks.CHECK_NAMES, lines):
        assert line.startswith(name)
        assert "PASS" in line
    assert lines[-1].startswith("elapsed:")
