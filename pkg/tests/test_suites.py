import pytest

from goldprod.config import builtin_catalog
from goldprod.suites import SUITES, Check, run_suites


@pytest.mark.parametrize("suite", sorted(SUITES))
def test_suite_passes_on_a_small_sample(suite):
    ws = builtin_catalog().with_overrides(points=10)
    checks = run_suites(ws, [suite])
    assert checks
    for c in checks:
        assert c.passed, c.line()
        assert c.suite == suite


def test_check_line_format():
    c = Check("demo", "something", True, 1.5e-12, 1e-8, ["a", "b", "c"])
    assert c.line() == "demo something over 3 entries: max residual 1.500e-12 (tol 1e-08) PASS"
    assert c.to_dict()["passed"] is True


def test_suites_run_in_name_order():
    ws = builtin_catalog().with_overrides(points=3)
    names = [c.suite for c in run_suites(ws, ["twin-algebra", "signature-rank"])]
    assert names == sorted(names)
