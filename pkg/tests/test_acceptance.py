"""Acceptance criteria, one test per criterion.

Each test prints a ``[PASS]``/``[FAIL]`` line; the lines are repeated in the
terminal summary.  Run ``python tests/test_acceptance.py`` for the lines alone.
"""

import math
import subprocess
import sys
import time

import pytest

from obsdiam import invariants, mmspace, products, realdist, suites

pytestmark = pytest.mark.acceptance

RESULTS: list[str] = []


def verdict(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _suite_detail(res) -> str:
    extra = f", {res.vacuous} vacuous" if res.vacuous else ""
    return f"{res.passed} passed, {res.failed} failed{extra}, {res.seconds:.1f}s"


def test_01_sandwich():
    res = suites.sandwich(count=200, kappas=(0.1, 0.2, 0.3), grid_step=0.02)
    verdict(1, "sandwich", res.ok and res.seconds < 300, _suite_detail(res))


def test_02_exact_values():
    t = mmspace.generate("k_regular", 2)
    b = invariants.obs_diam_bracket(t, 0.4, 0.01)
    checks = {
        "bracket": b.contains(1.0) and b.width <= 0.05,
        "sep": invariants.sep(t, (0.5, 0.5), "exact") == 1.0,
        "alpha": invariants.concentration(t, 0.5, "exact") == 0.5,
        "witness": products.witness_bound(t, 4, 1, 0.2, merge_tol=0.0).certified_lower == 2.0,
    }
    bad = [k for k, v in checks.items() if not v]
    verdict(2, "exact values", not bad, f"bracket {b.lower:g}..{b.upper:g}" + (f", failed {bad}" if bad else ""))


def test_03_clt_asymptote():
    start = time.perf_counter()
    t = mmspace.generate("k_regular", 2)
    n, kappa = 10_000, 0.2
    rep = products.witness_bound(t, n, 1, kappa, merge_tol=0.0)
    target = 2 * realdist.gaussian_tail_inv(kappa)
    ratio = rep.certified_lower / math.sqrt(n)
    floor = target * math.sqrt(0.25) * (1 - 0.03)
    elapsed = time.perf_counter() - start
    ok = abs(rep.c_n - target) <= 0.03 and ratio >= floor and elapsed < 60
    verdict(3, "CLT asymptote", ok, f"c_n={rep.c_n:.4f} target={target:.4f} ratio={ratio:.4f} floor={floor:.4f} "
            f"{elapsed:.1f}s")


def test_04_upper_consistency():
    res = suites.upper_consistency(ns=(16, 64, 256, 1024, 4096), ps=(1, 2), kappa=0.2, samples=10_000, confidence=0.99)
    verdict(4, "lower bounds below the upper bound", res.ok, _suite_detail(res))


def test_05_scaling_exponents():
    res = suites.scaling(ns=tuple(16 * 2**i for i in range(9)), kappa=0.2, slope_tol=0.02)
    slopes = ", ".join(f"{k}: witness {v['witness_slope']:.4f} upper {v['upper_slope']:.12f}" for k, v in res.notes.items())
    verdict(5, "scaling exponents", res.ok, slopes)


def test_06_ledoux():
    res = suites.ledoux(ns=(2, 3, 4))
    verdict(6, "concentration of the l1 cube", res.ok and res.seconds < 120, _suite_detail(res))


def test_07_net_extension():
    res = suites.net_extension(trials=50)
    verdict(7, "net and extension", res.ok, _suite_detail(res))


def test_08_product_box():
    res = suites.product_box()
    verdict(8, "product box bound", res.ok and abs(res.notes["bound"] - 0.8) <= 1e-9,
            f"bound={res.notes['bound']:.6f}, " + _suite_detail(res))


def test_09_concentration_relation():
    res = suites.concentration_relation(count=100)
    verdict(9, "ObsDiam vs concentration", res.ok, _suite_detail(res))


def test_10_circle_bounded():
    res = suites.circle_bounded(ns=(1, 4, 16, 64), p=2, kappa=0.1, samples=10_000)
    verdict(10, "circle powers stay bounded", res.ok,
            f"slope={res.notes['slope']:.4f} values={[round(v, 4) for v in res.notes['values']]}")


DETERMINISM_COMMANDS = [
    ["gen", "--gen", "random:5", "--seed", "3"],
    ["invariant", "--gen", "random:4", "--kappa", "0.1,0.3", "--seed", "2"],
    ["product", "--gen", "k_regular:3", "--n", "1,8,64", "--p", "1,2"],
    ["scaling", "--gen", "k_regular:2", "--n", "16..256:geometric", "--samples", "2000", "--seed", "9"],
    ["scaling", "--gen", "circle:8", "--n", "1..64:geometric:4", "--samples", "2000", "--format", "json"],
    ["box", "--gen", "k_regular:2", "--gen2", "k_regular:2", "--scale2", "1.2", "--n", "2", "--p", "1,2"],
    ["selftest", "--seed", "4"],
]


def _run_cli(args):
    proc = subprocess.run([sys.executable, "-m", "obsdiam", *args], capture_output=True, check=False)
    return proc.returncode, proc.stdout


def test_11_determinism():
    mismatched = []
    for args in DETERMINISM_COMMANDS:
        outputs = {_run_cli(args + ["--workers", "1"]) for _ in range(2)}
        outputs.add(_run_cli(args + ["--workers", "4"]))
        if len(outputs) != 1 or next(iter(outputs))[0] != 0:
            mismatched.append(args[0])
    verdict(11, "CLI determinism", not mismatched,
            f"{len(DETERMINISM_COMMANDS)} commands x 3 runs" + (f", differing: {mismatched}" if mismatched else ""))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
