"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary
under "acceptance criteria".  Run directly with
``python tests/test_acceptance.py`` or through pytest.
"""

import subprocess
import sys
import time
from dataclasses import replace

import pytest

from dynrmat.harness import SampleConfig, run

RANKS = (2, 3, 4)
KERNEL_TOL = 1e-10
REGISTRY_TOL = 1e-10
MIN_TOL = 1e-11
WZ_TOL = 1e-12
SEMI_BOUNDS = (0.4, 0.6)
LQ_TOL = 1e-12
OPERATOR_TOL = 1e-8
FAMILY_TOL = 1e-9
FACE_TOL = {"ORT": 1e-11, "IDEN": 1e-9, "RB_Q_INDEPENDENCE": 1e-9, "RB_DIFFERENCE": 1e-9,
            "RB_QYBE": 1e-9, "RLL_LHAT": 1e-9, "RLL_GAUGE": 1e-9, "GAUGE_RATIO": 1e-8}
LLH_TOL = 1e-8
DELTA_TOL = 1e-10
CONTROL_FLOOR = 1e-4


def record(log, number, ok, text):
    log.append((number, bool(ok), text))
    assert ok, text


def timed_run(cfg):
    t0 = time.perf_counter()
    report = run(cfg)
    return report, time.perf_counter() - t0


def worst(results):
    return max(r.max_value for r in results)


@pytest.fixture(scope="module")
def quantum_report():
    return timed_run(SampleConfig(suites=("quantum",), ranks=RANKS))


@pytest.fixture(scope="module")
def full_runs(tmp_path_factory):
    """Two independent ``dynrmat verify --suite all`` processes writing JSON reports."""
    out = []
    for name in ("first", "second"):
        path = tmp_path_factory.mktemp(name) / "report.json"
        cmd = [sys.executable, "-m", "dynrmat.harness", "verify", "--suite", "all", "--json", str(path), "--quiet"]
        t0 = time.perf_counter()
        proc = subprocess.run(cmd, capture_output=True, text=True)
        out.append((proc.returncode, time.perf_counter() - t0, path.read_bytes() if path.exists() else b""))
    return out


def test_criterion_01_kernel_identities(acceptance_log):
    report, t = timed_run(SampleConfig(suites=("elliptic",), samples=100))
    m = worst(report.results)
    ok = report.passed and m < KERNEL_TOL and all(r.samples == 100 for r in report.results) and t < 1.0
    record(acceptance_log, 1, ok, f"{len(report.results)} kernel identities x 100 samples, "
                                  f"max {m:.2e} (< {KERNEL_TOL:g}) in {t:.2f} s (< 1 s)")


def test_criterion_02_classical(acceptance_log):
    report, t = timed_run(SampleConfig(suites=("classical",), ranks=RANKS, samples=50))
    residual = [r for r in report.results if r.kind == "residual"]
    m = worst(residual)
    ranks = sorted({r.N for r in report.results})
    ok = report.passed and m < REGISTRY_TOL and ranks == list(RANKS) and t < 20.0
    record(acceptance_log, 2, ok, f"classical relations at N={ranks}, 50 samples, max {m:.2e} "
                                  f"(< {REGISTRY_TOL:g}) in {t:.1f} s (< 20 s)")


def test_criterion_03_quantum(acceptance_log, quantum_report):
    report, t = quantum_report
    residual = [r for r in report.results if r.kind == "residual"]
    m = worst(residual)
    m_min = worst([r for r in residual if r.id == "MIN"])
    m_wz = worst([r for r in residual if r.id == "WZ"])
    ok = (all(r.passed for r in residual) and m < REGISTRY_TOL and m_min < MIN_TOL and m_wz < WZ_TOL
          and t < 30.0)
    record(acceptance_log, 3, ok, f"quantum relations at N={list(RANKS)}, max {m:.2e}, MIN {m_min:.2e} "
                                  f"(< {MIN_TOL:g}), WZ {m_wz:.2e} (< {WZ_TOL:g}) in {t:.1f} s (< 30 s)")


def test_criterion_04_semiclassical_ratio(acceptance_log, quantum_report):
    report, _ = quantum_report
    semi = [r for r in report.results if r.id.startswith("SEMI_")]
    lo, hi = min(r.min_value for r in semi), max(r.max_value for r in semi)
    ok = len(semi) == 3 * len(RANKS) and all(r.passed for r in semi) and SEMI_BOUNDS[0] <= lo and hi <= SEMI_BOUNDS[1]
    record(acceptance_log, 4, ok, f"semiclassical error ratio in [{lo:.3f}, {hi:.3f}] "
                                  f"(within [{SEMI_BOUNDS[0]}, {SEMI_BOUNDS[1]}])")


def test_criterion_05_operator_identities(acceptance_log):
    base = SampleConfig(suites=("operator",), relations=("LQ", "LF", "LOP", "LFF_COMPONENTS"))
    small, _ = timed_run(replace(base, ranks=(2,)))
    big, t3 = timed_run(replace(base, ranks=(3,)))
    results = small.results + big.results
    m_lq = worst([r for r in results if r.id == "LQ"])
    m_op = worst([r for r in results if r.id != "LQ"])
    ok = small.passed and big.passed and m_lq < LQ_TOL and m_op < OPERATOR_TOL and t3 < 60.0
    record(acceptance_log, 5, ok, f"LQ {m_lq:.2e} (< {LQ_TOL:g}); LF, LOP and component forms {m_op:.2e} "
                                  f"(< {OPERATOR_TOL:g}); N=3 in {t3:.1f} s (< 60 s)")


def test_criterion_06_commuting_family(acceptance_log):
    report, _ = timed_run(SampleConfig(suites=("operator",), relations=("FAMILY_COMMUTE", "TRACE_LEMMA"),
                                       ranks=(2, 3)))
    m = worst(report.results)
    ok = report.passed and m < FAMILY_TOL
    record(acceptance_log, 6, ok, f"commuting family and trace lemma at N=2,3, max {m:.2e} (< {FAMILY_TOL:g})")


def test_criterion_07_face_vertex(acceptance_log):
    base = dict(relations=tuple(FACE_TOL), ranks=(2, 3))
    report, _ = timed_run(SampleConfig(suites=("face", "operator"), **base))
    bad = [f"{r.id}@{r.N}" for r in report.results if not (r.passed and r.max_value < FACE_TOL[r.id])]
    ids = {r.id for r in report.results}
    ok = not bad and ids == set(FACE_TOL)
    summary = ", ".join(f"{k} {worst([r for r in report.results if r.id == k]):.1e}" for k in FACE_TOL)
    record(acceptance_log, 7, ok, f"face/vertex at N=2,3: {summary}" + (f"; failing {bad}" if bad else ""))


def test_criterion_08_llh_components(acceptance_log):
    report, _ = timed_run(SampleConfig(suites=("operator",), relations=("LLH", "DELTA"), ranks=(2,)))
    llh, delta = report.result("LLH", 2), report.result("DELTA", 2)
    comps = (llh.details or {}).get("components")
    ok = llh.passed and delta.passed and comps == 16 and llh.max_value < LLH_TOL and delta.max_value < DELTA_TOL
    record(acceptance_log, 8, ok, f"LLH at N=2 over {comps} components, max {llh.max_value:.2e} "
                                  f"(< {LLH_TOL:g}); delta identity {delta.max_value:.2e} (< {DELTA_TOL:g})")


def test_criterion_09_determinism_and_controls(acceptance_log, full_runs):
    import json

    (c1, _, a), (c2, _, b) = full_runs
    identical = bool(a) and a == b
    data = json.loads(a) if a else {"results": []}
    controls = [r for r in data["results"] if r["kind"] == "control"]
    names = {r["id"] for r in controls}
    floor = min((r["min"] for r in controls), default=0.0)
    ok = identical and {"LF_GAMMA_CONTROL", "RLL_IDENTITY_CONTROL"} <= names and floor > CONTROL_FLOOR
    record(acceptance_log, 9, ok, f"two report runs byte-identical: {identical}; {len(controls)} controls "
                                  f"with residual >= {floor:.2e} (> {CONTROL_FLOOR:g})")


def test_criterion_10_full_verification_time(acceptance_log, full_runs):
    code, t, _ = full_runs[0]
    ok = code == 0 and t < 180.0
    record(acceptance_log, 10, ok, f"dynrmat verify --suite all exit {code} in {t:.1f} s (< 180 s)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
