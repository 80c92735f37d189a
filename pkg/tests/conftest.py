import collections

import pytest

# criterion number -> list of (label, passed, detail); filled by test_acceptance.py
ACCEPTANCE = collections.OrderedDict()

TITLES = {
    1: "GraphEM table rows A-D within tolerance (acc 0.05, F1 0.07, RMSE 0.03)",
    2: "MLEM accuracy equals edge prevalence, recall 1, specificity 0",
    3: "ordering: GraphEM acc > PGC, CGC on C, D; GraphEM RMSE < MLEM RMSE on A-D",
    4: "filter/smoother/likelihood match batch oracle within 1e-8 (100 instances)",
    5: "prox grid search 1e-4, DR optimality 1e-2, DR gamma=0 vs C Phi^-1 1e-6",
    6: "EM energy non-increasing (slack 1e-6) on every benchmark fit",
    7: "PGC/CGC size in 99% binomial band; CGC rejects chain shortcut more than PGC",
    8: "climate experiment",
}


@pytest.fixture
def record():
    def _record(criterion: int, label: str, passed: bool, detail: str = ""):
        ACCEPTANCE.setdefault(criterion, []).append((label, bool(passed), detail))
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[num]
        if num == 8:
            tr.write_line(f"criterion 8: NOT REPRODUCED  {TITLES[8]} (external data, out of scope)")
            continue
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        tr.write_line(f"criterion {num}: {status}  {TITLES[num]}")
        for label, ok, detail in parts:
            tr.write_line(f"    [{'ok' if ok else 'FAIL'}] {label}: {detail}")
