import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def check(request):
    """Record a named sub-check of an acceptance criterion, return its outcome."""
    results = request.config.stash[_RESULTS]

    def record(criterion: str, name: str, ok: bool, detail: str = "") -> bool:
        results.setdefault(criterion, []).append((name, bool(ok), detail))
        print(f"{criterion} {'PASS' if ok else 'FAIL'} {name} {detail}".rstrip())
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(results):
        subs = results[crit]
        failed = [f"{name} ({detail})" if detail else name for name, ok, detail in subs if not ok]
        verdict = "FAIL" if failed else "PASS"
        note = "; ".join(failed) if failed else f"{len(subs)} checks"
        terminalreporter.write_line(f"{crit} {verdict}: {note}")
