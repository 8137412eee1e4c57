import pytest

ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line per criterion; failures are recorded by the hook below."""
    number = request.node.get_closest_marker("criterion").args[0]
    ACCEPTANCE[number] = ["FAIL", request.node.name, ""]

    def note(detail):
        ACCEPTANCE[number][2] = detail
    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    entry = ACCEPTANCE.setdefault(marker.args[0], ["FAIL", item.name, ""])
    entry[0] = "PASS" if rep.passed else "FAIL"
    if rep.failed and not entry[2]:
        entry[2] = str(call.excinfo.value).splitlines()[0] if call.excinfo else ""


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, name, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {name}  {detail}".rstrip())
