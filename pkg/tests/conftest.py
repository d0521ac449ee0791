_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    marker = dict(report.keywords).get("criterion")
    if marker is None:
        return
    number, title = _criterion_of(report.nodeid)
    if number is None:
        return
    status = "PASS" if report.passed else "FAIL"
    detail = ""
    if report.failed:
        msg = getattr(report.longrepr, "reprcrash", None)
        detail = msg.message.splitlines()[0] if msg is not None else str(report.longrepr).splitlines()[-1]
    _CRITERIA[number] = (status, title, detail)


def _criterion_of(nodeid):
    import test_acceptance

    name = nodeid.split("::")[-1]
    fn = getattr(test_acceptance, name, None)
    for mark in getattr(fn, "pytestmark", []):
        if mark.name == "criterion":
            return mark.args
    return None, None


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): numbered acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        line = f"{status} criterion {number:2d}: {title}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
