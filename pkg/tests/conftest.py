import pytest


@pytest.fixture
def report_line(request):
    """Emit a line through the terminal reporter so it is visible even when
    the test passes (plain prints are captured and hidden on success)."""
    reporter = request.config.pluginmanager.getplugin("terminalreporter")

    def emit(text: str) -> None:
        if reporter is not None:
            reporter.ensure_newline()
            reporter.write_line(text)
        else:  # pragma: no cover - no terminal plugin (e.g. pytest -p no:terminal)
            print(text)

    return emit
