from mixmap.ledger import ALL_CLEAR, CHANGES_DETECTED, FAILURES, RunLedger


def _report(value, passed=True):
    return {"passed": passed, "suites": [{"name": "periodic_orbits", "passed": passed,
                                          "failures": [] if passed else ["off"], "details": {"e": value}}]}


def test_first_and_repeated_runs_are_clear(ledger_path):
    ledger = RunLedger(ledger_path)
    config = {"lambda": "14", "r": 1}
    assert ledger.record('verify', config, _report(0.0)) == ALL_CLEAR
    assert ledger.record('verify', config, _report(0.0)) == ALL_CLEAR


def test_changes_are_detected_per_configuration(ledger_path):
    ledger = RunLedger(ledger_path)
    ledger.record('verify', {"r": 1}, _report(0.0))
    ledger.record('verify', {"r": 2}, _report(5.0))
    assert ledger.record('verify', {"r": 1}, _report(1e-12)) == CHANGES_DETECTED


def test_failures_win(ledger_path):
    ledger = RunLedger(ledger_path)
    assert ledger.record('verify', {"r": 1}, _report(0.0, passed=False)) == FAILURES


def test_history_and_previous_report(ledger_path):
    ledger = RunLedger(ledger_path)
    first = ledger.save_run('verify', {"r": 1}, _report(0.0))
    second = ledger.save_run('verify', {"r": 1}, _report(1.0))
    assert ledger.previous_report(first) is None
    assert ledger.previous_report(second) == _report(0.0)
    assert ledger.previous_report(999) is None
    ledger.log_suite(second, 'periodic_orbits', 'passed', {"failures": []})
    history = ledger.suite_history('periodic_orbits')
    assert history[0]['run_id'] == second
    assert history[0]['status'] == 'passed'
