"""Collects acceptance-criterion result lines for the terminal summary.

pytest captures per-test stdout, so the ACCEPTANCE lines printed by
tests/test_acceptance.py would be invisible on a green run; conftest
replays everything appended here at the end of the session.
"""

LINES: list[str] = []
