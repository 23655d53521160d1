"""Shared exception roots.

Every error raised by this package derives from HarnessError so the CLI can
map any failure to a single-line diagnostic and exit code 1.
"""


class HarnessError(Exception):
    pass


class Timeout(HarnessError):
    """An episode or closed-loop run exceeded its time budget."""
