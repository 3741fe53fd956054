"""Error taxonomy shared across the toolkit.

FormatError covers malformed on-disk artifacts (bad magic, truncation,
inconsistent offsets). ContractError covers violated preconditions and
configuration problems. Token-range violations raise builtin OverflowError.
The CLI maps these to distinct exit codes.
"""


class FormatError(Exception):
    """An on-disk artifact does not match its declared format."""


class ContractError(Exception):
    """An operation was invoked outside its contract (bad argument, bad config)."""
