"""Exception types shared across the package.

Every error carries a short machine-readable ``kind`` and the CLI exit code
it maps to (2 for configuration problems, 3 for runtime or budget problems).
"""

from __future__ import annotations


class MulimitError(Exception):
    kind = "error"
    exit_code = 3


class ConfigError(MulimitError):
    kind = "config"
    exit_code = 2


class UnknownSymbol(ConfigError):
    kind = "unknown-symbol"


class WindowTooSmall(MulimitError):
    kind = "window-too-small"


class BudgetExceeded(MulimitError):
    kind = "budget-exceeded"

    def __init__(self, required: int, budget: int, what: str = "table entries"):
        self.required = required
        self.budget = budget
        super().__init__(f"{what}: need {required}, budget is {budget}")


class WordTooLong(MulimitError):
    kind = "word-too-long"


class CapExceeded(MulimitError):
    kind = "cap-exceeded"

    def __init__(self, message: str, steps: int = 0, cells: int = 0):
        self.steps = steps
        self.cells = cells
        super().__init__(message)


class HypothesisViolation(MulimitError):
    kind = "hypothesis-violation"


class NoValidWord(MulimitError):
    kind = "no-valid-word"


class StateExplosion(MulimitError):
    kind = "state-explosion"


class CycleBudgetExceeded(MulimitError):
    kind = "cycle-budget-exceeded"


class MalformedRow(MulimitError):
    kind = "malformed-row"
