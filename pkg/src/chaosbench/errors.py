"""Exception types shared across the package.

The CLI maps these onto process exit codes, so keep the hierarchy flat:
one class per failure category.
"""


class ChaosBenchError(Exception):
    """Base class for all chaosbench errors."""


class DivergenceError(ChaosBenchError):
    """An orbit left the bounded region (off-basin seed or bad parameters)."""


class ShapeError(ChaosBenchError):
    """Operand shapes or widths are incompatible."""


class DataError(ChaosBenchError):
    """A dataset is malformed, too short, or inconsistent with its config."""


class NumericError(ChaosBenchError):
    """A computation produced a non-finite value where finite was required."""


class GridError(ChaosBenchError):
    """One or more experiment grid cells failed."""

    def __init__(self, failures):
        self.failures = list(failures)
        lines = "; ".join(str(f) for f in self.failures)
        super().__init__(f"{len(self.failures)} cell(s) failed: {lines}")
