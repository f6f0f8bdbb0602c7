"""Exception hierarchy.

Input problems (bad files, bad schemas, bad graphs) derive from
:class:`InputError`; refusals to produce a number derive from
:class:`AnalysisError`. The CLI maps the two families to exit codes 2 and 1.
"""

from __future__ import annotations


class PctError(Exception):
    """Base class for every error raised by this package."""


class InputError(PctError):
    """Malformed or inconsistent input."""


class AnalysisError(PctError):
    """A requested quantity is undefined or not identifiable for this input."""


class GraphError(InputError):
    """Invalid graph structure or graph document."""


class CycleError(GraphError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("graph contains a directed cycle: " + " -> ".join(self.cycle))


class UnknownNodeError(GraphError):
    pass


class DataError(InputError):
    """Dataset parsing or validation failure.

    ``line`` is the 1-based line number in the source file (the header is
    line 1) when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParamsError(InputError):
    """Invalid or incomplete SCM parameterization."""


class DegenerateStratum(AnalysisError):
    def __init__(self, stratum):
        self.stratum = dict(stratum)
        desc = ", ".join(f"{k}={v}" for k, v in self.stratum.items()) or "<all>"
        super().__init__(f"empty conditioning stratum: {desc}")


class ZeroReferenceRisk(AnalysisError):
    pass


class UndefinedOdds(AnalysisError):
    pass


class NoEvents(AnalysisError):
    pass


class NotAdmissible(AnalysisError):
    def __init__(self, message, open_paths=()):
        self.open_paths = [list(p) for p in open_paths]
        super().__init__(message)


class PositivityViolation(AnalysisError):
    def __init__(self, stratum):
        self.stratum = dict(stratum)
        desc = ", ".join(f"{k}={v}" for k, v in self.stratum.items()) or "<all>"
        super().__init__(f"positivity violated: no records at the intervention levels in stratum {desc}")
