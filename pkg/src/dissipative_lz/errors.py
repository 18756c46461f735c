"""Exception hierarchy shared by the library and the command-line tool.

Each class carries the process exit code the CLI maps it to.
"""


class LZError(Exception):
    exit_code = 1


class ConfigError(LZError, ValueError):
    """Invalid parameters, unknown config keys, inconsistent dimensions."""

    exit_code = 1


class DomainError(LZError, ValueError):
    """A mathematical function was evaluated outside its domain."""

    exit_code = 1


class NumericalBreakdown(LZError, ArithmeticError):
    """The propagation cannot continue (singular solve, norm drift, NaN).

    ``t`` is the last time at which the state was known to be good.
    """

    exit_code = 2

    def __init__(self, message, t=None, diagnostics=None):
        super().__init__(message)
        self.t = t
        self.diagnostics = dict(diagnostics or {})


class TruncationError(NumericalBreakdown):
    """The Fock-basis oracle is not converged in its occupation cutoff."""

    def __init__(self, message, suggested_n_max, t=None, diagnostics=None):
        super().__init__(message, t=t, diagnostics=diagnostics)
        self.suggested_n_max = suggested_n_max


class OutputError(LZError, OSError):
    exit_code = 3
