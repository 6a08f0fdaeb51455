"""Exception types; the CLI maps these onto exit codes and error categories."""


class MatmedError(Exception):
    """Base class for all package errors."""

    category = "runtime"


class DimensionError(MatmedError, ValueError):
    category = "dimension"


class DataFormatError(MatmedError, ValueError):
    category = "data-format"


class EvaluationError(MatmedError, ValueError):
    category = "evaluation"


class ConfigError(MatmedError, ValueError):
    category = "config"


class PerfectSeparationError(MatmedError, RuntimeError):
    category = "perfect-separation"


class NonFiniteChainError(MatmedError, RuntimeError):
    """Sampler produced a non-finite state; carries the iteration index."""

    category = "non-finite-chain"

    def __init__(self, iteration: int, detail: str = ""):
        self.iteration = iteration
        msg = f"non-finite sampler state at iteration {iteration}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
