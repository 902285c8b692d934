class ConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""


class SamplingError(RuntimeError):
    """A sampler hit a numerically impossible branch."""


class TrainingError(RuntimeError):
    """SVM training produced a degenerate model (e.g. vanishing margin)."""
