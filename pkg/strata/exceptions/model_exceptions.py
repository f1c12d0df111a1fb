from typing import Sequence


class StrataException(Exception):
    """
    Base class for every failure strata reports. exit_code is what the CLI returns.
    """

    exit_code: int = 5

    def __init__(self, message: str):
        self.message = message
        super().__init__(self.message)


# input errors (exit 2)


class ConfigError(StrataException):
    """
    Raised when a configuration file is missing, unreadable or fails validation.
    """

    exit_code = 2

    def __init__(self, source: str, detail: str):
        self.source = source
        self.message = f"Invalid configuration {source}: {detail}"
        super().__init__(self.message)


class DomainError(StrataException):
    """
    Raised when profile data leaves its admissible range: non-positive density or
    velocity samples, an unstable stratification, or table points outside [-d, 0].
    """

    exit_code = 2

    def __init__(self, quantity: str, detail: str):
        self.quantity = quantity
        self.message = f"{quantity} outside its admissible domain: {detail}"
        super().__init__(self.message)


class DegenerateInputError(StrataException):
    """
    Raised when a normalization integral vanishes.
    """

    exit_code = 2

    def __init__(self, detail: str):
        self.message = f"Degenerate input: {detail}"
        super().__init__(self.message)


class GuessQualityError(StrataException):
    """
    Raised when the small-amplitude guess is requested outside 0 < epsilon <= eps_guess_max.
    """

    exit_code = 2

    def __init__(self, epsilon: float, eps_max: float):
        self.epsilon = epsilon
        self.message = (
            f"epsilon={epsilon} is outside (0, {eps_max}]; the KdV guess is not "
            f"reliable there"
        )
        super().__init__(self.message)


class DomainTruncationError(StrataException):
    """
    Raised when the strip is too short to hold the decaying tail of a wave.
    """

    exit_code = 2

    def __init__(self, q_max: float, required: float):
        self.q_max = q_max
        self.required = required
        self.message = (
            f"Strip length Q_max={q_max:.4g} is shorter than the required "
            f"{required:.4g} decay lengths"
        )
        super().__init__(self.message)


class InputDigestError(StrataException):
    """
    Raised when a file recorded in a run manifest no longer matches its digest.
    """

    exit_code = 2

    def __init__(self, path: str):
        self.path = path
        self.message = f"Digest mismatch for {path}; refusing to resume a modified run"
        super().__init__(self.message)


class MissingArtifactError(StrataException):
    """
    Raised when a run directory lacks the files a command needs.
    """

    exit_code = 2

    def __init__(self, path: str):
        self.path = path
        self.message = f"Missing run artifact: {path}"
        super().__init__(self.message)


class RunLockedError(StrataException):
    """
    Raised when another process holds the lock on a run directory.
    """

    exit_code = 2

    def __init__(self, path: str):
        self.message = f"Run directory {path} is locked by another writer"
        super().__init__(self.message)


# numeric setup errors (exit 3)


class NormalizationInconsistencyError(StrataException):
    """
    Raised when the integrated background height misses H(0)=1.
    """

    exit_code = 3

    def __init__(self, h_top: float, tol: float):
        self.message = (
            f"Background height H(0)={h_top:.12g} deviates from 1 by more than {tol:g}"
        )
        super().__init__(self.message)


class StagnantBackgroundError(StrataException):
    """
    Raised when the laminar flow has H_p <= 0 somewhere.
    """

    exit_code = 3

    def __init__(self, p: float):
        self.message = f"Background flow stagnates (H_p <= 0) at p={p:.6g}"
        super().__init__(self.message)


class RootNotFoundError(StrataException):
    """
    Raised when a shooting root cannot be bracketed below the scan ceiling.
    """

    exit_code = 3

    def __init__(self, what: str, ceiling: float):
        self.message = f"No root of {what} found below {ceiling:g}"
        super().__init__(self.message)


class StabilityAssumptionError(StrataException):
    """
    Raised when a Dirichlet eigenvalue of the transversal problem is not positive.
    """

    exit_code = 3

    def __init__(self, detail: str):
        self.message = f"Spectral stability assumption violated: {detail}"
        super().__init__(self.message)


class StratificationAssumptionError(StrataException):
    """
    Raised when a reduced constant has the wrong sign.
    """

    exit_code = 3

    def __init__(self, name: str, value: float):
        self.message = f"Reduced constant {name}={value:.6g} must be positive"
        super().__init__(self.message)


# nonconvergence (exit 4)


class NonConvergenceError(StrataException):
    """
    Raised when Newton exhausts its iteration budget.
    """

    exit_code = 4

    def __init__(self, history: Sequence[float]):
        self.history = list(history)
        tail = ", ".join(f"{r:.3e}" for r in self.history[-5:])
        self.message = (
            f"Newton did not converge in {len(self.history)} iterations; "
            f"last residuals: {tail}"
        )
        super().__init__(self.message)


class SingularJacobianError(StrataException):
    """
    Raised when the (bordered) Jacobian cannot be factorized.
    """

    exit_code = 4

    def __init__(self, detail: str):
        self.message = f"Singular Jacobian: {detail}"
        super().__init__(self.message)


class StagnationError(StrataException):
    """
    Raised when an iterate reaches H_p + w_p <= 0 at some node.
    """

    exit_code = 4

    def __init__(
        self, node: tuple[int, int], p: float, h_p: float, q: float | None = None
    ):
        self.node = node
        where = f"p={p:.6g}" if q is None else f"q={q:.6g}, p={p:.6g}"
        self.message = f"Stagnation at node {node} ({where}): h_p={h_p:.6g}"
        super().__init__(self.message)


class StepUnderflowError(StrataException):
    """
    Raised when the arclength step falls below ds_min.
    """

    exit_code = 4

    def __init__(self, ds: float, ds_min: float):
        self.message = f"Arclength step {ds:.3e} fell below ds_min={ds_min:.3e}"
        super().__init__(self.message)


# internal (exit 5)


class InternalConsistencyError(StrataException):
    """
    Raised when computed quantities contradict an ordering that must hold.
    """

    exit_code = 5

    def __init__(self, detail: str):
        self.message = f"Internal consistency failure: {detail}"
        super().__init__(self.message)


class ShelfDetectedError(StrataException):
    """
    Raised when an accepted wave is not monotone in q, the signature of a bore-like shelf.
    """

    exit_code = 5

    def __init__(self, q: float, p: float, w_q: float):
        self.message = (
            f"Shelf detected: w_q={w_q:.3e} > 0 at q={q:.6g}, p={p:.6g}"
        )
        super().__init__(self.message)


class PreconditionError(StrataException):
    """
    Raised when an operation receives a state it is not defined for, such as an
    unconverged wave handed to grid refinement.
    """

    exit_code = 2

    def __init__(self, detail: str):
        self.message = f"Precondition violated: {detail}"
        super().__init__(self.message)
