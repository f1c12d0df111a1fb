from enum import Enum


class DensityMode(Enum):
    EULERIAN = "eulerian"
    SEMI_LAGRANGIAN = "semi_lagrangian"


class ProfileKind(Enum):
    CONSTANT = "constant"
    LINEAR = "linear"
    EXPONENTIAL = "exponential"
    TANH = "tanh"
    TABLE = "table"


class FarfieldBC(Enum):
    DIRICHLET_ZERO = "dirichlet_zero"
    ROBIN_DECAY = "robin_decay"


class TerminationReason(Enum):
    STAGNATION_THRESHOLD = "stagnation_threshold"
    NEWTON_FAILURE = "newton_failure"
    STEP_UNDERFLOW = "step_underflow"
    USER_LIMIT = "user_limit"
    SHELF_DETECTED = "shelf_detected"


class CheckStatus(Enum):
    PASS = "pass"
    FAIL = "fail"
    NOT_COMPUTED = "not_computed"


class ExportFormat(Enum):
    CSV = "csv"
    JSON = "json"
