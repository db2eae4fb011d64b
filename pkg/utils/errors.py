"""
Custom exception classes for the c.o.c. simulator and solver suite.

Provides hierarchical error handling for configuration, field calculus,
simulation and solver failures. Every error carries a machine-readable code.
"""


class CocSimError(Exception):
    """
    Base exception for coc-meanfield.

    All custom exceptions inherit from this.
    """

    def __init__(self, message: str, error_code: str = None, details: dict = None):
        """
        Initialize exception.

        Args:
            message: Human-readable error message
            error_code: Machine-readable error code (e.g., 'NO_ROOT')
            details: Additional error context as dictionary
        """
        self.message = message
        self.error_code = error_code or "UNKNOWN"
        self.details = details or {}
        super().__init__(self.message)

    def __str__(self) -> str:
        """Return formatted error message."""
        if self.error_code:
            return f"[{self.error_code}] {self.message}"
        return self.message

    def to_dict(self) -> dict:
        """Convert exception to dictionary for API and CLI responses."""
        return {
            "error": self.__class__.__name__,
            "error_code": self.error_code,
            "message": self.message,
            "details": self.details,
        }


class CacheError(CocSimError):
    """
    Error related to cache operations.

    Raised when Redis/KV operations fail.
    """

    def __init__(self, message: str, error_code: str = "CACHE_001", details: dict = None):
        """Initialize cache error."""
        super().__init__(message, error_code, details)


class ValidationError(CocSimError):
    """
    Error related to data validation.

    Raised when a configuration or request doesn't meet requirements.
    Structural config errors use their own codes (K_EXCEEDS_D, NEGATIVE_RATE, ...).
    """

    def __init__(
        self,
        message: str,
        field: str = None,
        details: dict = None,
        error_code: str = "VALIDATION_001",
    ):
        """
        Initialize validation error.

        Args:
            message: Validation error message
            field: Name of field that failed validation
            details: Additional validation details
            error_code: Specific code, defaults to VALIDATION_001
        """
        if field:
            details = details or {}
            details["field"] = field
        super().__init__(message, error_code, details)


class FieldError(CocSimError):
    """
    Error related to tail-field calculus.

    Raised for empty inputs, improper fields passed to moment operations
    and divergent tail integrals.
    """

    def __init__(self, message: str, error_code: str = "FIELD_001", details: dict = None):
        """Initialize field error."""
        super().__init__(message, error_code, details)


class SimulationError(CocSimError):
    """
    Error related to the particle simulator.

    Raised when a jump receives negative sizes, n is too small for the
    selection sets, or a free-frame estimator is given a regulated frame.
    """

    def __init__(
        self,
        message: str,
        error_code: str = "SIM_001",
        details: dict = None,
    ):
        """Initialize simulation error."""
        super().__init__(message, error_code, details)


class SolverError(CocSimError):
    """
    Error related to the deterministic mean-field solvers.

    Raised when a root does not exist, a relaxation escapes, a grid is
    exhausted or a classification cannot be made.
    """

    def __init__(
        self,
        message: str,
        error_code: str = "SOLVER_001",
        speed: float = None,
        details: dict = None,
    ):
        """
        Initialize solver error.

        Args:
            message: Error message
            error_code: Error code (e.g. NO_PROPER_FP)
            speed: Speed v at which the solver failed
            details: Additional details
        """
        details = details or {}
        if speed is not None:
            details["speed"] = speed
        super().__init__(message, error_code, details)
        self.speed = speed


class ExperimentError(CocSimError):
    """
    Error related to experiment orchestration and report emission.
    """

    def __init__(
        self,
        message: str,
        experiment: str = None,
        error_code: str = "EXPERIMENT_001",
        details: dict = None,
    ):
        """
        Initialize experiment error.

        Args:
            message: Error message
            experiment: Experiment kind that failed
            error_code: Error code prefix
            details: Additional details
        """
        details = details or {}
        if experiment:
            details["experiment"] = experiment
        super().__init__(message, error_code, details)
