"""Exception types shared across the toolkit."""


class ParseError(ValueError):
    """Malformed cell or ragged row in a CSV file. Carries 1-based row/col."""

    def __init__(self, message: str, row: int, col: int):
        super().__init__(f"{message} (row {row}, col {col})")
        self.row = row
        self.col = col


class InvalidSpec(ValueError):
    """Mixture specification violates its invariants."""


class SingularCovariance(RuntimeError):
    """A posterior scale matrix lost positive definiteness."""

    def __init__(self, component: int, message: str = ""):
        super().__init__(
            message or f"posterior scale matrix for component {component} is not positive definite"
        )
        self.component = component


class DegenerateBeta(ValueError):
    """Confidence level outside the open interval (0, 1)."""


class WrongVariant(TypeError):
    """An operation received an ambiguity-set variant it does not accept."""


class EmptySupport(ValueError):
    """Support polytope has no feasible point."""


class UnboundedSupport(ValueError):
    """Operation requires a bounded support polytope."""


class EmptyGrid(ValueError):
    """Discretization produced no nodes (resolution exceeds the feasible extent)."""


class UnsupportedMdroDimension(ValueError):
    """Full-matrix multivariate moment sets are out of scope; scalar/diagonal only."""


class MalformedProgram(ValueError):
    """Program references undeclared variables or has inconsistent dimensions."""


class InfeasibleInstance(ValueError):
    """Unit-commitment instance fails a structural feasibility check."""


class SandwichViolation(AssertionError):
    """Containment chain v_low <= v_mid <= v_high failed; payload lists offenders."""

    def __init__(self, violations):
        super().__init__(f"{len(violations)} sandwich violation(s): {violations}")
        self.violations = violations


class EmptyReport(ValueError):
    """Report emission refused: no trials recorded."""


class ConfigError(ValueError):
    """Run configuration file is missing, unreadable, or fails validation."""
