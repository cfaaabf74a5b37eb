"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operands have incompatible or invalid shapes."""


class ConstraintError(ValueError):
    """A matrix-valued object violates one of its defining invariants."""


class NumericalError(ArithmeticError):
    """A linear-algebra step failed for numerical reasons (conditioning, NaN/Inf)."""


class ParseError(ValueError):
    """A data file record failed to parse; message carries the line number."""

    def __init__(self, line_number, message):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class ZeroProbabilityError(ArithmeticError):
    """A filtering step assigned (numerically) zero probability to an observation.

    Carries the step index and symbol, plus optional sequence/batch context
    added by callers higher up the stack.
    """

    def __init__(self, step, symbol, sequence=None, context=""):
        self.step = step
        self.symbol = symbol
        self.sequence = sequence
        self.context = context
        where = f"step {step}, symbol {symbol}"
        if sequence is not None:
            where += f", sequence {sequence}"
        if context:
            where += f" ({context})"
        super().__init__(f"observation probability underflowed at {where}")
