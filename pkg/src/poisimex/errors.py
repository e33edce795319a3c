"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A parameter is outside its valid domain."""


class SingularDesignError(RuntimeError):
    """The design matrix is rank deficient.

    Carries the names of the columns involved in the collinearity so the
    caller can report which covariates to drop.
    """

    def __init__(self, columns):
        self.columns = tuple(columns)
        super().__init__(
            "design matrix is rank deficient; collinear columns: "
            + ", ".join(self.columns)
        )


class CorrectedMatrixError(RuntimeError):
    """The corrected cross-product matrix is not positive definite.

    A known small-sample pathology of corrected-score estimators; a larger
    sample usually resolves it.
    """


class ExtrapolantFitError(RuntimeError):
    """Nonlinear extrapolant fitting failed to converge.

    ``fallback`` holds the linear fit so callers can degrade explicitly
    rather than silently.
    """

    def __init__(self, message, fallback=None):
        self.fallback = fallback
        super().__init__(message)


class ExtrapolationPoleError(RuntimeError):
    """The rational extrapolant has a pole at the requested evaluation point."""


class SimexReplicateError(RuntimeError):
    """Too many pseudo-replicate fits failed at one noise level."""


class VarianceDifferenceError(RuntimeError):
    """The difference-based variance extrapolation has too few usable points."""


class SchemaError(ValueError):
    """An input file violates its declared schema.

    ``line`` is the 1-based line number in the file (header is line 1) and
    ``column`` the offending column name, when known.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = " at ".join([", ".join(where)]) if where else ""
        super().__init__(f"{message} ({prefix})" if prefix else message)
