class ConfigError(ValueError):
    """Invalid or infeasible configuration."""


class NumericalError(ArithmeticError):
    """A trial produced non-finite values or a failed factorization."""


class DegenerateUserError(ArithmeticError):
    """The user's own channel has no component in its precoding subspace."""

    def __init__(self, user, msg=None):
        self.user = user
        super().__init__(msg or f"user {user}: own channel orthogonal to null space")
