"""Exception types raised by the solver library."""


class SparseKaczmarzError(Exception):
    """Base class for all library errors."""


class ZeroRow(SparseKaczmarzError, ValueError):
    pass


class ZeroRhs(SparseKaczmarzError, ValueError):
    pass


class ZeroBlock(SparseKaczmarzError, ValueError):
    pass


class DimensionMismatch(SparseKaczmarzError, ValueError):
    pass


class FrequencyOutOfRange(SparseKaczmarzError, ValueError):
    pass


class EmptySystem(SparseKaczmarzError, ValueError):
    pass


class InconsistentBlock(SparseKaczmarzError, ArithmeticError):
    """A block residual is nonzero but orthogonal to the block's row space."""


class BadSparsity(SparseKaczmarzError, ValueError):
    pass


class NoFeasiblePattern(SparseKaczmarzError, ArithmeticError):
    pass


class SingularSystem(SparseKaczmarzError, ArithmeticError):
    pass
