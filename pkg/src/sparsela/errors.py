"""Exception taxonomy shared by all sparsela modules.

Everything raised on purpose derives from :class:`SparselaError` so callers
can catch library failures with a single except clause.  Solver breakdowns
are deliberately *not* exceptions; they are reported as data on the solver
result so a fixed-iteration run can keep going after one occurs.
"""


class SparselaError(Exception):
    """Base class for all errors raised by this library."""


class DimensionMismatch(SparselaError):
    """Operands have incompatible lengths, shapes, or precisions."""


class UnknownOperation(SparselaError):
    """An operation has no kernel binding for any execution backend."""


class ParseError(SparselaError):
    """A MatrixMarket header, size line, or entry record is malformed."""


class UnsupportedField(SparselaError):
    """The MatrixMarket file uses a field or layout this reader does not handle.

    Real, integer, and pattern fields in coordinate format are supported,
    with general or symmetric storage.  Complex and Hermitian fields and
    the dense ``array`` layout are out of scope.
    """


class IndexOutOfRange(SparselaError):
    """A coordinate entry lies outside the declared matrix dimensions."""


class Overflow(SparselaError):
    """Dimensions or nonzero count exceed the 32-bit index space."""


class ValidationFailed(SparselaError):
    """A benchmark kernel produced values that differ from the closed-form result."""


class SerializationError(SparselaError):
    """A benchmark report could not be serialized or parsed back."""
