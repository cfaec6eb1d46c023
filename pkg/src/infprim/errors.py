"""Exception hierarchy shared by all modules."""


class InfprimError(Exception):
    """Base class for all package errors."""


class DimensionError(InfprimError, ValueError):
    """Array lengths or problem sizes do not match."""


class DomainError(InfprimError, ValueError):
    """A numeric argument lies outside its admissible range."""


class ConsistencyError(InfprimError, ValueError):
    """Inputs contradict each other (e.g. one candidate with two energies)."""


class EmptyInputError(InfprimError, ValueError):
    """A processing function received no candidates."""


class EmptyEliteSet(EmptyInputError):
    """No candidate lies strictly below the elite energy threshold."""


class DegenerateWeightError(InfprimError, ValueError):
    """Every candidate weight in a cluster-uncertainty sum is zero."""


class ArityError(InfprimError, ValueError):
    """Wrong number of inputs for a node or selection."""


class CapExceeded(InfprimError, ValueError):
    """Problem too large for exhaustive enumeration."""


class DegenerateScheduleError(InfprimError, ValueError):
    """A(s) and B(s) vanish simultaneously."""


class InversionUnsupported(InfprimError, ValueError):
    """The uncertainty curve of a schedule is not strictly monotone."""


class UnsupportedClusterError(InfprimError, ValueError):
    """Operation only defined for singleton clusters."""


class ProtocolError(InfprimError, ValueError):
    """A protocol document or graph failed validation."""


class InstanceFormatError(InfprimError, ValueError):
    """Malformed ``ising v1`` instance file."""
