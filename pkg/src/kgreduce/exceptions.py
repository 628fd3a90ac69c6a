"""Exception types raised by the reduction pipeline."""


class KGReduceError(Exception):
    """Base class for all package errors."""


class ConfigInvalid(KGReduceError, ValueError):
    """A configuration field is missing or violates its constraints.

    The offending field name is stored in ``field``.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class PotentialInvalid(KGReduceError, ValueError):
    """The potential is not real-valued or has a nonzero angle average."""


class DenominatorTooSmall(KGReduceError, ArithmeticError):
    """A small divisor fell below its nonresonance threshold.

    The frequency has to be excluded from the admissible set; the offending
    constraint is kept in ``k`` (and ``j``, ``l``, ``sign`` for second order
    Melnikov conditions).
    """

    def __init__(self, k, margin, j=None, l=None, sign=None):
        self.k = tuple(int(c) for c in k)
        self.margin = float(margin)
        self.j, self.l, self.sign = j, l, sign
        where = f"k={self.k}"
        if j is not None:
            where += f", j={j}, l={l}, sign={sign}"
        super().__init__(f"small divisor below threshold at {where} (margin {self.margin:.3e})")


class NotSmallEnough(KGReduceError):
    """Initial KAM size eta_0 exceeds the smallness threshold; increase M."""


class ConvergenceStall(KGReduceError):
    """A KAM step failed to decrease eta."""


class StepTooLarge(KGReduceError, ValueError):
    """Time step does not resolve the driving or the stiffest mode."""


class UnknownMetric(KGReduceError, KeyError):
    """Requested plot metric is not present in the run record."""
