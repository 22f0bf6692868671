"""Exception hierarchy. Every library error derives from TodaKPError."""


class TodaKPError(Exception):
    """Domain error raised by the library (CLI exit code 1)."""


class SolitonDataError(TodaKPError, ValueError):
    pass


class OrderingError(SolitonDataError):
    pass


class PositivityError(SolitonDataError):
    pass


class SizeError(SolitonDataError):
    pass


class OrderRangeError(TodaKPError, ValueError):
    """Darboux order / Grassmannian rank outside its admissible range."""


class DegenerateFlowError(TodaKPError):
    """LU factorization of the flow exponential hit a vanishing leading minor."""

    def __init__(self, minor_index: int, message: str = ""):
        self.minor_index = minor_index
        super().__init__(message or f"leading minor {minor_index} vanishes; Bruhat factorization breaks down")


class SpectrumMismatchError(TodaKPError):
    pass


class PoleError(TodaKPError):
    def __init__(self, point: float, message: str = ""):
        self.point = point
        super().__init__(message or f"wavefunction has a pole at divisor point {point!r}")


class DivisorConsistencyError(TodaKPError):
    """Occupancy or interlacing violated after the counting rule."""


class InvalidDivisorError(TodaKPError):
    """Divisor cannot be realized by positive weights."""


class AnchorUnavailableError(TodaKPError):
    pass


class DualityViolationError(TodaKPError):
    pass


class KernelViolationError(TodaKPError):
    """Darboux operator fails to annihilate the heat-hierarchy basis."""
