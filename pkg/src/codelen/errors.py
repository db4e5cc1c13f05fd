"""Exception hierarchy.

The CLI maps these onto exit codes: ConfigError -> 2, NumericalError -> 3,
VerificationError -> 4.
"""


class CodelenError(Exception):
    """Base class for all library errors."""


class ConfigError(CodelenError):
    """Invalid configuration, dataset, or argument combination."""


class NumericalError(CodelenError):
    """A numeric contract was violated (non-finite values, divergence...)."""


class NonFiniteModelOutput(NumericalError):
    def __init__(self, sample_index: int):
        self.sample_index = sample_index
        super().__init__(f"model produced a non-finite log-probability at sample {sample_index}")


class ZeroProbabilityLabel(NumericalError):
    """A realized label got an effectively-zero probability.

    A sender cannot transmit a symbol the model gives ~0 probability to, and
    clamping would silently corrupt the bit accounting, so this is an error.
    """

    def __init__(self, sample_index: int, bits: float):
        self.sample_index = sample_index
        self.bits = bits
        super().__init__(
            f"label at sample {sample_index} costs {bits:.3g} bits (> 1e6); "
            "the model assigns it effectively zero probability"
        )


class TrainingDiverged(NumericalError):
    def __init__(self, epoch: int, batch: int):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite training loss at epoch {epoch}, batch {batch}")


class IdxFormatError(ConfigError):
    """Malformed IDX container."""


class IdxMagicError(IdxFormatError):
    pass


class IdxCountMismatch(IdxFormatError):
    pass


class IdxTruncatedFile(IdxFormatError):
    pass


class CsvFormatError(ConfigError):
    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class VerificationError(CodelenError):
    """Receiver simulation failed to reproduce the sender's models or bits."""

    def __init__(self, mismatches: list[str]):
        self.mismatches = mismatches
        super().__init__("protocol verification failed:\n  " + "\n  ".join(mismatches))
