"""Exception hierarchy shared by every module of the package."""


class PFedSOPError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(PFedSOPError, ValueError):
    """Vectors of mismatched length were combined."""


class ParameterError(PFedSOPError, ValueError):
    """A scalar hyperparameter is outside its admissible range."""


class ContractError(PFedSOPError, ValueError):
    """An input violates a documented precondition."""


class DataError(PFedSOPError, ValueError):
    """A dataset, partition or batch is unusable."""


class FormatError(DataError):
    """A data file could not be parsed.

    ``line`` is the 1-based line number of the offending row, when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InfeasiblePartitionError(ParameterError):
    """The requested shard layout cannot serve every client."""


class ProtocolError(PFedSOPError, RuntimeError):
    """A federated round was driven in an invalid order or with no inputs."""


class DivergenceError(PFedSOPError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, round_index, client_id, detail="non-finite loss"):
        super().__init__(f"round {round_index}, client {client_id}: {detail}")
        self.round_index = round_index
        self.client_id = client_id


class ConfigError(PFedSOPError, ValueError):
    """A configuration key is unknown, missing or out of range."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
