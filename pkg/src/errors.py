"""Exception hierarchy shared by every package."""


class GvflError(Exception):
    """Base class for simulator errors reported at the CLI boundary."""


class ShapeError(GvflError, ValueError):
    pass


class GraphParseError(GvflError):
    def __init__(self, path, line: int, reason: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {reason}")


class PartitionError(GvflError):
    pass


class TrainingDivergedError(GvflError):
    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")


class AttackError(GvflError):
    pass


class DefenseError(GvflError, ValueError):
    pass


class ConfigError(GvflError):
    pass
