from typing import Any, Sequence


class CchmmError(Exception):
    """Base error; `exit_code` is what the command line returns for it."""

    exit_code = 1

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.context = context


class ConfigError(CchmmError):
    exit_code = 2

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message, key=key)
        self.key = key


class ValidationError(CchmmError):
    exit_code = 2


class DataFormatError(CchmmError):
    exit_code = 2

    def __init__(self, message: str, file: str | None = None, array: str | None = None):
        super().__init__(message, file=file, array=array)
        self.file = file
        self.array = array


class ShapeMismatchError(CchmmError):
    exit_code = 2

    def __init__(self, op: str, shapes: Sequence[tuple[int, ...]], detail: str = ""):
        rendered = ", ".join(str(tuple(shape)) for shape in shapes)
        message = f"{op}: incompatible shapes {rendered}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message, op=op, shapes=[tuple(shape) for shape in shapes])
        self.op = op
        self.shapes = [tuple(shape) for shape in shapes]


class NumericalError(CchmmError):
    exit_code = 3


class NonFiniteError(NumericalError):
    def __init__(self, where: str, detail: str = ""):
        message = f"non-finite value produced by {where}"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message, where=where)
        self.where = where


class SingularMatrixError(NumericalError):
    def __init__(self, pivot: float, context: str = ""):
        message = f"singular matrix: pivot magnitude {pivot:.3e} below tolerance"
        if context:
            message = f"{context}: {message}"
        super().__init__(message, pivot=pivot)
        self.pivot = pivot


class TrainingDivergedError(NumericalError):
    def __init__(self, epoch: int, batch: int, detail: str = ""):
        message = f"training diverged at epoch {epoch}, batch {batch}"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message, epoch=epoch, batch=batch)
        self.epoch = epoch
        self.batch = batch


class TapeError(CchmmError):
    exit_code = 3


class GradientCheckError(CchmmError):
    exit_code = 4

    def __init__(self, worst: str, max_rel_err: float, tolerance: float, op: str | None = None):
        where = f"op {op} (parameter {worst})" if op else worst
        super().__init__(
            f"gradient check failed: {where} has relative error {max_rel_err:.3e} (tolerance {tolerance:.1e})",
            worst=worst,
            op=op,
            max_rel_err=max_rel_err,
        )
        self.worst = worst
        self.op = op
        self.max_rel_err = max_rel_err
