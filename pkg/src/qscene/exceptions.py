"""Exception hierarchy shared by every qscene module."""


class QSceneError(Exception):
    """Base class for all errors raised by qscene."""


class ContractError(QSceneError, ValueError):
    """An argument violates an operation's documented preconditions."""


class CapacityError(ContractError):
    """The requested register is larger than a dense statevector can hold."""


class DegenerateInputError(ContractError):
    """Input carries no signal to normalise (e.g. an all-black image or block)."""


class NumericalError(QSceneError, ArithmeticError):
    """A loss or gradient became non-finite."""


class UnsupportedGateError(QSceneError):
    """A gate kind is not supported by the requested operation."""


class QasmParseError(QSceneError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class UnsupportedFeatureError(QasmParseError):
    """QASM construct outside the supported subset (measure, creg, if, ...)."""


class ModelFormatError(QSceneError, ValueError):
    """Base class for model-artifact load failures."""


class IncompatibleVersionError(ModelFormatError):
    pass


class CorruptionError(ModelFormatError):
    pass


class SchemeMismatchError(ModelFormatError):
    pass
