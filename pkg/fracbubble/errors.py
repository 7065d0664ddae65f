class FracBubbleError(Exception):
    """Erro base do pacote. Cada subclasse define o código de saída da CLI."""

    exit_code = 2

    def __init__(self, message: str, diagnostics: dict | None = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigurationError(FracBubbleError):
    exit_code = 1


class UsageError(FracBubbleError):
    exit_code = 1


class AdmissibilityError(UsageError):
    """Configuração fora do conjunto admissível O_eta."""


class SingularityError(UsageError):
    """Avaliação sobre a diagonal de um núcleo singular."""


class NumericError(FracBubbleError):
    exit_code = 2


class CalibrationError(NumericError):
    pass


class SolverError(NumericError):
    pass


class VerificationError(FracBubbleError):
    exit_code = 2
