"""Exception types raised across the package."""


class PairIQAError(Exception):
    pass


class ContractViolation(PairIQAError, ValueError):
    """Caller broke a documented precondition (shapes, lengths, finiteness)."""


class DegenerateInputError(PairIQAError, ValueError):
    """Input is well-formed but the quantity is undefined (zero norm, zero variance)."""


class InputError(PairIQAError, ValueError):
    pass


class ConfigurationError(PairIQAError, ValueError):
    pass


class RegistryLookupError(PairIQAError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ConflictError(PairIQAError):
    pass


class AssetError(PairIQAError, OSError):
    """Missing or corrupt file asset (checkpoint, vocab, model card, context file)."""


class IngestionError(PairIQAError, ValueError):
    def __init__(self, problems, source=None):
        self.problems = list(problems)
        self.source = source
        head = f"{len(self.problems)} problem(s) in {source}" if source else f"{len(self.problems)} problem(s)"
        super().__init__(head + ":\n" + "\n".join(f"  - {p}" for p in self.problems))


class StaleCacheError(PairIQAError):
    pass


class DivergenceError(PairIQAError, FloatingPointError):
    def __init__(self, message, context=None, iteration=None):
        super().__init__(message)
        self.context = context
        self.iteration = iteration
