class TrustError(Exception):
    """Base class for errors raised by crate_trust."""


class NonHornShape(TrustError):
    pass


class CyclicClauses(TrustError):
    pass


class ResourceLimit(TrustError):
    """A solver exhausted its time or node budget."""


class TooLarge(TrustError):
    pass


class CyclicDependency(TrustError):
    def __init__(self, path):
        self.path = list(path)
        names = (f"{k[0]}@{k[1]}" if isinstance(k, tuple) else str(k) for k in self.path)
        super().__init__("dependency cycle: " + " -> ".join(names))


class NotFound(TrustError):
    pass


class NetworkUnavailable(TrustError):
    pass


class ParseError(TrustError):
    pass


class SchemaVersionMismatch(ParseError):
    pass


class InvalidConfig(TrustError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid config")


class InvalidAnchors(InvalidConfig):
    pass
