"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the physically meaningful range.

    ``problems`` lists ``(field, message)`` pairs when the error comes from
    validating a value type with several fields.
    """

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems) if problems else [("value", message)]


class ModelError(RuntimeError):
    """The model cannot be evaluated for the given state (unstable branch,
    no root, uncalibrated inputs, failed fit)."""


class ConfigError(ValueError):
    """One or more problems in a JSON document.

    All problems found are collected in ``issues`` as ``(path, message)``
    pairs so callers can report them together.
    """

    def __init__(self, issues):
        self.issues = [(str(p), str(m)) for p, m in issues]
        text = "; ".join(f"{p}: {m}" for p, m in self.issues)
        super().__init__(text or "invalid configuration")

    def to_dict(self):
        return {
            "error": "config",
            "issues": [{"field": p, "message": m} for p, m in self.issues],
        }
