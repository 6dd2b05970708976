class LabError(Exception):
    """Base error of the lab; carries a category and the CLI exit code."""
    category = "lab"
    exit_code = 1

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        payload = {"category": self.category, "message": self.message, "exit_code": self.exit_code}
        if self.details:
            payload["details"] = {key: str(value) for key, value in self.details.items()}
        return {"error": payload}


class ConfigError(LabError, ValueError):
    category = "config"
    exit_code = 2


class ResourceError(LabError):
    """An enumeration or convolution would exceed a configured cap."""
    category = "resource"
    exit_code = 3


class DomainError(LabError, ValueError):
    """Input outside the mathematical domain of an operation."""
    category = "domain"
    exit_code = 4


class ReportIOError(LabError, OSError):
    category = "io"
    exit_code = 5
