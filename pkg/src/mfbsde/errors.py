"""Exception hierarchy.

Every error carries a machine-readable ``code`` and a ``details`` mapping so
the CLI can render it as structured JSON.
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np


class MFBSDEError(Exception):
    code = "error"

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict[str, Any]:
        return {"error": self.code, "message": self.message, "details": _jsonable(self.details)}


class InvalidArgument(MFBSDEError, ValueError):
    code = "invalid-argument"


class UnsupportedConfiguration(MFBSDEError, ValueError):
    code = "unsupported-configuration"


class EvaluationError(MFBSDEError, ArithmeticError):
    code = "evaluation-error"


class IllConditionedRegression(MFBSDEError, ArithmeticError):
    code = "ill-conditioned-regression"


class ConfigurationError(MFBSDEError, ValueError):
    code = "configuration-error"


class HypothesisError(MFBSDEError, ValueError):
    code = "hypothesis-error"


class SchemaError(MFBSDEError, ValueError):
    code = "schema-error"


class ParseError(MFBSDEError, ValueError):
    code = "parse-error"


def _jsonable(obj: Any) -> Any:
    """Plain JSON types; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj
