from app.models.enums import CheckName, PathKind

__all__ = [
    "CheckName",
    "PathKind",
]
