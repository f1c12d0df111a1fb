from .base import RunStore
from .run_directory import RunDirectory

__all__ = ["RunStore", "RunDirectory"]
