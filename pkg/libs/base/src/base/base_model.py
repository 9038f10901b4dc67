from __future__ import annotations

from pydantic import BaseModel
from pydantic import ConfigDict


class CustomBaseModel(BaseModel):
    """Project-wide pydantic base.

    Arbitrary types are allowed so records can carry numpy arrays and tape
    nodes next to plain fields.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)


class FrozenModel(CustomBaseModel):
    """Immutable record, hashable by value."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)
