from __future__ import annotations

from typing import Optional
from typing import Union

from base import BaseModel
from microedit.shared.exception import HparamsError
from microedit.shared.exception import UnknownKnobError
from microedit.shared.exception import UnknownMethodError
from microedit.shared.settings import KNOB_SCHEMAS
from microedit.shared.settings import MethodKnobs
from microedit.shared.utils import content_hash
from pydantic import Field
from pydantic import ValidationError


class HparamSet(BaseModel):
    method: str
    targets: list[str] = Field(default_factory=list, description='Module addresses the method may modify')
    knobs: dict[str, Union[int, float]] = Field(default_factory=dict)
    flags: dict[str, bool] = Field(default_factory=dict)
    source_path: Optional[str] = None

    def method_knobs(self) -> MethodKnobs:
        """Typed knobs for the method; unknown names raise."""
        schema = KNOB_SCHEMAS.get(self.method)
        if schema is None:
            raise UnknownMethodError(f'Unknown method {self.method!r}', details={'method': self.method})
        try:
            return schema(**self.knobs, **self.flags)
        except ValidationError as e:
            unknown = [err['loc'][0] for err in e.errors() if err['type'] == 'extra_forbidden']
            if unknown:
                raise UnknownKnobError(
                    f'Unknown knob(s) {", ".join(map(str, unknown))} for method {self.method}',
                    details={'method': self.method, 'knobs': unknown},
                ) from e
            raise HparamsError(f'Invalid knob values for method {self.method}: {e}') from e

    def fingerprint(self) -> str:
        """Hash of method, targets and every resolved knob, defaults included."""
        return content_hash(
            {'method': self.method, 'targets': self.targets, 'knobs': self.method_knobs().model_dump()},
        )

    def with_knobs(self, **overrides) -> HparamSet:
        knobs, flags = dict(self.knobs), dict(self.flags)
        for name, value in overrides.items():
            if isinstance(value, bool):
                flags[name] = value
            else:
                knobs[name] = value
        return self.model_copy(update={'knobs': knobs, 'flags': flags})
