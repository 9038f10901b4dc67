from __future__ import annotations

from pydantic import ConfigDict

from base import BaseModel


class MethodKnobs(BaseModel):
    """Numeric knobs and boolean flags of one editing method.

    Unknown names are rejected, so a typo in an hparams file never passes
    silently.
    """

    model_config = ConfigDict(extra='forbid', arbitrary_types_allowed=True)


class FTLKnobs(MethodKnobs):
    steps: int = 25
    lr: float = 5e-2
    eps_inf: float = 1e-3


class KNKnobs(MethodKnobs):
    steps: int = 20
    top_k: int = 5
    alpha: float = 2.0


class ROMEKnobs(MethodKnobs):
    covariance_samples: int = 10_000
    ridge: float = 1e-2
    v_steps: int = 25
    v_lr: float = 0.5
    beta: float = 0.0625
    n_prefix: int = 20
    value_loss_layer: int = -1
    auto_layer: bool = False


class MEMITKnobs(ROMEKnobs):
    mass_least_squares: bool = False

    @property
    def update_form(self) -> str:
        return 'mass_least_squares' if self.mass_least_squares else 'constrained'


class IKEKnobs(MethodKnobs):
    k: int = 2


class GRACEKnobs(MethodKnobs):
    eps0: float = 1.0
    v_steps: int = 25
    v_lr: float = 0.5


class SERACKnobs(MethodKnobs):
    pass


class EditorsSettings(BaseModel):
    ftl: FTLKnobs = FTLKnobs()
    kn: KNKnobs = KNKnobs()
    rome: ROMEKnobs = ROMEKnobs()
    memit: MEMITKnobs = MEMITKnobs()
    ike: IKEKnobs = IKEKnobs()
    grace: GRACEKnobs = GRACEKnobs()
    serac: SERACKnobs = SERACKnobs()

    def knobs_for(self, method: str) -> MethodKnobs:
        return getattr(self, method)


KNOB_SCHEMAS: dict[str, type[MethodKnobs]] = {
    'ftl': FTLKnobs,
    'kn': KNKnobs,
    'rome': ROMEKnobs,
    'memit': MEMITKnobs,
    'ike': IKEKnobs,
    'grace': GRACEKnobs,
    'serac': SERACKnobs,
}
