from __future__ import annotations

from pathlib import Path

from dotenv import find_dotenv
from dotenv import load_dotenv
from pydantic import AliasChoices
from pydantic import Field
from pydantic_settings import BaseSettings
from pydantic_settings import PydanticBaseSettingsSource
from pydantic_settings import SettingsConfigDict
from pydantic_settings import YamlConfigSettingsSource

from .editors import EditorsSettings
from .evaluate import EvaluateSettings
from .factworld import FactWorldSettings
from .logs import LoggingSettings
from .model import ModelSettings
from .tracing import TracingSettings
from .trainer import ClassifierSettings
from .trainer import TrainerSettings


load_dotenv(find_dotenv('.env'), override=False)


class Settings(BaseSettings):
    seed: int = Field(default=0, validation_alias=AliasChoices('MICROEDIT_SEED', 'seed'))
    model: ModelSettings = ModelSettings()
    factworld: FactWorldSettings = FactWorldSettings()
    trainer: TrainerSettings = TrainerSettings()
    classifier: ClassifierSettings = ClassifierSettings()
    tracing: TracingSettings = TracingSettings()
    evaluate: EvaluateSettings = EvaluateSettings()
    editors: EditorsSettings = EditorsSettings()
    logging: LoggingSettings = LoggingSettings()

    model_config = SettingsConfigDict(
        env_nested_delimiter='__',
        yaml_file=str(Path(__file__).parent.parent.parent / 'settings.yaml'),
        extra='ignore',
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return (
            init_settings,
            env_settings,
            dotenv_settings,
            file_secret_settings,
            YamlConfigSettingsSource(settings_cls),
        )
