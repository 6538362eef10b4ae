from isoreg.game_engine.adversaries import generators, interactive  # noqa: F401
from isoreg.game_engine.adversaries.base import (  # noqa: F401
    AdversaryConfig,
    BaseAdversary,
    adversary_registry,
)
