from isoreg.game_engine.learners import (  # noqa: F401
    continuous,
    gradient,
    minimax,
    net,
)
from isoreg.game_engine.learners.base import (  # noqa: F401
    BaseLearner,
    LearnerConfig,
    learner_registry,
)
