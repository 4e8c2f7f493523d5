"""Online collaborative filtering under a latent source model."""
from .baselines import LoggedPolicy, OraclePolicy, PopularityPolicy, RandomPolicy
from .greedy import AlgorithmParams, CollaborativeGreedy
from .latent_model import Population, Scheme, generate_population
from .policy import ActionKind, Policy
from .simulator import ReplayEnvironment, SyntheticEnvironment, run
from .state import SessionState, new_session

__version__ = "0.1.0"
