# This file makes the 'schemas' directory a Python package.

from .demand import DemandFormat, DemandSet, Direction, PassengerRecord, SyntheticDemandSpec
from .line import LineConfig, LineConfigFile, TravelTimeBand
from .simulation import CapacityBucket, EvaluationReport, Metrics, Timetable
from .agent import AgentConfig, EpsilonSchedule, RewardParams
from .baselines import FitnessWeights, GAParams
from .experiment import ExperimentConfig, RunManifest, ScenarioDefaults
