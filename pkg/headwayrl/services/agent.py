"""
DQN dispatch controller: replay buffer, rule-constrained epsilon-greedy
action selection, TD targets from a frozen target network, and the
episode training loop.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from headwayrl.core.exceptions import TrainingError
from headwayrl.core.rng import make_rng
from headwayrl.schemas.agent import AgentConfig, RewardParams
from headwayrl.schemas.demand import DemandSet
from headwayrl.schemas.line import LineConfig
from headwayrl.schemas.simulation import Metrics, Timetable
from headwayrl.services.env import FeatureScheme, HeadwayEnv, Transition
from headwayrl.services.line_model import TravelTimeTable
from headwayrl.services.network import ValueNetwork
from headwayrl.services.simulator import summarize

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ["episode", "mean_reward", "nd", "awt", "nsp"]

EnvFactory = Callable[[LineConfig, TravelTimeTable, DemandSet], HeadwayEnv]


class ReplayBuffer:
    """
    Fixed-size ring buffer of transitions with uniform sampling (with replacement).

    Args:
        capacity: Maximum number of stored transitions
        state_size: Length of a state vector
    """

    def __init__(self, capacity: int, state_size: int):
        if capacity < 1:
            raise ValueError("buffer capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_size))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_size))
        self.dones = np.zeros(capacity, dtype=bool)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        i = self._next
        self.states[i] = t.state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state
        self.dones[i] = t.done
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Tuple[np.ndarray, ...]:
        if self._size < batch_size:
            raise TrainingError(f"replay buffer holds {self._size} transitions, batch needs {batch_size}")
        idx = rng.integers(0, self._size, size=batch_size)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx], self.dones[idx]


def select_action(
    q: Optional[ValueNetwork],
    state: np.ndarray,
    t_ml: int,
    bounds: Tuple[int, int],
    epsilon: float,
    rng: np.random.Generator,
) -> int:
    """
    Rule-constrained epsilon-greedy choice.

    Past the upper bound the bus must leave, below the lower bound it must
    not; inside the band the policy is epsilon-greedy on ``q``, with ties
    going to "no departure".
    """
    lower, upper = bounds
    if t_ml > upper:
        return 1
    if t_ml < lower:
        return 0
    if rng.random() < epsilon:
        return int(rng.integers(2))
    if q is None:
        raise TrainingError("a greedy choice needs a value network")
    values = q.q_values(state)
    return 1 if values[1] > values[0] else 0


def td_target(r: float, s_next: np.ndarray, done: bool, q_target: ValueNetwork, gamma: float) -> float:
    """One-step Bellman target, using the target network for the bootstrap."""
    if done:
        return float(r)
    return float(r + gamma * np.max(q_target.q_values(s_next)))


def td_targets(
    rewards: np.ndarray, next_states: np.ndarray, dones: np.ndarray, q_target: ValueNetwork, gamma: float
) -> np.ndarray:
    bootstrap = np.max(q_target.predict(next_states), axis=1)
    return rewards + gamma * np.where(dones, 0.0, bootstrap)


def train_step(
    q: ValueNetwork,
    q_target: ValueNetwork,
    buffer: ReplayBuffer,
    config: AgentConfig,
    rng: np.random.Generator,
) -> float:
    """
    One SGD step on a sampled batch.

    Returns:
        The batch loss before the step
    """
    states, actions, rewards, next_states, dones = buffer.sample(config.batch_size, rng)
    targets = td_targets(rewards, next_states, dones, q_target, config.gamma)
    loss, dw, db = q.td_loss(states, actions, targets)
    q.sgd_step(dw, db, config.learning_rate)
    return loss


def default_env_factory(
    params: Optional[RewardParams] = None,
    scheme_builder: Optional[Callable[[], FeatureScheme]] = None,
    trace: bool = False,
) -> EnvFactory:
    """Factory building a fresh environment (and a fresh scheme instance) per call."""

    def factory(line: LineConfig, tt: TravelTimeTable, demand: DemandSet) -> HeadwayEnv:
        scheme = scheme_builder() if scheme_builder else None
        return HeadwayEnv(line, tt, demand, params=params, scheme=scheme, trace=trace)

    return factory


@dataclass
class EpisodeResult:
    mean_reward: float
    total_reward: float
    metrics: Metrics
    timetable: Timetable
    trace: List[Dict[str, Any]] = field(default_factory=list)

    def curve_row(self, episode: int) -> Dict[str, Any]:
        return {
            "episode": episode,
            "mean_reward": self.mean_reward,
            "nd": self.metrics.nd,
            "awt": self.metrics.awt,
            "nsp": self.metrics.nsp,
        }


def _finish(env: HeadwayEnv, rewards: List[float]) -> EpisodeResult:
    return EpisodeResult(
        mean_reward=float(np.mean(rewards)) if rewards else 0.0,
        total_reward=float(np.sum(rewards)),
        metrics=summarize(env.committed, env.queues),
        timetable=env.episode_to_timetable(),
        trace=list(env.trace),
    )


def rollout(env: HeadwayEnv, q: Optional[ValueNetwork], epsilon: float, rng: np.random.Generator) -> EpisodeResult:
    """Play one full episode with the rule-constrained policy and no learning."""
    state = env.reset()
    rewards = []
    while not env.done:
        action = select_action(q, state, env.state.t_ml, env.decision_band, epsilon, rng)
        transition = env.step(action)
        rewards.append(transition.reward)
        state = transition.next_state
    return _finish(env, rewards)


def greedy_rollout(env: HeadwayEnv, q: ValueNetwork) -> EpisodeResult:
    return rollout(env, q, 0.0, make_rng(0, "greedy"))


def random_rollout(env: HeadwayEnv, seed: int) -> EpisodeResult:
    """Uniform random choices inside the interval band."""
    return rollout(env, None, 1.0, make_rng(seed, "random-policy"))


@dataclass
class TrainingResult:
    network: ValueNetwork
    curve: List[Dict[str, Any]]
    timetable: Timetable
    metrics: Metrics
    trace: List[Dict[str, Any]]
    episodes_run: int
    steps: int
    stopped_early: bool = False
    state_size: int = 0
    final_epsilon: float = 1.0

    def recent(self, n: int) -> List[Dict[str, Any]]:
        """The last ``n`` curve rows, used for post-convergence statistics."""
        return self.curve[-n:] if n else []


class DQNTrainer:
    """
    Trains a value network on one line and demand set.

    Random streams are split by purpose (initialisation, exploration,
    replay sampling) so results depend only on ``config.seed``.
    """

    def __init__(
        self,
        line: LineConfig,
        tt: TravelTimeTable,
        demand: DemandSet,
        config: AgentConfig,
        env_factory: Optional[EnvFactory] = None,
    ):
        self.line = line
        self.tt = tt
        self.demand = demand
        self.config = config
        self.env_factory = env_factory or default_env_factory()
        self.logger = logging.getLogger(__name__)

        self.env = self.env_factory(line, tt, demand)
        self.q = ValueNetwork.build(
            self.env.state_size, config.hidden_layers, config.hidden_units, make_rng(config.seed, "network-init")
        )
        self.q_target = self.q.copy()
        self.buffer = ReplayBuffer(config.buffer_size, self.env.state_size)
        self.explore_rng = make_rng(config.seed, "explore")
        self.replay_rng = make_rng(config.seed, "replay")
        self.steps = 0

    @property
    def episode_minutes(self) -> int:
        return self.line.service_end - self.line.service_start + 1

    def _plateaued(self, nds: List[int], total_steps: int) -> bool:
        """ND spread has settled, judged only once exploration is at its floor."""
        cfg = self.config
        w = cfg.early_stop_window
        if not cfg.early_stop or len(nds) < 2 * w:
            return False
        if cfg.epsilon.value(self.steps, total_steps) > cfg.epsilon.end:
            return False
        current = float(np.std(nds[-w:]))
        previous = float(np.std(nds[-2 * w:-w]))
        return abs(current - previous) < self.config.early_stop_tol

    def run_episode(self, total_steps: int) -> EpisodeResult:
        env = self.env
        state = env.reset()
        rewards = []
        cfg = self.config
        while not env.done:
            epsilon = cfg.epsilon.value(self.steps, total_steps)
            action = select_action(self.q, state, env.state.t_ml, env.decision_band, epsilon, self.explore_rng)
            transition = env.step(action)
            rewards.append(transition.reward)
            if cfg.store_forced or not transition.forced:
                self.buffer.push(transition)
            if len(self.buffer) >= cfg.warmup_size:
                train_step(self.q, self.q_target, self.buffer, cfg, self.replay_rng)
            self.steps += 1
            if self.steps % cfg.target_sync_steps == 0:
                self.q_target.sync_from(self.q)
                self.logger.debug(f"Synced target network at step {self.steps}")
            state = transition.next_state
        if not self.q.is_finite():
            raise TrainingError(f"value network diverged after {self.steps} steps; lower the learning rate")
        return _finish(env, rewards)

    def train(self) -> TrainingResult:
        cfg = self.config
        total_steps = cfg.episodes * self.episode_minutes
        curve: List[Dict[str, Any]] = []
        nds: List[int] = []
        stopped_early = False

        for episode in range(1, cfg.episodes + 1):
            result = self.run_episode(total_steps)
            curve.append(result.curve_row(episode))
            nds.append(result.metrics.nd)
            self.logger.info(
                f"Episode {episode}/{cfg.episodes}: mean reward {result.mean_reward:.4f}, "
                f"ND {result.metrics.nd}, AWT {result.metrics.awt:.2f}, NSP {result.metrics.nsp}, "
                f"epsilon {cfg.epsilon.value(self.steps, total_steps):.3f}"
            )
            if self._plateaued(nds, total_steps):
                self.logger.info(f"Departure-count spread plateaued; stopping after episode {episode}")
                stopped_early = True
                break

        final_env = self.env_factory(self.line, self.tt, self.demand)
        final_env.keep_trace = True
        final = greedy_rollout(final_env, self.q)
        return TrainingResult(
            network=self.q,
            curve=curve,
            timetable=final.timetable,
            metrics=final.metrics,
            trace=final.trace,
            episodes_run=len(curve),
            steps=self.steps,
            stopped_early=stopped_early,
            state_size=self.env.state_size,
            final_epsilon=cfg.epsilon.value(self.steps, total_steps),
        )


def train(
    env_factory: Optional[EnvFactory],
    line: LineConfig,
    tt: TravelTimeTable,
    demand: DemandSet,
    config: AgentConfig,
) -> TrainingResult:
    """
    Train a controller and return the network, the per-episode reward curve
    and the greedy timetable.

    Raises:
        TrainingError: empty demand, or the network diverged.
    """
    if not len(demand):
        raise TrainingError("training needs at least one passenger")
    return DQNTrainer(line, tt, demand, config, env_factory).train()
