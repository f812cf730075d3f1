"""On-the-fly synchronization of a grid environment with an automaton.

Product states are ((row, col), q) pairs materialized only as visited;
no product table is ever built here. Base actions advance the
environment and feed the new cell's labels to the automaton;
epsilon-actions jump the automaton while freezing the environment and
consume no randomness. Each step applies the accepting-frontier rule to
the successor automaton state: a fired frontier pays positive_reward and
discounts the future by eta, every other transition is reward-neutral
and undiscounted. Episodes end exactly when the automaton hits the sink.
"""

from __future__ import annotations

from dataclasses import dataclass

from .automaton import SINK_STATE, LdbaRuntime


@dataclass(frozen=True)
class RewardSpec:
    """Frontier reward shaping: fired steps pay positive_reward, discount eta."""

    eta: float
    positive_reward: float = 1.0
    neutral_reward: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must lie strictly inside (0, 1)")
        if self.positive_reward <= 0.0:
            raise ValueError("positive_reward must be positive")


@dataclass(frozen=True)
class Transition:
    state: tuple
    action: str
    next_state: tuple
    reward: float
    gamma: float
    done: bool
    fired: bool


class ProductError(ValueError):
    """Raised on illegal actions for the current product state."""


class ProductRun:
    """A live product trajectory over one environment and one automaton run."""

    def __init__(self, env, runtime_or_spec, reward: RewardSpec, rng):
        self.env = env
        self.runtime = (runtime_or_spec if isinstance(runtime_or_spec, LdbaRuntime)
                        else LdbaRuntime(runtime_or_spec))
        self.reward = reward
        self.rng = rng
        self._actions_by_state: dict[int, tuple[str, ...]] = {}
        self.state = (env.initial_state, self.runtime.spec.initial_state)

    def reset(self) -> tuple:
        s = self.env.reset()
        q = self.runtime.reset()
        self.state = (s, q)
        return self.state

    def available_actions(self, state=None) -> tuple[str, ...]:
        """Base actions first, then the automaton's epsilon actions for q."""
        q = (state if state is not None else self.state)[1]
        cached = self._actions_by_state.get(q)
        if cached is None:
            if q == SINK_STATE:
                cached = self.env.actions
            else:
                cached = self.env.actions + self.runtime.spec.epsilon_names(q)
            self._actions_by_state[q] = cached
        return cached

    def step(self, action: str) -> Transition:
        state = self.state
        s, q = state
        if action not in self.available_actions(state):
            raise ProductError(f"illegal action {action!r} for product state {state}")
        if action.startswith("epsilon_"):
            s_next = s
            q_next = self.runtime.step(frozenset((action,)))
        else:
            s_next = self.env.step(action, self.rng)
            q_next = self.runtime.step(self.env.state_label(s_next))
        fired = self.runtime.advance_frontier(q_next)
        r = self.reward.positive_reward if fired else self.reward.neutral_reward
        gamma = self.reward.eta if r > 0 else 1.0
        next_state = (s_next, q_next)
        self.state = next_state
        return Transition(state, action, next_state, r, gamma, q_next == SINK_STATE, fired)
