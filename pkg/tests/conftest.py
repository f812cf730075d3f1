"""Shared generators for the test suite.

All randomness is drawn from seeded random.Random instances so every
test run is reproducible; no test depends on wall-clock or ordering.
"""

from __future__ import annotations

import itertools
import random

import networkx as nx
import numpy as np
import pytest

from ldba_synth import GridEnv, LabelRegion, LdbaSpec, parse_ldba_spec
from ldba_synth.automaton import LdbaRuntime
from ldba_synth.oracle import ExplicitProduct


def make_rng(seed: int) -> random.Random:
    return random.Random(seed)


# ---------------------------------------------------------------------------
# random automata
# ---------------------------------------------------------------------------

LABEL_POOL = ("a", "b", "c", "d")


def random_automaton_document(rng: random.Random, max_states: int = 4,
                              sink_prob: float = 0.3,
                              epsilon_prob: float = 0.25,
                              n_accepting_sets: int | None = None) -> dict:
    """A random valid automaton document over LABEL_POOL."""
    n = rng.randint(1, max_states)
    states = list(range(n))
    alphabet = sorted(rng.sample(LABEL_POOL, rng.randint(1, len(LABEL_POOL))))

    transitions = {}
    for q in states:
        rows = []
        for lab in rng.sample(alphabet, rng.randint(0, len(alphabet))):
            guard = lab if rng.random() < 0.7 else f"!{lab}"
            target = -1 if rng.random() < sink_prob else rng.choice(states)
            rows.append({"guard": guard, "to": target})
        rows.append({"guard": "true", "to": rng.choice(states)})
        transitions[str(q)] = rows

    epsilon_transitions = {}
    counter = 0
    for q in states:
        if rng.random() < epsilon_prob:
            entries = []
            for _ in range(rng.randint(1, 2)):
                entries.append({"name": f"epsilon_{counter}",
                                "to": rng.choice(states)})
                counter += 1
            epsilon_transitions[str(q)] = entries

    if n_accepting_sets is None:
        n_accepting_sets = rng.randint(1, 2)
    accepting = []
    for _ in range(n_accepting_sets):
        accepting.append(sorted(rng.sample(states, rng.randint(1, n))))

    doc = {
        "states": states,
        "initial_state": rng.choice(states),
        "alphabet": alphabet,
        "accepting_sets": accepting,
        "transitions": transitions,
    }
    if epsilon_transitions:
        doc["epsilon_transitions"] = epsilon_transitions
    return doc


def random_automaton(rng: random.Random, **kwargs) -> LdbaSpec:
    return parse_ldba_spec(random_automaton_document(rng, **kwargs))


# ---------------------------------------------------------------------------
# random environments
# ---------------------------------------------------------------------------


def random_env(rng: random.Random, max_side: int = 4,
               labels=LABEL_POOL) -> GridEnv:
    height = rng.randint(2, max_side)
    width = rng.randint(2, max_side)
    actions = (["up", "down", "left", "right", "stay"]
               if rng.random() < 0.5 else ["up", "down", "left", "right"])
    rng.shuffle(actions)
    regions = []
    for _ in range(rng.randint(0, 3)):
        r0 = rng.randrange(height)
        r1 = rng.randint(r0 + 1, height)
        c0 = rng.randrange(width)
        c1 = rng.randint(c0 + 1, width)
        labs = frozenset(rng.sample(labels, rng.randint(1, 2)))
        regions.append(LabelRegion((r0, r1), (c0, c1), labs))
    return GridEnv(
        height=height,
        width=width,
        actions=actions,
        slip_probability=rng.choice([0.0, 0.1, 1.0 / 3.0]),
        initial_state=(rng.randrange(height), rng.randrange(width)),
        label_regions=regions,
    )


# ---------------------------------------------------------------------------
# random explicit products (for the oracle)
# ---------------------------------------------------------------------------


def random_explicit_product(rng: random.Random, max_states: int = 10,
                            max_actions: int = 2,
                            n_accepting_sets: int = 1) -> ExplicitProduct:
    """A random small MDP in ExplicitProduct form.

    States are synthetic ((i, 0), 0) tuples; what the oracle consumes is
    the graph structure, not the naming. Every row's mass sums to 1.
    """
    n = rng.randint(2, max_states)
    states = [((i, 0), 0) for i in range(n)]
    index = {node: i for i, node in enumerate(states)}
    actions = []
    successors = []
    for _ in range(n):
        acts = tuple(f"a{k}" for k in range(rng.randint(1, max_actions)))
        actions.append(acts)
        row = {}
        for a in acts:
            support = rng.sample(range(n), rng.randint(1, min(3, n)))
            weights = [rng.random() + 0.05 for _ in support]
            total = sum(weights)
            row[a] = tuple(sorted((j, w / total) for j, w in zip(support, weights)))
        successors.append(row)
    accepting = tuple(
        frozenset(rng.sample(range(n), rng.randint(1, max(1, n // 2))))
        for _ in range(n_accepting_sets)
    )
    return ExplicitProduct(states, index, rng.randrange(n), actions,
                           successors, accepting)


# ---------------------------------------------------------------------------
# independent reference routes
# ---------------------------------------------------------------------------


def brute_force_value(prod: ExplicitProduct) -> float:
    """Best satisfaction probability over every deterministic memoryless policy.

    Independent of the oracle's pipeline: the induced chain of each policy
    is analyzed with networkx SCCs (accepting bottom components) and a
    numpy linear solve for the transient reach probabilities. Sound as a
    reference when a single accepting set is in play; with several sets a
    memoryless policy cannot alternate between them, so this enumeration
    is only a lower bound there.
    """
    n = prod.num_states()
    choices = []
    for i in range(n):
        rows = []
        for a in prod.actions[i]:
            mass: dict[int, float] = {}
            for j, p in prod.successors[i][a]:
                mass[j] = mass.get(j, 0.0) + p
            rows.append(tuple(sorted(mass.items())))
        choices.append(rows)

    best = 0.0
    for support in itertools.product(*choices):
        g = nx.DiGraph()
        g.add_nodes_from(range(n))
        for i in range(n):
            g.add_edges_from((i, j) for j, _ in support[i])
        value = np.full(n, np.nan)
        for comp in nx.strongly_connected_components(g):
            comp = set(comp)
            bottom = all(j in comp for i in comp for j, _ in support[i])
            if not bottom:
                continue
            accepting = all(comp & set(acc) for acc in prod.accepting_sets)
            for i in comp:
                value[i] = 1.0 if accepting else 0.0
        transient = [i for i in range(n) if np.isnan(value[i])]
        if transient:
            pos = {i: k for k, i in enumerate(transient)}
            A = np.eye(len(transient))
            b = np.zeros(len(transient))
            for i in transient:
                for j, p in support[i]:
                    if j in pos:
                        A[pos[i], pos[j]] -= p
                    else:
                        b[pos[i]] += p * value[j]
            x = np.linalg.solve(A, b)
            for i in transient:
                value[i] = x[pos[i]]
        best = max(best, float(value[prod.initial]))
    return best


def product_rollout_sweeps(prod: ExplicitProduct, policy: dict[int, str],
                           spec: LdbaSpec, rng: random.Random,
                           steps: int) -> int:
    """Simulate a memoryless policy on an explicit product, counting sweeps.

    The frontier bookkeeping mirrors the synchronizer: the successor's
    automaton component is fed to advance_frontier after every step.
    """
    runtime = LdbaRuntime(spec)
    i = prod.initial
    for _ in range(steps):
        successors = prod.successors[i][policy[i]]
        draw = rng.random()
        acc = 0.0
        i = successors[-1][0]
        for j, p in successors:
            acc += p
            if draw < acc:
                i = j
                break
        runtime.advance_frontier(prod.states[i][1])
    return runtime.sweeps_completed


@pytest.fixture
def rng():
    return make_rng(20240817)
