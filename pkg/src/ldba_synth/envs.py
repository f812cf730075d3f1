"""Slippery grid-world environments with labeled cells.

A grid is height x width with moves up/down/left/right and optionally
stay. With probability slip_probability a move slips: the agent goes to
one of the two cells perpendicular to the intended direction or stays
put, each with slip_probability/3 ('stay' has no perpendiculars, so it
never slips). Moves off the boundary leave the agent in place. Labels
come from an ordered region list where later regions overwrite earlier
ones on the cells they cover; a region may carry several labels at once.

Environments never terminate episodes on their own; the product layer
decides termination. The module performs no I/O beyond loading spec
files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

ACTION_DELTAS = {
    "up": (-1, 0),
    "down": (1, 0),
    "left": (0, -1),
    "right": (0, 1),
    "stay": (0, 0),
}

PERPENDICULAR = {
    "up": ("left", "right"),
    "down": ("left", "right"),
    "left": ("up", "down"),
    "right": ("up", "down"),
    "stay": (),
}


class EnvSpecError(ValueError):
    """Raised when an environment document is invalid."""


def _require(cond: bool, message: str):
    if not cond:
        raise EnvSpecError(message)


@dataclass
class LabelRegion:
    rows: tuple[int, int]
    cols: tuple[int, int]
    labels: frozenset[str]


@dataclass
class EnumeratedModel:
    """Explicit finite model of a grid: states, sparse kernel, labels."""

    states: list[tuple[int, int]]
    index: dict[tuple[int, int], int]
    actions: tuple[str, ...]
    kernel: list[dict[str, tuple[tuple[int, float], ...]]]
    labels: list[frozenset[str]]


class GridEnv:
    """A labeled slippery grid. Stateful over the agent position only."""

    def __init__(self, height, width, actions, slip_probability, initial_state,
                 label_regions):
        _require(isinstance(height, int) and height > 0, "height must be a positive int")
        _require(isinstance(width, int) and width > 0, "width must be a positive int")
        _require(isinstance(actions, (list, tuple)) and len(actions) in (4, 5),
                 "actions must list 4 or 5 action names")
        for name in actions:
            _require(name in ACTION_DELTAS, f"unknown action {name!r}")
        _require(len(set(actions)) == len(actions), "duplicate actions")
        _require(0.0 <= slip_probability <= 1.0, "slip_probability must be in [0, 1]")
        row0, col0 = initial_state
        _require(0 <= row0 < height and 0 <= col0 < width, "initial_state out of bounds")

        self.height = height
        self.width = width
        self.actions = tuple(actions)
        self.slip_probability = float(slip_probability)
        self.initial_state = (row0, col0)
        self.regions = list(label_regions)

        grid = [[frozenset() for _ in range(width)] for _ in range(height)]
        for region in self.regions:
            (rlo, rhi), (clo, chi) = region.rows, region.cols
            _require(0 <= rlo < rhi <= height, f"region rows {region.rows} out of bounds")
            _require(0 <= clo < chi <= width, f"region cols {region.cols} out of bounds")
            for r in range(rlo, rhi):
                for c in range(clo, chi):
                    grid[r][c] = region.labels
        self._labels = grid
        self._pos = self.initial_state

        for label in self.label_universe():
            _require(not label.startswith("epsilon_"),
                     f"label {label!r} uses the reserved epsilon_ prefix")

    def label_universe(self) -> set[str]:
        universe = set()
        for region in self.regions:
            universe |= region.labels
        return universe

    def reset(self) -> tuple[int, int]:
        self._pos = self.initial_state
        return self._pos

    def state_label(self, state) -> frozenset[str]:
        return self._labels[state[0]][state[1]]

    def _move(self, state, action) -> tuple[int, int]:
        dr, dc = ACTION_DELTAS[action]
        r, c = state[0] + dr, state[1] + dc
        if 0 <= r < self.height and 0 <= c < self.width:
            return (r, c)
        return state

    def step(self, action, rng) -> tuple[int, int]:
        """Advance the agent; rng is consumed for the slip draw(s) only."""
        if action not in self.actions:
            raise EnvSpecError(f"action {action!r} is not available in this environment")
        outcome = action
        if self.slip_probability > 0.0 and rng.random() < self.slip_probability:
            perp = PERPENDICULAR[action]
            if perp:
                pick = rng.randrange(3)
                outcome = perp[pick] if pick < 2 else "stay"
            else:
                outcome = "stay"
        if outcome == "stay":
            nxt = self._pos
        else:
            nxt = self._move(self._pos, outcome)
        self._pos = nxt
        return nxt

    def enumerate_model(self) -> EnumeratedModel:
        """Explicit kernel P(s'|s,a); every row sums to 1 within 1e-12."""
        states = [(r, c) for r in range(self.height) for c in range(self.width)]
        index = {s: i for i, s in enumerate(states)}
        slip = self.slip_probability
        kernel: list[dict[str, tuple[tuple[int, float], ...]]] = []
        for s in states:
            row: dict[str, tuple[tuple[int, float], ...]] = {}
            for action in self.actions:
                mass: dict[int, float] = {}
                perp = PERPENDICULAR[action]
                if slip > 0.0 and perp:
                    share = slip / 3.0
                    mass[index[self._move(s, action)]] = 1.0 - slip
                    for direction in perp:
                        j = index[self._move(s, direction)]
                        mass[j] = mass.get(j, 0.0) + share
                    j = index[s]
                    mass[j] = mass.get(j, 0.0) + share
                else:
                    mass[index[self._move(s, action)]] = 1.0
                row[action] = tuple(sorted(mass.items()))
            kernel.append(row)
        labels = [self.state_label(s) for s in states]
        return EnumeratedModel(states, index, self.actions, kernel, labels)


# ---------------------------------------------------------------------------
# spec files
# ---------------------------------------------------------------------------


def parse_env_spec(document) -> GridEnv:
    """Build a GridEnv from a JSON string or decoded dict."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as err:
            raise EnvSpecError(f"syntax error at line {err.lineno}: {err.msg}") from err
    _require(isinstance(document, dict), "environment document must be a JSON object")
    for key in ("height", "width", "actions", "slip_probability", "initial_state"):
        _require(key in document, f"missing environment key {key!r}")

    regions = []
    for raw in document.get("label_regions", []):
        _require(isinstance(raw, dict) and {"rows", "cols", "label"} <= set(raw),
                 "label_regions entries must be {rows, cols, label} objects")
        rows, cols = raw["rows"], raw["cols"]
        _require(isinstance(rows, list) and len(rows) == 2, "region rows must be [lo, hi)")
        _require(isinstance(cols, list) and len(cols) == 2, "region cols must be [lo, hi)")
        label = raw["label"]
        labels = [label] if isinstance(label, str) else list(label)
        _require(labels and all(isinstance(lab, str) for lab in labels),
                 "region label must be a string or list of strings")
        regions.append(LabelRegion((rows[0], rows[1]), (cols[0], cols[1]), frozenset(labels)))

    initial = document["initial_state"]
    _require(isinstance(initial, list) and len(initial) == 2
             and all(isinstance(v, int) for v in initial),
             "initial_state must be [row, col] with integer coordinates")
    return GridEnv(
        height=document["height"],
        width=document["width"],
        actions=document["actions"],
        slip_probability=document["slip_probability"],
        initial_state=(initial[0], initial[1]),
        label_regions=regions,
    )


def env_to_document(env: GridEnv) -> dict:
    return {
        "height": env.height,
        "width": env.width,
        "actions": list(env.actions),
        "slip_probability": env.slip_probability,
        "initial_state": list(env.initial_state),
        "label_regions": [
            {"rows": list(region.rows), "cols": list(region.cols),
             "label": sorted(region.labels)}
            for region in env.regions
        ],
    }


def load_env_file(path) -> GridEnv:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_env_spec(handle.read())


def bundled_data_dir() -> Path:
    return Path(__file__).resolve().parent / "data"


def resolve_spec_path(arg: str, kind: str) -> Path:
    """Resolve a CLI path argument, falling back to a bundled benchmark name.

    kind is 'envs' or 'ldba'. Raises FileNotFoundError naming both lookups.
    """
    direct = Path(arg)
    if direct.is_file():
        return direct
    name = arg if arg.endswith(".json") else arg + ".json"
    bundled = bundled_data_dir() / kind / name
    if bundled.is_file():
        return bundled
    raise FileNotFoundError(
        f"no such file {direct} and no bundled {kind} spec named {name}")
