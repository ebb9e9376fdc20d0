"""Deterministic desk-scale environments behind one simulation interface.

Every environment exposes ``reset(seed) -> encoding``,
``step(action) -> (encoding, reward, done)``, and a canonical byte
encoding that is equal between two moments exactly when the underlying
states are equal.  All transition randomness lives in ``reset``; steps
are purely deterministic, which is what makes action-sequence
equivalences meaningful.

The built-in equivalence sets live as DSL files in the package data
directory and are loaded with :func:`builtin_omega`.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .algebra import ActionSet, EquivalenceSet, parse_dsl


class UnknownEnv(ValueError):
    """No environment is registered under the requested name."""


class UnknownVariant(ValueError):
    """No built-in equivalence set matches the requested name/variant."""


# heading index -> (dx, dy); turning left decrements, right increments
HEADINGS = ((0, 1), (1, 0), (0, -1), (-1, 0))


class Environment:
    """Behavioral contract shared by all environments here.

    Subclasses fill ``action_names`` and implement the three methods.
    Encodings are byte strings; rewards are floats; ``done`` signals
    the end of an episode.
    """

    action_names: tuple[str, ...] = ()

    @property
    def action_count(self) -> int:
        return len(self.action_names)

    def action_set(self) -> ActionSet:
        return ActionSet(self.action_names)

    def reset(self, seed: int) -> bytes:
        raise NotImplementedError

    def step(self, action: int) -> tuple[bytes, float, bool]:
        raise NotImplementedError

    def canonical_state_encoding(self) -> bytes:
        raise NotImplementedError


class CardinalGrid(Environment):
    """100x100 grid; moves one cell in a cardinal direction per step.

    The agent starts in the middle.  Bumping a wall leaves the position
    unchanged, so commutation and inverse priors are exact everywhere
    except along the boundary.
    """

    action_names = ("right", "left", "up", "down")
    moves = ((1, 0), (-1, 0), (0, 1), (0, -1))

    def __init__(self, size: int = 100):
        self.size = size
        self.x = size // 2
        self.y = size // 2

    def reset(self, seed: int) -> bytes:
        self.x = self.size // 2
        self.y = self.size // 2
        return self.canonical_state_encoding()

    def step(self, action: int) -> tuple[bytes, float, bool]:
        dx, dy = self.moves[action]
        self.x = min(max(self.x + dx, 0), self.size - 1)
        self.y = min(max(self.y + dy, 0), self.size - 1)
        return self.canonical_state_encoding(), 0.0, False

    def canonical_state_encoding(self) -> bytes:
        return bytes((self.x, self.y))


class RotationGrid(Environment):
    """100x100 grid with a heading; forward moves, the others rotate.

    Rotations always succeed, so the rotation priors are exact at every
    state; forward clamps at walls.
    """

    action_names = ("forward", "left", "right")

    def __init__(self, size: int = 100):
        self.size = size
        self.x = size // 2
        self.y = size // 2
        self.heading = 0

    def reset(self, seed: int) -> bytes:
        self.x = self.size // 2
        self.y = self.size // 2
        self.heading = 0
        return self.canonical_state_encoding()

    def step(self, action: int) -> tuple[bytes, float, bool]:
        if action == 0:
            dx, dy = HEADINGS[self.heading]
            self.x = min(max(self.x + dx, 0), self.size - 1)
            self.y = min(max(self.y + dy, 0), self.size - 1)
        elif action == 1:
            self.heading = (self.heading - 1) % 4
        else:
            self.heading = (self.heading + 1) % 4
        return self.canonical_state_encoding(), 0.0, False

    def canonical_state_encoding(self) -> bytes:
        return bytes((self.x, self.y, self.heading))


class DoorKey(Environment):
    """Two rooms split by a wall with a locked door; key opens it.

    The left room is 12x17 and the right one 4x17, separated by the
    wall column with a door in its middle.  The agent must pick up the
    key (blocking its cell until taken), open the door with it, and
    reach the goal in the right room for a reward of 1.  Key, goal,
    agent cell, and agent heading are drawn at reset from the given
    seed.  Episodes are capped at 3249 steps.
    """

    action_names = ("forward", "left", "right", "pickup", "open")
    width = 17
    height = 17
    wall_col = 12
    door = (12, 8)
    step_limit = 3249

    def __init__(self):
        self.reset(0)

    def reset(self, seed: int) -> bytes:
        rng = np.random.Generator(np.random.PCG64(seed))
        self.key = (int(rng.integers(0, self.wall_col)), int(rng.integers(0, self.height)))
        while True:
            agent = (int(rng.integers(0, self.wall_col)), int(rng.integers(0, self.height)))
            if agent != self.key:
                break
        self.x, self.y = agent
        self.heading = int(rng.integers(0, 4))
        self.goal = (
            int(rng.integers(self.wall_col + 1, self.width)),
            int(rng.integers(0, self.height)),
        )
        self.has_key = False
        self.door_open = False
        self.steps = 0
        return self.canonical_state_encoding()

    def _walkable(self, x: int, y: int) -> bool:
        if not (0 <= x < self.width and 0 <= y < self.height):
            return False
        if x == self.wall_col:
            return (x, y) == self.door and self.door_open
        if (x, y) == self.key and not self.has_key:
            return False
        return True

    def _ahead(self) -> tuple[int, int]:
        dx, dy = HEADINGS[self.heading]
        return self.x + dx, self.y + dy

    def step(self, action: int) -> tuple[bytes, float, bool]:
        reward = 0.0
        done = False
        if action == 0:
            nx, ny = self._ahead()
            if self._walkable(nx, ny):
                self.x, self.y = nx, ny
                if (self.x, self.y) == self.goal:
                    reward = 1.0
                    done = True
        elif action == 1:
            self.heading = (self.heading - 1) % 4
        elif action == 2:
            self.heading = (self.heading + 1) % 4
        elif action == 3:
            if self._ahead() == self.key and not self.has_key:
                self.has_key = True
        else:
            if self._ahead() == self.door and self.has_key:
                self.door_open = True
        self.steps += 1
        if self.steps >= self.step_limit:
            done = True
        return self.canonical_state_encoding(), reward, done

    def canonical_state_encoding(self) -> bytes:
        return bytes(
            (
                self.x,
                self.y,
                self.heading,
                int(self.has_key),
                int(self.door_open),
                self.key[0],
                self.key[1],
                self.goal[0],
                self.goal[1],
            )
        )


class Catcher(Environment):
    """Catch a falling ball with a one-cell paddle on the bottom row.

    The field is 60 wide and 30 high; the ball falls one row per step
    from above the top row and the paddle moves one cell per step,
    starting in the middle.  After 30 steps the ball reaches the bottom
    row: reward +1 if the paddle is under it, -1 otherwise.
    """

    action_names = ("left", "right")
    width = 60
    height = 30

    def __init__(self):
        self.reset(0)

    def reset(self, seed: int) -> bytes:
        rng = np.random.Generator(np.random.PCG64(seed))
        self.paddle = (self.width - 1) // 2
        self.ball_x = int(rng.integers(0, self.width))
        self.ball_y = self.height
        return self.canonical_state_encoding()

    def step(self, action: int) -> tuple[bytes, float, bool]:
        delta = -1 if action == 0 else 1
        self.paddle = min(max(self.paddle + delta, 0), self.width - 1)
        self.ball_y -= 1
        if self.ball_y <= 0:
            reward = 1.0 if self.paddle == self.ball_x else -1.0
            return self.canonical_state_encoding(), reward, True
        return self.canonical_state_encoding(), 0.0, False

    def canonical_state_encoding(self) -> bytes:
        return bytes((self.paddle, self.ball_x, self.ball_y))


ENV_REGISTRY = {
    "cardinal": CardinalGrid,
    "rotation": RotationGrid,
    "doorkey": DoorKey,
    "catcher": Catcher,
}

# variants of the built-in equivalence sets, in increasing prior strength
BUILTIN_OMEGA_VARIANTS = {
    "cardinal": (1, 2, 3, 4),
    "rotation": (1, 2, 3),
    "doorkey": (None,),
    "catcher": (None,),
}


def make_env(name: str, **params) -> Environment:
    """Instantiate a registered environment by name."""
    try:
        cls = ENV_REGISTRY[name]
    except KeyError:
        raise UnknownEnv(
            f"unknown environment {name!r}; choose from {sorted(ENV_REGISTRY)}"
        ) from None
    return cls(**params)


def builtin_omega(name: str, variant: int | None = None) -> EquivalenceSet:
    """Load a built-in equivalence set shipped with the package.

    ``variant`` selects among the numbered sets for cardinal (1 to 4)
    and rotation (1 to 3); doorkey and catcher have a single unnumbered
    set.  The parsed action set is checked against the environment's.
    """
    variants = BUILTIN_OMEGA_VARIANTS.get(name)
    if variants is None or variant not in variants:
        raise UnknownVariant(
            f"no built-in equivalence set for {name!r} variant {variant!r}"
        )
    stem = name if variant is None else f"{name}_{variant}"
    text = resources.files("easee").joinpath("data", f"{stem}.omega").read_text()
    actions, omega = parse_dsl(text)
    expected = ActionSet(ENV_REGISTRY[name].action_names)
    if actions != expected:
        raise UnknownVariant(
            f"data file {stem}.omega declares actions {actions.names}, "
            f"but {name} uses {expected.names}"
        )
    return omega


def parse_builtin_spec(spec: str) -> tuple[str, int | None]:
    """Split a ``name`` or ``name_variant`` label into its parts."""
    if "_" in spec:
        name, _, tail = spec.rpartition("_")
        if name in BUILTIN_OMEGA_VARIANTS and tail.isdigit():
            return name, int(tail)
    if spec in BUILTIN_OMEGA_VARIANTS:
        return spec, None
    raise UnknownVariant(f"cannot parse built-in equivalence set label {spec!r}")
