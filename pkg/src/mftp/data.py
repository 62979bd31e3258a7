"""Scenario ingestion, agent-centric normalization, and synthetic traffic.

A scenario holds N agents, each with T_h observed states and T_f future
states in a shared global frame; a subset of agents are prediction targets.
For every target we build a local frame (origin at its latest observed pose,
x axis along its last heading) so the predictor never sees absolute
coordinates. The stored frame can map predictions back to the global frame.

On-disk format (one JSON object per file):

    {"scenarios": [{"id": str, "dt": float,
                    "agents": [{"history": [[x, y, valid], ...],
                                "future":  [[x, y, valid], ...]}],
                    "targets": [int, ...]}]}

Coordinates are meters; valid is 0 or 1 and marks padded states that every
downstream computation must ignore.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


class ScenarioFormatError(ValueError):
    """A scenario file or record violates the format contract."""


@dataclass
class AgentState:
    """One observed pose; x/y are meaningless when valid is False."""
    x: float
    y: float
    valid: bool = True

    def as_row(self) -> list:
        return [self.x, self.y, 1.0 if self.valid else 0.0]

    @staticmethod
    def from_row(row) -> "AgentState":
        return AgentState(x=float(row[0]), y=float(row[1]), valid=bool(row[2]))


@dataclass
class AgentTrack:
    history: np.ndarray        # [T_h, 3] rows of (x, y, valid)
    future: np.ndarray         # [T_f, 3]


@dataclass
class Scenario:
    scenario_id: str
    dt: float
    agents: list[AgentTrack]
    targets: list[int]

    @property
    def num_agents(self) -> int:
        return len(self.agents)

    @property
    def t_history(self) -> int:
        return self.agents[0].history.shape[0]

    @property
    def t_future(self) -> int:
        return self.agents[0].future.shape[0]


@dataclass
class TargetFrame:
    """One target's agent-centric view of the scenario plus the inverse map."""
    target_index: int
    origin: np.ndarray         # [2] global position of the target at t=0
    heading: float             # radians, global heading at t=0
    history: np.ndarray        # [N, T_h, 3] in the target frame
    future: np.ndarray         # [N, T_f, 3] in the target frame
    agent_valid: np.ndarray    # [N] bool, any valid history state

    def to_global(self, points: np.ndarray) -> np.ndarray:
        """Map [..., 2] local points back to global coordinates."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        x = points[..., 0]
        y = points[..., 1]
        out = np.empty(points.shape, dtype=np.float64)
        out[..., 0] = c * x - s * y + self.origin[0]
        out[..., 1] = s * x + c * y + self.origin[1]
        return out

    def to_local(self, points: np.ndarray) -> np.ndarray:
        c, s = math.cos(self.heading), math.sin(self.heading)
        x = points[..., 0] - self.origin[0]
        y = points[..., 1] - self.origin[1]
        out = np.empty(points.shape, dtype=np.float64)
        out[..., 0] = c * x + s * y
        out[..., 1] = -s * x + c * y
        return out


@dataclass
class NormalizedScenario:
    scenario_id: str
    dt: float
    frames: list[TargetFrame]


def _validate_scenario(s: Scenario, where: str) -> None:
    if not s.agents:
        raise ScenarioFormatError(f"{where}: scenario has no agents")
    t_h = s.agents[0].history.shape[0]
    t_f = s.agents[0].future.shape[0]
    if t_h < 2:
        raise ScenarioFormatError(f"{where}: history length {t_h} < 2")
    if t_f < 1:
        raise ScenarioFormatError(f"{where}: future length {t_f} < 1")
    for i, a in enumerate(s.agents):
        if a.history.shape != (t_h, 3):
            raise ScenarioFormatError(
                f"{where}: agent {i} history shape {a.history.shape} != ({t_h}, 3)")
        if a.future.shape != (t_f, 3):
            raise ScenarioFormatError(
                f"{where}: agent {i} future shape {a.future.shape} != ({t_f}, 3)")
    for t in s.targets:
        if not 0 <= t < len(s.agents):
            raise ScenarioFormatError(f"{where}: target index {t} out of range")
        if s.agents[t].history[-1, 2] == 0.0:
            raise ScenarioFormatError(
                f"{where}: target agent {t} has no valid reference pose at t=0")


def _track_from_record(rec: dict, where: str) -> AgentTrack:
    try:
        hist = np.asarray(rec["history"], dtype=np.float64)
        fut = np.asarray(rec["future"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"{where}: malformed agent record ({exc})") from None
    if hist.ndim != 2 or hist.shape[1] != 3:
        raise ScenarioFormatError(f"{where}: history rows must be [x, y, valid]")
    if fut.ndim != 2 or fut.shape[1] != 3:
        raise ScenarioFormatError(f"{where}: future rows must be [x, y, valid]")
    return AgentTrack(history=hist, future=fut)


def load_scenarios(path: str) -> list[Scenario]:
    """Parse and validate a scenario file; order is preserved."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioFormatError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or "scenarios" not in doc:
        raise ScenarioFormatError(f"{path}: missing top-level 'scenarios' list")

    out = []
    for si, rec in enumerate(doc["scenarios"]):
        where = f"{path}: scenario {si} (id={rec.get('id', '?')})"
        agents = [_track_from_record(a, f"{where}, agent {ai}")
                  for ai, a in enumerate(rec.get("agents", []))]
        s = Scenario(
            scenario_id=str(rec.get("id", si)),
            dt=float(rec.get("dt", 0.5)),
            agents=agents,
            targets=[int(t) for t in rec.get("targets", [])],
        )
        _validate_scenario(s, where)
        out.append(s)
    return out


def save_scenarios(path: str, scenarios: list[Scenario]) -> None:
    doc = {"scenarios": [
        {
            "id": s.scenario_id,
            "dt": s.dt,
            "agents": [{"history": a.history.tolist(), "future": a.future.tolist()}
                       for a in s.agents],
            "targets": list(s.targets),
        }
        for s in scenarios
    ]}
    with open(path, "w") as fh:
        json.dump(doc, fh)


# -- agent-centric normalization ---------------------------------------------------


def _heading_at_origin(history: np.ndarray) -> float:
    """Heading from the last displacement between consecutive valid states.

    Zero displacement (or fewer than two valid states) means no rotation.
    """
    valid_idx = np.flatnonzero(history[:, 2] != 0.0)
    for j in range(len(valid_idx) - 1, 0, -1):
        a, b = valid_idx[j - 1], valid_idx[j]
        if b - a == 1:
            dx = history[b, 0] - history[a, 0]
            dy = history[b, 1] - history[a, 1]
            if dx != 0.0 or dy != 0.0:
                return math.atan2(dy, dx)
            return 0.0
    return 0.0


def normalize(s: Scenario) -> NormalizedScenario:
    """Express the whole scenario in each target's local frame.

    The target's t=0 pose maps to the origin and its last heading to +x,
    so predictions are translation and rotation invariant by construction.
    """
    frames = []
    for t in s.targets:
        hist_t = s.agents[t].history
        origin = hist_t[-1, :2].copy()
        heading = _heading_at_origin(hist_t)
        frame = TargetFrame(
            target_index=t,
            origin=origin,
            heading=heading,
            history=np.stack([_transform_track(a.history, origin, heading)
                              for a in s.agents]),
            future=np.stack([_transform_track(a.future, origin, heading)
                             for a in s.agents]),
            agent_valid=np.array([bool(np.any(a.history[:, 2] != 0.0))
                                  for a in s.agents]),
        )
        frames.append(frame)
    return NormalizedScenario(scenario_id=s.scenario_id, dt=s.dt, frames=frames)


def _transform_track(track: np.ndarray, origin: np.ndarray, heading: float) -> np.ndarray:
    out = track.copy()
    c, s = math.cos(heading), math.sin(heading)
    x = track[:, 0] - origin[0]
    y = track[:, 1] - origin[1]
    out[:, 0] = c * x + s * y
    out[:, 1] = -s * x + c * y
    out[track[:, 2] == 0.0, 0:2] = 0.0      # padded states carry no coordinates
    return out


# -- synthetic scenario generation -------------------------------------------------

MANEUVERS = ("constant_velocity", "constant_turn", "lane_change")


@dataclass
class GenConfig:
    num_scenarios: int = 8
    num_agents: int = 3
    num_targets: int = 1
    t_history: int = 8
    t_future: int = 12
    dt: float = 0.5
    speed_range: tuple[float, float] = (2.0, 8.0)
    turn_rate_range: tuple[float, float] = (0.1, 0.4)   # rad/s, sign randomized
    lane_offset_range: tuple[float, float] = (2.0, 4.0)  # meters of lateral shift
    maneuver_mix: tuple[float, float, float] = (0.4, 0.3, 0.3)
    noise_std: float = 0.0
    spawn_radius: float = 20.0

    def validate(self) -> None:
        for name in ("num_scenarios", "num_agents", "num_targets",
                     "t_history", "t_future"):
            if getattr(self, name) <= 0:
                raise ValueError(f"GenConfig.{name} must be positive")
        if self.t_history < 2:
            raise ValueError("GenConfig.t_history must be >= 2")
        if self.num_targets > self.num_agents:
            raise ValueError("GenConfig.num_targets exceeds num_agents")
        if self.dt <= 0:
            raise ValueError("GenConfig.dt must be positive")
        if any(w < 0 for w in self.maneuver_mix) or sum(self.maneuver_mix) <= 0:
            raise ValueError("GenConfig.maneuver_mix must be nonnegative, not all zero")


def _maneuver_positions(kind: str, n_steps: int, dt: float, speed: float,
                        pose: tuple[float, float, float], params: dict) -> np.ndarray:
    """Positions at steps 1..n_steps continuing a maneuver from (x, y, heading)."""
    x0, y0, th = pose
    ts = np.arange(1, n_steps + 1, dtype=np.float64) * dt
    if kind == "constant_velocity":
        xs = x0 + speed * ts * math.cos(th)
        ys = y0 + speed * ts * math.sin(th)
    elif kind == "constant_turn":
        w = params["turn_rate"]
        # exact circle of radius v/w around the center left/right of the pose
        r = speed / w
        cx = x0 - r * math.sin(th)
        cy = y0 + r * math.cos(th)
        ang = th - math.pi / 2.0 + w * ts
        xs = cx + r * np.cos(ang)
        ys = cy + r * np.sin(ang)
    elif kind == "lane_change":
        # longitudinal constant speed plus a sigmoidal lateral offset
        off = params["lane_offset"]
        mid = params["mid_time"]
        rate = params["rate"]
        lon = speed * ts
        lat = off / (1.0 + np.exp(-rate * (ts - mid)))
        lat0 = off / (1.0 + np.exp(-rate * (0.0 - mid)))
        lat = lat - lat0
        xs = x0 + lon * math.cos(th) - lat * np.sin(th)
        ys = y0 + lon * math.sin(th) + lat * np.cos(th)
    else:
        raise ValueError(f"unknown maneuver {kind!r}")
    return np.stack([xs, ys], axis=1)


def generate_synthetic(config: GenConfig, seed: int) -> list[Scenario]:
    """Deterministic mixed-maneuver scenarios; futures continue the history motion."""
    config.validate()
    rng = np.random.default_rng(seed)
    mix = np.asarray(config.maneuver_mix, dtype=np.float64)
    mix = mix / mix.sum()

    scenarios = []
    for si in range(config.num_scenarios):
        agents = []
        for _ in range(config.num_agents):
            kind = MANEUVERS[int(rng.choice(3, p=mix))]
            speed = float(rng.uniform(*config.speed_range))
            th = float(rng.uniform(-math.pi, math.pi))
            x0 = float(rng.uniform(-config.spawn_radius, config.spawn_radius))
            y0 = float(rng.uniform(-config.spawn_radius, config.spawn_radius))
            params = {
                "turn_rate": float(rng.uniform(*config.turn_rate_range)
                                   * rng.choice([-1.0, 1.0])),
                "lane_offset": float(rng.uniform(*config.lane_offset_range)
                                     * rng.choice([-1.0, 1.0])),
                "mid_time": float(config.t_history * config.dt * 0.75),
                "rate": 1.5,
            }

            n_total = config.t_history - 1 + config.t_future
            path = _maneuver_positions(kind, n_total, config.dt, speed,
                                       (x0, y0, th), params)
            xy = np.vstack([[x0, y0], path])                     # [T_h + T_f, 2]
            if config.noise_std > 0.0:
                xy = xy + rng.normal(scale=config.noise_std, size=xy.shape)

            track = np.concatenate([xy, np.ones((xy.shape[0], 1))], axis=1)
            agents.append(AgentTrack(history=track[: config.t_history],
                                     future=track[config.t_history:]))

        scenarios.append(Scenario(
            scenario_id=f"synthetic-{seed}-{si}",
            dt=config.dt,
            agents=agents,
            targets=list(range(config.num_targets)),
        ))
    return scenarios
