"""Qualitative spatio-temporal feature calculi.

Five discrete feature families are evaluated frame-by-frame over a
demonstration:

* ``CD``     compass direction between two objects (9 values incl. EQ)
* ``MV``     whether an object is moving (per frame transition)
* ``MV_DIR`` compass direction of an object's own movement
* ``QDC``    banded inter-object distance (adjacent/close/far/very_far)
* ``QTC_C1`` relative motion toward (-) / away (+) / neither (0)
* ``QTC_C3`` clockwise (-) / counterclockwise (+) motion about the other

Feature values are plain string symbols drawn from the per-kind domains
below; QDC symbols are the band ordinals "0".."3" so order comparisons stay
meaningful.  All evaluators are pure functions of their inputs and a
:class:`QuantizationConfig`, and every length comparison is homogeneous in
scene units, so scaling a scene and its config together never changes a
value.
"""

from __future__ import annotations

import bisect
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .scene import (
    DEFAULT_MOTION_THRESHOLD,
    DYNAMIC_ROLES,
    Demonstration,
    Frame,
    MoveEpisode,
    ObjectPose,
    resolve_dynamic_binding,
    segment_move_episodes,
)


class FeatureKind(enum.Enum):
    CD = "CD"
    MV = "MV"
    MV_DIR = "MV_DIR"
    QDC = "QDC"
    QTC_C1 = "QTC_C1"
    QTC_C3 = "QTC_C3"


COMPASS = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")

DOMAINS: dict[FeatureKind, tuple[str, ...]] = {
    FeatureKind.CD: COMPASS + ("EQ",),
    FeatureKind.MV: ("0", "1"),
    FeatureKind.MV_DIR: COMPASS + ("STATIC",),
    FeatureKind.QDC: ("0", "1", "2", "3"),
    FeatureKind.QTC_C1: ("-", "0", "+"),
    FeatureKind.QTC_C3: ("-", "0", "+"),
}

QDC_BAND_NAMES = ("adjacent", "close", "far", "very_far")

ARITY: dict[FeatureKind, int] = {
    FeatureKind.CD: 2,
    FeatureKind.MV: 1,
    FeatureKind.MV_DIR: 1,
    FeatureKind.QDC: 2,
    FeatureKind.QTC_C1: 2,
    FeatureKind.QTC_C3: 2,
}

#: Kinds whose per-frame value derives from the frame's own poses.
STATE_KINDS = frozenset({FeatureKind.CD, FeatureKind.QDC})
#: Kinds whose per-frame value derives from the transition to the next frame.
TRANSITION_KINDS = frozenset({FeatureKind.MV, FeatureKind.MV_DIR,
                              FeatureKind.QTC_C1, FeatureKind.QTC_C3})
#: Kinds whose domain carries a meaningful total order.
ORDERED_KINDS = frozenset({FeatureKind.QDC})


def check_value(kind: FeatureKind, symbol: str) -> str:
    if symbol not in DOMAINS[kind]:
        raise ValueError(f"{symbol!r} is not a {kind.value} value")
    return symbol


def ordinal(kind: FeatureKind, symbol: str) -> int:
    """Position of a symbol in its kind's domain (the QDC band ordinal)."""
    return DOMAINS[kind].index(check_value(kind, symbol))


@dataclass(frozen=True)
class QuantizationConfig:
    """Thresholds that discretize continuous geometry into feature symbols.

    All lengths are in scene units with ``reference_length`` as the nominal
    block width the defaults are expressed in.
    """

    reference_length: float = 1.0
    cd_epsilon: float = 1e-3
    motion_threshold: float = DEFAULT_MOTION_THRESHOLD
    qdc_thresholds: tuple[float, float, float] = (1.0, 2.5, 5.0)
    qtc_deadband: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "qdc_thresholds", tuple(self.qdc_thresholds))
        if self.reference_length <= 0 or self.cd_epsilon <= 0:
            raise ValueError("lengths must be positive")
        if self.motion_threshold <= 0 or self.qtc_deadband <= 0:
            raise ValueError("thresholds must be positive")
        q = self.qdc_thresholds
        if len(q) != 3 or not (0 < q[0] < q[1] < q[2]):
            raise ValueError("qdc_thresholds must be 3 ascending positive values")

    def scaled(self, factor: float) -> "QuantizationConfig":
        return QuantizationConfig(
            reference_length=self.reference_length * factor,
            cd_epsilon=self.cd_epsilon * factor,
            motion_threshold=self.motion_threshold * factor,
            qdc_thresholds=tuple(t * factor for t in self.qdc_thresholds),
            qtc_deadband=self.qtc_deadband * factor,
        )

    def to_document(self) -> dict:
        return {
            "reference_length": self.reference_length,
            "cd_epsilon": self.cd_epsilon,
            "motion_threshold": self.motion_threshold,
            "qdc_thresholds": list(self.qdc_thresholds),
            "qtc_deadband": self.qtc_deadband,
        }

    @classmethod
    def from_document(cls, doc: Mapping) -> "QuantizationConfig":
        kwargs = dict(doc)
        if "qdc_thresholds" in kwargs:
            kwargs["qdc_thresholds"] = tuple(kwargs["qdc_thresholds"])
        return cls(**kwargs)


def load_quantization(path_or_doc) -> QuantizationConfig:
    if isinstance(path_or_doc, Mapping):
        return QuantizationConfig.from_document(path_or_doc)
    return QuantizationConfig.from_document(json.loads(Path(path_or_doc).read_text()))


@dataclass(frozen=True)
class FeatureFunction:
    """A feature kind applied to a concrete binding.

    Static bindings name signature roles ("A", "B"); the dynamic binding
    ("L", "C") resolves per frame to (last moved, currently moved) objects
    and is only meaningful for binary kinds.
    """

    kind: FeatureKind
    binding: tuple[str, ...]
    dynamic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "binding", tuple(self.binding))
        if len(self.binding) != ARITY[self.kind]:
            raise ValueError(
                f"{self.kind.value} takes {ARITY[self.kind]} argument(s), "
                f"got {self.binding}"
            )
        if self.dynamic:
            if ARITY[self.kind] != 2:
                raise ValueError("dynamic binding requires a binary kind")
            if self.binding != DYNAMIC_ROLES:
                raise ValueError("dynamic binding must be (L, C)")
        elif any(b in DYNAMIC_ROLES for b in self.binding):
            raise ValueError("roles L/C are reserved for the dynamic binding")

    def text(self) -> str:
        return f"{self.kind.value}({','.join(self.binding)})"


def dynamic_pair_function(kind: FeatureKind) -> FeatureFunction:
    return FeatureFunction(kind, DYNAMIC_ROLES, dynamic=True)


# --------------------------------------------------------------------------
# geometry helpers

def bearing_degrees(dx: float, dy: float) -> float:
    """Compass bearing of the vector (dx, dy): 0 = north (+y), 90 = east."""
    return math.degrees(math.atan2(dx, dy))


def compass_sector(dx: float, dy: float) -> str:
    """45-degree-wide sector of a bearing; lower bound inclusive."""
    b = bearing_degrees(dx, dy)
    return COMPASS[int(math.floor((b + 22.5) / 45.0)) % 8]


def _dist(pa: tuple[float, float], pb: tuple[float, float]) -> float:
    return math.hypot(pb[0] - pa[0], pb[1] - pa[1])


# --------------------------------------------------------------------------
# per-kind evaluators

def eval_cd(p_target: ObjectPose, p_reference: ObjectPose,
            cfg: QuantizationConfig) -> str:
    """Compass relation of target as seen from reference; EQ when coincident."""
    dx = p_target.position[0] - p_reference.position[0]
    dy = p_target.position[1] - p_reference.position[1]
    if math.hypot(dx, dy) < cfg.cd_epsilon:
        return "EQ"
    return compass_sector(dx, dy)


def eval_mv(obj: str, frame_t: Frame, frame_next: Frame,
            cfg: QuantizationConfig) -> str:
    """"1" when the object's displacement strictly exceeds the threshold."""
    pa = frame_t.pose(obj).position
    pb = frame_next.pose(obj).position
    return "1" if _dist(pa, pb) > cfg.motion_threshold else "0"


def eval_mv_dir(obj: str, frame_t: Frame, frame_next: Frame,
                cfg: QuantizationConfig) -> str:
    if eval_mv(obj, frame_t, frame_next, cfg) == "0":
        return "STATIC"
    pa = frame_t.pose(obj).position
    pb = frame_next.pose(obj).position
    return compass_sector(pb[0] - pa[0], pb[1] - pa[1])


def eval_qdc(p_a: ObjectPose, p_b: ObjectPose, cfg: QuantizationConfig) -> str:
    """Distance band ordinal; band lower bounds are inclusive."""
    d = _dist(p_a.position, p_b.position)
    return str(bisect.bisect_right(list(cfg.qdc_thresholds), d))


def eval_qtc_c1(k: str, l: str, frame_t: Frame, frame_next: Frame,
                cfg: QuantizationConfig) -> str:
    """"-" when the two objects end the transition closer, "+" farther."""
    d_now = _dist(frame_t.pose(k).position, frame_t.pose(l).position)
    d_next = _dist(frame_next.pose(k).position, frame_next.pose(l).position)
    delta = d_next - d_now
    if delta < -cfg.qtc_deadband:
        return "-"
    if delta > cfg.qtc_deadband:
        return "+"
    return "0"


def eval_qtc_c3(k: str, l: str, frame_t: Frame, frame_next: Frame,
                cfg: QuantizationConfig) -> str:
    """"-" when k steps clockwise about l, "+" counterclockwise.

    Sign of cross(k - l, displacement of k), with a deadband proportional to
    the current separation so the test scales with the scene.
    """
    pk = frame_t.pose(k).position
    pl = frame_t.pose(l).position
    pk_next = frame_next.pose(k).position
    rx, ry = pk[0] - pl[0], pk[1] - pl[1]
    sep = math.hypot(rx, ry)
    if sep == 0.0:
        raise ValueError(f"QTC_C3 undefined: {k!r} and {l!r} coincide")
    dx, dy = pk_next[0] - pk[0], pk_next[1] - pk[1]
    cross = rx * dy - ry * dx
    limit = cfg.qtc_deadband * sep
    if cross > limit:
        return "+"
    if cross < -limit:
        return "-"
    return "0"


_BINARY_EVALS = {
    FeatureKind.QTC_C1: eval_qtc_c1,
    FeatureKind.QTC_C3: eval_qtc_c3,
}


# --------------------------------------------------------------------------
# sequence extraction

@dataclass(frozen=True)
class FeatureEntry:
    """Feature value at one frame, with the object binding that produced it."""

    frame: int
    value: str | None
    objects: tuple[str, ...] | None = None


def _resolve_static(d: Demonstration, f: FeatureFunction) -> tuple[str, ...]:
    try:
        return tuple(d.roles.object_for(role) for role in f.binding)
    except KeyError as exc:
        raise ValueError(f"cannot evaluate {f.text()}: {exc.args[0]}") from None


def _eval_at(f: FeatureFunction, objs: Sequence[str], d: Demonstration, t: int,
             cfg: QuantizationConfig) -> str:
    kind = f.kind
    if kind is FeatureKind.CD:
        return eval_cd(d.frames[t].pose(objs[0]), d.frames[t].pose(objs[1]), cfg)
    if kind is FeatureKind.QDC:
        return eval_qdc(d.frames[t].pose(objs[0]), d.frames[t].pose(objs[1]), cfg)
    if kind is FeatureKind.MV:
        return eval_mv(objs[0], d.frames[t], d.frames[t + 1], cfg)
    if kind is FeatureKind.MV_DIR:
        return eval_mv_dir(objs[0], d.frames[t], d.frames[t + 1], cfg)
    return _BINARY_EVALS[kind](objs[0], objs[1], d.frames[t], d.frames[t + 1], cfg)


def feature_entries(d: Demonstration, f: FeatureFunction, cfg: QuantizationConfig,
                    episodes: Sequence[MoveEpisode] | None = None,
                    ) -> list[FeatureEntry]:
    """One entry per frame, carrying value and resolved objects.

    Transition-based kinds take their value from the transition starting at
    the frame; under a static binding the last frame inherits the preceding
    transition's value so every sequence has one entry per frame.  Entries
    where a dynamic binding does not resolve hold value None.
    """
    n = d.n_frames
    entries: list[FeatureEntry] = []
    if not f.dynamic:
        objs = _resolve_static(d, f)
        for t in range(n):
            if f.kind in TRANSITION_KINDS and t == n - 1:
                entries.append(FeatureEntry(t, entries[-1].value, objs))
            else:
                entries.append(FeatureEntry(t, _eval_at(f, objs, d, t, cfg), objs))
        return entries

    if episodes is None:
        episodes = segment_move_episodes(d, cfg.motion_threshold)
    for t in range(n):
        pair = resolve_dynamic_binding(d, episodes, t)
        if pair is None or (f.kind in TRANSITION_KINDS and t == n - 1):
            entries.append(FeatureEntry(t, None, None))
        else:
            entries.append(FeatureEntry(t, _eval_at(f, pair, d, t, cfg), pair))
    return entries


def extract_feature_sequence(d: Demonstration, f: FeatureFunction,
                             cfg: QuantizationConfig,
                             episodes: Sequence[MoveEpisode] | None = None,
                             ) -> list[tuple[int, str | None]]:
    """Per-frame feature values; None where a dynamic binding is unresolvable."""
    return [(e.frame, e.value) for e in feature_entries(d, f, cfg, episodes)]
