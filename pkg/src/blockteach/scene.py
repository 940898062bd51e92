"""Scene and demonstration data model.

A demonstration is a timestamped sequence of frames on a 2D tabletop plane
(any 3D capture keeps x/z and yaw about the vertical axis), together with a
role binding that maps instruction roles like "A"/"B" onto concrete object
ids.  This module owns ingestion of the JSON demonstration format, keyframe
densification, move-episode segmentation, the last-moved/currently-moved
dynamic binding, and the synthetic demonstration generators used throughout
the tests and the CLI.

All types are immutable after construction; every operation is a pure
function, so values can be shared freely across threads.
"""

from __future__ import annotations

import bisect
import json
import math
import random
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

Vec2 = tuple[float, float]

#: Role names reserved for the per-frame dynamic binding (last moved block,
#: currently moved block).  Signatures must not use them as role slots.
DYNAMIC_ROLES = ("L", "C")

DENSE_STREAM = "dense_stream"
KEYFRAMES = "keyframes"

#: Default per-frame displacement (scene units) above which an object counts
#: as moving.  1% of a unit block suppresses capture jitter.
DEFAULT_MOTION_THRESHOLD = 0.01


class DemonstrationFormatError(ValueError):
    """Raised when a demonstration document violates the file format."""


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


@dataclass(frozen=True)
class ObjectPose:
    """Pose of one block: planar position plus yaw about the vertical axis."""

    object_id: str
    position: Vec2
    yaw: float = 0.0

    def __post_init__(self):
        if not self.object_id:
            raise ValueError("object_id must be nonempty")
        x, y = self.position
        if not (_finite(x) and _finite(y)):
            raise ValueError(f"non-finite position for {self.object_id!r}")
        if not _finite(self.yaw):
            raise ValueError(f"non-finite yaw for {self.object_id!r}")
        object.__setattr__(self, "position", (float(x), float(y)))
        object.__setattr__(self, "yaw", float(self.yaw) % 360.0)


@dataclass(frozen=True)
class Frame:
    """All object poses at one timestamp."""

    t: float
    poses: tuple[ObjectPose, ...]
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        index = {}
        for pose in self.poses:
            if pose.object_id in index:
                raise ValueError(f"duplicate object_id {pose.object_id!r} in frame")
            index[pose.object_id] = pose
        object.__setattr__(self, "_index", index)

    def pose(self, object_id: str) -> ObjectPose:
        try:
            return self._index[object_id]
        except KeyError:
            raise KeyError(f"object {object_id!r} not present at t={self.t}") from None

    def object_ids(self) -> frozenset[str]:
        return frozenset(self._index)


@dataclass(frozen=True)
class ActionSignature:
    """Verb plus ordered role slots, e.g. move_around(A, B)."""

    verb: str
    roles: tuple[str, ...]
    modifiers: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "roles", tuple(self.roles))
        object.__setattr__(self, "modifiers", tuple(self.modifiers))
        if not self.verb:
            raise ValueError("verb must be nonempty")
        if not self.roles:
            raise ValueError("signature needs at least one role slot")
        if len(set(self.roles)) != len(self.roles):
            raise ValueError("role slots must be distinct")
        for role in self.roles:
            if role in DYNAMIC_ROLES:
                raise ValueError(f"role name {role!r} is reserved for dynamic binding")


@dataclass(frozen=True)
class RoleBinding:
    """Maps role names to object ids, with optional human-readable descriptors.

    Descriptors are keyed by object id ("block_red" -> "the red block") and
    feed question generation; they are never required for evaluation.
    """

    roles: Mapping[str, str]
    descriptors: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "roles", dict(self.roles))
        object.__setattr__(self, "descriptors", dict(self.descriptors))
        targets = list(self.roles.values())
        if len(set(targets)) != len(targets):
            raise ValueError("roles must bind distinct object ids")

    def object_for(self, role: str) -> str:
        try:
            return self.roles[role]
        except KeyError:
            raise KeyError(f"role {role!r} is not bound") from None

    def describe(self, object_id: str) -> str:
        return self.descriptors.get(object_id, object_id)


@dataclass(frozen=True)
class Demonstration:
    """A named, validated recording of one action performance."""

    name: str
    signature: ActionSignature
    frames: tuple[Frame, ...]
    roles: RoleBinding
    source: str = DENSE_STREAM

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.source not in (DENSE_STREAM, KEYFRAMES):
            raise ValueError(f"unknown source {self.source!r}")
        if len(self.frames) < 2:
            raise ValueError("a demonstration needs at least 2 frames")
        ids = self.frames[0].object_ids()
        last_t = None
        for fr in self.frames:
            if fr.object_ids() != ids:
                raise ValueError("object_id set differs across frames")
            if last_t is not None and fr.t <= last_t:
                raise ValueError("frame times must be strictly increasing")
            last_t = fr.t
        for role in self.signature.roles:
            if role not in self.roles.roles:
                raise ValueError(f"signature role {role!r} is unbound")
        for role, obj in self.roles.roles.items():
            if obj not in ids:
                raise DemonstrationFormatError(
                    f"role binds unknown object: {role!r} -> {obj!r}"
                )

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def object_ids(self) -> frozenset[str]:
        return self.frames[0].object_ids()


@dataclass(frozen=True)
class MoveEpisode:
    """A maximal run of transitions during which exactly one object moves.

    ``start_frame``/``end_frame`` delimit the touched frames; a frame index t
    counts as *inside* the episode when start_frame <= t < end_frame (the
    transition starting at t belongs to the episode), so back-to-back
    episodes never share an interior frame.
    """

    mover: str
    start_frame: int
    end_frame: int

    def __post_init__(self):
        if self.start_frame >= self.end_frame:
            raise ValueError("start_frame must precede end_frame")

    def contains(self, t: int) -> bool:
        return self.start_frame <= t < self.end_frame


# --------------------------------------------------------------------------
# document (de)serialization

_TOP_KEYS = {"name", "signature", "roles", "descriptors", "source", "frames",
             "steps", "audit"}
_SIG_KEYS = {"verb", "roles", "modifiers"}
_FRAME_KEYS = {"t", "objects"}
_OBJ_KEYS = {"id", "pos", "yaw"}


def _check_keys(obj: Mapping, allowed: set[str], where: str, strict: bool) -> None:
    unknown = sorted(set(obj) - allowed)
    if not unknown:
        return
    msg = f"unknown keys {unknown} in {where}"
    if strict:
        raise DemonstrationFormatError(msg)
    warnings.warn(msg, stacklevel=3)


def parse_demonstration(doc: Mapping, *, strict: bool = False,
                        keyframe_dt: float = 0.25) -> Demonstration:
    """Build a Demonstration from a parsed JSON document.

    Keyframe-sourced documents are densified with :func:`interpolate_keyframes`
    at ``keyframe_dt`` before being returned.  Unknown keys raise in strict
    mode and warn otherwise.  The optional "steps"/"audit" keys written by
    reenactment traces are accepted and ignored.
    """
    if not isinstance(doc, Mapping):
        raise DemonstrationFormatError("document must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "demonstration", strict)
    try:
        sig_doc = doc["signature"]
        frames_doc = doc["frames"]
    except KeyError as exc:
        raise DemonstrationFormatError(f"missing key {exc.args[0]!r}") from None
    if not isinstance(sig_doc, Mapping):
        raise DemonstrationFormatError("signature must be an object")
    _check_keys(sig_doc, _SIG_KEYS, "signature", strict)
    signature = ActionSignature(
        verb=sig_doc.get("verb", ""),
        roles=tuple(sig_doc.get("roles", ())),
        modifiers=tuple(sig_doc.get("modifiers", ())),
    )
    frames = []
    for i, fdoc in enumerate(frames_doc):
        _check_keys(fdoc, _FRAME_KEYS, f"frames[{i}]", strict)
        poses = []
        for odoc in fdoc.get("objects", ()):
            _check_keys(odoc, _OBJ_KEYS, f"frames[{i}].objects", strict)
            pos = odoc.get("pos", ())
            if len(pos) != 2:
                raise DemonstrationFormatError(
                    f"frames[{i}]: pos must have 2 components"
                )
            poses.append(ObjectPose(odoc.get("id", ""), (pos[0], pos[1]),
                                    odoc.get("yaw", 0.0)))
        frames.append(Frame(t=float(fdoc.get("t", i)), poses=tuple(poses)))
    try:
        demo = Demonstration(
            name=str(doc.get("name", "")),
            signature=signature,
            frames=tuple(frames),
            roles=RoleBinding(doc.get("roles", {}), doc.get("descriptors", {})),
            source=doc.get("source", DENSE_STREAM),
        )
    except ValueError as exc:
        if isinstance(exc, DemonstrationFormatError):
            raise
        raise DemonstrationFormatError(str(exc)) from None
    if demo.source == KEYFRAMES:
        demo = interpolate_keyframes(demo, keyframe_dt)
    return demo


def load_demonstration(path_or_bytes, *, strict: bool = False,
                       keyframe_dt: float = 0.25) -> Demonstration:
    """Load a demonstration from a file path, JSON text, or JSON bytes."""
    if isinstance(path_or_bytes, bytes):
        text = path_or_bytes.decode("utf-8")
    elif isinstance(path_or_bytes, Path):
        text = path_or_bytes.read_text()
    elif isinstance(path_or_bytes, str) and path_or_bytes.lstrip().startswith("{"):
        text = path_or_bytes
    else:
        text = Path(path_or_bytes).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DemonstrationFormatError(f"malformed document: {exc}") from None
    return parse_demonstration(doc, strict=strict, keyframe_dt=keyframe_dt)


def demonstration_to_document(d: Demonstration) -> dict:
    return {
        "name": d.name,
        "signature": {
            "verb": d.signature.verb,
            "roles": list(d.signature.roles),
            "modifiers": list(d.signature.modifiers),
        },
        "roles": dict(d.roles.roles),
        "descriptors": dict(d.roles.descriptors),
        "source": d.source,
        "frames": [
            {
                "t": fr.t,
                "objects": [
                    {"id": p.object_id, "pos": [p.position[0], p.position[1]],
                     "yaw": p.yaw}
                    for p in fr.poses
                ],
            }
            for fr in d.frames
        ],
    }


def write_demonstration(d: Demonstration, path) -> None:
    Path(path).write_text(json.dumps(demonstration_to_document(d), indent=2) + "\n")


# --------------------------------------------------------------------------
# keyframe densification

def _lerp_yaw(a: float, b: float, frac: float) -> float:
    delta = ((b - a + 180.0) % 360.0) - 180.0
    return (a + frac * delta) % 360.0


def interpolate_keyframes(d: Demonstration, dt: float) -> Demonstration:
    """Resample a demonstration on the grid t0, t0+dt, ..., tN.

    Positions interpolate linearly, yaw along the shortest arc.  Grid points
    that coincide with an original timestamp reuse the original poses
    verbatim, so densifying an already-dense demonstration at its own dt is
    the identity.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    times = [fr.t for fr in d.frames]
    t0, tn = times[0], times[-1]
    grid = []
    k = 0
    while True:
        t = t0 + k * dt
        if t >= tn - 1e-9:
            break
        grid.append(t)
        k += 1
    grid.append(tn)

    new_frames = []
    for t in grid:
        j = bisect.bisect_right(times, t + 1e-9) - 1
        j = min(max(j, 0), len(times) - 1)
        if abs(times[j] - t) <= 1e-9:
            new_frames.append(Frame(times[j], d.frames[j].poses))
            continue
        lo, hi = d.frames[j], d.frames[j + 1]
        frac = (t - lo.t) / (hi.t - lo.t)
        poses = []
        for p in lo.poses:
            q = hi.pose(p.object_id)
            poses.append(ObjectPose(
                p.object_id,
                (p.position[0] + frac * (q.position[0] - p.position[0]),
                 p.position[1] + frac * (q.position[1] - p.position[1])),
                _lerp_yaw(p.yaw, q.yaw, frac),
            ))
        new_frames.append(Frame(t, tuple(poses)))
    return Demonstration(d.name, d.signature, tuple(new_frames), d.roles,
                         source=DENSE_STREAM)


# --------------------------------------------------------------------------
# move episodes and dynamic binding

def _displacement(fr_a: Frame, fr_b: Frame, object_id: str) -> float:
    pa = fr_a.pose(object_id).position
    pb = fr_b.pose(object_id).position
    return math.hypot(pb[0] - pa[0], pb[1] - pa[1])


def segment_move_episodes(d: Demonstration,
                          motion_threshold: float = DEFAULT_MOTION_THRESHOLD,
                          ) -> list[MoveEpisode]:
    """Split a dense demonstration into single-mover episodes.

    A transition belongs to an episode only when exactly one object exceeds
    ``motion_threshold`` on it; transitions where zero or several objects
    move separate episodes.
    """
    ids = sorted(d.object_ids())
    movers: list[str | None] = []
    for i in range(d.n_frames - 1):
        moving = [o for o in ids
                  if _displacement(d.frames[i], d.frames[i + 1], o) > motion_threshold]
        movers.append(moving[0] if len(moving) == 1 else None)

    episodes: list[MoveEpisode] = []
    run_start = None
    for i, mover in enumerate(movers + [None]):
        if run_start is not None and (mover is None or mover != movers[run_start]):
            episodes.append(MoveEpisode(movers[run_start], run_start, i))
            run_start = None
        if mover is not None and run_start is None:
            run_start = i
    return episodes


def episode_at(episodes: Sequence[MoveEpisode], t: int) -> int | None:
    """Index of the episode whose transition range contains frame index t."""
    for i, ep in enumerate(episodes):
        if ep.contains(t):
            return i
    return None


def resolve_dynamic_binding(d: Demonstration, episodes: Sequence[MoveEpisode],
                            t: int) -> tuple[str, str] | None:
    """Resolve (last moved, currently moved) object ids at frame index t.

    Defined only inside an episode that has a predecessor; elsewhere the
    binding is absent.
    """
    if not 0 <= t < d.n_frames:
        raise IndexError(f"frame index {t} out of range 0..{d.n_frames - 1}")
    i = episode_at(episodes, t)
    if i is None or i == 0:
        return None
    return episodes[i - 1].mover, episodes[i].mover


# --------------------------------------------------------------------------
# synthetic demonstrations

def _nudge_off_sector_boundary(bearing: float) -> float:
    # 45-degree compass sector edges sit at 22.5 + k*45; keep generated
    # bearings a safe margin away so float noise never flips a sector.
    offset = (bearing - 22.5) % 45.0
    if offset < 1.0:
        bearing += 1.0 - offset
    elif offset > 44.0:
        bearing -= offset - 44.0
    return bearing % 360.0


def _circle_around(params: Mapping, rng: random.Random) -> Demonstration:
    radius = float(params.get("radius", 2.0))
    n = int(params.get("frames", 64))
    clockwise = bool(params.get("clockwise", True))
    if radius <= 0:
        raise ValueError("radius must be positive")
    if n < 2:
        raise ValueError("need at least 2 frames")
    center = (0.0, 0.0)
    theta0 = _nudge_off_sector_boundary(rng.uniform(0.0, 360.0))
    direction = 1.0 if clockwise else -1.0
    frames = []
    for i in range(n):
        # Compass bearing of A from B; clockwise orbits increase the bearing.
        theta = math.radians(theta0 + direction * 360.0 * i / (n - 1))
        a_pos = (center[0] + radius * math.sin(theta),
                 center[1] + radius * math.cos(theta))
        frames.append(Frame(float(i), (
            ObjectPose("block_red", a_pos),
            ObjectPose("block_green", center),
        )))
    return Demonstration(
        name="circle_around",
        signature=ActionSignature("move_around", ("A", "B")),
        frames=tuple(frames),
        roles=RoleBinding(
            {"A": "block_red", "B": "block_green"},
            {"block_red": "the red block", "block_green": "the green block"},
        ),
    )


def _build_row(params: Mapping, rng: random.Random) -> Demonstration:
    blocks = int(params.get("blocks", 3))
    spacing = float(params.get("spacing", 1.5))
    frames_per_move = int(params.get("frames_per_move", 8))
    pause = int(params.get("pause_frames", 2))
    approach = float(params.get("approach", 0.8))
    if blocks < 2:
        raise ValueError("need at least 2 blocks")
    if spacing <= 0 or approach <= 0 or frames_per_move < 1 or pause < 0:
        raise ValueError("invalid build_row parameters")
    axis = math.radians(_nudge_off_sector_boundary(rng.uniform(0.0, 360.0)))
    ux, uy = math.sin(axis), math.cos(axis)
    ids = [f"block_{i + 1}" for i in range(blocks)]

    def slot(i):
        return (i * spacing * ux, i * spacing * uy)

    # Every mover starts beyond its slot along the row axis, so its approach
    # is collinear with the previously placed block.
    positions = {ids[0]: slot(0)}
    for i in range(1, blocks):
        sx, sy = slot(i)
        positions[ids[i]] = (sx + approach * ux, sy + approach * uy)

    def snapshot(t):
        return Frame(float(t), tuple(
            ObjectPose(o, positions[o]) for o in ids
        ))

    frames = [snapshot(0), snapshot(1)]
    t = 2
    for i in range(1, blocks):
        start = positions[ids[i]]
        target = slot(i)
        for k in range(1, frames_per_move + 1):
            frac = k / frames_per_move
            positions[ids[i]] = (start[0] + frac * (target[0] - start[0]),
                                 start[1] + frac * (target[1] - start[1]))
            frames.append(snapshot(t))
            t += 1
        for _ in range(pause):
            frames.append(snapshot(t))
            t += 1
    return Demonstration(
        name="build_row",
        signature=ActionSignature("make_row", tuple(f"b{i + 1}" for i in range(blocks))),
        frames=tuple(frames),
        roles=RoleBinding(
            {f"b{i + 1}": ids[i] for i in range(blocks)},
            {ids[i]: f"block {i + 1}" for i in range(blocks)},
        ),
    )


def _translate_east(params: Mapping, rng: random.Random) -> Demonstration:
    distance = float(params.get("distance", 4.0))
    n = int(params.get("frames", 16))
    if distance <= 0:
        raise ValueError("distance must be positive")
    if n < 2:
        raise ValueError("need at least 2 frames")
    x0 = rng.uniform(-1.0, 1.0)
    y0 = rng.uniform(-1.0, 1.0)
    frames = [
        Frame(float(i), (ObjectPose("block_blue",
                                    (x0 + distance * i / (n - 1), y0)),))
        for i in range(n)
    ]
    return Demonstration(
        name="translate_east",
        signature=ActionSignature("translate", ("X",), ("east",)),
        frames=tuple(frames),
        roles=RoleBinding({"X": "block_blue"}, {"block_blue": "the blue block"}),
    )


_GENERATORS = {
    "circle_around": _circle_around,
    "build_row": _build_row,
    "translate_east": _translate_east,
}


def generate_synthetic(kind: str, params: Mapping | None = None,
                       seed: int = 0) -> Demonstration:
    """Deterministically generate a synthetic demonstration of the given kind."""
    try:
        gen = _GENERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown synthetic kind {kind!r}; "
                         f"expected one of {sorted(_GENERATORS)}") from None
    return gen(params or {}, random.Random(seed))
