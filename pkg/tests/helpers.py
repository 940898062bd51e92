"""Shared builders for the test suite."""

from __future__ import annotations

from blockteach.acceptance import MOVE_AROUND, golden_session_script  # noqa: F401
from blockteach.scene import (
    ActionSignature,
    Demonstration,
    Frame,
    ObjectPose,
    RoleBinding,
    generate_synthetic,
)

#: The four patterns expected from mining a circle demonstration.
MOVE_AROUND_PATTERNS = MOVE_AROUND

AB_ROLES = RoleBinding(
    {"A": "block_red", "B": "block_green"},
    {"block_red": "the red block", "block_green": "the green block"},
)


def make_demo(positions_per_frame, roles=None, signature=None, name="demo"):
    """Demonstration from a list of {object_id: (x, y)} dicts, 1s per frame."""
    frames = tuple(
        Frame(float(t), tuple(ObjectPose(o, p) for o, p in sorted(poses.items())))
        for t, poses in enumerate(positions_per_frame)
    )
    ids = sorted(positions_per_frame[0])
    if roles is None:
        roles = RoleBinding({f"r{i}": o for i, o in enumerate(ids)})
    if signature is None:
        signature = ActionSignature("act", tuple(sorted(roles.roles)))
    return Demonstration(name, signature, frames, roles)


def circle_demo(seed=7, radius=2.0, frames=64, clockwise=True):
    return generate_synthetic(
        "circle_around",
        {"radius": radius, "frames": frames, "clockwise": clockwise},
        seed=seed,
    )
