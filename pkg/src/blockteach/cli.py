"""Command-line interface: record, mine, teach, reenact, serve, eval.

Exit codes: 0 success, 1 domain error (validation failure, plan not found),
2 usage error.  Every command with randomness takes an explicit --seed.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

from .concepts import (
    ConceptRecord,
    load_concept_file,
    transcript_digest,
    write_concept_file,
)
from .dialogue import apply_answer, build_queue, next_question
from .features import FeatureKind, QuantizationConfig, load_quantization
from .mining import MinerConfig, mine, report_to_json
from .reenact import (
    InitialStateViolation,
    PlanNotFound,
    SearchConfig,
    plan,
    write_trace,
)
from .scene import (
    Frame,
    ObjectPose,
    RoleBinding,
    generate_synthetic,
    load_demonstration,
    write_demonstration,
)


def _add_miner_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=float, default=0.6,
                   help="confidence threshold (default 0.6)")
    p.add_argument("--kinds", nargs="*", default=None,
                   help="feature kinds to mine (default: all)")
    p.add_argument("--pairs", nargs="*", default=None, metavar="X,Y",
                   help="role pairs for binary features (default: all ordered pairs)")
    p.add_argument("--no-unary", action="store_true",
                   help="skip unary role bindings")
    p.add_argument("--no-dynamic", action="store_true",
                   help="skip the dynamic last-moved/current-mover binding")
    p.add_argument("--config", default=None,
                   help="quantization config JSON file")


def _miner_config(args) -> MinerConfig:
    kwargs = {"confidence_threshold": args.threshold}
    if args.kinds:
        kwargs["kinds"] = tuple(FeatureKind(k) for k in args.kinds)
    if args.pairs:
        kwargs["pairs"] = tuple(tuple(p.split(",")) for p in args.pairs)
    if args.no_unary:
        kwargs["unary_roles"] = False
    if args.no_dynamic:
        kwargs["dynamic_pair"] = False
    return MinerConfig(**kwargs)


def _quantization(args) -> QuantizationConfig:
    if getattr(args, "config", None):
        return load_quantization(args.config)
    return QuantizationConfig()


def _cmd_record(args) -> int:
    params = {}
    for key in ("radius", "frames", "blocks", "spacing", "distance",
                "frames_per_move", "pause_frames", "approach"):
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    if args.counterclockwise:
        params["clockwise"] = False
    demo = generate_synthetic(args.kind, params, args.seed)
    write_demonstration(demo, args.out)
    print(f"wrote {args.out} ({demo.n_frames} frames)")
    return 0


def _load_demos(paths) -> list:
    return [load_demonstration(Path(p)) for p in paths]


def _cmd_mine(args) -> int:
    demos = _load_demos(args.demos)
    mined = mine(demos, _miner_config(args), _quantization(args))
    Path(args.report).write_text(report_to_json(mined))
    print(f"mined {len(mined)} patterns -> {args.report}")
    return 0


def _cmd_teach(args) -> int:
    demos = _load_demos(args.demos)
    qcfg = _quantization(args)
    mined = mine(demos, _miner_config(args), qcfg)
    session = build_queue(mined, demos[-1].roles,
                          signature=demos[-1].signature, demos=demos)
    while True:
        q = next_question(session)
        if q is None:
            break
        print(q.text, flush=True)
        while True:
            line = sys.stdin.readline()
            if not line:
                print("input closed; treating remaining questions as denied",
                      file=sys.stderr)
                apply_answer(session, q.id, "no")
                break
            answer = line.strip().lower()
            if answer in ("y", "yes"):
                apply_answer(session, q.id, "yes")
                break
            if answer in ("n", "no"):
                apply_answer(session, q.id, "no")
                break
            print("please answer y or n", flush=True)
    record = ConceptRecord(
        signature=session.signature,
        confirmed=tuple(session.confirmed),
        quantization=qcfg,
        demo_names=tuple(d.name for d in demos),
        answer_digest=transcript_digest(session.transcript),
        created_at="",
    )
    write_concept_file(record, args.out)
    print(f"confirmed {len(record.confirmed)} patterns -> {args.out}")
    return 0


def _load_scene(path) -> tuple[Frame, RoleBinding]:
    doc = json.loads(Path(path).read_text())
    poses = tuple(
        ObjectPose(o["id"], (o["pos"][0], o["pos"][1]), o.get("yaw", 0.0))
        for o in doc["objects"])
    roles = RoleBinding(doc.get("roles", {}), doc.get("descriptors", {}))
    return Frame(0.0, poses), roles


def _cmd_reenact(args) -> int:
    concept = load_concept_file(args.concept)
    scene, roles = _load_scene(args.scene)
    cfg = SearchConfig(
        strategy=args.strategy,
        beam_width=args.beam_width,
        candidates_per_expansion=args.candidates,
        max_step=args.max_step,
        max_expansions=args.max_expansions,
        rng_seed=args.seed,
        min_progress=args.min_progress,
        min_steps=args.min_steps,
    )
    trace = plan(scene, concept, roles, cfg)
    write_trace(trace, concept.signature, roles, args.out)
    print(f"planned {len(trace.steps)} steps "
          f"({trace.progress_revolutions:.2f} revolutions) -> {args.out}")
    return 0


def _cmd_serve(args) -> int:
    from .server import serve_tcp, serve_ws

    if args.transport == "tcp":
        try:
            asyncio.run(serve_tcp(args.host, args.port, args.store))
        except KeyboardInterrupt:
            pass
        return 0
    serve_ws(args.host, args.port, args.store)
    return 0


def _cmd_eval(args) -> int:
    from .acceptance import run_all
    return 0 if run_all() else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockteach",
        description="Learn block-world action concepts from demonstrations "
                    "and reenact them under the learned constraints.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("record", help="generate a synthetic demonstration")
    p.add_argument("--kind", required=True,
                   choices=("circle_around", "build_row", "translate_east"))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--radius", type=float)
    p.add_argument("--frames", type=int)
    p.add_argument("--blocks", type=int)
    p.add_argument("--spacing", type=float)
    p.add_argument("--distance", type=float)
    p.add_argument("--frames-per-move", type=int, dest="frames_per_move")
    p.add_argument("--pause-frames", type=int, dest="pause_frames")
    p.add_argument("--approach", type=float)
    p.add_argument("--counterclockwise", action="store_true")
    p.set_defaults(fn=_cmd_record)

    p = sub.add_parser("mine", help="mine a pattern report from demonstrations")
    p.add_argument("demos", nargs="+")
    p.add_argument("--report", required=True)
    _add_miner_flags(p)
    p.set_defaults(fn=_cmd_mine)

    p = sub.add_parser("teach", help="terminal yes/no confirmation loop")
    p.add_argument("demos", nargs="+")
    p.add_argument("--out", required=True)
    _add_miner_flags(p)
    p.set_defaults(fn=_cmd_teach)

    p = sub.add_parser("reenact", help="perform a concept in a novel scene")
    p.add_argument("concept")
    p.add_argument("scene")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strategy", choices=("beam", "best_first"), default="beam")
    p.add_argument("--beam-width", type=int, default=16)
    p.add_argument("--candidates", type=int, default=32)
    p.add_argument("--max-step", type=float, default=0.25)
    p.add_argument("--max-expansions", type=int, default=20000)
    p.add_argument("--min-progress", type=float, default=0.9)
    p.add_argument("--min-steps", type=int, default=8)
    p.set_defaults(fn=_cmd_reenact)

    p = sub.add_parser("serve", help="run the session protocol service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7420)
    p.add_argument("--transport", choices=("tcp", "ws"), default="tcp")
    p.add_argument("--store", default=None, help="concept store directory")
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("eval", help="run the built-in acceptance checks")
    p.set_defaults(fn=_cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (PlanNotFound, InitialStateViolation, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
