"""Command line entry points.

Subcommands:
    serve      run the WebSocket game server
    simulate   play synthetic sessions into a store (no hardware)
    evaluate   audit label accuracy against eye-tracker reference records
    export     write a training-ready dataset manifest from a store
    folds      print a participant-level cross-validation split
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import random
import sys

from .config import load_app_config
from .engine import GameConfig
from .errors import GazeboardError, NotFound
from .evaluation import (
    build_condition_report,
    evaluate_records,
    load_eval_records,
    write_report,
)
from .geometry import letter_position
from .store import ExportFilter, SessionStore, export_dataset, make_fold_split

logger = logging.getLogger(__name__)


def _add_config_arg(p: argparse.ArgumentParser):
    p.add_argument("--config", default=None, help="path to the YAML config file")


def cmd_serve(args) -> int:
    from .server import GameServer, serve
    from .simulate import RecordingPipelineFactory

    cfg = load_app_config(args.config)
    store = SessionStore(args.store or cfg.store_root)
    factory = RecordingPipelineFactory(
        board=cfg.board, pose=cfg.camera.pose, intrinsics=cfg.camera.intrinsics,
        gaze_noise_deg=cfg.synthetic.gaze_noise_deg,
        estimator_noise_deg=cfg.synthetic.estimator_noise_deg,
        estimator_outlier_rate=cfg.synthetic.estimator_outlier_rate,
        base_seed=cfg.synthetic.rng_seed)
    server = GameServer(config=cfg.game, board=cfg.board,
                        dictionary_entries=cfg.dictionary_entries,
                        pipeline_factory=factory, store=store,
                        grace_period_s=cfg.grace_period_s)
    host = args.host or cfg.host
    port = args.port or cfg.port
    logger.info("serving on %s:%d, store at %s", host, port, store.root)
    serve(server, host=host, port=port)
    return 0


def cmd_simulate(args) -> int:
    from .simulate import GameDriver, RecordingPipelineFactory, make_server

    cfg = load_app_config(args.config)
    store = SessionStore(args.store or cfg.store_root)
    factory = RecordingPipelineFactory(
        board=cfg.board, pose=cfg.camera.pose, intrinsics=cfg.camera.intrinsics,
        gaze_noise_deg=args.gaze_noise,
        estimator_noise_deg=cfg.synthetic.estimator_noise_deg,
        base_seed=args.seed)
    game = cfg.game if args.mode == "gamified" else GameConfig(
        standard_stimuli_count=args.stimuli)
    server = make_server(cfg.board, cfg.dictionary_entries, game, factory,
                         store=store)
    driver = GameDriver(server, random.Random(args.seed))
    for i in range(args.sessions):
        sid = f"sim{args.seed}-{i:03d}"
        if args.mode == "gamified":
            game_out = driver.play_gamified(sid, seed=args.seed + i,
                                            players=(f"p{2 * i}", f"p{2 * i + 1}"))
        else:
            game_out = driver.play_standard(sid, seed=args.seed + i,
                                            participant=f"p{i}")
        print(f"{sid}: {game_out.final_state['phase']}, "
              f"{len(game_out.event_log_json)} events")
    print(f"store now holds {store.sample_count()} samples")
    return 0


def _record_targets(records, store: SessionStore | None, board):
    """Resolve per-record target board positions: explicit target field,
    else the stored sample's letter position."""
    by_sample = {}
    if store is not None:
        for rec in store.iter_samples():
            by_sample[rec["sample_id"]] = rec
    targets = []
    pids = {}
    for r in records:
        if r.target_board_mm is not None:
            targets.append(r.target_board_mm)
        else:
            srec = by_sample.get(r.sample_id)
            if srec is None or not srec.get("letter_id"):
                raise NotFound(f"no target for record {r.sample_id!r}")
            pos = letter_position(board, srec["letter_id"])
            targets.append((pos[0], pos[1]))
        srec = by_sample.get(r.sample_id)
        if srec is not None:
            pids[r.sample_id] = srec["participant_id"]
    return targets, pids


def cmd_evaluate(args) -> int:
    cfg = load_app_config(args.config)
    store = SessionStore(args.store) if args.store else None
    records = load_eval_records(args.eyetracker)
    targets, pids = _record_targets(records, store, cfg.board)
    evaluated = evaluate_records(records, targets, pids)

    other = None
    if args.compare:
        other_records = load_eval_records(args.compare)
        o_targets, o_pids = _record_targets(other_records, store, cfg.board)
        other = evaluate_records(other_records, o_targets, o_pids)

    report = build_condition_report(
        evaluated, condition=args.condition, other=other,
        other_name=args.compare or "other",
        outlier_threshold=args.remove_outliers if args.remove_outliers else 3.0,
        remove_outliers=args.remove_outliers is not None)
    if args.out:
        write_report(report, args.out)
        print(f"report written to {args.out}")
    print(report.to_text())
    return 0


def cmd_export(args) -> int:
    cfg = load_app_config(args.config)
    store = SessionStore(args.store)
    manifest = export_dataset(
        store, args.out,
        filter=ExportFilter(eyetracker=args.eyetracker, mode=args.mode),
        dataset_id=args.dataset_id,
        board_layout_hash=cfg.board.content_hash(),
        normalization_params={"focal_norm": cfg.normalization.focal_norm,
                              "distance_norm": cfg.normalization.distance_norm,
                              "size_norm": cfg.normalization.size_norm},
        created_at=datetime.datetime.now(datetime.timezone.utc).isoformat())
    print(f"exported {len(manifest.samples)} samples "
          f"from {len(manifest.participants)} participants to {args.out}")
    return 0


def cmd_folds(args) -> int:
    store = SessionStore(args.store)
    participants = [(pid, bool(info.get("wearing_eyetracker")))
                    for pid, info in sorted(store.participants().items())]
    split = make_fold_split(participants, k=args.k, rng_seed=args.seed,
                            samples=list(store.iter_samples()),
                            finetune_draw=args.finetune_draw)
    print(json.dumps({"k": split.k, "assignment": split.assignment,
                      "finetune_draws": {str(f): s for f, s
                                         in split.finetune_draws.items()}},
                     ensure_ascii=False, indent=1, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gazeboard")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the game server")
    _add_config_arg(p)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--store", default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="play synthetic sessions")
    _add_config_arg(p)
    p.add_argument("--store", default=None)
    p.add_argument("--mode", choices=("gamified", "standard"), default="gamified")
    p.add_argument("--sessions", type=int, default=1)
    p.add_argument("--stimuli", type=int, default=50)
    p.add_argument("--gaze-noise", type=float, default=0.0,
                   help="simulated fixation noise, degrees")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="label-accuracy evaluation")
    _add_config_arg(p)
    p.add_argument("--store", default=None)
    p.add_argument("--eyetracker", required=True,
                   help="eye-tracker reference records (JSONL)")
    p.add_argument("--condition", required=True)
    p.add_argument("--remove-outliers", type=float, default=None, metavar="Z",
                   help="z-score threshold; also reports the filtered mean")
    p.add_argument("--compare", default=None,
                   help="second record file to test against")
    p.add_argument("--out", default=None, help="report output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export", help="export a training dataset")
    _add_config_arg(p)
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--eyetracker", choices=("exclude", "only", "all"),
                   default="exclude")
    p.add_argument("--mode", choices=("gamified", "standard"), default=None)
    p.add_argument("--dataset-id", default="dataset")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("folds", help="participant-level fold split")
    p.add_argument("--store", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--finetune-draw", type=int, default=15)
    p.set_defaults(func=cmd_folds)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except GazeboardError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
