"""Command-line front door.

Subcommands: segment | batch | serve | simulate | aggregate | report |
estimate. Exit codes: 0 success, 2 usage, 3 I/O, 4 data validation. Every
run appends a manifest line (command, input digests, seed, outputs, timing)
to ``runs.jsonl`` next to its outputs; outputs themselves are deterministic
given (inputs, seed).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import yaml

from cellcrowd import __version__
from cellcrowd.consensus import (
    DEFAULT_K,
    GroundTruthRecord,
    aggregate,
    estimate_consensus_accuracy,
    group_ballots,
    pattern_label,
)
from cellcrowd.errors import (
    CellCrowdError,
    DomainError,
    EmptyBatch,
    IncompleteBallot,
    InvalidLabel,
    MissingFile,
    ParseError,
)
from cellcrowd.labels import CLASS_ORDER, CellClass, parse_label
from cellcrowd.metrics import build_matrix_stack, full_report, render_report, report_as_dict
from cellcrowd.records import (
    read_truth_manifest,
    read_votes,
    write_consensus,
    write_truth_manifest,
    write_votes,
)
from cellcrowd.segmentation import load_gray_image, save_crop, segment_image

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


def _digest(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, args: dict, inputs: list[Path],
                    outputs: list[Path], seed: int | None, started: float) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    entry = {
        "command": command,
        "args": {k: str(v) for k, v in sorted(args.items()) if v is not None},
        "inputs": {str(p): _digest(p) for p in inputs if p.is_file()},
        "outputs": {str(p): _digest(p) for p in outputs if p.is_file()},
        "seed": seed,
        "elapsed_s": round(time.time() - started, 3),
        "version": __version__,
    }
    with (out_dir / "runs.jsonl").open("a") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")


# ------------------------------------------------------------------ segment

def cmd_segment(args: argparse.Namespace) -> int:
    started = time.time()
    input_dir = Path(args.input)
    if not input_dir.is_dir():
        print(f"error: input directory {input_dir} does not exist", file=sys.stderr)
        return EXIT_IO
    images = sorted(p for p in input_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not images:
        print(f"error: no images found in {input_dir}", file=sys.stderr)
        return EXIT_IO
    out_dir = Path(args.out)
    crops_dir = out_dir / "crops"
    crops_dir.mkdir(parents=True, exist_ok=True)
    manifest_lines = ["item_id,crop_path,source_image_id,x0,y0,x1,y1,area"]
    total = 0
    for image_path in images:
        img = load_gray_image(image_path)
        source_id = image_path.stem
        crops = segment_image(
            img,
            mu=args.mu,
            max_iter=args.max_iter,
            tol=args.tol,
            min_area=args.min_area,
            pad=args.pad,
            source_image_id=source_id,
        )
        for crop in crops:
            crop_path = crops_dir / f"{crop.item_id}.png"
            save_crop(img, crop, crop_path)
            x0, y0, x1, y1 = crop.box
            manifest_lines.append(
                f"{crop.item_id},{crop_path.relative_to(out_dir)},{source_id},"
                f"{x0},{y0},{x1},{y1},{crop.area}"
            )
            total += 1
    manifest_path = out_dir / "crops.csv"
    manifest_path.write_text("\n".join(manifest_lines) + "\n")
    print(f"segmented {len(images)} image(s) into {total} crop(s); manifest {manifest_path}")
    _write_manifest(
        out_dir, "segment",
        {"mu": args.mu, "max_iter": args.max_iter, "tol": args.tol,
         "min_area": args.min_area, "pad": args.pad},
        images, [manifest_path], None, started,
    )
    return EXIT_OK


# -------------------------------------------------------------------- batch

def cmd_batch(args: argparse.Namespace) -> int:
    started = time.time()
    manifest = Path(args.manifest)
    records = read_truth_manifest(manifest)
    payload = {
        "items": [
            {"item_id": r.item_id, "label": r.true_label.value, "image": r.crop_path or None}
            for r in records
        ],
        "k": args.k,
        "reward_cents": args.reward_cents,
        "pairing": args.pairing,
        "seed": args.seed,
    }
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "batch.json"
    out_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    pairs, singles = divmod(len(records), 2)
    print(f"batch payload for {len(records)} items ({pairs + singles} tasks) -> {out_path}")
    _write_manifest(out_dir, "batch", {"pairing": args.pairing, "k": args.k},
                    [manifest], [out_path], args.seed, started)
    return EXIT_OK


# -------------------------------------------------------------------- serve

def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from cellcrowd.orchestrator import Orchestrator, OrchestratorConfig
    from cellcrowd.orchestrator.api import create_app

    config = OrchestratorConfig.load(args.config) if args.config else OrchestratorConfig.load()
    if args.port is not None:
        config.port = args.port
    if args.data_dir is not None:
        config.data_dir = args.data_dir
    if args.crops_dir is not None:
        config.crops_dir = args.crops_dir
    if args.frontend_dir is not None:
        config.frontend_dir = args.frontend_dir
    orchestrator = Orchestrator(config)
    if args.seed_batch:
        payload = json.loads(Path(args.seed_batch).read_text())
        items: list = []
        images: dict[str, str] = {}
        for entry in payload["items"]:
            if entry.get("label"):
                items.append(GroundTruthRecord(entry["item_id"], parse_label(entry["label"])))
            else:
                items.append(entry["item_id"])
            if entry.get("image"):
                images[entry["item_id"]] = entry["image"]
        batch = orchestrator.create_batch(
            items,
            k=payload.get("k"),
            reward_cents=payload.get("reward_cents"),
            pairing=payload.get("pairing", "sequential"),
            seed=payload.get("seed", 0),
            images=images,
        )
        print(f"seeded batch {batch['batch_id']} with {batch['n_items']} items")
    app = create_app(orchestrator)
    print(f"serving on http://{config.host}:{config.port}")
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return EXIT_OK


# ----------------------------------------------------------------- simulate

def cmd_simulate(args: argparse.Namespace) -> int:
    from cellcrowd.simulator import (
        DEFAULT_ACCURACY,
        DifficultyModel,
        run_experiment,
        uniform_workers,
    )

    started = time.time()
    settings: dict = {}
    if args.config:
        settings = yaml.safe_load(Path(args.config).read_text()) or {}
    seed = args.seed if args.seed is not None else int(settings.get("seed", 0))
    n_workers = args.workers or int(settings.get("workers", DEFAULT_K))
    k = args.k or int(settings.get("k", DEFAULT_K))

    accuracy = dict(DEFAULT_ACCURACY)
    for name, value in (settings.get("accuracy") or {}).items():
        accuracy[parse_label(name)] = float(value)

    rho_setting = settings.get("rho", 0.0) if args.rho is None else args.rho
    if isinstance(rho_setting, dict):
        rho: float | dict = {parse_label(k2): float(v) for k2, v in rho_setting.items()}
    else:
        rho = float(rho_setting)
    difficulty = DifficultyModel(rho=rho, seed=seed)

    inputs: list[Path] = [Path(args.config)] if args.config else []
    if args.truth:
        truth = read_truth_manifest(Path(args.truth))
        inputs.append(Path(args.truth))
    else:
        counts = settings.get("items", {"circular": 617, "elongated": 181, "other": 50})
        truth = []
        for name in CLASS_ORDER:
            n = int(counts.get(name.value, 0))
            truth.extend(
                GroundTruthRecord(f"{name.value}-{i:05d}", name, "synthetic")
                for i in range(n)
            )
    if not truth:
        print("error: nothing to simulate (no items)", file=sys.stderr)
        return EXIT_DATA

    workers = uniform_workers(n_workers, accuracy)
    votes = run_experiment(workers, truth, k=k, difficulty=difficulty, seed=seed)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    votes_path = out_dir / "votes.csv"
    with votes_path.open("w") as fh:
        write_votes(votes, fh)
    truth_path = out_dir / "truth.csv"
    with truth_path.open("w") as fh:
        write_truth_manifest(truth, fh)
    print(f"simulated {len(votes)} votes over {len(truth)} items -> {votes_path}")
    _write_manifest(out_dir, "simulate",
                    {"workers": n_workers, "k": k, "rho": rho_setting},
                    inputs, [votes_path, truth_path], seed, started)
    return EXIT_OK


# ---------------------------------------------------------------- aggregate

def cmd_aggregate(args: argparse.Namespace) -> int:
    started = time.time()
    votes_path = Path(args.votes)
    votes = read_votes(votes_path)
    ballots = group_ballots(votes, k=args.k)
    histogram = {"5": 0, "4-1": 0, "3-*": 0, "2-2-1": 0}
    results = []
    incomplete = 0
    for ballot in ballots.values():
        if not ballot.complete:
            incomplete += 1
            print(
                f"warning: item {ballot.item_id} has {len(ballot.votes)} of {ballot.k} "
                "votes; skipping incomplete ballot",
                file=sys.stderr,
            )
            continue
        result = aggregate(ballot)
        results.append(result)
        label = pattern_label(result.pattern)
        if label in ("3-2", "3-1-1"):
            histogram["3-*"] += 1
        else:
            histogram[label] += 1
    print(
        "pattern histogram: "
        + "  ".join(f"{name}={count}" for name, count in histogram.items())
    )
    print(f"votes={len(votes)} items={len(ballots)} incomplete={incomplete}")
    outputs: list[Path] = []
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        consensus_path = out_dir / "consensus.csv"
        with consensus_path.open("w") as fh:
            write_consensus(results, fh)
        outputs.append(consensus_path)
        _write_manifest(out_dir, "aggregate", {"k": args.k}, [votes_path], outputs, None, started)
    return EXIT_OK


# ------------------------------------------------------------------- report

def cmd_report(args: argparse.Namespace) -> int:
    started = time.time()
    votes_path, truth_path = Path(args.votes), Path(args.truth)
    votes = read_votes(votes_path)
    truth = read_truth_manifest(truth_path)
    stack = build_matrix_stack(votes, truth, k=args.k)
    report = full_report(stack, args.na_policy)
    text = render_report(report)
    print(text, end="")
    outputs: list[Path] = []
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        text_path = out_dir / "report.txt"
        text_path.write_text(text)
        json_path = out_dir / "report.json"
        json_path.write_text(json.dumps(report_as_dict(report), indent=2, sort_keys=True) + "\n")
        outputs = [text_path, json_path]
        _write_manifest(out_dir, "report", {"na_policy": args.na_policy, "k": args.k},
                        [votes_path, truth_path], outputs, None, started)
    return EXIT_OK


# ----------------------------------------------------------------- estimate

def cmd_estimate(args: argparse.Namespace) -> int:
    print(f"{'alpha':>8} {'estimated':>10}")
    for alpha in args.alphas:
        value = estimate_consensus_accuracy(alpha, k=args.k, quorum=args.quorum)
        print(f"{alpha:8.5f} {value * 100:9.2f}%")
    return EXIT_OK


# -------------------------------------------------------------------- wiring

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellcrowd",
        description="crowd annotation pipeline: segment, distribute, aggregate, score",
    )
    parser.add_argument("--version", action="version", version=f"cellcrowd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="extract cell crops from smear images")
    p.add_argument("--input", required=True, help="directory of smear images")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mu", type=float, default=0.2)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--min-area", type=int, default=100)
    p.add_argument("--pad", type=int, default=4)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("batch", help="build a batch payload from a truth manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--reward-cents", type=int, default=1)
    p.add_argument("--pairing", choices=["sequential", "shuffle"], default="sequential")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("serve", help="run the orchestrator HTTP service")
    p.add_argument("--config", help="YAML/JSON config file")
    p.add_argument("--port", type=int)
    p.add_argument("--data-dir")
    p.add_argument("--crops-dir")
    p.add_argument("--frontend-dir")
    p.add_argument("--seed-batch", help="batch.json to create at startup")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="generate a synthetic vote corpus")
    p.add_argument("--config", help="YAML with accuracy/rho/items/workers")
    p.add_argument("--truth", help="truth manifest to simulate over")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("aggregate", help="quorum-aggregate a vote corpus")
    p.add_argument("--votes", required=True)
    p.add_argument("--out")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("report", help="full metrics report against ground truth")
    p.add_argument("--votes", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--na-policy", choices=["exclude", "count_as_error"], default="exclude")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("estimate", help="independence-assumption consensus estimates")
    p.add_argument("alphas", nargs="+", type=float, help="per-vote accuracies")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--quorum", type=int, default=3)
    p.set_defaults(func=cmd_estimate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MissingFile as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ParseError, InvalidLabel, DomainError, EmptyBatch, IncompleteBallot) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CellCrowdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
