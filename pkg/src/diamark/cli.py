"""Command-line entry point: ``diamark {detect,synth,bench,eval}``.

Exit codes: 0 success, 1 usage/config error, 2 I/O error, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import PipelineConfig, load_config
from .imgcore import ImageIOError, load_gray, save_gray
from .kvtext import ConfigError
from .pipeline import check_accounting, detect, worker_count
from .records import (RecordFormatError, atomic_write, read_records_csv, records_from_result,
                      records_to_csv, result_to_json, timings_to_json)
from .synth import SceneError, evaluate, load_scene, read_truth_csv, render_scene, truth_to_csv

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_cfg(path) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    p = Path(path)
    if not p.is_file():
        raise OSError(f"config file not found: {p}")
    return load_config(p)


def _out_dir(path) -> Path:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_detect(args) -> int:
    cfg = _load_cfg(args.config)
    images = [Path(p) for p in args.images]
    stems = [p.stem for p in images]
    if len(set(stems)) != len(stems):
        raise UsageError("input images must have distinct file names")
    loaded = [load_gray(p) for p in images]  # fail before writing anything
    out = _out_dir(args.out)

    def run(item):
        stem, img = item
        # images run concurrently, candidates within an image sequentially
        res = detect(img, cfg, threads=1 if len(loaded) > 1 else None)
        check_accounting(res)
        return stem, res

    n = worker_count(cfg.run.threads)
    items = list(zip(stems, loaded))
    if len(items) > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(run, items))
    else:
        results = [run(it) for it in items]
    for stem, res in results:
        atomic_write(out / f"{stem}.csv", records_to_csv(records_from_result(stem, res)))
        atomic_write(out / f"{stem}.json", result_to_json(stem, res, args.verbose))
        atomic_write(out / f"{stem}.timings.json", timings_to_json(stem, res))
        print(f"{stem}: {len(res.detections)} detection(s) from {res.candidates} candidate(s)")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec_path = Path(args.spec)
    if not spec_path.is_file():
        raise OSError(f"scene spec not found: {spec_path}")
    spec = load_scene(spec_path)
    img, truth = render_scene(spec)
    out = _out_dir(args.out)
    stem = spec_path.stem
    tmp = out / f".{stem}.tmp.png"
    save_gray(img, tmp, bit_depth=16)
    tmp.replace(out / f"{stem}.png")
    atomic_write(out / f"{stem}_truth.csv", truth_to_csv(truth))
    print(f"{stem}: {len(truth)} marker(s), {spec.width}x{spec.height}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import run_bench

    cfg = _load_cfg(args.config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    def progress(cell):
        print(f"ncc image {cell['image']}^2 template {cell['template']}^2: "
              f"fast {cell['fast']['median_s'] * 1e3:.2f} ms, naive {cell['naive']['median_s'] * 1e3:.1f} ms, "
              f"speedup {cell['speedup']:.1f}x", flush=True)

    report = run_bench(cfg, progress)
    e2e = report["end_to_end"]
    print(f"end-to-end: {e2e['scenes']} scenes, median {e2e['median_s'] * 1e3:.1f} ms, CV {100 * e2e['cv']:.1f}%")
    atomic_write(out, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    dets = read_records_csv(args.detections)
    truth = read_truth_csv(args.truth)
    rep = evaluate([(d.x, d.y, d.theta) for d in dets], truth, args.match_radius)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    atomic_write(out, json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    table = rep.table()
    atomic_write(out.with_suffix(".txt"), table)
    sys.stdout.write(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="diamark", description="Diagonal cross marker detection with subpixel localization.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("detect", help="detect markers in one or more images")
    d.add_argument("images", nargs="+", help="PNG or PGM images")
    d.add_argument("--config", help="pipeline config (section.key = value)")
    d.add_argument("--out", required=True, help="output directory")
    d.add_argument("--verbose", action="store_true", help="include the per-candidate rejection trail")
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("synth", help="render a scene spec with ground truth")
    s.add_argument("spec")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    b = sub.add_parser("bench", help="time fast vs naive NCC and end-to-end detection")
    b.add_argument("--config")
    b.add_argument("--out", required=True, help="report JSON path")
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("eval", help="score detections against ground truth")
    e.add_argument("detections")
    e.add_argument("truth")
    e.add_argument("--out", required=True, help="report JSON path (a .txt table is written beside it)")
    e.add_argument("--match-radius", type=float, default=3.0)
    e.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SceneError, RecordFormatError, UsageError) as exc:
        print(f"diamark: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ImageIOError, OSError) as exc:
        print(f"diamark: {exc}", file=sys.stderr)
        return EXIT_IO
    except AssertionError as exc:
        print(f"diamark: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValueError as exc:
        print(f"diamark: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
