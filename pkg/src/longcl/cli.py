"""Command line entry point: ``longcl run`` and ``longcl compare``."""

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import apply_order, load_config, order_label
from .errors import ConfigurationError, LongCLError
from .metrics import export_matrix, read_matrix, summary, write_summary
from .params import save_snapshot
from .trainer import parse_arm, run_stream

log = logging.getLogger("longcl")


def _dump(obj):
    return json.dumps(obj, sort_keys=True)


def write_cell(result, cell_dir, meta, save_checkpoints=True):
    cell_dir.mkdir(parents=True, exist_ok=True)
    export_matrix(result.matrix, cell_dir / "perf.csv")
    write_summary(result.matrix, cell_dir / "summary.json")
    (cell_dir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with open(cell_dir / "run.log", "w", encoding="utf-8") as fh:
        for event in result.events:
            fh.write(_dump(event) + "\n")
    for t, mask in enumerate(result.masks, start=1):
        (cell_dir / f"mask_t{t:03d}.txt").write_text(mask.to_bitstring() + "\n", encoding="utf-8")
    for report in result.reports:
        path = cell_dir / f"selection_t{report.task:03d}.json"
        path.write_text(json.dumps(report.to_json(), indent=1) + "\n", encoding="utf-8")
    if save_checkpoints:
        save_snapshot(result.initial.adapter, cell_dir / "ckpt_t000.pv")
        for t, pv in enumerate(result.checkpoints, start=1):
            save_snapshot(pv, cell_dir / f"ckpt_t{t:03d}.pv")


def run_experiment(cfg, out_dir=None):
    """Run every (arm, order, seed) cell; returns the output directory."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for seed in cfg.seeds:
        base_stream = cfg.build_stream(seed)
        for order in cfg.orders:
            stream = apply_order(base_stream, order)
            for arm in cfg.arms:
                label = order_label(order)
                log.info("running arm=%s order=%s seed=%s", arm, label, seed)
                result = run_stream(stream, arm, cfg.train_config(seed))
                meta = {
                    "arm": arm,
                    "order": label,
                    "task_order": list(stream.order),
                    "seed": seed,
                    "stream": cfg.stream,
                }
                write_cell(result, out / arm / label / str(seed), meta, cfg.save_checkpoints)
    table = compare([out])
    write_table(table, out / "comparison.csv")
    (out / "comparison.txt").write_text(format_table(table), encoding="utf-8")
    return out


def _find_cells(run_dir):
    run_dir = Path(run_dir)
    if (run_dir / "meta.json").is_file():
        return [run_dir]
    return sorted(p.parent for p in run_dir.rglob("meta.json"))


def compare(run_dirs, group_by=("arm", "order")):
    """AP/AF per group with mean, population std and max-min range over the group's cells.

    AP/AF are recomputed from each cell's ``perf.csv``.
    """
    cells = []
    for d in run_dirs:
        found = _find_cells(d)
        if not found:
            raise LongCLError(f"{d}: no run cells found")
        cells.extend(found)
    groups = {}
    stream_spec = None
    for cell in cells:
        meta = json.loads((cell / "meta.json").read_text(encoding="utf-8"))
        if stream_spec is None:
            stream_spec = meta["stream"]
        elif meta["stream"] != stream_spec:
            raise LongCLError(f"{cell}: stream spec differs from the other runs")
        s = summary(read_matrix(cell / "perf.csv"))
        key = tuple(meta[g] for g in group_by)
        groups.setdefault(key, []).append((s["AP"], s["AF"]))
    rows = []
    for key, vals in groups.items():
        v = np.asarray(vals)
        row = dict(zip(group_by, key))
        row.update(
            n=len(vals),
            AP_mean=float(v[:, 0].mean()),
            AP_std=float(v[:, 0].std()),
            AF_mean=float(v[:, 1].mean()),
            AF_std=float(v[:, 1].std()),
            AF_range=float(v[:, 1].max() - v[:, 1].min()),
        )
        rows.append(row)
    return rows


def write_table(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_table_csv(rows))


def _table_csv(rows):
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return buf.getvalue()


def format_table(rows):
    if not rows:
        return ""
    cols = list(rows[0])
    cells = [[c for c in cols]]
    for row in rows:
        cells.append([f"{row[c]:.4f}" if isinstance(row[c], float) else str(row[c]) for c in cols])
    widths = [max(len(r[i]) for r in cells) for i in range(len(cols))]
    lines = ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in cells]
    return "\n".join(lines) + "\n"


def build_parser():
    parser = argparse.ArgumentParser(prog="longcl", description="Long-horizon continual learning toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described by a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.add_argument("--arm", help="run only this arm")
    run.add_argument("--seed", type=int, help="run only this seed")

    cmp_ = sub.add_parser("compare", help="tabulate AP/AF across run directories")
    cmp_.add_argument("run_dirs", nargs="+")
    cmp_.add_argument("--group-by", default="arm,order", help="comma-separated: arm, order, seed")
    cmp_.add_argument("--csv", help="also write the table as CSV here")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            if args.arm is not None:
                parse_arm(args.arm)
                cfg = replace(cfg, arms=[args.arm])
            if args.seed is not None:
                cfg = replace(cfg, seeds=[args.seed])
            out = run_experiment(cfg, args.out)
            print(out)
        else:
            group_by = tuple(g.strip() for g in args.group_by.split(",") if g.strip())
            bad = [g for g in group_by if g not in ("arm", "order", "seed")]
            if bad or not group_by:
                raise ConfigurationError(f"group-by: unknown field {bad[0] if bad else ''!r}")
            rows = compare(args.run_dirs, group_by)
            if args.csv:
                write_table(rows, args.csv)
            sys.stdout.write(format_table(rows))
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # any runtime failure maps to exit code 1
        log.debug("run failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
