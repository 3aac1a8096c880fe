"""``qscene`` command-line entry point.

Every option can come from a flat ``key = value`` config file (``--config``);
flags given on the command line win. Keys are the long flag names with
dashes replaced by underscores. Verbosity follows ``QSCENE_LOG`` (error,
info or debug).
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from contextlib import nullcontext
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .data import (
    Dataset,
    amplitude_side,
    ingest_directory,
    load_tensor_cache,
    make_synthetic,
    preprocess,
    save_tensor_cache,
    stratified_indices,
    write_image_directory,
)
from .encoders import LoaderConfig, pae_plan
from .exceptions import QSceneError
from .hwio import (
    export_qasm,
    load_model,
    random_baseline_quantile,
    save_model,
    shot_inference,
    write_deviation_csv,
)
from .model import ProcessingConfig, amplitude_plan, assemble, encode, forward_batch, full_program
from .train import TrainConfig, evaluate, fit, write_history_csv

log = logging.getLogger("qscene")

COMMANDS = ("train-loader", "train", "eval", "infer", "export", "baseline", "synth-data", "report")
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
REFERENCE_BASELINE = 0.65  # published 99th-percentile random accuracy for n=100, p=0.5


class ConfigError(QSceneError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass(frozen=True)
class RunConfig:
    """All run settings with their defaults. ``n`` and ``out`` fall back to
    per-command defaults when left unset."""

    command: str = "train"
    scheme: str = "pae"
    qubits: int = 10
    grid: str = "2x2"
    size: str = ""
    rescale: bool = False
    layers: int = 0
    connectivity: str = "line"
    entangler: str = "cx"
    brickwork: bool = False
    measured: str = ""
    loader_layers: int = 6
    loader_steps: int = 400
    loader_lr: float = 0.05
    loader_stages: int = 0
    epochs: int = 30
    batch_size: int = 16
    lr: float = 0.01
    validation_fraction: float = 0.2
    test_fraction: float = 0.2
    data: str = "data"
    model: str = "out/model.qmod"
    image_index: int = -1
    limit: int = 10
    shots: int = 400
    trials: int = 100_000
    kind: str = "bright_vs_dark"
    n: int = 0
    shape: str = "16x16"
    noise: float = 0.1
    p: float = 0.5
    q: float = 0.99
    runs: str = ""
    seed: int = 0
    threads: int = 0
    out: str = ""


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_DEFAULT_N = {"synth-data": 50, "baseline": 100}
_DEFAULT_OUT = {"export": "circuit.qasm"}


def _coerce(key, value):
    kind = _FIELD_TYPES[key]
    text = str(value).strip()
    try:
        if kind == "bool":
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(key, f"expected {kind}, got {text!r}") from None
    return text


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}", "expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _FIELD_TYPES or key == "command":
                raise ConfigError(key, "unknown config key")
            values[key] = _coerce(key, value)
    return values


def _pair(text, field):
    try:
        a, b = (int(s) for s in text.lower().split("x"))
    except ValueError:
        raise ConfigError(field, f"expected ROWSxCOLS, got {text!r}") from None
    if a < 1 or b < 1:
        raise ConfigError(field, f"must be positive, got {text!r}")
    return a, b


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.scheme not in ("pae", "aae", "bae"):
        raise ConfigError("scheme", f"must be pae, aae or bae, got {cfg.scheme!r}")
    for key in ("qubits", "epochs", "batch_size", "loader_layers", "loader_steps", "shots", "trials", "limit"):
        if getattr(cfg, key) < 1:
            raise ConfigError(key, "must be >= 1")
    for key in ("layers", "loader_stages", "threads", "n"):
        if getattr(cfg, key) < 0:
            raise ConfigError(key, "must be >= 0")
    if not 0 <= cfg.test_fraction < 1:
        raise ConfigError("test_fraction", "must lie in [0, 1)")
    if not 0 <= cfg.validation_fraction < 1:
        raise ConfigError("validation_fraction", "must lie in [0, 1)")
    _pair(cfg.grid, "grid")
    _pair(cfg.shape, "shape")
    if cfg.size:
        _pair(cfg.size, "size")
    needs_data = cfg.command in ("train-loader", "train", "eval", "infer") or (
        cfg.command == "export" and cfg.image_index >= 0
    )
    if needs_data and not Path(cfg.data).exists():
        raise ConfigError("data", f"path {cfg.data!r} does not exist")
    if cfg.command in ("eval", "infer", "export") and not Path(cfg.model).is_file():
        raise ConfigError("model", f"file {cfg.model!r} does not exist")
    if cfg.command == "report":
        for run in _runs(cfg):
            if not Path(run).is_dir():
                raise ConfigError("runs", f"directory {run!r} does not exist")
    updates = {}
    if cfg.n == 0:
        updates["n"] = _DEFAULT_N.get(cfg.command, 0)
    if not cfg.out:
        updates["out"] = _DEFAULT_OUT.get(cfg.command, "out")
    return replace(cfg, **updates)


def _runs(cfg):
    return [r for r in cfg.runs.split(",") if r] or ["out"]


# ---------------------------------------------------------------------------
# shared helpers


def _load_dataset(cfg: RunConfig, size=None) -> Dataset:
    path = Path(cfg.data)
    ds = load_tensor_cache(path) if path.is_file() else ingest_directory(path)
    if ds.errors:
        log.warning("%d unreadable files skipped", len(ds.errors))
    size = size or (_pair(cfg.size, "size") if cfg.size else None)
    if size is not None:
        ds = ds.map(lambda s: preprocess(s, size, rescale=cfg.rescale))
    return ds


def _build_model(cfg: RunConfig, image_shape, n_classes):
    loader = LoaderConfig(cfg.loader_layers, cfg.loader_steps, cfg.loader_lr, cfg.loader_stages or None, cfg.seed)
    measured = [int(m) for m in cfg.measured.split(",") if m.strip()] or None
    if cfg.scheme == "pae":
        plan = pae_plan(image_shape[0] * image_shape[1], cfg.qubits, image_shape)
        layers = cfg.layers or max(3, plan.n_upload_layers)
    else:
        grid = (1, 1) if cfg.scheme == "aae" else _pair(cfg.grid, "grid")
        plan = amplitude_plan(image_shape, grid, loader)
        layers = cfg.layers or 3
    proc = ProcessingConfig(layers, cfg.connectivity, cfg.entangler, cfg.brickwork)
    return assemble(cfg.scheme, plan, proc, n_classes, measured)


def _image_size(cfg: RunConfig):
    if cfg.size:
        return _pair(cfg.size, "size")
    if cfg.scheme == "aae":
        return amplitude_side(cfg.qubits)
    return None


def _train_test(cfg, ds):
    if cfg.test_fraction == 0:
        idx = list(range(len(ds)))
        return ds, ds.subset(idx, "test")
    train_idx, test_idx = stratified_indices(ds.y, (1 - cfg.test_fraction, cfg.test_fraction), cfg.seed)
    return ds.subset(train_idx, "train"), ds.subset(test_idx, "test")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _num(x):
    return repr(float(x))


# ---------------------------------------------------------------------------
# commands


def cmd_synth_data(cfg: RunConfig) -> int:
    ds = make_synthetic(cfg.kind, cfg.n, _pair(cfg.shape, "shape"), cfg.noise, cfg.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_image_directory(ds, out)
    save_tensor_cache(ds, out / "dataset.qsit")
    print(f"wrote {len(ds)} images in {ds.n_classes} classes to {out}")
    return 0


def cmd_train_loader(cfg: RunConfig) -> int:
    if cfg.scheme == "pae":
        raise ConfigError("scheme", "train-loader applies to the amplitude schemes (aae, bae)")
    ds = _load_dataset(cfg, _image_size(cfg))
    model = _build_model(cfg, ds.X.shape[1:], ds.n_classes)
    enc = encode(model, ds.X)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    n_params = enc.loader_params.shape[2]
    rows = []
    for i, s in enumerate(ds.samples):
        for b in range(model.n_blocks):
            rows.append([s.source_id, b, _num(enc.fidelity[i, b])] + [_num(x) for x in enc.loader_params[i, b]])
    _write_rows(out / "loaders.csv", ["source_id", "block", "fidelity"] + [f"theta_{k}" for k in range(n_params)],
                rows)
    print(f"mean fidelity {enc.fidelity.mean():.6f}, min {enc.fidelity.min():.6f} over {enc.fidelity.size} loaders")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    ds = _load_dataset(cfg, _image_size(cfg))
    train_ds, test_ds = _train_test(cfg, ds)
    model = _build_model(cfg, train_ds.X.shape[1:], ds.n_classes)
    log.info("model: %s, %d qubits, %d trainable parameters", model.scheme, model.n_qubits, model.n_params)
    config = TrainConfig(cfg.epochs, cfg.batch_size, cfg.lr, cfg.seed, validation_fraction=cfg.validation_fraction)
    params, metrics = fit(model, train_ds, config)
    test = evaluate(model, params, test_ds)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, params, out / "model.qmod", seed=cfg.seed, metadata={"class_names": ds.class_names})
    write_history_csv(metrics, out / "history.csv")
    _write_rows(
        out / "summary.csv",
        ["scheme", "qubits", "layers", "n_params", "n_train", "n_test", "best_epoch", "val_accuracy",
         "test_accuracy", "test_loss", "seed"],
        [[model.scheme, model.n_qubits, model.processing_config.layers, model.n_params, len(train_ds),
          len(test_ds), metrics.best_epoch, _num(metrics.accuracy), _num(test.accuracy), _num(test.loss), cfg.seed]],
    )
    print(f"test accuracy {test.accuracy:.4f} on {len(test_ds)} images; model written to {out / 'model.qmod'}")
    return 0


def _model_and_data(cfg):
    model, params, meta = load_model(cfg.model, with_metadata=True)
    ds = _load_dataset(cfg)
    if ds.X.shape[1:] != tuple(model.image_shape):
        ds = ds.map(lambda s: preprocess(s, model.image_shape, rescale=cfg.rescale))
    if ds.X.shape[1:] != tuple(model.image_shape):
        raise ConfigError("data", f"images are {ds.X.shape[1:]}, model expects {tuple(model.image_shape)}")
    return model, params, meta, ds


def cmd_eval(cfg: RunConfig) -> int:
    model, params, meta, ds = _model_and_data(cfg)
    m = evaluate(model, params, ds)
    names = meta.get("class_names") or ds.class_names
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [[names[c], int(m.class_counts[c]), _num(m.per_class_accuracy[c])] for c in range(model.n_classes)]
    rows.append(["all", int(m.class_counts.sum()), _num(m.accuracy)])
    _write_rows(out / "eval.csv", ["class", "count", "accuracy"], rows)
    _write_rows(out / "confusion.csv", ["true"] + list(names),
                [[names[i]] + list(map(int, row)) for i, row in enumerate(m.confusion)])
    print(f"accuracy {m.accuracy:.4f} on {len(ds)} images, loss {m.loss:.6f}")
    return 0


def cmd_infer(cfg: RunConfig) -> int:
    model, params, _, ds = _model_and_data(cfg)
    indices = [cfg.image_index] if cfg.image_index >= 0 else list(range(min(cfg.limit, len(ds))))
    if max(indices) >= len(ds):
        raise ConfigError("image_index", f"dataset has {len(ds)} images")
    out = Path(cfg.out)
    (out / "deviations").mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(indices))
    X = ds.X
    enc = encode(model, X[indices])
    exact = forward_batch(model, enc, params).argmax(axis=1)
    rows = []
    for j, i in enumerate(indices):
        report, pred = shot_inference(model, params, enc.subset([j]), cfg.shots, seeds[j])
        write_deviation_csv(report, out / "deviations" / f"image_{i:05d}.csv")
        s = ds.samples[i]
        rows.append([i, s.source_id, s.label, int(exact[j]), pred, _num(report.l1), cfg.shots])
    _write_rows(out / "infer.csv", ["image", "source_id", "label", "pred_exact", "pred_shots", "l1", "shots"], rows)
    mean_l1 = float(np.mean([float(r[5]) for r in rows]))
    print(f"{len(rows)} images at {cfg.shots} shots: mean L1 {mean_l1:.6f}")
    return 0


def cmd_export(cfg: RunConfig) -> int:
    model, params = load_model(cfg.model)
    if cfg.image_index >= 0:
        ds = _load_dataset(cfg)
        if ds.X.shape[1:] != tuple(model.image_shape):
            ds = ds.map(lambda s: preprocess(s, model.image_shape, rescale=cfg.rescale))
        enc = encode(model, ds.X[[cfg.image_index]])
        program = full_program(model, enc, 0)
    else:
        program = full_program(model)
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(export_qasm(program, params.quantum))
    print(f"wrote {len(program.gates)} gates on {program.n_qubits} qubits to {out}")
    return 0


def cmd_baseline(cfg: RunConfig) -> int:
    res = random_baseline_quantile(cfg.n, cfg.p, cfg.q, cfg.trials, cfg.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "baseline.csv", ["n_images", "p_success", "quantile", "trials", "monte_carlo", "exact",
                                       "reference"],
                [[cfg.n, _num(cfg.p), _num(cfg.q), cfg.trials, _num(res.monte_carlo), _num(res.exact),
                  _num(REFERENCE_BASELINE)]])
    print(f"threshold {res.exact:.4f} (exact {res.exact:.4f}, monte_carlo {res.monte_carlo:.4f}, "
          f"published reference {REFERENCE_BASELINE:.2f})")
    return 0


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _svg_plot(series, path, title, xlabel, ylabel):
    """Minimal line plot: ``series`` maps a label to ``(xs, ys)``."""
    W, H, pad = 640, 400, 50
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys)]
    xs = [p[0] for p in pts] or [0, 1]
    ys = [p[1] for p in pts] or [0, 1]
    x0, x1 = min(xs), max(xs) if max(xs) > min(xs) else min(xs) + 1
    y0, y1 = min(ys), max(ys) if max(ys) > min(ys) else min(ys) + 1
    sx = lambda x: pad + (x - x0) / (x1 - x0) * (W - 2 * pad)
    sy = lambda y: H - pad - (y - y0) / (y1 - y0) * (H - 2 * pad)
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}" stroke="black"/>',
        f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle">{xlabel}</text>',
        f'<text x="15" y="{H / 2}" text-anchor="middle" transform="rotate(-90 15 {H / 2})">{ylabel}</text>',
        f'<text x="{pad}" y="{H - pad + 15}" text-anchor="middle">{x0:.4g}</text>',
        f'<text x="{W - pad}" y="{H - pad + 15}" text-anchor="middle">{x1:.4g}</text>',
        f'<text x="{pad - 5}" y="{H - pad}" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{pad - 5}" y="{pad}" text-anchor="end">{y1:.4g}</text>',
    ]
    for k, (label, (sxs, sys_)) in enumerate(series.items()):
        color = colors[k % len(colors)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(sxs, sys_))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        for x, y in zip(sxs, sys_):
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{color}"/>')
        out.append(f'<text x="{W - pad + 5}" y="{pad + 15 * k}" fill="{color}">{label}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def cmd_report(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    curves, depth, loss_series = [], [], {}
    for run in _runs(cfg):
        name = Path(run).name or run
        hist = Path(run) / "history.csv"
        if hist.is_file():
            rows = _read_csv(hist)
            for r in rows:
                curves.append([name, r["epoch"], r["train_loss"], r["val_loss"], r["val_acc"]])
            epochs = [int(r["epoch"]) for r in rows]
            loss_series[f"{name} train"] = (epochs, [float(r["train_loss"]) for r in rows])
            loss_series[f"{name} val"] = (epochs, [float(r["val_loss"]) for r in rows])
        summ = Path(run) / "summary.csv"
        if summ.is_file():
            for r in _read_csv(summ):
                depth.append([name, r["scheme"], int(r["layers"]), r["test_accuracy"]])
    if not curves and not depth:
        raise ConfigError("runs", "no history.csv or summary.csv found")
    _write_rows(out / "loss_curves.csv", ["run", "epoch", "train_loss", "val_loss", "val_acc"], curves)
    _svg_plot(loss_series, out / "loss_curves.svg", "Loss curves", "epoch", "cross-entropy")
    depth.sort(key=lambda r: (r[1], r[2], r[0]))
    _write_rows(out / "accuracy_vs_depth.csv", ["run", "scheme", "layers", "test_accuracy"], depth)
    by_scheme = {}
    for _, scheme, layers, acc in depth:
        xs, ys = by_scheme.setdefault(scheme, ([], []))
        xs.append(layers)
        ys.append(float(acc))
    _svg_plot(by_scheme, out / "accuracy_vs_depth.svg", "Test accuracy vs processing depth", "layers",
              "accuracy")
    print(f"report written to {out} ({len(curves)} history rows, {len(depth)} runs)")
    return 0


HANDLERS = {
    "synth-data": cmd_synth_data,
    "train-loader": cmd_train_loader,
    "train": cmd_train,
    "eval": cmd_eval,
    "infer": cmd_infer,
    "export": cmd_export,
    "baseline": cmd_baseline,
    "report": cmd_report,
}

_COMMAND_FLAGS = {
    "synth-data": ["kind", "n", "shape", "noise"],
    "train-loader": ["data", "scheme", "qubits", "grid", "size", "rescale", "loader_layers", "loader_steps",
                     "loader_lr", "loader_stages"],
    "train": ["data", "scheme", "qubits", "grid", "size", "rescale", "layers", "connectivity", "entangler",
              "brickwork", "measured", "loader_layers", "loader_steps", "loader_lr", "loader_stages", "epochs",
              "batch_size", "lr", "validation_fraction", "test_fraction"],
    "eval": ["model", "data", "size", "rescale"],
    "infer": ["model", "data", "size", "rescale", "shots", "image_index", "limit"],
    "export": ["model", "data", "image_index"],
    "baseline": ["n", "p", "q", "trials"],
    "report": ["runs"],
}

_SUMMARY = {
    "synth-data": "write a synthetic image dataset (PNG directories plus a .qsit cache)",
    "train-loader": "train amplitude loaders and write their fidelities and angles",
    "train": "train a classifier and write the model artifact and metrics",
    "eval": "score a saved model on a dataset",
    "infer": "finite-shot inference with per-qubit deviation reports",
    "export": "write a saved model's circuit as OpenQASM 2.0",
    "baseline": "random-guessing accuracy quantile",
    "report": "turn run CSVs into plot data and SVG figures",
}

_HELP = {
    "kind": "synthetic dataset: bright_vs_dark or gradient_4class",
    "n": "images per class (synth-data) or number of test images (baseline)",
    "shape": "synthetic image shape, HxW",
    "data": "image directory (one subdirectory per class) or .qsit tensor cache",
    "scheme": "pae, aae or bae",
    "grid": "BAE block grid, ROWSxCOLS",
    "size": "average-pool images to HxW before use",
    "layers": "processing layers (0: automatic)",
    "measured": "comma-separated measured qubits (AAE/PAE)",
    "loader_stages": "hierarchical stages (0: automatic)",
    "image_index": "single image to use (-1: first --limit images / processing only for export)",
    "runs": "comma-separated run directories holding history.csv / summary.csv",
    "model": "model artifact path",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qscene", description="Quantum image classification pipeline.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for command in COMMANDS:
        p = sub.add_parser(command, help=_SUMMARY[command])
        p.add_argument("--config", default=argparse.SUPPRESS, help="flat key = value config file")
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
        p.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="cap BLAS worker threads (0: no cap)")
        p.add_argument("--out", default=argparse.SUPPRESS, help="output directory (export: QASM file)")
        for key in _COMMAND_FLAGS[command]:
            default = getattr(RunConfig, key)
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=argparse.SUPPRESS,
                           help=f"{_HELP.get(key, key.replace('_', ' '))} (default {default!r})")
    return parser


def _configure_logging():
    level = os.environ.get("QSCENE_LOG", "error").strip().lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    if level not in LOG_LEVELS:
        log.error("QSCENE_LOG=%r not recognised; using 'error'", level)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    given = vars(args).copy()
    command = given.pop("command")
    values = read_config_file(given.pop("config")) if "config" in given else {}
    values.update({k: _coerce(k, v) for k, v in given.items()})
    return _validate(RunConfig(command=command, **values))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging()
    try:
        cfg = resolve_config(args)
        limit = nullcontext()
        if cfg.threads:
            from threadpoolctl import threadpool_limits

            limit = threadpool_limits(limits=cfg.threads)
        with limit:
            return HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
    except (QSceneError, OSError, ValueError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
