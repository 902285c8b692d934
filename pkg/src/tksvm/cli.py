"""``tksvm`` command line: sample, train, features, phase-diagram, bench.

Every option can come from an INI file (``--config``; keys in ``[DEFAULT]``
apply to all commands, keys in a section named after the command override
them) and from flags, which override the file. The resolved configuration
and the tool version are written next to every output.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import ConvergenceError, SamplingError, TrainingError
from .experiments import (
    bench_point,
    crossing_shots,
    derive_seed,
    generate_snapshots,
    grid_points,
    top_features,
    train_against_random,
)
from .features import ClusterSpec, batch_feature_vectors, enumerate_clusters
from .interpret import extract_features, rank_columns, report_table, write_column_csv
from .phase_graph import DEFAULT_BC, DEFAULT_BINS, MIN_BAND, PhaseGraph, pairwise_biases
from .quantum import Lattice, Snapshots, read_snapshots, write_snapshots
from .svm import CoefficientColumn, load_model, save_model

logger = logging.getLogger("tksvm")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class InputError(OSError):
    pass


# option types -----------------------------------------------------------

def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text) -> list:
    return [int(t) for t in str(text).split(",") if t.strip()]


def _range3(text) -> tuple:
    lo, hi, count = str(text).split(",")
    if int(count) < 1:
        raise ValueError("range count must be positive")
    return float(lo), float(hi), int(count)


def _optional_int(text):
    if text is None or str(text).strip().lower() in ("", "auto", "none"):
        return None
    return int(text)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "auto"
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class Option:
    name: str
    kind: object
    default: object
    help: str


COMMON = [
    Option("seed", int, 0, "master seed; all child streams derive from it"),
    Option("threads", int, 1, "worker cap for sampling and pairwise training"),
]

CLUSTER = [
    Option("r", int, 3, "monomial rank"),
    Option("n", int, 3, "cluster size: string length, or block edge for square-cells"),
    Option("shape", str, "chain-string", "chain-string | square-vertex | square-plaquette | square-cells"),
    Option("overlap", _bool, False, "overlapping cluster placements"),
    Option("group_size", _optional_int, None, "snapshots per feature vector (auto: package default)"),
    Option("nu", float, 0.5, "nu-SVM parameter"),
    Option("tol", float, 1e-6, "SMO stopping tolerance"),
]

# pairwise training wants many small groups: with few large ones every pair
# separates and the graph loses its same-phase edges
PHASE_GRAPH_DEFAULTS = {"group_size": 8}


def _with_defaults(opts: list, overrides: dict) -> list:
    return [Option(o.name, o.kind, overrides.get(o.name, o.default), o.help) for o in opts]


OPTIONS = {
    "sample": COMMON + [
        Option("source", str, "cluster-chain", "cluster-chain | toric-code | product | random"),
        Option("lattice", str, "auto", "chain | square-link (auto: from source)"),
        Option("L", str, "12", "extent: 12 for a chain, 3x3 for the square link lattice"),
        Option("boundary", str, "auto", "open | periodic (auto: from source)"),
        Option("h1", float, 0.0, "cluster model field on X"),
        Option("h2", float, 0.0, "cluster model XX coupling"),
        Option("hx", float, 0.0, "toric code X field"),
        Option("hz", float, 0.0, "toric code Z field"),
        Option("bloch", str, "+x", "product source: Bloch directions repeated over sites, e.g. +z,-z"),
        Option("shots", int, 1000, "number of snapshots"),
        Option("method", str, "auto", "auto | tableau | ed"),
        Option("out", str, None, "snapshot file to write"),
    ],
    "train": COMMON + CLUSTER + [
        Option("data", str, None, "comma-separated snapshot files pooled into class +1"),
        Option("holdout", float, 0.2, "held-out fraction per class"),
        Option("out", str, None, "model file to write"),
    ],
    "features": COMMON + [
        Option("model", str, None, "model file"),
        Option("k", int, 4, "number of top-ranked columns to report"),
        Option("rho", float, 0.2, "relative threshold"),
        Option("out_dir", str, None, "output directory"),
    ],
    "phase-diagram": COMMON + _with_defaults(CLUSTER, PHASE_GRAPH_DEFAULTS) + [
        Option("data_dir", str, None, "directory of *.snap files (skips generation)"),
        Option("axes", str, "h1,h2", "header parameters used as vertex coordinates"),
        Option("source", str, "cluster-chain", "model for generated grids"),
        Option("L", str, "12", "extent for generated grids"),
        Option("first", _range3, (0.0, 2.0, 5), "first coupling axis lo,hi,count"),
        Option("second", _range3, (-2.0, 0.0, 5), "second coupling axis lo,hi,count"),
        Option("shots", int, 5000, "snapshots per grid point"),
        Option("method", str, "auto", "auto | tableau | ed"),
        Option("b_c", float, DEFAULT_BC, "Lorentzian width"),
        Option("bins", int, DEFAULT_BINS, "histogram bins"),
        Option("min_band", int, MIN_BAND, "minimum band occupancy"),
        Option("mode", str, "histogram", "histogram | sign"),
        Option("out_dir", str, None, "output directory"),
    ],
    "bench": COMMON + [
        Option("L", _int_list, [6, 12], "chain lengths"),
        Option("rn", _int_list, [3], "r = n values"),
        Option("shots", _int_list, [8, 16, 32, 64, 128, 256], "snapshots per feature vector"),
        Option("n_train", int, 300, "training vectors per class"),
        Option("n_test", int, 300, "test vectors per class"),
        Option("repeats", int, 1, "independent repetitions averaged per point"),
        Option("nu", float, 0.5, "nu-SVM parameter"),
        Option("tol", float, 1e-6, "SMO stopping tolerance"),
        Option("overlap", _bool, False, "overlapping cluster placements"),
        Option("periodic", _bool, True, "ring cluster state (every placement equivalent)"),
        Option("level", float, 0.8, "accuracy level for the crossing table"),
        Option("out_dir", str, None, "output directory"),
    ],
}

REQUIRED = {"sample": ["out"], "train": ["data", "out"], "features": ["model", "out_dir"],
            "phase-diagram": ["out_dir"], "bench": ["out_dir"]}

EPILOGS = {
    "features": "outputs: report.txt, report.json, column_<index>.csv (index,value), config.ini",
    "phase-diagram": ("outputs: labels.csv (index,<axes>,label,fiedler), histogram.csv "
                      "(bin,lo,hi,count), graph.json (cached biases), data/ (generated grids), config.ini"),
    "bench": ("outputs: accuracy.csv (L,r,n,shots,clusters,x,accuracy), "
              "crossing.csv (L,r,n,shots_at_level,x_at_level), config.ini"),
    "train": "outputs: the model file and <model>.config.ini",
    "sample": "outputs: the snapshot file and <file>.config.ini",
}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tksvm", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"tksvm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, opts in OPTIONS.items():
        p = sub.add_parser(cmd, epilog=EPILOGS.get(cmd))
        p.add_argument("--config", help="INI file with [DEFAULT] and [%s] sections" % cmd)
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        for opt in opts:
            default = _fmt(opt.default) if opt.default is not None else "required/auto"
            p.add_argument(_flag(opt.name), dest=opt.name, default=None,
                           help=f"{opt.help} [{default}]")
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then the INI file, then flags; every value parsed to its type."""
    opts = {o.name: o for o in OPTIONS[command]}
    raw = {name: o.default for name, o in opts.items()}
    if args.config:
        ini = configparser.ConfigParser(interpolation=None)
        ini.optionxform = str
        try:
            with open(args.config, encoding="utf-8") as fh:
                ini.read_file(fh)
        except OSError as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"bad config file: {exc}") from exc
        section = ini[command] if ini.has_section(command) else ini.defaults()
        for key, value in section.items():
            name = key.replace("-", "_")
            if name in opts:
                raw[name] = value
            elif key not in ini.defaults():
                raise ConfigError(f"unknown key {key!r} in [{command}]")
    for name in opts:
        value = getattr(args, name, None)
        if value is not None:
            raw[name] = value
    resolved = {}
    for name, opt in opts.items():
        value = raw[name]
        # defaults are already typed; file and flag values arrive as text
        if isinstance(value, str) and opt.kind is not str:
            try:
                value = opt.kind(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{name}: {exc}") from exc
        resolved[name] = value
    missing = [n for n in REQUIRED[command] if resolved.get(n) in (None, "")]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join(_flag(m) for m in missing))
    return resolved


def write_config(path: Path, command: str, config: dict):
    ini = configparser.ConfigParser(interpolation=None)
    ini.optionxform = str
    ini["tksvm"] = {"version": __version__, "command": command}
    ini[command] = {k: _fmt(v) for k, v in config.items()}
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        ini.write(fh)


def _out_dir(config: dict) -> Path:
    out = Path(config["out_dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create {out}: {exc}") from exc
    return out


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".config.ini")


def _load_snapshots(path) -> Snapshots:
    try:
        return read_snapshots(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"cannot parse {path}: {exc}") from exc


def _cluster_spec(config: dict, lattice: Lattice) -> ClusterSpec:
    spec = ClusterSpec(lattice, config["shape"], config["n"], config["overlap"])
    enumerate_clusters(spec)
    return spec


def _lattice_for(source: str, kind: str, extent: str, boundary: str) -> Lattice:
    if kind == "auto":
        kind = "square-link" if source == "toric-code" else "chain"
    if boundary == "auto":
        boundary = "periodic" if kind == "square-link" else "open"
    try:
        return Lattice.from_label(kind, extent, boundary)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _couplings(config: dict) -> tuple:
    if config["source"] == "toric-code":
        return config["hx"], config["hz"]
    return config["h1"], config["h2"]


# commands ---------------------------------------------------------------

def cmd_sample(config: dict) -> int:
    lat = _lattice_for(config["source"], config["lattice"], config["L"], config["boundary"])
    snaps = generate_snapshots(config["source"], lat, config["shots"], config["seed"],
                               _couplings(config), config["method"], config["bloch"], config["threads"])
    out = Path(config["out"])
    try:
        write_snapshots(out, snaps)
        write_config(_sidecar(out), "sample", config)
    except OSError as exc:
        raise InputError(f"cannot write {out}: {exc}") from exc
    print(f"wrote {len(snaps)} snapshots of {lat.kind} L={lat.extent_label()} ({lat.boundary}), "
          f"seed {config['seed']}, to {out}")
    return EXIT_OK


def cmd_train(config: dict) -> int:
    paths = [p.strip() for p in config["data"].split(",") if p.strip()]
    parts = [_load_snapshots(p) for p in paths]
    try:
        snaps = parts[0] if len(parts) == 1 else Snapshots.concatenate(parts)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    spec = _cluster_spec(config, snaps.lattice)
    res = train_against_random(snaps, spec, config["r"], config["nu"], config["group_size"],
                               config["seed"], config["holdout"], config["tol"])
    out = Path(config["out"])
    meta = {**res.meta, "data": paths, "version": __version__}
    try:
        save_model(out, res.model, meta)
        write_config(_sidecar(out), "train", config)
    except OSError as exc:
        raise InputError(f"cannot write {out}: {exc}") from exc
    model = res.model
    print(f"b = {model.bias_:.6g}  (margin {'resolved' if model.margin_resolved_ else 'unresolved'})")
    print(f"held-out accuracy = {res.accuracy:.4f}  ({res.n_test} vectors; "
          f"{res.n_train} trained, group size {res.group_size})")
    top = top_features(model, config["r"], spec.n_sites)[0]
    if not model.margin_resolved_ or res.accuracy < 0.6 or top.no_signal:
        print("warning: no learnable signal; data look indistinguishable from random snapshots",
              file=sys.stderr)
    return EXIT_OK


def cmd_features(config: dict) -> int:
    try:
        model, meta = load_model(config["model"])
    except OSError as exc:
        raise InputError(f"cannot read {config['model']}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise InputError(f"cannot parse {config['model']}: {exc}") from exc
    if "cluster" not in meta or "r" not in meta:
        raise ConfigError("model has no cluster metadata; train it with `tksvm train`")
    spec = ClusterSpec.from_dict(meta["cluster"])
    r, n = int(meta["r"]), spec.n_sites
    out = _out_dir(config)
    reports = []
    texts = []
    for nu_bar in rank_columns(model, config["k"]):
        col = CoefficientColumn(nu_bar, model.coefficient_column(nu_bar))
        rep = extract_features(col, r, n, config["rho"])
        reports.append(rep.to_dict())
        texts.append(report_table(rep))
        write_column_csv(out / f"column_{nu_bar}.csv", col)
    (out / "report.txt").write_text("".join(texts), encoding="utf-8")
    (out / "report.json").write_text(json.dumps(reports, indent=1) + "\n", encoding="utf-8")
    write_config(out / "config.ini", "features", config)
    sys.stdout.write("".join(texts))
    if all(rep["no_signal"] for rep in reports):
        print("warning: no column rises above the noise floor", file=sys.stderr)
    return EXIT_OK


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _graph_key(files: list, config: dict) -> str:
    h = hashlib.sha256()
    for f in files:
        h.update(_file_digest(f).encode())
    for name in ("r", "n", "shape", "overlap", "group_size", "nu", "tol"):
        h.update(f"{name}={_fmt(config[name])};".encode())
    return h.hexdigest()


def _generate_grid(config: dict, data_dir: Path) -> list:
    lat = _lattice_for(config["source"], "auto", config["L"], "auto")
    data_dir.mkdir(parents=True, exist_ok=True)
    points = grid_points(config["first"], config["second"])
    files = []
    for k, pair in enumerate(points):
        snaps = generate_snapshots(config["source"], lat, config["shots"], config["seed"] + k, pair,
                                   config["method"], threads=config["threads"])
        path = data_dir / f"point_{k:04d}.snap"
        write_snapshots(path, snaps)
        files.append(path)
        logger.info("grid point %d/%d at %s written", k + 1, len(points), pair)
    return files


def _coords(datasets: list, axes: list) -> tuple:
    """Header parameters named by ``axes`` as coordinates, else the file position for all."""
    if axes and all(a in s.params for s in datasets for a in axes):
        return [tuple(float(s.params[a]) for a in axes) for s in datasets], axes
    logger.info("not every dataset records %s; using file positions as coordinates", ",".join(axes))
    return [(float(k),) for k in range(len(datasets))], ["position"]


def cmd_phase_diagram(config: dict) -> int:
    out = _out_dir(config)
    if config["data_dir"]:
        files = sorted(Path(config["data_dir"]).glob("*.snap"))
        if len(files) < 2:
            raise ConfigError(f"need at least two *.snap files in {config['data_dir']}")
    else:
        files = _generate_grid(config, out / "data")
    datasets = [_load_snapshots(f) for f in files]
    axes = [a.strip() for a in config["axes"].split(",") if a.strip()]
    coords, names = _coords(datasets, axes)
    key = _graph_key(files, config)
    cache = out / "graph.json"
    graph = None
    if cache.exists():
        doc = json.loads(cache.read_text(encoding="utf-8"))
        if doc.get("key") == key:
            graph = PhaseGraph.from_dict(doc["graph"]).with_bc(config["b_c"])
            logger.info("reusing cached bias matrix from %s", cache)
    if graph is None:
        spec = _cluster_spec(config, datasets[0].lattice)
        feats = [batch_feature_vectors(s, spec, config["r"], group_size=config["group_size"])
                 for s in datasets]
        biases = pairwise_biases(feats, nu=config["nu"], n_jobs=config["threads"], tol=config["tol"])
        graph = PhaseGraph(coords, biases, config["b_c"])
    doc = {"key": key, "graph": graph.to_dict()}
    cache.write_text(json.dumps(doc, indent=1, allow_nan=False) + "\n", encoding="utf-8")
    res = graph.partition(config["mode"], config["bins"], config["min_band"])
    with (out / "labels.csv").open("w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", *names, "label", "fiedler"])
        for k, (c, lab, z) in enumerate(zip(coords, res.labels, res.fiedler)):
            w.writerow([k, *(repr(v) for v in c), int(lab), repr(float(z))])
    with (out / "histogram.csv").open("w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin", "lo", "hi", "count"])
        if res.histogram is not None:
            counts, edges = res.histogram
            for b, cnt in enumerate(counts):
                w.writerow([b, repr(float(edges[b])), repr(float(edges[b + 1])), int(cnt)])
    write_config(out / "config.ini", "phase-diagram", config)
    print(f"{len(files)} vertices, lambda2 = {res.lambda2:.6g}, {res.n_parts} part(s)")
    return EXIT_OK


def cmd_bench(config: dict) -> int:
    out = _out_dir(config)
    rows, crossings = [], []
    for rn in config["rn"]:
        for L in config["L"]:
            lat = Lattice("chain", (L,), "periodic" if config["periodic"] else "open")
            clusters = len(enumerate_clusters(ClusterSpec(lat, "chain-string", rn, config["overlap"])))
            accs = []
            for shots in config["shots"]:
                vals = [bench_point(L, rn, shots, config["n_train"], config["n_test"],
                                    derive_seed(config["seed"], rep), config["nu"],
                                    config["overlap"], config["tol"], config["periodic"])
                        for rep in range(config["repeats"])]
                acc = float(np.mean(vals))
                accs.append(acc)
                rows.append((L, rn, rn, shots, clusters, shots * L / rn, acc))
                logger.info("L=%d r=n=%d shots=%d accuracy %.4f", L, rn, shots, acc)
            crossings.append((L, rn, crossing_shots(config["shots"], accs, config["level"])))
    with (out / "accuracy.csv").open("w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["L", "r", "n", "shots", "clusters", "x", "accuracy"])
        for L, r, n, shots, clusters, x, acc in rows:
            w.writerow([L, r, n, shots, clusters, repr(float(x)), repr(acc)])
    with (out / "crossing.csv").open("w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["L", "r", "n", "shots_at_level", "x_at_level"])
        for L, rn, cross in crossings:
            x = cross * L / rn if math.isfinite(cross) else float("nan")
            w.writerow([L, rn, rn, repr(cross), repr(x)])
    write_config(out / "config.ini", "bench", config)
    with (out / "accuracy.csv").open(encoding="ascii") as fh:
        sys.stdout.write(fh.read())
    return EXIT_OK


COMMANDS = {"sample": cmd_sample, "train": cmd_train, "features": cmd_features,
            "phase-diagram": cmd_phase_diagram, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        config = resolve_config(args.command, args)
        if config.get("threads", 1) < 1:
            raise ConfigError("threads must be at least 1")
        return COMMANDS[args.command](config)
    except InputError as exc:
        print(f"tksvm: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConvergenceError, TrainingError, SamplingError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"tksvm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"tksvm: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"tksvm: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
