"""Command-line interface.

Exit codes: 0 success, 1 configuration error, 2 input or I/O error,
3 mathematical failure (no consensus, insufficient data, infeasible,
degenerate or non-distance-preserving input).

Every subcommand takes ``--seed`` and an optional ``--config`` JSON file
whose keys are flag names (dashes or underscores); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import jsonio
from .certifier import RecoveryConfig, certify, recover_oracle, recover_robust, write_residual_csv
from .errors import DimensionError, RecoveryError
from .extension import LabeledSimplex, extend_finite_isometry
from .isometry import random_isometry
from .measures import (
    STREAM_BASE_MAP,
    CorrespondenceFormatError,
    CorrespondenceSet,
    CorruptedMap,
    MeasureModel,
    make_correspondences,
    quadratic_images,
    scaled_images,
    substream,
)
from .trilateration import locate

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_MATH = 0, 1, 2, 3
MAX_EPSILON = 0.3


class ConfigError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_common(p):
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--config", type=Path, help="JSON file of flag defaults")


def _add_recovery(p):
    p.add_argument("--tau", type=float, help="relative pair/residual tolerance (default 1e-6)")
    p.add_argument("--rank-rtol", type=float, help="affine-independence threshold (default 1e-8)")
    p.add_argument("--pair-tol", type=float, help="extension distance tolerance (default 1e-9)")
    p.add_argument("--trials", type=int, help="RANSAC trials (default 64)")
    p.add_argument("--quorum", type=float, help="consensus quorum in (0.5, 1] (default 0.7)")
    p.add_argument("--workers", type=int, help="threads for scoring RANSAC trials (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="isorecover", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write synthetic correspondences and a ground-truth sidecar")
    _add_common(g)
    g.add_argument("--out", "-o", type=Path, help="correspondence file (JSON Lines)")
    g.add_argument("--truth", type=Path, help="sidecar path (default: <out>.truth.json)")
    g.add_argument("--d", "-d", type=int, help="dimension (default 3)")
    g.add_argument("--n", "-n", type=int, help="number of pairs (default 1000)")
    g.add_argument("--measure", choices=["gaussian", "uniform-box", "gaussian-mixture", "hyperplane-supported"])
    g.add_argument("--corruption", choices=["none", "point-fraction", "slab"])
    g.add_argument("--epsilon", type=float, help="corrupted fraction for point-fraction (max 0.3)")
    g.add_argument("--thickness", type=float, help="slab thickness")
    g.add_argument("--slab-offset", type=float)
    g.add_argument("--displacement", type=float, help="displacement radius of corrupted images")
    g.add_argument("--distortion", choices=["none", "quadratic", "scale"],
                   help="replace the isometry by a non-isometric map (negative controls)")

    r = sub.add_parser("recover", help="print the recovered isometry as JSON")
    _add_common(r)
    _add_recovery(r)
    r.add_argument("input", type=Path)
    r.add_argument("--method", choices=["robust", "oracle"])

    c = sub.add_parser("certify", help="write a certification report")
    _add_common(c)
    _add_recovery(c)
    c.add_argument("input", type=Path)
    c.add_argument("--out", "-o", type=Path, help="report path (default: stdout)")
    c.add_argument("--residuals", type=Path, help="optional per-point CSV: index,residual,inlier")

    t = sub.add_parser("trilaterate", help="locate a point from anchors and distances")
    _add_common(t)
    t.add_argument("input", type=Path, help='JSON {"anchors": [[...], ...], "distances": [...]}')
    t.add_argument("--res-tol", type=float)

    e = sub.add_parser("extend", help="extend a labelled simplex to a global isometry")
    _add_common(e)
    e.add_argument("input", type=Path, help='JSON {"source": [[...], ...], "images": [[...], ...]}')
    e.add_argument("--rank-rtol", type=float)
    e.add_argument("--pair-tol", type=float)
    return parser


GENERATE_DEFAULTS = dict(seed=0, d=3, n=1000, measure="gaussian", corruption="none", epsilon=0.0,
                         thickness=0.0, slab_offset=0.0, displacement=1.0, distortion="none",
                         out=None, truth=None)
RECOVERY_DEFAULTS = dict(seed=0, tau=1e-6, rank_rtol=1e-8, pair_tol=1e-9, trials=64, quorum=0.7,
                         workers=1, method="robust", out=None, residuals=None)
OTHER_DEFAULTS = dict(seed=0, res_tol=1e-8, rank_rtol=1e-8, pair_tol=1e-9)


def _resolve(args) -> dict:
    """Merge built-in defaults < config file < explicit flags."""
    defaults = {"generate": GENERATE_DEFAULTS, "recover": RECOVERY_DEFAULTS,
                "certify": RECOVERY_DEFAULTS}.get(args.command, OTHER_DEFAULTS)
    opts = dict(defaults)
    if args.config is not None:
        try:
            cfg = json.loads(args.config.read_text())
        except OSError as exc:
            raise InputError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        for key, value in cfg.items():
            key = key.replace("-", "_")
            if key not in defaults:
                raise ConfigError(f"unknown config key {key!r} for {args.command}")
            opts[key] = value
    for key, value in vars(args).items():
        if value is not None and key not in ("command", "config"):
            opts[key] = value
    for key in ("out", "truth", "residuals"):
        if opts.get(key) is not None:
            opts[key] = Path(opts[key])
    return opts


def _recovery_config(o) -> RecoveryConfig:
    try:
        return RecoveryConfig(rank_rtol=float(o["rank_rtol"]), pair_tol=float(o["pair_tol"]), tau=float(o["tau"]),
                              ransac_trials=int(o["trials"]), consensus_quorum=float(o["quorum"]),
                              seed=int(o["seed"]), workers=int(o["workers"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _default_measure(kind: str, d: int, seed: int) -> MeasureModel:
    if kind == "gaussian":
        return MeasureModel.gaussian(d, seed=seed)
    if kind == "uniform-box":
        return MeasureModel.uniform_box(-np.ones(d), np.ones(d), seed=seed)
    if kind == "gaussian-mixture":
        means = np.zeros((2, d))
        means[0, 0], means[1, 0] = -2.0, 2.0
        return MeasureModel.gaussian_mixture([0.5, 0.5], means, seed=seed)
    return MeasureModel.hyperplane(np.eye(d)[-1], offset=0.0, seed=seed)


def cmd_generate(o) -> int:
    try:
        d, n, seed = int(o["d"]), int(o["n"]), int(o["seed"])
        eps = float(o["epsilon"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if o["out"] is None:
        raise ConfigError("generate needs --out")
    if not 0.0 <= eps <= MAX_EPSILON:
        raise ConfigError(f"epsilon must lie in [0, {MAX_EPSILON}], got {eps}")
    if eps > 0 and o["corruption"] != "point-fraction":
        raise ConfigError("--epsilon only applies to --corruption point-fraction")
    if n < 0:
        raise ConfigError("n must be non-negative")
    try:
        measure = _default_measure(o["measure"], d, seed)
        base = random_isometry(d, substream(seed, STREAM_BASE_MAP))
        cmap = CorruptedMap(
            base, corruption=o["corruption"], epsilon=eps,
            normal=np.eye(d)[0] if o["corruption"] == "slab" else None,
            offset=float(o["slab_offset"]), thickness=float(o["thickness"]),
            displacement_scale=float(o["displacement"]), seed=seed,
        )
        cs, mask = make_correspondences(measure, cmap, n, return_mask=True)
    except (ValueError, DimensionError, TypeError) as exc:
        raise ConfigError(str(exc)) from None

    distortion = o["distortion"]
    if distortion != "none" and n > 0:
        Y = quadratic_images(cs.X) if distortion == "quadratic" else scaled_images(cs.X, 2.0)
        cs = CorrespondenceSet(cs.X, Y)
        mask = np.ones(n, dtype=bool)

    truth = {
        "isometry": None if distortion != "none" else base.to_dict(),
        "distortion": distortion,
        "measure": measure.to_dict(),
        "map": cmap.to_dict(),
        "n": n,
        "corrupted": [int(i) for i in np.flatnonzero(mask)],
    }
    truth_path = o["truth"] or o["out"].with_name(o["out"].name + ".truth.json")
    try:
        cs.save(o["out"])
        truth_path.write_text(jsonio.dumps(truth, indent=2) + "\n")
    except OSError as exc:
        raise InputError(f"cannot write output: {exc}") from None
    print(f"wrote {n} pairs to {o['out']} (ground truth in {truth_path})", file=sys.stderr)
    return EXIT_OK


def _load_correspondences(path: Path) -> CorrespondenceSet:
    try:
        return CorrespondenceSet.load(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except CorrespondenceFormatError as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_recover(o) -> int:
    cfg = _recovery_config(o)
    cs = _load_correspondences(o["input"])
    if o["method"] == "oracle":
        H = recover_oracle(cs, cfg)
    else:
        H, _ = recover_robust(cs, cfg)
    print(H.to_json())
    return EXIT_OK


def cmd_certify(o) -> int:
    cfg = _recovery_config(o)
    cs = _load_correspondences(o["input"])
    report = certify(cs, cfg)
    text = report.to_json(indent=2) + "\n"
    try:
        if o["out"] is None:
            sys.stdout.write(text)
        else:
            o["out"].write_text(text)
        if o["residuals"] is not None and report.recovered is not None:
            write_residual_csv(o["residuals"], report.recovered, cs, cfg.tau)
    except OSError as exc:
        raise InputError(f"cannot write output: {exc}") from None
    return EXIT_OK


def _load_json(path: Path) -> dict:
    try:
        obj = json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise InputError(f"{path}: expected a JSON object")
    return obj


def _array_field(obj, key, path, ndim):
    try:
        a = np.asarray(obj[key], dtype=np.float64)
    except (KeyError, TypeError, ValueError):
        raise InputError(f"{path}: missing or non-numeric field {key!r}") from None
    if a.ndim != ndim or a.size == 0 or not np.all(np.isfinite(a)):
        raise InputError(f"{path}: field {key!r} must be a finite {ndim}-D array")
    return a


def cmd_trilaterate(o) -> int:
    obj = _load_json(o["input"])
    anchors = _array_field(obj, "anchors", o["input"], 2)
    dists = _array_field(obj, "distances", o["input"], 1)
    if anchors.shape[0] != anchors.shape[1] + 1 or dists.shape != (anchors.shape[0],):
        raise InputError(f"{o['input']}: need d+1 anchors in R^d and one distance per anchor")
    if np.any(dists < 0):
        raise InputError(f"{o['input']}: distances must be non-negative")
    z = locate(anchors, dists, res_tol=float(o["res_tol"]))
    print(jsonio.dumps({"point": z}))
    return EXIT_OK


def cmd_extend(o) -> int:
    obj = _load_json(o["input"])
    src = _array_field(obj, "source", o["input"], 2)
    img = _array_field(obj, "images", o["input"], 2)
    try:
        ls = LabeledSimplex(src, img)
    except (DimensionError, ValueError) as exc:
        raise InputError(f"{o['input']}: {exc}") from None
    H, info = extend_finite_isometry(ls, rtol=float(o["rank_rtol"]), pair_tol=float(o["pair_tol"]), full_output=True)
    print(H.to_json())
    print(f"orthogonality repair: {info['repair']:.3g}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "recover": cmd_recover, "certify": cmd_certify,
            "trilaterate": cmd_trilaterate, "extend": cmd_extend}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        opts = _resolve(args)
        try:
            seed = int(opts["seed"])
        except (TypeError, ValueError):
            raise ConfigError(f"seed must be an integer, got {opts['seed']!r}") from None
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        return COMMANDS[args.command](opts)
    except ConfigError as exc:
        print(f"isorecover: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"isorecover: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RecoveryError as exc:
        print(f"isorecover: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MATH
    except ValueError as exc:
        print(f"isorecover: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
