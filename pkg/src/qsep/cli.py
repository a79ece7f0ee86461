"""``qsep`` command line: calibrate, gen, train, eval, reproduce.

Exit codes: 0 success, 2 invalid config, 3 degenerate data, 4 plan mismatch.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, ann, harness
from . import experiment as ex
from . import io
from . import measurement as ms

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_PLAN = 0, 2, 3, 4

# flag defaults; a --config file overrides these and explicit flags override both
DEFAULTS = {
    "out": ".",
    "seed": ex.DEFAULT_SEED,
    "shots": ms.DEFAULT_SHOTS,
    "protocol": "linear",
    "theory": False,
    "plan": None,
    "source": None,
    "matrices": False,
    "purity": ex.PAPER_PURITY,
    "concurrence": ex.PAPER_CONCURRENCE,
    "data": None,
    "model": None,
    "arch": "linear",
    "nne": None,
    "epochs": ann.TrainConfig.epochs,
    "lr": ann.TrainConfig.learning_rate,
    "threshold": ann.TrainConfig.threshold,
    "figure": "all",
}


class ConfigError(ValueError):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with any of the flags below as keys")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help=f"master seed (default {ex.DEFAULT_SEED})")

    p = argparse.ArgumentParser(prog="qsep", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", parents=[common], argument_default=argparse.SUPPRESS,
                       help="fit the source noise model to purity/concurrence targets")
    c.add_argument("--purity", type=float)
    c.add_argument("--concurrence", type=float)

    g = sub.add_parser("gen", parents=[common], argument_default=argparse.SUPPRESS,
                       help="generate train/test datasets")
    g.add_argument("--protocol", choices=("linear", "nonlinear"))
    g.add_argument("--theory", action="store_true", help="noiseless exact features and labels")
    g.add_argument("--shots", type=int)
    g.add_argument("--plan", help=f"feature plan name ({', '.join(ms.PLANS)})")
    g.add_argument("--source", help="source model JSON (default: calibrate to the stock targets)")
    g.add_argument("--matrices", action="store_true", help="also dump reconstructed matrices")

    t = sub.add_parser("train", parents=[common], argument_default=argparse.SUPPRESS,
                       help="train a classifier on a dataset CSV")
    t.add_argument("--data", help="training CSV")
    t.add_argument("--arch", choices=("linear", "mlp"))
    t.add_argument("--nne", type=int, help="hidden neurons for --arch mlp (default 10)")
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--threshold", type=float)

    e = sub.add_parser("eval", parents=[common], argument_default=argparse.SUPPRESS,
                       help="evaluate a model JSON on a dataset CSV")
    e.add_argument("--model")
    e.add_argument("--data", help="test CSV")

    r = sub.add_parser("reproduce", parents=[common], argument_default=argparse.SUPPRESS,
                       help="rerun a figure pipeline and write its tables and plots")
    r.add_argument("figure", nargs="?", choices=(*harness.FIGURES, "all"))
    r.add_argument("--shots", type=int)
    r.add_argument("--source")
    return p


def resolve(args: argparse.Namespace) -> dict:
    """Merge built-in defaults, the --config file and explicit flags, in that order."""
    cfg = dict(DEFAULTS)
    given = vars(args)
    if given.get("config"):
        try:
            loaded = json.loads(Path(given["config"]).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {given['config']}: {err}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    cfg.update({k: v for k, v in given.items() if k != "config"})
    cfg["command"] = given["command"]
    return cfg


def provenance(cfg: dict, **extra) -> dict:
    return {
        "command": cfg["command"],
        "config": {k: v for k, v in sorted(cfg.items()) if k != "command"},
        "qsep_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        **extra,
    }


def _load_source(path):
    if path is None:
        return None
    try:
        d = io.read_json(path)
        return ex.SourceModel.from_dict(d)
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read source model {path}: {err}") from None


def _out(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_calibrate(cfg) -> int:
    cal = ex.calibrate_source(float(cfg["purity"]), float(cfg["concurrence"]))
    out = _out(cfg)
    io.write_json(out / "source.json", cal.to_dict())
    io.write_json(out / "provenance.json", provenance(cfg))
    print(f"v={cal.model.v:.6f} d={cal.model.d:.6f} b={cal.model.b:.6f} "
          f"purity={cal.purity:.6f} concurrence={cal.concurrence:.6f}")
    return EXIT_OK


def cmd_gen(cfg) -> int:
    kind = cfg["protocol"]
    kw = {"seed": int(cfg["seed"]), "shots": int(cfg["shots"])}
    if cfg["plan"] is not None:
        kw["plan"] = cfg["plan"]
    spec = ex.ProtocolSpec.linear(**kw) if kind == "linear" else ex.ProtocolSpec.nonlinear(**kw)
    out = _out(cfg)
    if cfg["theory"]:
        m, info = None, None
        result = ex.gen_theory_dataset(spec, "train")
        train, test = result if kind == "nonlinear" else (result, ex.gen_theory_dataset(spec, "test"))
    else:
        m = _load_source(cfg["source"])
        m, info = harness.resolve_source(m)
        if kind == "linear":
            train = ex.gen_linear_dataset(spec, m, "train")
            test = ex.gen_linear_dataset(spec, m, "test")
        else:
            train, test = ex.gen_nonlinear_dataset(spec, m)
    io.write_dataset(train, out / "train.csv", matrices=cfg["matrices"])
    io.write_dataset(test, out / "test.csv", matrices=cfg["matrices"])
    io.write_json(out / "provenance.json",
                  provenance(cfg, protocol=spec.to_dict(), source=info))
    print(f"train: {len(train)} rows, test: {len(test)} rows -> {out}")
    return EXIT_OK


def cmd_train(cfg) -> int:
    if cfg["data"] is None:
        raise ConfigError("--data is required")
    arch = cfg["arch"]
    nne = cfg["nne"]
    if arch == "linear":
        if nne not in (None, 0):
            raise ConfigError("--nne applies to --arch mlp only")
        nne = 0
    else:
        nne = 10 if nne is None else int(nne)
        if nne < 1:
            raise ConfigError("--arch mlp needs --nne >= 1")
    ds = _read_dataset(cfg["data"])
    tc = ann.TrainConfig(learning_rate=float(cfg["lr"]), epochs=int(cfg["epochs"]),
                         seed=int(cfg["seed"]), threshold=float(cfg["threshold"]))
    model, report = ann.train_dataset(ds, nne, tc)
    out = _out(cfg)
    io.save_model(out / "model.json", model, plan=ds.plan.to_dict(), threshold=tc.threshold,
                  train_config=tc.to_dict(), dataset_provenance=ds.provenance)
    io.write_json(out / "train_report.json", report.to_dict())
    io.write_json(out / "provenance.json", provenance(cfg, dataset=ds.provenance))
    print(f"{harness.arch_name(nne)}: final loss {report.losses[-1]:.5f}, "
          f"training match rate {report.train_match_rate:.4f}")
    return EXIT_OK


def _read_dataset(path):
    try:
        return io.read_dataset(path)
    except OSError as err:
        raise ConfigError(f"cannot read dataset {path}: {err}") from None


def cmd_eval(cfg) -> int:
    if cfg["model"] is None or cfg["data"] is None:
        raise ConfigError("--model and --data are required")
    try:
        model, meta = io.load_model(cfg["model"])
    except (OSError, KeyError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read model {cfg['model']}: {err}") from None
    ds = _read_dataset(cfg["data"])
    report = harness.evaluate_model(model, ds, meta["plan"], float(meta.get("threshold", 0.5)))
    out = _out(cfg)
    io.write_json(out / "eval_report.json", report.to_dict())
    harness.write_mismatches(report, out / "mismatches.csv")
    harness.write_per_state(report, out / "per_state.csv")
    io.write_json(out / "provenance.json", provenance(cfg, dataset=ds.provenance))
    print(f"overall match rate {report.overall:.4f} "
          f"(mean per state {report.mean_per_state:.4f}), {len(report.mismatches)} mismatches")
    for name, row in report.baselines.items():
        print(f"  baseline {name}: {row['overall_match_rate']:.4f}")
    return EXIT_OK


def cmd_reproduce(cfg) -> int:
    figs = harness.FIGURES if cfg["figure"] == "all" else (cfg["figure"],)
    source = _load_source(cfg["source"])
    out = _out(cfg)
    prov = provenance(cfg)
    results = harness.reproduce(figs, out, int(cfg["seed"]), int(cfg["shots"]), source,
                                provenance=prov)
    io.write_json(out / "provenance.json", prov)
    print(json.dumps(results, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "calibrate": cmd_calibrate,
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "reproduce": cmd_reproduce,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[cfg["command"]](cfg)
    except ann.DegenerateDataError as err:
        print(f"error: degenerate data: {err}", file=sys.stderr)
        return EXIT_DEGENERATE
    except harness.PlanMismatchError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PLAN
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
