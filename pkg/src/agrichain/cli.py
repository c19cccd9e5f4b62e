"""Command-line entry point: ``agrichain simulate | inspect | calibrate | preset <name>``.

Exit codes: 0 success, 1 configuration error, 2 validation or chain failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import fields

from .chain import Ledger, first_invalid_height
from .config import ExperimentConfig
from .errors import AgrichainError, ConfigError, LedgerParseError
from .experiments import PRESET_DEFAULTS, PRESETS, noisy_rf_samples, run_experiment
from .kinetics import fit_rf_model

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVALID = 2

_BOOL_TEXT = {"1": True, "true": True, "yes": True, "0": False, "false": False, "no": False}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with configuration fields")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--out", dest="out_dir", help="output directory")
    for f in fields(ExperimentConfig):
        if f.name in ("seed", "out_dir", "extra"):
            continue
        kind = {"int": int, "float": float, "str": str, "bool": _parse_bool}[str(f.type)]
        parser.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=kind, default=None,
                            metavar=str(f.type).upper())


def _parse_bool(text: str) -> bool:
    try:
        return _BOOL_TEXT[text.lower()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agrichain", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the mining pipeline and export ledgers")
    _add_config_flags(p)

    p = sub.add_parser("preset", help="run a named experiment preset")
    p.add_argument("name", help=f"one of: {', '.join(PRESETS)}")
    _add_config_flags(p)

    p = sub.add_parser("calibrate", help="fit the RF model to (concentration, rf) samples")
    p.add_argument("--samples", help="CSV with concentration,rf columns (default: synthetic samples)")
    _add_config_flags(p)

    p = sub.add_parser("inspect", help="dump and validate an exported ledger")
    p.add_argument("path")
    return parser


def resolve_config(args: argparse.Namespace, preset: str | None = None, environ=None) -> ExperimentConfig:
    """Defaults, then preset settings, config file, environment, and finally flags."""
    data = ExperimentConfig().to_dict()
    data.update(PRESET_DEFAULTS.get(preset or "", {}))
    cfg = ExperimentConfig.from_dict(data)
    if getattr(args, "config", None):
        try:
            file_cfg = ExperimentConfig.load(args.config)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc}") from exc
        with open(args.config) as fh:
            given = json.load(fh)
        cfg = cfg.replace(**{k: getattr(file_cfg, k) for k in given})
    cfg = cfg.with_env(environ)
    flags = {f.name: getattr(args, f.name) for f in fields(ExperimentConfig)
             if getattr(args, f.name, None) is not None}
    return cfg.replace(**flags) if flags else cfg


def _block_json(block, network: str) -> dict:
    out = {"height": block.index, "hash": block.hash.hex(), "prev_hash": block.prev_hash.hex(),
           "miner": block.miner_id, "timestamp": block.timestamp, "nonce": block.nonce}
    try:
        data = block.data()
    except (ValueError, TypeError):
        out["payload"] = "<undecodable>"
        return out
    if block.index == 0:
        out["genesis"] = {k: data[k] for k in ("cr0", "difficulty", "hash", "suite") if k in data}
    elif network == "FN":
        out["color_tokens"] = dict(zip(_farm_ids(data), data.get("tokens", [])))
        out["credits"] = dict(zip(_farm_ids(data), data.get("credits", [])))
        out["excluded"] = data.get("excluded", [])
    else:
        out["entries"] = sorted(data.get("entries", {}))
        out["miner_public_key"] = data.get("miner_public_key", b"").hex()
    return out


def _farm_ids(data: dict) -> list[str]:
    n = len(data.get("tokens", []))
    return [f"F{i:02d}" for i in range(n)]


def cmd_inspect(path: str, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        ledger = Ledger.load(path)
    except (OSError, LedgerParseError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    ids = None
    try:
        ids = ledger.blocks[0].data().get("farm_ids")
    except (ValueError, TypeError, AttributeError):
        pass
    for block in ledger:
        record = _block_json(block, ledger.network)
        if ids and ledger.network == "FN" and block.index > 0:
            for key in ("color_tokens", "credits"):
                if key in record:
                    record[key] = dict(zip(ids, record[key].values()))
        print(json.dumps(record, sort_keys=True), file=stdout)
    bad = first_invalid_height(ledger)
    if bad is None:
        print("chain valid", file=stdout)
        return EXIT_OK
    print(f"chain INVALID at height {bad}", file=stdout)
    return EXIT_INVALID


def cmd_calibrate(cfg: ExperimentConfig, samples_path: str | None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    if samples_path:
        with open(samples_path, newline="") as fh:
            reader = csv.DictReader(fh)
            samples = [(float(r["concentration"]), float(r["rf"])) for r in reader]
    else:
        samples = noisy_rf_samples(cfg.sensor_params().k_D, cfg.seed)
    fit = fit_rf_model(samples)
    print(json.dumps({"k_D_hat": fit.k_D_hat, "residual_sse": fit.residual_sse,
                      "active_region": list(fit.active_region), "iterations": fit.n_iter,
                      "samples": len(samples)}, indent=2), file=stdout)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "inspect":
            return cmd_inspect(args.path)
        preset = args.name if args.command == "preset" else None
        if preset is not None and preset not in PRESETS:
            raise ConfigError("preset", f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        cfg = resolve_config(args, preset)
        if args.command == "calibrate":
            return cmd_calibrate(cfg, args.samples)
        manifest = run_experiment(cfg, preset or "simulate", cfg.out_dir)
        print(json.dumps({"out": cfg.out_dir, "summary": manifest["summary"],
                          "wall_time_s": manifest["wall_time_s"]}, indent=2, default=str))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AgrichainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
