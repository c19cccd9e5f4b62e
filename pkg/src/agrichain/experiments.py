"""Experiment presets, one per result figure, each writing CSVs and a manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .bayes import PriorMatrix, deviation_from_class, run_sbu, sbu_step, write_convergence_csv
from .config import ExperimentConfig
from .credit import write_credit_history_csv
from .field import (
    FarmConfig,
    gateway_likelihood,
    generate_farm_concentrations,
    rng_stream,
    sample_frequency_table,
)
from .kinetics import (
    CLASS_LABELS,
    ResponseClass,
    classify_array,
    concentration_for_rf,
    equilibrium_rf,
    fit_rf_model,
    response_factor_array,
    simulate_traces,
    true_class,
    write_traces_csv,
)
from .metrics import accuracy, centralized_classify, mse, write_scores_csv
from .network import STREAM_SENSORS, World
from .svg import line_chart

RF_CURVE_CONCENTRATIONS = (1.0, 5.0, 10.0, 20.0, 50.0)
SOPT_MAX_STEPS = 200
SOPT_MSE_TARGET = 1e-3
TRACE_SIGMAS = (0.5, 1.0, 2.0)
TRACE_TARGET = 0.98
CREDIT_ALPHAS = (0.05, 0.1, 0.2)

# settings each preset starts from; a config file, env vars or flags override them
PRESET_DEFAULTS: dict[str, dict] = {
    "rf-curves": {},
    "rf-fit": {},
    "sbu-deviation": {"tw": 1},
    "sopt-search": {"inter_low": 20.0, "inter_high": 50.0, "intra_sigma": 1.0},
    "color-tokens": {"n_farms": 10},
    "accuracy-compare": {"drift": 5.0, "intra_sigma": 2.0},
    "traceability": {},
    "credits": {"drift": 5.0, "intra_sigma": 2.0},
}


# -- shared building blocks -------------------------------------------------

def make_farms(cfg: ExperimentConfig, seed: int | None = None) -> list[FarmConfig]:
    return generate_farm_concentrations(
        cfg.seed if seed is None else seed, cfg.n_farms, cfg.inter_range, cfg.intra_sigma,
        cfg.sensors_per_gateway,
    )


def make_world(cfg: ExperimentConfig, seed: int | None = None, farms=None) -> World:
    seed = cfg.seed if seed is None else seed
    return World.build(
        make_farms(cfg, seed) if farms is None else farms, cfg.sensor_params(), seed,
        fn_count=cfg.fn_count, cr0=cfg.cr0, difficulty=cfg.difficulty, tw=cfg.tw, alpha=cfg.alpha,
        drift=cfg.drift, likelihood=cfg.likelihood, granularity=cfg.granularity,
        compliance=cfg.compliance, p_not_e_threshold=cfg.p_not_e_threshold,
        trace_threshold=cfg.trace_threshold,
    )


def true_codes(farms, k_D: float) -> np.ndarray:
    return np.array([true_class(f.mean_conc, k_D).code for f in farms])


def round_scores(world: World) -> list[dict]:
    """Per round: BC-IoNT (posterior argmax) vs centralized (window argmax) scores."""
    truth = true_codes(world.farms, world.params.k_D)
    rows = []
    for r in world.history:
        bc = r.posterior.argmax_classes() + 1
        ce = centralized_classify(r.table)
        rows.append({"round": r.T, "bc_mse": mse(truth, bc), "bc_accuracy": accuracy(truth, bc),
                     "central_mse": mse(truth, ce), "central_accuracy": accuracy(truth, ce)})
    return rows


def sopt_trajectory(cfg: ExperimentConfig, seed: int, max_steps: int = SOPT_MAX_STEPS) -> tuple[int | None, list[float]]:
    """Updates (each over a ``tw``-sweep window) until MSE <= 1e-3, plus the MSE trail.

    Farms are stationary; the scored prediction is the posterior argmax.
    """
    farms = make_farms(cfg, seed)
    params = cfg.sensor_params()
    truth = true_codes(farms, params.k_D)
    prior = PriorMatrix.uniform(len(farms))
    trail = []
    for step in range(1, max_steps + 1):
        table = sample_frequency_table(farms, params, seed, cfg.tw, keys=(STREAM_SENSORS, step))
        posterior, prior = sbu_step(prior, gateway_likelihood(table, cfg.likelihood))
        trail.append(mse(truth, posterior.argmax_classes() + 1))
        if trail[-1] <= SOPT_MSE_TARGET:
            return step, trail
    return None, trail


def class_c_deviation(cfg: ExperimentConfig, seed: int, updates: int) -> tuple[np.ndarray, list[float]]:
    """Mean P(not C) over class-C farms after each of ``updates`` stationary updates."""
    params = cfg.sensor_params()
    lo, hi = concentration_for_rf(0.4, params.k_D), concentration_for_rf(0.6, params.k_D)
    # keep a margin from the class edges so every farm really is class C
    margin = 0.1 * (hi - lo)
    c_cfg = cfg.replace(inter_low=float(lo + margin), inter_high=float(hi - margin))
    farms = make_farms(c_cfg, seed)
    tables = [
        gateway_likelihood(sample_frequency_table(farms, params, seed, cfg.tw, keys=(STREAM_SENSORS, s)),
                           cfg.likelihood)
        for s in range(1, updates + 1)
    ]
    prior = PriorMatrix.uniform(len(farms))
    curve = []
    for lik in tables:
        posterior, prior = sbu_step(prior, lik)
        curve.append(float(deviation_from_class(posterior, ResponseClass.C).mean()))
    result = run_sbu(PriorMatrix.uniform(len(farms)), tables, cfg.sbu_epsilon)
    return np.array(curve), result.distances


def first_round_reaching(fractions, target: float) -> int | None:
    for t, frac in enumerate(fractions, start=1):
        if frac >= target:
            return t
    return None


# -- presets ----------------------------------------------------------------

def preset_rf_curves(cfg: ExperimentConfig, out: Path) -> dict:
    """Sensor response over time and the RF curve (response and RF-vs-concentration plots)."""
    params = cfg.sensor_params()
    duration = 5.0 / params.k_d
    traces = []
    series = {}
    with open(out / "rf_traces.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["concentration", "time_s", "response_ru", "phase"])
        for conc in RF_CURVE_CONCENTRATIONS:
            assoc, dis = simulate_traces(params, conc, duration, dt=duration / 500)
            traces.append((conc, assoc, dis))
            for trace in (assoc, dis):
                for row in trace.rows():
                    writer.writerow([conc, *row])
            series[f"[A]={conc:g}"] = (list(assoc.times + dis.times), list(assoc.values + dis.values))
    conc = np.linspace(0.0, 10 * params.k_D, 201)
    rf_stepped = response_factor_array(params, conc)
    rf_eq = equilibrium_rf(conc, params.k_D)
    with open(out / "rf_curve.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["concentration", "rf", "rf_equilibrium", "class"])
        for c, r, e, k in zip(conc, rf_stepped, rf_eq, classify_array(rf_stepped)):
            writer.writerow([c, r, e, CLASS_LABELS[k]])
    if cfg.svg:
        line_chart(out / "rf_traces.svg", series, "Sensor response", "time (s)", "response (RU)")
        line_chart(out / "rf_curve.svg", {"RF": (conc.tolist(), rf_stepped.tolist())},
                   "Response factor", "concentration", "RF")
    return {"k_D": params.k_D, "rf_at_k_D": float(response_factor_array(params, np.array([params.k_D]))[0])}


def preset_rf_fit(cfg: ExperimentConfig, out: Path) -> dict:
    """Recover k_D from noisy (concentration, RF) samples (RF-model calibration)."""
    params = cfg.sensor_params()
    samples = noisy_rf_samples(params.k_D, cfg.seed)
    fit = fit_rf_model(samples)
    with open(out / "rf_fit_samples.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["concentration", "rf_observed", "rf_fitted"])
        for c, r in samples:
            writer.writerow([c, r, float(fit.predict(c))])
    with open(out / "rf_fit.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k_D_true", "k_D_hat", "residual_sse", "active_lo", "active_hi", "iterations"])
        writer.writerow([params.k_D, fit.k_D_hat, fit.residual_sse, *fit.active_region, fit.n_iter])
    return {"k_D_true": params.k_D, "k_D_hat": fit.k_D_hat,
            "relative_error": abs(fit.k_D_hat - params.k_D) / params.k_D}


def noisy_rf_samples(k_D: float, seed: int, n: int = 50, noise: float = 0.01) -> list[tuple[float, float]]:
    """``n`` samples spread log-uniformly over the active region, Gaussian RF noise."""
    rng = rng_stream(seed, 4)
    lo, hi = k_D / 20, k_D * 20
    conc = np.exp(rng.uniform(np.log(lo), np.log(hi), n))
    rf = equilibrium_rf(conc, k_D) + rng.normal(0.0, noise, n)
    return list(zip(conc.tolist(), rf.tolist()))


def preset_sbu_deviation(cfg: ExperimentConfig, out: Path) -> dict:
    """Posterior deviation from class C over successive updates for class-C farms."""
    curve, distances = class_c_deviation(cfg, cfg.seed, cfg.rounds)
    with open(out / "sbu_deviation.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "mean_p_not_c"])
        writer.writerows(enumerate(curve.tolist(), start=1))
    write_convergence_csv(out / "sbu_convergence.csv", distances)
    if cfg.svg:
        steps = list(range(1, len(curve) + 1))
        line_chart(out / "sbu_deviation.svg", {"P(not C)": (steps, curve.tolist())},
                   "Deviation from class C", "update", "probability")
    return {"final_deviation": float(curve[-1]), "steps_to_epsilon": len(distances)}


def preset_sopt_search(cfg: ExperimentConfig, out: Path) -> dict:
    """Number of updates needed before every farm is classified correctly (MSE <= 1e-3)."""
    rows, trails = [], {}
    for seed in range(cfg.seed, cfg.seed + cfg.seeds):
        steps, trail = sopt_trajectory(cfg, seed)
        rows.append((seed, steps if steps is not None else ""))
        trails[seed] = trail
    with open(out / "sopt.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "s_opt"])
        writer.writerows(rows)
    with open(out / "sopt_mse.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "step", "mse"])
        for seed, trail in trails.items():
            writer.writerows((seed, s, m) for s, m in enumerate(trail, start=1))
    found = [s for _, s in rows if s != ""]
    if cfg.svg:
        line_chart(out / "sopt_mse.svg",
                   {f"seed {s}": (list(range(1, len(t) + 1)), t) for s, t in trails.items()},
                   "MSE per update", "update", "MSE")
    return {"s_opt": [s if s != "" else None for _, s in rows],
            "median": float(np.median(found)) if found else None}


def preset_color_tokens(cfg: ExperimentConfig, out: Path) -> dict:
    """Colour tokens per farm and round, read back from the FN ledger."""
    world = make_world(cfg)
    world.run(cfg.rounds)
    with open(out / "color_tokens.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "farm_id", *CLASS_LABELS, "dominant"])
        for block in list(world.fn_ledger)[1:]:
            data = block.data()
            for fid, seg in zip(world.farm_ids, data["tokens"]):
                writer.writerow([data["round"], fid, *seg, CLASS_LABELS[int(np.argmax(seg))]])
    world.fn_ledger.export(out / "fn_ledger.txt")
    world.tn_ledger.export(out / "tn_ledger.txt")
    return {"rounds": cfg.rounds, "farms": len(world.farms)}


def accuracy_runs(cfg: ExperimentConfig) -> list[list[dict]]:
    runs = []
    for seed in range(cfg.seed, cfg.seed + cfg.seeds):
        world = make_world(cfg, seed)
        world.run(cfg.rounds)
        runs.append(round_scores(world))
    return runs


def preset_accuracy_compare(cfg: ExperimentConfig, out: Path) -> dict:
    """BC-IoNT posterior vs a centralized per-window majority vote (accuracy comparison)."""
    runs = accuracy_runs(cfg)
    rows = []
    for t in range(cfg.rounds):
        for method in ("bc", "central"):
            rows.append((t + 1, "bc-iont" if method == "bc" else "centralized",
                         float(np.mean([r[t][f"{method}_mse"] for r in runs])),
                         float(np.mean([r[t][f"{method}_accuracy"] for r in runs]))))
    write_scores_csv(out / "scores.csv", rows)
    if cfg.svg:
        xs = list(range(1, cfg.rounds + 1))
        line_chart(out / "accuracy.svg",
                   {"BC-IoNT": (xs, [r[3] for r in rows if r[1] == "bc-iont"]),
                    "centralized": (xs, [r[3] for r in rows if r[1] == "centralized"])},
                   "Detection accuracy", "round", "accuracy (%)")
    bc = float(np.mean([x["bc_accuracy"] for r in runs for x in r]))
    ce = float(np.mean([x["central_accuracy"] for r in runs for x in r]))
    return {"bc_accuracy": bc, "central_accuracy": ce}


def traceability_fractions(cfg: ExperimentConfig, sigma: float) -> np.ndarray:
    """Compliant fraction per (seed, round) at intra-farm spread ``sigma``."""
    out = []
    for seed in range(cfg.seed, cfg.seed + cfg.seeds):
        world = make_world(cfg.replace(intra_sigma=sigma), seed)
        out.append([r.compliant.mean() for r in world.run(cfg.rounds)])
    return np.array(out)


def preset_traceability(cfg: ExperimentConfig, out: Path) -> dict:
    """Share of farms whose declared and detected token amounts agree, per round."""
    summary = {}
    series = {}
    with open(out / "traceability.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sigma", "round", "compliant_fraction"])
        for sigma in TRACE_SIGMAS:
            mean = traceability_fractions(cfg, sigma).mean(axis=0)
            writer.writerows((sigma, t, f) for t, f in enumerate(mean.tolist(), start=1))
            summary[str(sigma)] = {"final": float(mean[-1]),
                                   "first_round_98": first_round_reaching(mean, TRACE_TARGET)}
            series[f"sigma={sigma:g}"] = (list(range(1, len(mean) + 1)), mean.tolist())
    if cfg.svg:
        line_chart(out / "traceability.svg", series, "Traceability", "round", "compliant fraction")
    return summary


def credit_run(cfg: ExperimentConfig, alpha: float) -> World:
    world = make_world(cfg.replace(alpha=alpha))
    world.run(cfg.rounds)
    return world


def credit_histories(world: World) -> dict[str, list[float]]:
    """Credits per farm for rounds 0..T, read from the FN ledger."""
    hist = {fid: [world.cr0] for fid in world.farm_ids}
    for block in list(world.fn_ledger)[1:]:
        for fid, cr in zip(world.farm_ids, block.data()["credits"]):
            hist[fid].append(cr)
    return hist


def preset_credits(cfg: ExperimentConfig, out: Path) -> dict:
    """Credit trajectories of all farms for several penalty rates alpha."""
    summary = {}
    for alpha in CREDIT_ALPHAS:
        world = credit_run(cfg, alpha)
        path = out / f"credits_alpha_{alpha:g}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["round", "farm_id", "credits", "f_E"])
            f_e = {fid: [0] for fid in world.farm_ids}
            for block in list(world.fn_ledger)[1:]:
                for fid, fe in zip(world.farm_ids, block.data()["f_E"]):
                    f_e[fid].append(fe)
            for fid, credits in credit_histories(world).items():
                writer.writerows((t, fid, c, f_e[fid][t]) for t, c in enumerate(credits))
        final = [h[-1] for h in credit_histories(world).values()]
        summary[str(alpha)] = {"spread": float(max(final) - min(final))}
        if cfg.svg:
            line_chart(out / f"credits_alpha_{alpha:g}.svg",
                       {fid: (list(range(len(h))), h) for fid, h in credit_histories(world).items()},
                       f"Credits, alpha={alpha:g}", "round", "credits")
    return summary


PRESETS: dict[str, Callable[[ExperimentConfig, Path], dict]] = {
    "rf-curves": preset_rf_curves,
    "rf-fit": preset_rf_fit,
    "sbu-deviation": preset_sbu_deviation,
    "sopt-search": preset_sopt_search,
    "color-tokens": preset_color_tokens,
    "accuracy-compare": preset_accuracy_compare,
    "traceability": preset_traceability,
    "credits": preset_credits,
}


# -- full simulation --------------------------------------------------------

def simulate(cfg: ExperimentConfig, out: Path) -> dict:
    """Run the mining pipeline and export ledgers, posterior, credits and scores."""
    world = make_world(cfg)
    world.run(cfg.rounds)
    world.fn_ledger.export(out / "fn_ledger.txt")
    world.tn_ledger.export(out / "tn_ledger.txt")
    last = world.history[-1]
    last.posterior.to_csv(out / "posterior.csv", world.farm_ids)
    last.table.to_csv(out / "frequency.csv")
    f_e = {fid: [0] for fid in world.farm_ids}
    for block in list(world.fn_ledger)[1:]:
        for fid, fe in zip(world.farm_ids, block.data()["f_E"]):
            f_e[fid].append(fe)
    with open(out / "credits.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "farm_id", "credits", "f_E"])
        for fid, credits in credit_histories(world).items():
            writer.writerows((t, fid, c, f_e[fid][t]) for t, c in enumerate(credits))
    scores = round_scores(world)
    write_scores_csv(out / "scores.csv", [
        row for s in scores
        for row in ((s["round"], "bc-iont", s["bc_mse"], s["bc_accuracy"]),
                    (s["round"], "centralized", s["central_mse"], s["central_accuracy"]))
    ])
    return {"rounds": cfg.rounds, "final_bc_accuracy": scores[-1]["bc_accuracy"],
            "final_central_accuracy": scores[-1]["central_accuracy"],
            "excluded": sum(len(r.excluded) for r in world.history)}


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_experiment(cfg: ExperimentConfig, preset: str, out_dir=None) -> dict:
    """Run a preset (or ``simulate``) into ``out_dir`` and write ``manifest.json``."""
    runner = simulate if preset == "simulate" else PRESETS.get(preset)
    if runner is None:
        raise KeyError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    summary = runner(cfg, out)
    wall = time.perf_counter() - start
    outputs = {p.name: _digest(p) for p in sorted(out.iterdir()) if p.is_file() and p.name != "manifest.json"}
    manifest = {
        "preset": preset,
        "seed": cfg.seed,
        "version": __version__,
        "config": cfg.to_dict(),
        "wall_time_s": round(wall, 3),
        "summary": summary,
        "outputs": outputs,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable))
    return manifest


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")
