"""End-to-end runs: directions, sampling, representation, topology, metrics.

Each stage is timed and recorded in ``manifest.json``; a failing stage leaves
earlier outputs in place and is named in the manifest.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path


from lossscape import __version__
from lossscape._io import atomic_write_text, dump_json
from lossscape.config import config_hash, effective_range, render_ini
from lossscape.directions import random_pair, rescale_per_layer, save_directions, top2_eigenvectors
from lossscape.field import load_field, save_field
from lossscape.metrics import hessian_esd, hessian_trace, top_eigenvalues, topo_metrics
from lossscape.models import (
    ConvectionPinnSpec,
    MlpSpec,
    load_theta,
    mlp_accuracy,
    mlp_objective,
    pinn_objective,
    save_theta,
    train,
)
from lossscape.models.analytic import analytic_values
from lossscape.models.pinn import abs_error
from lossscape.sampler import clip_outliers, grid_from_values, sample_landscape, to_field
from lossscape.topology import compute_topology

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("beta", "n_saddles", "n_minima", "avg_persistence", "lambda1", "trace",
                 "final_loss", "abs_error", "flags")
MLP_COLUMNS = ("variant", "seed", "n_saddles", "n_minima", "avg_persistence", "lambda1",
               "trace", "final_loss", "accuracy", "flags")


class PipelineError(RuntimeError):
    def __init__(self, stage, cause, manifest):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.manifest = manifest


@dataclass
class RunManifest:
    config_hash: str
    output_dir: str
    version: str = __version__
    status: str = "running"
    failed_stage: str | None = None
    error: str | None = None
    timings: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "config_hash": self.config_hash,
            "tool_version": self.version,
            "status": self.status,
            "failed_stage": self.failed_stage,
            "error": self.error,
            "timings_s": self.timings,
            "outputs": self.outputs,
        }

    def write(self):
        path = Path(self.output_dir) / "manifest.json"
        atomic_write_text(path, dump_json(self.to_json()))
        return path


def _clean(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def build_model(cfg):
    """``(objective, spec)`` for the configured model; ``(None, None)`` for analytic fields."""
    kind = cfg["model"]
    if kind == "mlp":
        spec = MlpSpec(cfg["mlp_widths"], n_points=cfg["mlp_points"], seed=cfg["data_seed"],
                       loss=cfg["mlp_loss"])
        return mlp_objective(spec), spec
    if kind == "pinn":
        spec = ConvectionPinnSpec(beta=cfg["beta"], net_widths=cfg["pinn_widths"], n_u=cfg["n_u"],
                                  n_f=cfg["n_f"], n_b=cfg["n_b"], seed=cfg["data_seed"],
                                  residual_weight=cfg["residual_weight"])
        return pinn_objective(spec), spec
    return None, None


class _Run:
    def __init__(self, cfg):
        self.cfg = cfg
        self.out = Path(cfg["output_dir"])
        self.manifest = RunManifest(config_hash(cfg), str(self.out))

    def stage(self, name, fn, *args):
        t0 = time.perf_counter()
        try:
            result = fn(*args)
        except Exception as exc:
            self.manifest.timings[name] = round(time.perf_counter() - t0, 6)
            self.manifest.status = "failed"
            self.manifest.failed_stage = name
            self.manifest.error = f"{type(exc).__name__}: {exc}"
            self.manifest.write()
            raise PipelineError(name, exc, self.manifest) from exc
        self.manifest.timings[name] = round(time.perf_counter() - t0, 6)
        return result

    def write(self, name, text):
        path = atomic_write_text(self.out / name, text)
        self._record(path)
        return path

    def _record(self, path):
        rel = str(Path(path).relative_to(self.out))
        if rel not in self.manifest.outputs:
            self.manifest.outputs.append(rel)


def _landscape(run, objective, spec):
    """Stages up to and including the sampled grid; returns ``(grid, theta, extras)``."""
    cfg = run.cfg
    extras = {}
    run.out.mkdir(parents=True, exist_ok=True)
    run.write("config.ini", render_ini(cfg))
    if objective is None:
        def analytic():
            params = {"m": cfg["mixture_m"], "seed": cfg["mixture_seed"], "c": cfg["constant_value"]}
            a1, a2, Z = analytic_values(cfg["analytic_name"], cfg["resolution"],
                                        effective_range(cfg), **params)
            return grid_from_values(a1, a2, Z, {"analytic": cfg["analytic_name"],
                                                "range": list(effective_range(cfg)),
                                                "resolution": list(cfg["resolution"])})
        grid = run.stage("loss_computation", analytic)
        return grid, None, extras

    def get_theta():
        if cfg["theta_source"] == "load":
            theta, _ = load_theta(cfg["theta_path"])
            return theta, None
        res = train(objective.loss_and_grad, spec.init(cfg["init_seed"]), cfg["steps"], cfg["lr"])
        return res.theta, res

    theta, res = run.stage("training", get_theta)
    extras["final_loss"] = res.final_loss if res is not None else objective.loss(theta)
    run._record(save_theta(run.out / "theta.csv", theta, spec.layout))

    def directions():
        if cfg["directions"] == "random":
            pair = random_pair(objective.dim, cfg["direction_seed"])
        else:
            pair = top2_eigenvectors(objective.grad, theta, tol=cfg["tol"], max_iter=cfg["max_iter"],
                                     seed=cfg["direction_seed"], step=cfg["hvp_step"])
        if cfg["normalization"] == "per-layer":
            pair = rescale_per_layer(pair, theta, spec.layout)
        return pair

    pair = run.stage("subspace_definition", directions)
    extras["pair"] = pair
    run._record(save_directions(run.out / "directions.csv", pair))

    grid = run.stage("loss_computation", sample_landscape, objective.loss, theta, pair,
                     effective_range(cfg), cfg["resolution"])
    return grid, theta, extras


def _write_landscape(run, grid):
    cfg = run.cfg
    if cfg["clip_quantile"] is not None:
        grid = clip_outliers(grid, cfg["clip_quantile"])
    fld = run.stage("data_representation", to_field, grid, cfg["representation"], cfg["k"])
    meta = dict(grid.metadata)
    meta["center_loss"] = grid.center_loss
    paths = save_field(fld, run.out / "landscape.csv", meta)
    for p in paths:
        run._record(p)
    return fld


def write_topology(out_dir, fld, include_essential=True, hessian=None):
    """Merge tree (JSON + DOT), diagram CSV and metrics JSON for a field; returns the metrics dict."""
    out = Path(out_dir)
    tree, diagram = compute_topology(fld)
    topo = topo_metrics(tree, diagram, include_essential)
    metrics = topo.to_json()
    hessian = hessian or {}
    metrics.update({
        "lambda1": _clean(hessian.get("lambda1")),
        "lambda2": _clean(hessian.get("lambda2")),
        "trace": _clean(hessian.get("trace")),
        "esd": hessian.get("esd"),
    })
    files = {
        "merge_tree.json": dump_json(tree.to_json()),
        "merge_tree.dot": tree.to_dot(),
        "diagram.csv": diagram.to_csv(),
        "metrics.json": dump_json(metrics),
    }
    paths = [atomic_write_text(out / name, text) for name, text in files.items()]
    return metrics, paths


def _hessian_metrics(cfg, objective, theta, pair):
    if pair is not None and pair.provenance.get("kind") == "hessian":
        lam1, lam2 = pair.provenance["eigenvalues"]
    else:
        lam1, lam2 = top_eigenvalues(objective.grad, theta, tol=cfg["tol"], max_iter=cfg["max_iter"],
                                     seed=cfg["direction_seed"], step=cfg["hvp_step"])
    out = {
        "lambda1": lam1,
        "lambda2": lam2,
        "trace": hessian_trace(objective.grad, theta, cfg["trace_probes"], cfg["hessian_seed"],
                               cfg["hvp_step"]),
        "esd": None,
    }
    if cfg["esd"]:
        esd = hessian_esd(objective.grad, theta, cfg["esd_order"], cfg["esd_probes"],
                          cfg["hessian_seed"], cfg["esd_bins"], cfg["hvp_step"])
        out["esd"] = esd.to_json()
    return out


def run_sample(cfg):
    """Stages through the written landscape only."""
    run = _Run(cfg)
    objective, spec = run.stage("model", build_model, cfg)
    grid, _, _ = _landscape(run, objective, spec)
    _write_landscape(run, grid)
    run.manifest.status = "ok"
    run._record(run.out / "manifest.json")
    run.manifest.write()
    return run.manifest


def run_pipeline(cfg):
    """Full pipeline; returns the manifest (``summary`` carries in-memory scalars)."""
    run = _Run(cfg)
    objective, spec = run.stage("model", build_model, cfg)
    grid, theta, extras = _landscape(run, objective, spec)
    fld = _write_landscape(run, grid)

    hess = None
    if objective is not None:
        hess = run.stage("hessian_metrics", _hessian_metrics, cfg, objective, theta, extras.get("pair"))
    metrics, paths = run.stage("topological_analysis", write_topology, run.out, fld,
                               cfg["include_essential"], hess)
    for p in paths:
        run._record(p)

    summary = dict(metrics)
    summary["final_loss"] = extras.get("final_loss")
    if isinstance(spec, ConvectionPinnSpec):
        summary["abs_error"] = abs_error(spec, theta)
    elif isinstance(spec, MlpSpec):
        summary["accuracy"] = mlp_accuracy(spec, theta)
    run.manifest.summary = summary
    run.manifest.status = "ok"
    run._record(run.out / "manifest.json")
    run.manifest.write()
    return run.manifest


def run_analyze(field_path, out_dir, include_essential=True, meta_path=None):
    fld = load_field(field_path, meta_path)
    metrics, _ = write_topology(out_dir, fld, include_essential)
    return metrics


def _fmt(x):
    if x is None:
        return "nan"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _table(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _flags_for(exc):
    cause = getattr(exc, "cause", exc)
    return f"{getattr(exc, 'stage', 'unknown')}:{type(cause).__name__}"


def run_beta_sweep(cfg, betas=None):
    """One PINN pipeline per beta under ``output_dir/beta_<b>``; writes ``sweep.csv``."""
    betas = list(cfg["betas"] if betas is None else betas)
    if not betas:
        raise ValueError("betas must be non-empty")
    out = Path(cfg["output_dir"])
    rows = []
    for beta in betas:
        sub = dict(cfg, model="pinn", beta=float(beta), output_dir=str(out / f"beta_{beta:g}"))
        row = {"beta": float(beta), "flags": ""}
        try:
            m = run_pipeline(sub)
            row.update({k: m.summary.get(k) for k in SWEEP_COLUMNS if k in m.summary})
        except PipelineError as exc:
            log.warning("beta=%g failed: %s", beta, exc)
            row["flags"] = _flags_for(exc)
        rows.append(row)
    atomic_write_text(out / "sweep.csv", _table(SWEEP_COLUMNS, rows))
    return rows


def run_mlp_demo(cfg):
    """Every MLP variant under every seed; writes ``sweep.csv`` with one row per pair."""
    variants = list(cfg["mlp_variants"])
    seeds = list(cfg["seeds"])
    if len(variants) < 2 or len(seeds) < 2:
        raise ValueError("mlp demo needs at least two variants and two seeds")
    out = Path(cfg["output_dir"])
    rows = []
    for widths in variants:
        name = "-".join(str(w) for w in widths)
        for seed in seeds:
            sub = dict(cfg, model="mlp", mlp_widths=tuple(widths), init_seed=int(seed),
                       direction_seed=int(seed), output_dir=str(out / f"mlp_{name}_seed{seed}"))
            row = {"variant": name, "seed": int(seed), "flags": ""}
            try:
                m = run_pipeline(sub)
                row.update({k: m.summary.get(k) for k in MLP_COLUMNS if k in m.summary})
            except PipelineError as exc:
                log.warning("variant %s seed %d failed: %s", name, seed, exc)
                row["flags"] = _flags_for(exc)
            rows.append(row)
    atomic_write_text(out / "sweep.csv", _table(MLP_COLUMNS, rows))
    return rows


__all__ = [
    "PipelineError",
    "RunManifest",
    "build_model",
    "run_sample",
    "run_pipeline",
    "run_analyze",
    "run_beta_sweep",
    "run_mlp_demo",
    "write_topology",
]
