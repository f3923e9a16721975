"""Run orchestration: config files, training over seed sets, evaluation.

A single JSON document drives everything.  Problem and agent sections
default from the published tables, so a config only needs to state what
differs; the normalized document (every key explicit) is what gets
hashed into manifests and reproduces the run.
"""

from __future__ import annotations

import dataclasses
import glob as globmod
import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..agents import (
    AgentConfig,
    TrainingDiverged,
    default_agent_config,
    deployment_policy,
    ensemble_load,
    ensemble_save,
    train,
    validate_config,
    write_curve_csv,
)
from ..bounds import (
    RandomDesignPolicy,
    estimate_bounds,
    summary_dict,
    write_rollouts_csv,
)
from ..envs import (
    CesProblem,
    DesignProblem,
    LocationFindingProblem,
    problem_from_config,
    problem_to_config,
)
from ..prob import make_rng, split

RESULTS_HEADER = "algorithm,override,bound,mean,stderr,n,seconds"


@dataclass
class EvalSpec:
    rollouts: int = 200
    L: int = 10_000
    overrides: tuple[str, ...] = ()
    sunrise_method: str = "B"


@dataclass
class RunConfig:
    problem_cfg: dict
    problem: DesignProblem
    L_train: int
    agent: AgentConfig
    seeds: tuple[int, ...]
    iterations: int
    eval: EvalSpec
    out: str
    chunk_size: int = 100_000


@dataclass
class ResultRow:
    algorithm: str
    override: str
    bound: str
    mean: float
    stderr: float
    n: int
    seconds: float


# ---------------------------------------------------------------------------
# config document handling


def _default_problem_cfg(kind: str) -> dict:
    if kind == "location_finding":
        return problem_to_config(LocationFindingProblem(), 100_000)
    if kind == "ces":
        return problem_to_config(CesProblem(), 100_000)
    raise ValueError(f"problem.problem: unknown kind {kind!r}")


def _agent_from_doc(doc: dict, problem_kind: str) -> AgentConfig:
    variant = doc.get("variant")
    if variant is None:
        raise ValueError("agent.variant is required")
    cfg = default_agent_config(variant, problem_kind)
    known = {f.name for f in dataclasses.fields(AgentConfig)}
    updates = {}
    for key, val in doc.items():
        if key not in known:
            raise ValueError(f"agent.{key}: unknown field")
        if key != "variant":
            updates[key] = val
    cfg = dataclasses.replace(cfg, **updates)
    validate_config(cfg)
    return cfg


def run_config_from_dict(doc: dict) -> RunConfig:
    if "problem" not in doc or not isinstance(doc["problem"], dict):
        raise ValueError("problem: section is required")
    kind = doc["problem"].get("problem")
    pcfg = _default_problem_cfg(kind)
    for key, val in doc["problem"].items():
        if key not in pcfg:
            raise ValueError(f"problem.{key}: unknown field")
        pcfg[key] = val
    problem, L_train = problem_from_config(pcfg)
    if L_train < 1:
        raise ValueError("problem.L_train must be >= 1")

    if "agent" not in doc or not isinstance(doc["agent"], dict):
        raise ValueError("agent: section is required")
    agent = _agent_from_doc(doc["agent"], kind)

    seeds = tuple(int(s) for s in doc.get("seeds", ()))
    if not seeds:
        raise ValueError("seeds: must be a nonempty list")
    iterations = int(doc.get("iterations", 0))
    if iterations < 0:
        raise ValueError("iterations: must be >= 0")

    ev = doc.get("eval", {})
    spec = EvalSpec(
        rollouts=int(ev.get("rollouts", 200)),
        L=int(ev.get("L", 10_000)),
        overrides=tuple(ev.get("overrides", ())),
        sunrise_method=str(ev.get("sunrise_method", "B")),
    )
    if spec.L < 1:
        raise ValueError("eval.L: must be >= 1")
    if spec.rollouts < 1:
        raise ValueError("eval.rollouts: must be >= 1")
    if spec.sunrise_method not in ("A", "B", "C"):
        raise ValueError("eval.sunrise_method: must be A, B or C")
    for tok in spec.overrides:
        apply_override(problem, tok)  # raises on incompatible tokens

    out = doc.get("out")
    if not out:
        raise ValueError("out: output directory is required")
    chunk = int(doc.get("chunk_size", 100_000))
    if chunk < 1:
        raise ValueError("chunk_size: must be >= 1")
    return RunConfig(problem_cfg=pcfg, problem=problem, L_train=L_train,
                     agent=agent, seeds=seeds, iterations=iterations,
                     eval=spec, out=str(out), chunk_size=chunk)


def load_run_config(path) -> RunConfig:
    with open(path) as fh:
        return run_config_from_dict(json.load(fh))


def run_config_to_dict(rc: RunConfig) -> dict:
    return {
        "problem": dict(rc.problem_cfg),
        "agent": dataclasses.asdict(rc.agent),
        "seeds": list(rc.seeds),
        "iterations": rc.iterations,
        "eval": {
            "rollouts": rc.eval.rollouts,
            "L": rc.eval.L,
            "overrides": list(rc.eval.overrides),
            "sunrise_method": rc.eval.sunrise_method,
        },
        "out": rc.out,
        "chunk_size": rc.chunk_size,
    }


def config_hash(rc: RunConfig) -> str:
    blob = json.dumps(run_config_to_dict(rc), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# generalization overrides


def apply_override(problem: DesignProblem, token: str) -> DesignProblem:
    """Build the problem variant named by `token` (e.g. "k=3", "nu=0.01").

    Observation scaling is pinned to the base problem's range so a policy
    trained on the base sees identically scaled inputs; only the problem
    internals change.
    """
    tok = token.strip().lower()
    if tok in ("", "none"):
        return problem
    if "=" not in tok:
        raise ValueError(f"override {token!r}: expected key=value")
    key, val = tok.split("=", 1)
    if key == "k":
        if not isinstance(problem, LocationFindingProblem):
            raise ValueError(f"override {token!r} needs a location-finding problem")
        return LocationFindingProblem(
            K=int(val), d=problem.d, alpha=problem.alpha, b=problem.b,
            m=problem.m, sigma=problem.sigma, horizon=problem.horizon,
            design_lo=problem.design_lo, design_hi=problem.design_hi,
            obs_range=problem.obs_range,
        )
    if key == "nu":
        if not isinstance(problem, CesProblem):
            raise ValueError(f"override {token!r} needs a CES problem")
        return CesProblem(
            nu=float(val), epsilon=problem.epsilon, horizon=problem.horizon,
            design_lo=problem.design_lo, design_hi=problem.design_hi,
            obs_range=problem.obs_range,
        )
    raise ValueError(f"override {token!r}: unknown key {key!r}")


def parse_override_arg(arg: str | None) -> tuple[str, ...]:
    """CLI form "k=1,2,3" or "nu=0.005,0.01" -> one token per value."""
    if not arg or arg.strip().lower() == "none":
        return ()
    if "=" not in arg:
        raise ValueError(f"--override {arg!r}: expected key=v1,v2,...")
    key, vals = arg.split("=", 1)
    return tuple(f"{key}={v.strip()}" for v in vals.split(",") if v.strip())


# ---------------------------------------------------------------------------
# results table


def write_results_csv(path, rows: list[ResultRow]) -> None:
    with open(path, "w") as fh:
        fh.write(RESULTS_HEADER + "\n")
        for r in rows:
            fh.write(f"{r.algorithm},{r.override},{r.bound},{r.mean!r},"
                     f"{r.stderr!r},{r.n},{r.seconds!r}\n")


def read_results_csv(path) -> list[ResultRow]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != RESULTS_HEADER:
        raise ValueError(f"{path}: bad results header")
    rows = []
    for ln in lines[1:]:
        alg, ov, bound, mean, stderr, n, secs = ln.split(",")
        rows.append(ResultRow(alg, ov, bound, float(mean), float(stderr),
                              int(n), float(secs)))
    return rows


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# commands


def cmd_train(rc: RunConfig, log=print) -> int:
    """Train every seed; one checkpoint directory per seed.

    Returns a process exit code: 0 on success, 3 if any seed diverged
    (NaN in the diagnostics); partial results stay on disk either way.
    """
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "config.json", "w") as fh:
        json.dump(run_config_to_dict(rc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    chash = config_hash(rc)
    failed = False
    for seed in rc.seeds:
        sdir = out / str(seed)
        sdir.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        try:
            res = train(rc.problem, rc.agent, seed, rc.iterations,
                        rc.L_train, chunk_size=rc.chunk_size)
        except TrainingDiverged as exc:
            log(f"seed {seed}: diverged at iteration {exc.iteration}")
            failed = True
            continue
        seconds = time.perf_counter() - t0
        ckpt = sdir / "ckpt.npz"
        ensemble_save(ckpt, res.ensemble)
        write_curve_csv(sdir / "curve.csv", res.curve)
        manifest = {
            "seed": seed,
            "algorithm": rc.agent.variant,
            "config_sha256": chash,
            "ckpt_sha256": _sha256_file(ckpt),
            "iterations": rc.iterations,
            "env_steps": res.ensemble.env_steps,
            "grad_steps": res.ensemble.grad_steps,
            "seconds": seconds,
            "config": run_config_to_dict(rc),
        }
        with open(sdir / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        log(f"seed {seed}: {rc.iterations} iterations in {seconds:.1f}s "
            f"-> {ckpt}")
    return 3 if failed else 0


def _load_checkpoints(ckpt_glob: str):
    paths = sorted(globmod.glob(ckpt_glob))
    if not paths:
        raise ValueError(f"no checkpoints match {ckpt_glob!r}")
    loaded = []
    for p in paths:
        ens = ensemble_load(p)
        manifest_path = Path(p).with_name("manifest.json")
        if not manifest_path.exists():
            raise ValueError(f"{p}: missing manifest.json alongside checkpoint")
        manifest = json.loads(manifest_path.read_text())
        loaded.append((ens, manifest))
    return loaded


def _pooled_rows(algorithm, override_tok, ests_by_seed, seconds):
    """Concatenate per-rollout values across seeds, then summarize."""
    rows = []
    for bound in ("spce", "snmc"):
        values = np.concatenate([e[bound].values for e in ests_by_seed])
        n = values.shape[0]
        stderr = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        rows.append(ResultRow(algorithm, override_tok or "none", bound,
                              float(values.mean()), stderr, n, seconds))
    return rows


def _eval_policies(policies, seed_labels, algorithm, problem, overrides,
                   n_rollouts, L, out_dir, chunk_size, eval_seed, log=print):
    """Shared evaluation path for checkpoints and the random baseline."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tokens = list(overrides) or ["none"]
    streams = split(make_rng(eval_seed), len(tokens) * len(policies))
    rows: list[ResultRow] = []
    summary: dict[str, dict] = {}
    rollouts_path = out / "rollouts.csv"
    wrote_any = False
    for oi, tok in enumerate(tokens):
        prob = apply_override(problem, tok)
        t0 = time.perf_counter()
        ests_by_seed = []
        for ci, pol in enumerate(policies):
            rng = streams[oi * len(policies) + ci]
            ests, traces = estimate_bounds(pol, prob, n_rollouts, L, rng,
                                           chunk_size=chunk_size)
            ests_by_seed.append(ests)
            write_rollouts_csv(
                rollouts_path, traces, ests["spce"], seeds=seed_labels[ci],
                extra={"algorithm": algorithm, "override": tok},
                append=wrote_any)
            wrote_any = True
        seconds = time.perf_counter() - t0
        group = _pooled_rows(algorithm, tok, ests_by_seed, seconds)
        rows.extend(group)
        summary[tok] = {
            "spce": summary_dict(_pool_estimates(ests_by_seed, "spce")),
            "snmc": summary_dict(_pool_estimates(ests_by_seed, "snmc")),
        }
        log(f"{algorithm} {tok}: spce {group[0].mean:.4f} +- "
            f"{group[0].stderr:.4f} (n={group[0].n}, {seconds:.1f}s)")
    write_results_csv(out / "results.csv", rows)
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return rows


def _pool_estimates(ests_by_seed, bound):
    from ..bounds import BoundEstimate

    values = np.concatenate([e[bound].values for e in ests_by_seed])
    steps = np.concatenate([e[bound].per_step for e in ests_by_seed])
    first = ests_by_seed[0][bound]
    return BoundEstimate(bound, values, steps, first.n_contrastive,
                         first.horizon)


def cmd_eval(ckpt_glob: str, overrides, n_rollouts: int, L: int,
             out_dir: str, sunrise_method: str = "B",
             chunk_size: int = 100_000, eval_seed: int = 0,
             log=print) -> list[ResultRow]:
    """Evaluate checkpoints, pooling rollouts across seeds per override.

    All contrastive draws are fresh: evaluation streams descend from
    `eval_seed`, never from the training seeds.
    """
    loaded = _load_checkpoints(ckpt_glob)
    base_cfg = loaded[0][1]["config"]
    problem, _ = problem_from_config(base_cfg["problem"])
    algorithm = loaded[0][1].get("algorithm", loaded[0][0].cfg.variant)
    policies = [deployment_policy(ens, sunrise_method) for ens, _ in loaded]
    seed_labels = [man["seed"] for _, man in loaded]
    return _eval_policies(policies, seed_labels, algorithm, problem,
                          overrides, n_rollouts, L, out_dir, chunk_size,
                          eval_seed, log)


def cmd_baseline(rc: RunConfig, out_dir: str | None = None,
                 eval_seed: int = 0, log=print) -> list[ResultRow]:
    """Uniform-random designs through the same estimation path."""
    pol = RandomDesignPolicy(rc.problem.design_dim)
    out = out_dir or str(Path(rc.out) / "baseline")
    return _eval_policies([pol], [eval_seed], "random", rc.problem,
                          rc.eval.overrides, rc.eval.rollouts, rc.eval.L,
                          out, rc.chunk_size, eval_seed, log)


def _merge_docs(base: dict, patch: dict) -> dict:
    out = json.loads(json.dumps(base))
    for key, val in patch.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key].update(val)
        else:
            out[key] = val
    return out


def cmd_sweep(matrix_path, log=print) -> list[ResultRow]:
    """Train + eval each named cell of a config matrix; merge the tables.

    Matrix document: {"base": <run config>, "cells": [{"name": ...,
    <overriding sections>}, ...]}.  Each cell's rows carry its name in
    the algorithm column and the cell's total train+eval seconds.
    """
    with open(matrix_path) as fh:
        doc = json.load(fh)
    if "base" not in doc or "cells" not in doc or not doc["cells"]:
        raise ValueError("matrix: needs base config and a nonempty cells list")
    base = doc["base"]
    merged: list[ResultRow] = []
    base_out = Path(base.get("out", "sweep"))
    for cell in doc["cells"]:
        name = cell.get("name")
        if not name:
            raise ValueError("matrix.cells: every cell needs a name")
        patch = {k: v for k, v in cell.items() if k != "name"}
        cell_doc = _merge_docs(base, patch)
        cell_doc["out"] = str(base_out / name)
        rc = run_config_from_dict(cell_doc)
        t0 = time.perf_counter()
        code = cmd_train(rc, log=log)
        if code != 0:
            raise RuntimeError(f"cell {name}: training diverged")
        rows = cmd_eval(str(Path(rc.out) / "*" / "ckpt.npz"),
                        rc.eval.overrides, rc.eval.rollouts, rc.eval.L,
                        rc.out, rc.eval.sunrise_method, rc.chunk_size,
                        log=log)
        seconds = time.perf_counter() - t0
        for r in rows:
            merged.append(ResultRow(name, r.override, r.bound, r.mean,
                                    r.stderr, r.n, seconds))
    write_results_csv(base_out / "results.csv", merged)
    return merged
