"""Command-line driver: ``fmgog <command> --config cfg.yaml --out dir``."""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import io
import json
import math
import os
import platform
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .attacker import attacked_abscissa, run_hwa
from .config import ConfigError, ExperimentConfig
from .fm import GainProfile, fixed_point, is_robustly_stable, simulate, sinr
from .game import GameInfeasible, find_qmax, investments, network_costs, run_hig
from .gp import solve
from .robust import UncertaintyStructure, assemble_p2, extract_certificate, verify_certificate
from .topology import matrix_norms, pagerank

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

COMMANDS = ("gen-topology", "simulate", "solve", "qmax", "equilibrium", "attack", "sweep", "report")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.12g" % v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v) if np.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


class Output:
    """Collects tables and documents for one command and writes them atomically."""

    def __init__(self, out_dir: Path, fmt: str):
        self.dir = out_dir
        self.fmt = fmt
        self.files: list[str] = []

    def table(self, name: str, header: list[str], rows: list[list]) -> None:
        if self.fmt == "json":
            records = [dict(zip(header, (_jsonable(v) for v in r))) for r in rows]
            self.document(name, records)
            return
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        _atomic_write(self.dir / f"{name}.csv", buf.getvalue())
        self.files.append(f"{name}.csv")

    def document(self, name: str, doc) -> None:
        _atomic_write(self.dir / f"{name}.json", json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
        self.files.append(f"{name}.json")

    def yaml(self, name: str, doc) -> None:
        _atomic_write(self.dir / f"{name}.yaml", yaml.safe_dump(_jsonable(doc), sort_keys=False))
        self.files.append(f"{name}.yaml")


@dataclasses.dataclass
class Context:
    config: ExperimentConfig
    out: Output
    base_dir: Path
    equilibrium_dir: Path | None = None

    def instance(self):
        topo = self.config.build_topology(self.base_dir)
        return topo, self.config.fm_params(topo.n_total), self.config.cost_model()


# ---------------------------------------------------------------- commands


def command_gen_topology(ctx: Context) -> dict:
    topo = ctx.config.build_topology(ctx.base_dir)
    ctx.out.yaml("topology", topo.to_document())
    nm = matrix_norms(topo.adjacency)
    return {"n_total": topo.n_total, "split_index": topo.split_index, "edges": len(topo.edges),
            "one_norm": nm.one_norm, "two_norm": nm.two_norm}


def _profile(value, n: int, default: float) -> np.ndarray:
    if value is None:
        return np.full(n, default)
    a = np.atleast_1d(np.asarray(value, dtype=float))
    return np.full(n, a[0]) if a.size == 1 else a


def command_simulate(ctx: Context) -> dict:
    topo, params, cost = ctx.instance()
    n = topo.n_total
    b = cost.bounds
    s = ctx.config.simulate
    gains = GainProfile(_profile(s.h, n, 0.5 * (b.h_lo + b.h_hi)), _profile(s.g, n, 0.5 * (b.g_lo + b.g_hi)))
    res = simulate(params, gains, topo.adjacency, _profile(s.p0, n, 0.0), tol=s.tol,
                   max_steps=s.max_steps, record=s.record)
    A = topo.adjacency
    ctx.out.table("powers", ["node", "power", "sinr"],
                  [[i + 1, res.powers[i], v] for i, v in enumerate(sinr(params, gains, A, res.powers))])
    if res.trajectory is not None:
        ctx.out.table("trajectory", ["step"] + [f"p{i + 1}" for i in range(n)],
                      [[k] + list(p) for k, p in enumerate(res.trajectory)])
    stab = is_robustly_stable(params, gains, A, ctx.config.game.varsigma)
    summary = {"steps": res.steps, "converged": res.converged, "abscissa": stab.abscissa,
               "schur_radius": stab.schur_radius}
    if stab.abscissa < 0:
        summary["fixed_point_gap"] = float(np.max(np.abs(res.powers - fixed_point(params, gains, A))))
    return summary


def command_solve(ctx: Context) -> dict:
    topo, params, cost = ctx.instance()
    r = ctx.config.robust
    n = topo.n_total
    unc = UncertaintyStructure.diagonal(n, r.eps1, r.eps2, r.sigma1, r.sigma2)
    sol = solve(assemble_p2(params, cost.bounds, topo.adjacency, unc, cost))
    if sol.status == "infeasible":
        raise GameInfeasible("robust stabilization is infeasible within the gain bounds", None, None,
                             sol.phase1_value)
    if not sol.ok:
        raise RuntimeError(f"solver ended with status {sol.status}")
    cert = extract_certificate(sol, unc, cost.bounds)
    g = cert.gains
    ctx.out.table("gains", ["node", "g", "h"], [[i + 1, g.g[i], g.h[i]] for i in range(n)])
    rep = verify_certificate(params, g, topo.adjacency, unc, samples=r.samples, rng_seed=ctx.config.seed)
    return {"status": sol.status, "objective": sol.objective_value, "kkt_residual": sol.kkt_residual,
            "iterations": sol.iterations, "verification": dataclasses.asdict(rep)}


def _resolve_q2(ctx: Context, topo, params, cost) -> tuple[float, float | None]:
    q2 = ctx.config.game.q2_bar
    if q2 == "qmax":
        star = find_qmax(params, topo, ctx.config.game_config(0.0), cost).q2_star
        return star, star
    return float(q2), None


def command_qmax(ctx: Context) -> dict:
    topo, params, cost = ctx.instance()
    q = find_qmax(params, topo, ctx.config.game_config(0.0), cost)
    return {"q2_star": q.q2_star, "per_network": list(q.per_network),
            "two_norm_A": matrix_norms(topo.adjacency).two_norm}


def _equilibrium_tables(out: Output, res, topo, cost) -> None:
    th = res.theta_star
    a, b = investments(th, cost)
    pr = pagerank(topo)
    out.table("theta", ["node", "network", "g", "h", "pagerank", "alpha_cost", "beta_cost"],
              [[i + 1, topo.network_of(i), th.g[i], th.h[i], pr[i], a[i], b[i]] for i in range(topo.n_total)])
    out.table("cost_trajectory", ["round", "cost_shifted"], [[r, v] for r, v in res.cost_trajectory])


def command_equilibrium(ctx: Context) -> dict:
    topo, params, cost = ctx.instance()
    q2, star = _resolve_q2(ctx, topo, params, cost)
    res = run_hig(params, topo, ctx.config.game_config(q2), cost)
    _equilibrium_tables(ctx.out, res, topo, cost)
    c1, c2 = network_costs(res.theta_star, topo, cost)
    return {"q2_bar": q2, "q2_star": star, "converged": res.converged, "rounds": res.rounds_used,
            "cost_net1": c1, "cost_net2": c2, "cost_total": c1 + c2, "solve_seconds": res.solve_seconds}


def _load_theta(path: Path, n: int, bounds) -> GainProfile:
    with open(path / "theta.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != n:
        raise ValueError(f"{path / 'theta.csv'} has {len(rows)} rows for {n} nodes")
    rows.sort(key=lambda r: int(r["node"]))
    return GainProfile([float(r["h"]) for r in rows], [float(r["g"]) for r in rows], bounds)


def _equilibrium_theta(ctx: Context, topo, params, cost):
    """Equilibrium profile from ``--equilibrium`` or a fresh HIG run."""
    if ctx.equilibrium_dir is not None:
        return _load_theta(ctx.equilibrium_dir, topo.n_total, cost.bounds), None
    q2, _ = _resolve_q2(ctx, topo, params, cost)
    res = run_hig(params, topo, ctx.config.game_config(q2), cost)
    return res.theta_star, res


def command_attack(ctx: Context) -> dict:
    topo, params, cost = ctx.instance()
    theta, _ = _equilibrium_theta(ctx, topo, params, cost)
    q2, _ = _resolve_q2(ctx, topo, params, cost)
    st = run_hwa(params, topo, theta, ctx.config.game.q1_bar, q2)
    ctx.out.table("attack", ["i", "j", "weight"], [[i + 1, j + 1, w] for i, j, w in st.rows()])
    nm = st.norms
    summary = {"one_norm": nm.one_norm, "two_norm": nm.two_norm, "abscissa_before": st.abscissa_path[0],
               "abscissa_after": st.abscissa_path[-1], "exhausted": st.exhausted}
    ctx.out.table("attack_summary", list(summary), [list(summary.values())])
    return summary


def _sweep_point(args):
    cfg_dict, base_dir, q2 = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    topo = cfg.build_topology(Path(base_dir))
    params, cost = cfg.fm_params(topo.n_total), cfg.cost_model()
    try:
        res = run_hig(params, topo, cfg.game_config(q2), cost)
    except GameInfeasible as exc:
        return {"q2": q2, "status": "infeasible", "detail": str(exc)}
    st = run_hwa(params, topo, res.theta_star, cfg.game.q1_bar, q2)
    c1, c2 = network_costs(res.theta_star, topo, cost)
    return {"q2": q2, "status": "ok", "cost_net1": c1, "cost_net2": c2, "rounds": res.rounds_used,
            "converged": res.converged,
            "attack_abscissa": attacked_abscissa(params, topo, res.theta_star, st.a_q)}


def sweep_grid(cfg: ExperimentConfig, topo, params, cost) -> tuple[list[float], float | None]:
    grid = cfg.game.q2_grid
    if grid is None:
        grid = {"points": 8}
    if isinstance(grid, dict):
        star = find_qmax(params, topo, cfg.game_config(0.0), cost).q2_star
        return list(np.linspace(0.0, star, int(grid["points"]))), star
    return [float(x) for x in grid], None


def command_sweep(ctx: Context) -> dict:
    topo, params, cost = ctx.instance()
    grid, star = sweep_grid(ctx.config, topo, params, cost)
    norm_a = matrix_norms(topo.adjacency).two_norm
    jobs = [(ctx.config.to_dict(), str(ctx.base_dir), q2) for q2 in grid]
    workers = ctx.config.workers
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    rows = []
    for r in results:
        if r["status"] == "ok":
            rows.append([r["q2"] / norm_a, r["q2"], r["cost_net1"], r["cost_net2"],
                         r["cost_net1"] + r["cost_net2"], r["rounds"], r["converged"], r["attack_abscissa"], "ok"])
        else:
            rows.append([r["q2"] / norm_a, r["q2"], "nan", "nan", "nan", 0, False, "nan", "infeasible"])
    ctx.out.table("sweep", ["q2_over_normA", "q2_bar", "cost_net1", "cost_net2", "cost_total", "rounds",
                            "converged", "attack_abscissa", "status"], rows)
    return {"points": len(grid), "q2_star": star, "infeasible": sum(r["status"] != "ok" for r in results)}


def command_report(ctx: Context) -> dict:
    topo, params, cost = ctx.instance()
    theta, res = _equilibrium_theta(ctx, topo, params, cost)
    if res is not None and not res.converged:
        raise RuntimeError("equilibrium did not converge; refusing to report investments")
    a, b = investments(theta, cost)
    pr = pagerank(topo)
    border = set(int(i) for i in topo.border_nodes())
    total = a + b
    ctx.out.table("report", ["node", "pagerank", "alpha_cost", "beta_cost", "total_investment", "is_border_node"],
                  [[i + 1, pr[i], a[i], b[i], total[i], i in border] for i in range(topo.n_total)])
    corr = float(np.corrcoef(pr, total)[0, 1]) if np.std(total) > 0 else 0.0
    return {"pagerank_investment_correlation": corr, "total_investment": float(total.sum())}


HANDLERS = {
    "gen-topology": command_gen_topology,
    "simulate": command_simulate,
    "solve": command_solve,
    "qmax": command_qmax,
    "equilibrium": command_equilibrium,
    "attack": command_attack,
    "sweep": command_sweep,
    "report": command_report,
}


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fmgog", description="Robust gain allocation for FM power control under attack")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="YAML experiment config (defaults used if omitted)")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, help="overrides the config's rng seed")
        p.add_argument("--workers", type=int, help="overrides the config's worker count")
        p.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
        if name in ("attack", "report"):
            p.add_argument("--equilibrium", type=Path,
                           help="directory holding theta.csv from a previous equilibrium run")
    return ap


def _load_config(args) -> tuple[ExperimentConfig, Path]:
    if args.config is None:
        doc, base = {}, Path.cwd()
    else:
        try:
            with open(args.config) as fh:
                doc = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError([f"cannot read {args.config}: {exc.strerror}"]) from None
        except yaml.YAMLError as exc:
            raise ConfigError([f"cannot parse {args.config}: {exc}"]) from None
        base = args.config.resolve().parent
    if not isinstance(doc, dict):
        raise ConfigError(["top level must be a mapping"])
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.workers is not None:
        doc["workers"] = args.workers
    return ExperimentConfig.from_dict(doc), base


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Output(args.out, args.format)
    started = time.time()
    t0 = time.perf_counter()
    manifest = {"command": args.command, "version": __version__, "python": platform.python_version(),
                "numpy": np.__version__, "scipy": scipy.__version__, "started": started}
    try:
        cfg, base = _load_config(args)
        if args.command in ("equilibrium", "sweep", "attack", "report") and math.gcd(cfg.game.c1, cfg.game.c2) != 1:
            print(f"warning: update frequencies c1={cfg.game.c1}, c2={cfg.game.c2} are not coprime",
                  file=sys.stderr)
        manifest["config_sha256"] = cfg.digest()
        out.yaml("config", cfg.to_dict())
        ctx = Context(cfg, out, base, getattr(args, "equilibrium", None))
        result = HANDLERS[args.command](ctx)
        code = EXIT_OK
    except ConfigError as exc:
        result = {"error": "config", "problems": exc.problems}
        code = EXIT_CONFIG
    except GameInfeasible as exc:
        result = {"error": "infeasible", "message": str(exc), "round": exc.round_index, "owner": exc.owner,
                  "phase1_value": exc.phase1_value}
        code = EXIT_INFEASIBLE
    except (ValueError, RuntimeError, OSError) as exc:
        result = {"error": type(exc).__name__, "message": str(exc)}
        code = EXIT_FAILED
    manifest["seconds"] = time.perf_counter() - t0
    manifest["exit_code"] = code
    if code == EXIT_OK:
        out.document("result", result)
    else:
        out.document("error", result)
        print(json.dumps(_jsonable(result)), file=sys.stderr)
    manifest["files"] = sorted(out.files) + ["manifest.json"]
    out.document("manifest", manifest)
    if code == EXIT_OK:
        print(json.dumps(_jsonable(result), sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
