"""``lowps`` command line: grid | stability | koopman | simulate | bench."""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import bench as bench_mod
from . import config as cfg
from . import io
from .approximation import localization_from_truncation, randomized_localization, truncate_svd
from .boundary import (
    StabilityReport,
    distance_to_instability,
    kreiss_continuous,
    kreiss_discrete,
    pseudospectral_abscissa,
    pseudospectral_radius,
)
from .errors import LowpsError, ParseError, PreconditionError
from .lowrank import LowRankFactors, mu_many
from .oracle import dense_sigma_min_many
from .transfer import (
    KernelConfig,
    fit_rrr,
    gram_centered,
    koop_kreiss,
    koop_pseudospectrum_grid,
    simulate_logistic,
    simulate_ou,
)

IO_EXIT = 6
RANK_TOL = 1e-12


def _floats(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from exc


def _ints(s: str) -> list[int]:
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from exc


def _grid_arg(s: str) -> dict:
    parts = s.split(",")
    if len(parts) != 6:
        raise argparse.ArgumentTypeError("grid is re_min,re_max,im_min,im_max,n_re,n_im")
    keys = ["re_min", "re_max", "im_min", "im_max", "n_re", "n_im"]
    try:
        vals = [float(p) for p in parts[:4]] + [int(p) for p in parts[4:]]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    return dict(zip(keys, vals))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lowps", description="Pseudospectra of low-rank matrices and learned transfer operators.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config; command-line flags take precedence")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--out-dir", dest="out_dir")

    def matrix_inputs(sp):
        sp.add_argument("--matrix", help="dense matrix (Matrix Market)")
        sp.add_argument("--u", help="left factor U (Matrix Market)")
        sp.add_argument("--v", help="right factor V (Matrix Market); A = U V^*")

    g = sub.add_parser("grid", help="evaluate mu over a complex grid")
    common(g)
    matrix_inputs(g)
    g.add_argument("--mode", choices=["exact", "truncated", "randomized"])
    g.add_argument("--l", type=int, help="truncation rank")
    g.add_argument("--k", type=int, help="sketch size (randomized mode)")
    g.add_argument("--delta", type=float, help="failure probability (randomized mode)")
    g.add_argument("--eps", type=_floats, help="comma-separated levels")
    g.add_argument("--grid", type=_grid_arg, help="re_min,re_max,im_min,im_max,n_re,n_im")
    g.add_argument("--oracle", action="store_true", default=None, help=argparse.SUPPRESS)

    s = sub.add_parser("stability", help="distance to instability, Kreiss constants, radius, abscissa")
    common(s)
    matrix_inputs(s)
    s.add_argument("--task", choices=["d2i", "kreiss", "kreiss_c", "radius", "abscissa"])
    s.add_argument("--eps", type=float, help="level for radius/abscissa")
    s.add_argument("--tol", type=float)

    k = sub.add_parser("koopman", help="fit RRR on a trajectory and map its pseudospectra")
    common(k)
    k.add_argument("--traj", help="trajectory CSV")
    k.add_argument("--bandwidth", type=float)
    k.add_argument("--r", type=int)
    k.add_argument("--gamma", type=float)
    k.add_argument("--grid", type=_grid_arg)
    k.add_argument("--kreiss-eps", dest="kreiss_eps", type=_floats)
    k.add_argument("--solver", choices=["auto", "dense", "arnoldi"])

    sm = sub.add_parser("simulate", help="write a trajectory CSV (OU process or noisy logistic map)")
    common(sm)
    sm.add_argument("process", nargs="?", choices=["ou", "logistic"])
    sm.add_argument("--n", type=int)
    sm.add_argument("--drift", type=_floats, help="a11,a12,a21,a22")
    sm.add_argument("--sigma", type=float)
    sm.add_argument("--dt", type=float)
    sm.add_argument("--noise-exponent", dest="noise_exponent", type=int)

    b = sub.add_parser("bench", help="time low-rank vs dense grid evaluation")
    common(b)
    b.add_argument("--dims", type=_ints)
    b.add_argument("--ranks", type=_ints)
    b.add_argument("--grid-m", dest="grid_m", type=int)
    b.add_argument("--trials", type=int)
    b.add_argument("--dense-points", dest="dense_points", type=int)
    return p


def _parallel(fn, zs: np.ndarray, threads: int) -> np.ndarray:
    if threads <= 1 or zs.size < 2 * threads:
        return fn(zs)
    chunks = np.array_split(zs, threads)
    with threadpool_limits(1), ThreadPoolExecutor(threads) as ex:
        return np.concatenate(list(ex.map(fn, chunks)))


def _low_rank_input(conf) -> tuple[LowRankFactors, np.ndarray | None]:
    if conf.u is not None:
        return io.read_factors(conf.u, conf.v), None
    a = io.read_matrix(conf.matrix)
    if a.shape[0] != a.shape[1]:
        raise PreconditionError("matrix must be square")
    u, s, vh = np.linalg.svd(a)
    rank = int(np.sum(s > RANK_TOL * max(s[0], 1e-300)))
    if rank >= a.shape[0]:
        raise PreconditionError("matrix has full rank; pass factors or use grid --mode truncated")
    rank = max(rank, 1)
    return LowRankFactors(u[:, :rank] * s[:rank], vh[:rank].conj().T), a


def cmd_grid(conf) -> dict:
    threads = conf.threads or os.cpu_count() or 1
    gspec = conf.grid.spec()
    zs = gspec.points()
    dense = None
    if conf.mode == "exact":
        if conf.u is not None:
            factors = io.read_factors(conf.u, conf.v)
        else:
            dense = io.read_matrix(conf.matrix)
            if conf.l is None:
                raise PreconditionError("exact mode on a dense matrix needs --l")
            ts = truncate_svd(dense, conf.l)
            if ts.tail_norm > RANK_TOL * max(ts.sigma_l[0], 1e-300):
                raise PreconditionError(f"matrix is not of rank {conf.l}; use --mode truncated")
            factors = ts.factors()
        inflation = 0.0
    else:
        if conf.matrix is None:
            raise PreconditionError(f"{conf.mode} mode needs --matrix")
        dense = io.read_matrix(conf.matrix)
        if conf.l is None:
            raise PreconditionError(f"{conf.mode} mode needs --l")
        if conf.mode == "truncated":
            loc = localization_from_truncation(truncate_svd(dense, conf.l))
        else:
            k = conf.k if conf.k is not None else conf.l + 10
            loc = randomized_localization(dense, conf.l, k, conf.delta, seed=conf.seed)
        factors, inflation = loc.factors, loc.inflation
    if conf.oracle:
        a = dense if dense is not None else factors.dense()
        vals = _parallel(lambda c: dense_sigma_min_many(a, c), zs, threads)
    else:
        g = factors.gram
        vals = _parallel(lambda c: mu_many(g, c), zs, threads)
    out = Path(conf.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = ["re", "im", "mu"] + (["inflation"] if conf.mode != "exact" else [])
    rows = [[z.real, z.imag, v] + ([inflation] if conf.mode != "exact" else []) for z, v in zip(zs, vals)]
    io.write_csv(out / "grid.csv", header, rows)
    levels = {
        "mode": conf.mode,
        "points": int(zs.size),
        "inflation": float(inflation),
        "levels": [{"eps": float(e), "count": int(np.sum(vals <= inflation + e))} for e in conf.eps],
    }
    io.write_json(out / "levels.json", levels)
    return levels


def _report_for(task: str, factors, eps, tol) -> StabilityReport:
    if task == "d2i":
        return distance_to_instability(factors, tol=tol)
    if task == "kreiss":
        return kreiss_discrete(factors, tol=tol)
    if task == "kreiss_c":
        return kreiss_continuous(factors, tol=tol)
    if eps is None:
        raise PreconditionError(f"task {task} needs --eps")
    fn = pseudospectral_radius if task == "radius" else pseudospectral_abscissa
    value, arg, trace = fn(factors, eps, tol=tol)
    return StabilityReport(value, arg, len(trace), list(enumerate(trace)), True, {"epsilon": eps})


def cmd_stability(conf) -> dict:
    factors, _ = _low_rank_input(conf)
    rep = _report_for(conf.task, factors, conf.eps, conf.tol).to_dict()
    rep["task"] = conf.task
    out = Path(conf.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "report.json", rep)
    return rep


def cmd_koopman(conf) -> dict:
    traj = io.read_trajectory(conf.traj, conf.dt)
    kc = gram_centered(traj, KernelConfig(conf.bandwidth), seed=conf.seed)
    model = fit_rrr(kc, conf.gamma, conf.r, solver=conf.solver, seed=conf.seed)
    kg = koop_pseudospectrum_grid(model, conf.grid.spec())
    out = Path(conf.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    zs = conf.grid.spec().points()
    io.write_csv(out / "koop_grid.csv", ["re", "im", "mu_h", "mu_l2"],
                 [[z.real, z.imag, a, b] for z, a, b in zip(zs, kg.mu_h, kg.mu_l2)])
    summary = model.summary()
    if conf.kreiss_eps:
        kh, _, rh = koop_kreiss(model, "H", conf.kreiss_eps)
        kl, _, rl = koop_kreiss(model, "L2", conf.kreiss_eps)
        io.write_csv(out / "kreiss.csv", ["eps", "ratio_h", "ratio_l2"],
                     [[e, a, b] for (e, a), (_, b) in zip(rh, rl)])
        summary["kreiss_h"], summary["kreiss_l2"] = kh, kl
    io.write_json(out / "model.json", summary)
    return summary


def cmd_simulate(conf) -> dict:
    if conf.process == "ou":
        traj = simulate_ou(conf.n, np.asarray(conf.drift), conf.sigma, conf.dt, seed=conf.seed)
    else:
        traj = simulate_logistic(conf.n, conf.noise_exponent, seed=conf.seed)
    out = Path(conf.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_trajectory(out / "traj.csv", traj)
    return {"n": traj.n, "dim": traj.states.shape[1]}


def cmd_bench(conf) -> list:
    with threadpool_limits(conf.threads or 1):
        rows = bench_mod.run(conf.dims, conf.ranks, conf.grid_m, conf.trials, conf.seed, conf.dense_points)
    out = Path(conf.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_csv(out / "bench.csv", bench_mod.HEADER, [r.as_row() for r in rows])
    return [dict(zip(bench_mod.HEADER, r.as_row())) for r in rows]


HANDLERS = {
    "grid": cmd_grid,
    "stability": cmd_stability,
    "koopman": cmd_koopman,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
}


def _overrides(args) -> dict:
    skip = {"command", "config"}
    d = {k: v for k, v in vars(args).items() if k not in skip}
    if d.get("drift") is not None:
        vals = d["drift"]
        if len(vals) != 4:
            raise PreconditionError("--drift takes four numbers a11,a12,a21,a22")
        d["drift"] = [vals[:2], vals[2:]]
    return d


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_values = io.read_json(args.config) if args.config else {}
        if not isinstance(file_values, dict):
            raise ParseError("config must be a JSON object")
        conf = cfg.load(args.command, file_values, _overrides(args))
        result = HANDLERS[args.command](conf)
    except LowpsError as exc:
        print(f"lowps: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"lowps: {exc}", file=sys.stderr)
        return IO_EXIT
    print(json.dumps(result, indent=2, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
