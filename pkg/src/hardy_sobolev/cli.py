"""Command-line front end: one subcommand per experiment, JSON reports, CSV tables.

Exit codes: 0 success, 2 invalid input, 3 solver did not converge, 4 I/O.
Options may also come from a ``key = value`` file given by ``--config``;
flags on the command line take precedence.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .concentration import (
    UnusableProfile,
    bubble_sequence,
    check_concentration_inequalities,
    concentration_triple,
    translation_sweep,
)
from .energy import TrivialProfile, rayleigh_quotient
from .params import InvalidParameters, ProblemParams
from .pohozaev import nonexistence_scan, pohozaev_report, worker_count, write_scan_csv
from .profile import PROFILE_KINDS, bubble, cutoff_annulus, hardy_bubble, profile_suite, read_profile, write_profile
from .quadrature import InvalidGrid, NonIntegrable, RadialGrid, build_log_grid
from .solvers import (
    NoExtremal,
    SolverFailure,
    SolverOptions,
    best_constants,
    minimize_hardy_sobolev,
    solve_double_critical,
)

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_IO = 0, 2, 3, 4
COMMANDS = ("constants", "extremal", "solve", "pohozaev", "scan-q", "translate", "concentrate", "sweep")
SWEEP_COLUMNS = ("mu", "s", "phi", "c_star", "el_residual", "quotient", "iterations", "status")


class NotConverged(RuntimeError):
    def __init__(self, report: dict) -> None:
        super().__init__("solver did not converge")
        self.report = report


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hardy-sobolev", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="key = value file; flags override it")
    g = ap.add_argument_group("problem")
    g.add_argument("--n", type=int, default=3)
    g.add_argument("--p", type=float, default=2.0)
    g.add_argument("--s", type=float, default=0.0)
    g.add_argument("--mu", type=float, default=0.0)
    g.add_argument("--q", type=float, default=None, help="replacement exponent for the Sobolev term")
    g = ap.add_argument_group("grid")
    g.add_argument("--r-min", type=float, default=1e-6)
    g.add_argument("--r-max", type=float, default=1e6)
    g.add_argument("--m", type=int, default=4096)
    g = ap.add_argument_group("solver")
    g.add_argument("--max-iter", type=int, default=SolverOptions.max_iter)
    g.add_argument("--tol", type=float, default=SolverOptions.tol)
    g = ap.add_argument_group("experiment")
    g.add_argument("--seed", type=int, default=0, help="seed of the named test-profile generator")
    g.add_argument("--profile-in", type=Path, help="profile file used instead of the default input")
    g.add_argument("--profile-kind", choices=("hardy_bubble",) + PROFILE_KINDS, default="hardy_bubble",
                   help="default input: the Hardy bubble or a seeded random profile of this kind")
    g.add_argument("--epsilon", type=float, default=0.01, help="cutoff scale for the identity check")
    g.add_argument("--q-values", type=_floats, default=None)
    g.add_argument("--alphas", type=_floats, default=[0.0, 5.0, 10.0, 25.0, 50.0])
    g.add_argument("--delta", type=float, default=1.0)
    g.add_argument("--rates", type=_floats, default=[1.0, 4.0, 16.0, 64.0])
    g.add_argument("--mu-values", type=_floats, default=[0.0, 0.1, 0.2])
    g.add_argument("--s-values", type=_floats, default=[0.5, 1.0])
    g.add_argument("--task", choices=("solve", "extremal"), default="solve", help="per-cell task of sweep")
    g.add_argument("--workers", type=int, default=None)
    g = ap.add_argument_group("output")
    g.add_argument("--out", type=Path, help="JSON report path (default stdout)")
    g.add_argument("--csv", type=Path, help="CSV table path")
    g.add_argument("--profile-out", type=Path, help="write the resulting profile here")
    g.add_argument("--no-timing", action="store_true", help="omit wall_time so reports are byte-stable")
    return ap


def read_config(path: Path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameters(f"{path}:{lineno}: expected 'key = value'")
        k, v = (x.strip() for x in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def parse_args(argv: Sequence[str] | None) -> argparse.Namespace:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config is None:
        return args
    values = read_config(args.config)
    actions = {a.dest: a for a in ap._actions}
    defaults = {}
    for k, v in values.items():
        if k not in actions or k in ("command", "config", "help"):
            raise InvalidParameters(f"{args.config}: unknown key {k!r}")
        act = actions[k]
        if act.const is True:  # store_true
            defaults[k] = v.lower() in ("1", "true", "yes", "on")
        else:
            defaults[k] = act.type(v) if act.type else v
    ap.set_defaults(**defaults)
    return ap.parse_args(argv)


def _params(args: argparse.Namespace) -> ProblemParams:
    return ProblemParams(args.n, args.p, args.s, args.mu, args.q)


def _grid(args: argparse.Namespace) -> RadialGrid:
    return build_log_grid(args.r_min, args.r_max, args.m, args.n)


def _opts(args: argparse.Namespace) -> SolverOptions:
    return SolverOptions(max_iter=args.max_iter, tol=args.tol)


def _input_profile(args, params: ProblemParams, grid: RadialGrid):
    if args.profile_in is None:
        if args.profile_kind == "hardy_bubble":
            return hardy_bubble(params, grid), "hardy_bubble"
        u = profile_suite(grid, args.seed, 1, (args.profile_kind,), params.p)[0]
        return u, f"{args.profile_kind}(seed={args.seed})"
    u = read_profile(args.profile_in, params.n)
    if u.grid != grid:
        raise InvalidGrid(f"{args.profile_in}: grid {u.grid.spec()} differs from the requested grid")
    return u, str(args.profile_in)


def _constants(params: ProblemParams, grid: RadialGrid, opts: SolverOptions) -> tuple[float, float, dict]:
    K0, Ks = best_constants(params, grid, opts)
    prov = {
        "K0": K0,
        "Ks": Ks,
        "source": "radial minimisation of the quotient on the report grid",
    }
    if params.mu < 0:
        prov["note"] = "radial constant; for mu < 0 and s = 0 the full infimum is not attained"
    return K0, Ks, prov


# --- commands --------------------------------------------------------------

def cmd_constants(args, params, grid) -> dict:
    g1, g2 = params.hardy_exponents()
    return {**params.to_dict(), "hardy_exponent_head": g1, "hardy_exponent_tail": g2}


def cmd_extremal(args, params, grid) -> dict:
    res = minimize_hardy_sobolev(params, grid, opts=_opts(args))
    rep: dict[str, Any] = {
        "quotient": res.inv_constant,
        "best_constant": res.best_constant,
        "el_residual": res.el_residual,
        "iterations": res.iterations,
        "converged": res.converged,
    }
    if params.s == 0 and params.mu == 0:
        anchor = rayleigh_quotient(params, grid, bubble(params, grid))
        rep["bubble_quotient"] = anchor
        rep["bubble_relative_gap"] = abs(res.inv_constant - anchor) / anchor
    if args.profile_out:
        write_profile(args.profile_out, res.profile, [f"extremal {json.dumps(params.to_dict())}"])
    if not res.converged:
        raise NotConverged(rep)
    return rep


def cmd_solve(args, params, grid) -> dict:
    opts = _opts(args)
    K0, Ks, prov = _constants(params, grid, opts)
    try:
        rep = solve_double_critical(params, grid, opts, constants=(K0, Ks))
    except SolverFailure as exc:
        raise NotConverged({"error": str(exc), "constants": prov}) from exc
    e = rep.energy
    out = {
        **e.to_dict(),
        "c_star": rep.threshold,
        "gap": rep.threshold - e.phi,
        "in_window": rep.in_window,
        "balance_gap": e.phi - e.sobolev_mass / params.n - (params.p - params.s) / (params.p * (params.n - params.s)) * e.hs_mass,
        "el_residual": rep.el_residual,
        "iterations": rep.iterations,
        "converged": rep.converged,
        "constants": prov,
    }
    if args.profile_out:
        write_profile(args.profile_out, rep.profile, [f"double-critical {json.dumps(params.to_dict())}"])
    if not rep.converged:
        raise NotConverged(out)
    return out


def cmd_pohozaev(args, params, grid) -> dict:
    u, source = _input_profile(args, params, grid)
    q = params.q_eff
    eta = cutoff_annulus(grid, args.epsilon)
    rep = pohozaev_report(params, grid, u, q, eta)
    return {"q": q, "profile": source, "epsilon": args.epsilon, **rep.to_dict()}


def cmd_scan_q(args, params, grid) -> dict:
    qs = args.q_values or [params.p, params.p_star, params.p_star + 1]
    rows = nonexistence_scan(params, grid, qs, _opts(args), workers=args.workers)
    if args.csv:
        write_scan_csv(rows, args.csv)
    return {
        "rows": [
            {"q": r.q, "el_residual": r.el_residual, "q_mass": r.q_mass, "pohozaev_value": r.pohozaev_value,
             "q_mass_initial": r.q_mass_initial, "collapse": r.collapse, "status": r.status}
            for r in rows
        ]
    }


def cmd_translate(args, params, grid) -> dict:
    u, source = (bubble(params, grid), "bubble") if args.profile_in is None else _input_profile(args, params, grid)
    rows = translation_sweep(params, grid, u, args.alphas)
    zero = rayleigh_quotient(params.replace(mu=0.0), grid, u)
    if args.csv:
        _write_csv(args.csv, ("alpha", "quotient"), rows)
    return {"profile": source, "mu0_quotient": zero, "rows": [{"alpha": a, "quotient": q} for a, q in rows]}


def cmd_concentrate(args, params, grid) -> dict:
    u, source = _input_profile(args, params, grid)
    K0, Ks, prov = _constants(params, grid, _opts(args))
    seq = bubble_sequence(u, args.rates, params.p)
    rows = []
    for rate, v in zip(args.rates, seq):
        t = concentration_triple(params, grid, v, args.delta)
        rows.append((rate, t.alpha, t.beta, t.gamma))
    ratios = check_concentration_inequalities(params, grid, u, args.delta, K0, Ks)
    if args.csv:
        _write_csv(args.csv, ("rate", "alpha", "beta", "gamma"), rows)
    return {
        "profile": source,
        "delta": args.delta,
        "ratio_sobolev": ratios[0],
        "ratio_hardy_sobolev": ratios[1],
        "constants": prov,
        "rows": [dict(zip(("rate", "alpha", "beta", "gamma"), r)) for r in rows],
    }


def _sweep_cell(job: tuple) -> tuple:
    task, base, gspec, mu, s, opts = job
    row = {"mu": mu, "s": s, "phi": math.nan, "c_star": math.nan, "el_residual": math.nan,
           "quotient": math.nan, "iterations": 0, "status": "ok"}
    try:
        params = ProblemParams(base["n"], base["p"], s, mu)
        grid = RadialGrid(**gspec)
        opts = SolverOptions.from_mapping(opts)
        if task == "extremal":
            res = minimize_hardy_sobolev(params, grid, opts=opts)
            row.update(quotient=res.inv_constant, el_residual=res.el_residual, iterations=res.iterations)
            row["status"] = "ok" if res.converged else "not_converged"
        else:
            rep = solve_double_critical(params, grid, opts)
            row.update(phi=rep.energy.phi, c_star=rep.threshold, el_residual=rep.el_residual,
                       iterations=rep.iterations)
            row["status"] = "ok" if rep.converged else "not_converged"
    except (InvalidParameters, InvalidGrid) as exc:
        row["status"] = f"invalid: {exc}"
    except SolverFailure as exc:
        row["status"] = f"failed: {exc}"
    except Exception as exc:  # noqa: BLE001 - one bad cell must not end the sweep
        row["status"] = f"error: {type(exc).__name__}: {exc}"
    return tuple(row[c] for c in SWEEP_COLUMNS)


def cmd_sweep(args, params, grid) -> dict:
    base = {"n": params.n, "p": params.p}
    jobs = [(args.task, base, grid.spec(), mu, s, _opts(args).to_dict())
            for mu, s in itertools.product(args.mu_values, args.s_values)]
    workers = worker_count() if args.workers is None else args.workers
    if workers <= 1:
        rows = [_sweep_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    if args.csv:
        _write_csv(args.csv, SWEEP_COLUMNS, rows)
    return {"task": args.task, "rows": [dict(zip(SWEEP_COLUMNS, r)) for r in rows]}


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    Path(path).write_text(buf.getvalue())


HANDLERS = {
    "constants": cmd_constants,
    "extremal": cmd_extremal,
    "solve": cmd_solve,
    "pohozaev": cmd_pohozaev,
    "scan-q": cmd_scan_q,
    "translate": cmd_translate,
    "concentrate": cmd_concentrate,
    "sweep": cmd_sweep,
}


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _emit(report: dict, args) -> None:
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _fail(kind: str, message: str, code: int) -> int:
    line = json.dumps({"error": kind, "message": " ".join(str(message).split())})
    print(line, file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_INVALID if exc.code else EXIT_OK
    except (InvalidParameters, ValueError) as exc:
        return _fail("validation", str(exc), EXIT_INVALID)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)

    start = time.perf_counter()
    report: dict[str, Any] = {"command": args.command}
    code = EXIT_OK
    try:
        params = _params(args)
        grid = _grid(args)
        report["params"] = params.to_dict()
        report["grid"] = grid.spec()
        report["seed"] = args.seed
        report.update(HANDLERS[args.command](args, params, grid))
    except NotConverged as exc:
        report.update(exc.report)
        report["status"] = "not_converged"
        code = EXIT_NOT_CONVERGED
    except (InvalidParameters, InvalidGrid, NonIntegrable, NoExtremal, TrivialProfile, UnusableProfile) as exc:
        return _fail("validation", str(exc), EXIT_INVALID)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)
    except ValueError as exc:
        return _fail("validation", str(exc), EXIT_INVALID)
    report.setdefault("status", "ok")
    if not args.no_timing:
        report["wall_time"] = time.perf_counter() - start
    try:
        _emit(report, args)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)
    if code == EXIT_NOT_CONVERGED:
        print(json.dumps({"error": "not_converged", "message": "solver did not reach tolerance"}), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
