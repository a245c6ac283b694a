"""Experiment driver.

Subcommands: solve (ARE via policy iteration), descend (one run, CSV +
JSON sidecar), verify (re-certify a stored trajectory), sweep (grids of
runs with per-row bound checks), generate (random plant files).  Exit
codes: 0 success, 1 verification failure, 2 input/config error.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from types import SimpleNamespace

from . import descent, lqr, problems, verify
from .exceptions import (
    DisturbanceTooLargeError,
    IssgdError,
    InputError,
    NoUltimateBoundError,
)
from .linalg import Matrix
from .settings import from_env

CSV_COLUMNS = ("k", "cost", "cost_gap", "grad_fro", "step_size", "perturb_fro", "v5", "v6", "gate_active")


def _fmt(x):
    return format(float(x), ".17g")


def _matrix_from_cfg(obj, what):
    if isinstance(obj, (int, float)):
        return Matrix.from_rows([[float(obj)]])
    if isinstance(obj, list):
        return Matrix.from_rows(obj)
    raise InputError(f"{what} must be a number or nested row arrays")


def _load_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc}")


def _build_plant(cfg):
    try:
        a = _matrix_from_cfg(cfg["A"], "A")
        b = _matrix_from_cfg(cfg["B"], "B")
        q = _matrix_from_cfg(cfg["Q"], "Q")
        r = _matrix_from_cfg(cfg["R"], "R")
    except KeyError as exc:
        raise InputError(f"plant spec missing {exc}")
    return lqr.Plant(A=a, B=b, Q=q, R=r)


def _build_problem(cfg, settings, seed_override=None):
    """(problem, default_start) from the config's problem section."""
    if "builtin" in cfg:
        name = cfg["builtin"]
        problem = problems.make_problem(name, settings)
        default_start = Matrix.from_rows([[2.0]]) if name == "lqr_1d" else None
        return problem, default_start
    if "plant" in cfg:
        plant = _build_plant(cfg["plant"])
        k0 = cfg["plant"].get("k0")
        if k0 is not None:
            k0 = _matrix_from_cfg(k0, "k0")
        else:
            zero = Matrix.zeros(plant.m, plant.n)
            if lqr.Gain.for_plant(plant, zero, settings).is_admissible(settings):
                k0 = zero
            else:
                k0 = problems.initial_stabilizing_gain(plant, settings)
        return descent.LqrProblem(plant, k0=k0, name="plant", settings=settings), k0
    if "random" in cfg:
        spec = cfg["random"]
        seed = seed_override if seed_override is not None else spec.get("seed", 0)
        sample = problems.random_plant(spec["n"], spec["m"], seed, settings)
        problem = descent.LqrProblem(
            sample.plant,
            opt=sample.opt,
            name=f"random_n{spec['n']}m{spec['m']}s{seed}",
            settings=settings,
        )
        return problem, sample.K0.K
    raise InputError("problem section needs one of: builtin, plant, random")


def _build_method(cfg):
    cfg = cfg or {}
    rule = cfg.get("step_rule", "paper")
    return descent.Method(
        kind=cfg.get("kind", "standard"),
        step_rule=rule,
        eta=cfg.get("eta"),
        fraction=cfg.get("fraction"),
    )


def _build_perturbation(cfg, problem, seed_override=None):
    cfg = cfg or {"kind": "zero"}
    kind = cfg.get("kind", "zero")
    seed = seed_override if seed_override is not None else cfg.get("seed", 0)
    direction = cfg.get("direction")
    if direction is not None and isinstance(problem, descent.LqrProblem):
        direction = _matrix_from_cfg(direction, "direction")
    sequence = None
    if kind == "replay":
        values = cfg.get("values")
        if values is None and cfg.get("replay_path"):
            with open(cfg["replay_path"]) as fh:
                values = json.load(fh)["values"]
        if values is None:
            raise InputError("replay perturbation needs values or replay_path")
        if isinstance(problem, descent.LqrProblem):
            sequence = tuple(_matrix_from_cfg(v, "replay value") for v in values)
        else:
            sequence = tuple(float(v) for v in values)
    return descent.PerturbationModel(
        kind=kind,
        epsilon=float(cfg.get("epsilon", 0.0)),
        seed=seed,
        direction=direction,
        sequence=sequence,
    )


def _coerce_start(problem, raw, default_start):
    if raw is None:
        if default_start is None:
            raise InputError("run.start is required for this problem")
        return default_start
    if isinstance(problem, descent.LqrProblem):
        return _matrix_from_cfg(raw, "start")
    return float(raw)


def _predicted_bound(problem, epsilon):
    """(bound or None, advisory or None) for a perturbation budget."""
    if epsilon <= 0.0:
        return None, None
    try:
        return verify.ultimate_bound(problem.pl_function, epsilon), None
    except DisturbanceTooLargeError as exc:
        return None, f"disturbance-too-large: {exc}"
    except NoUltimateBoundError as exc:
        return None, f"no-ultimate-bound: {exc}"


def _gate_flags(problem, method_kind, records, optimum):
    flags = []
    if method_kind == "standard":
        for r in records:
            gap = max(r.cost - optimum, 0.0)
            flags.append(r.perturbation_norm <= 0.5 * problem.pl_function.value(gap))
        return flags
    cert = problem.cert
    if method_kind == "natural_lqr":
        _, s1, s2 = verify.v5_gate_constants(cert)
        key = "v5"
    else:
        _, s1, s2 = verify.v6_gate_constants(cert)
        key = "v6"
    for r in records:
        v = r.lyapunov_values[key]
        flags.append(r.perturbation_norm**2 <= min(s1 * v / (1.0 + v), s2 * v))
    return flags


def _run_experiment(cfg, settings, seed_override=None, stop_at_bound=False):
    problem, default_start = _build_problem(cfg["problem"], settings, seed_override)
    method = _build_method(cfg.get("method"))
    model = _build_perturbation(cfg.get("perturbation"), problem, seed_override)
    run_cfg = cfg.get("run", {})
    start = _coerce_start(problem, run_cfg.get("start"), default_start)
    stop_tol = float(run_cfg.get("stop_tol", settings.stop_tol))
    bound, advisory = _predicted_bound(problem, model.epsilon)
    if (stop_at_bound or run_cfg.get("stop_at_bound")) and bound is not None:
        stop_tol = max(stop_tol, bound)
    traj = descent.run(
        problem,
        method,
        model,
        start,
        max_iter=int(run_cfg.get("max_iter", settings.max_iter)),
        stop_tol=stop_tol,
        settings=settings,
    )
    return SimpleNamespace(
        problem=problem,
        method=method,
        model=model,
        traj=traj,
        bound=bound,
        advisory=advisory,
        stop_tol=stop_tol,
    )


def _write_trajectory_csv(path, problem, method, traj):
    recs = traj.records
    optimum = traj.meta["optimum_cost"]
    gates = _gate_flags(problem, method.kind, recs, optimum)
    lines = [",".join(CSV_COLUMNS)]
    for rec, gate in zip(recs, gates):
        v5 = rec.lyapunov_values.get("v5")
        v6 = rec.lyapunov_values.get("v6")
        lines.append(
            ",".join(
                (
                    str(rec.k),
                    _fmt(rec.cost),
                    _fmt(rec.cost - optimum),
                    _fmt(rec.grad_norm),
                    _fmt(rec.step_size),
                    _fmt(rec.perturbation_norm),
                    "" if v5 is None else _fmt(v5),
                    "" if v6 is None else _fmt(v6),
                    "true" if gate else "false",
                )
            )
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _sidecar_dict(result):
    traj = result.traj
    return {
        "schema": "issgd.trajectory.v1",
        "problem": traj.meta["problem"],
        "method_kind": traj.meta["method_kind"],
        "step_rule": traj.meta["step_rule"],
        "perturbation_kind": traj.meta["perturbation_kind"],
        "perturbation_epsilon": traj.meta["perturbation_epsilon"],
        "seed": traj.meta["seed"],
        "optimum_cost": traj.meta["optimum_cost"],
        "stop_tol": result.stop_tol,
        "rows": len(traj.records),
        "terminated_reason": traj.terminated_reason,
        "final_cost_gap": traj.cost_gap(),
        "predicted_bound": result.bound,
        "advisories": [result.advisory] if result.advisory else [],
    }


def cmd_solve(args):
    settings = from_env()
    cfg = _load_config(args.config)
    pcfg = cfg.get("problem", cfg)
    if "builtin" in pcfg and pcfg["builtin"] == "lqr_1d":
        plant, _ = problems.one_d_lqr()
        k0 = Matrix.from_rows([[2.0]])
    elif "plant" in pcfg:
        plant = _build_plant(pcfg["plant"])
        k0cfg = pcfg["plant"].get("k0")
        if k0cfg is not None:
            k0 = _matrix_from_cfg(k0cfg, "k0")
        else:
            zero = Matrix.zeros(plant.m, plant.n)
            k0 = (
                zero
                if lqr.Gain.for_plant(plant, zero, settings).is_admissible(settings)
                else problems.initial_stabilizing_gain(plant, settings)
            )
    elif "random" in pcfg:
        spec = pcfg["random"]
        seed = args.seed if args.seed is not None else spec.get("seed", 0)
        sample = problems.random_plant(spec["n"], spec["m"], seed, settings)
        plant, k0 = sample.plant, sample.K0.K
    else:
        raise InputError("solve config needs problem.builtin/plant/random")
    opt = lqr.optimal_solution(plant, k0, settings)
    are = opt.are
    summary = {
        "K_star": opt.K_star.to_rows(),
        "P_star": opt.P_star.to_rows(),
        "J_star": opt.J_star,
        "iterations": are.iterations,
        "final_residual": are.final_residual,
    }
    print(
        f"K* = {opt.K_star.to_rows()}  J* = {_fmt(opt.J_star)}  "
        f"residual = {are.final_residual:.3e}  iterations = {are.iterations}"
    )
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "solution.json")
        with open(path, "w") as fh:
            json.dump(summary, fh, indent=2)
        print(f"wrote {path}")
    return 0


def cmd_descend(args):
    settings = from_env()
    cfg = _load_config(args.config)
    result = _run_experiment(cfg, settings, seed_override=args.seed)
    os.makedirs(args.out, exist_ok=True)
    sidecar = _sidecar_dict(result)
    if args.format == "json":
        payload = dict(sidecar)
        optimum = result.traj.meta["optimum_cost"]
        gates = _gate_flags(result.problem, result.method.kind, result.traj.records, optimum)
        payload["records"] = [
            {
                "k": rec.k,
                "cost": rec.cost,
                "cost_gap": rec.cost - optimum,
                "grad_fro": rec.grad_norm,
                "step_size": rec.step_size,
                "perturb_fro": rec.perturbation_norm,
                "v5": rec.lyapunov_values.get("v5"),
                "v6": rec.lyapunov_values.get("v6"),
                "gate_active": gate,
            }
            for rec, gate in zip(result.traj.records, gates)
        ]
        path = os.path.join(args.out, "trajectory.json")
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
        print(f"wrote {path}")
    else:
        csv_path = os.path.join(args.out, "trajectory.csv")
        _write_trajectory_csv(csv_path, result.problem, result.method, result.traj)
        side_path = os.path.join(args.out, "trajectory.json")
        with open(side_path, "w") as fh:
            json.dump(sidecar, fh, indent=2)
        print(f"wrote {csv_path} and {side_path}")
    traj = result.traj
    print(
        f"{traj.terminated_reason} after {len(traj.records) - 1} steps, "
        f"final cost gap {traj.cost_gap():.6e}"
    )
    for adv in sidecar["advisories"]:
        print(f"advisory: {adv}")
    return 0


def _parse_traj_csv(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or tuple(lines[0].split(",")) != CSV_COLUMNS:
        raise InputError(f"trajectory CSV schema mismatch in {path}")
    records = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise InputError(f"trajectory CSV row has {len(parts)} fields")
        lyap = {}
        if parts[6]:
            lyap["v5"] = float(parts[6])
        if parts[7]:
            lyap["v6"] = float(parts[7])
        records.append(
            SimpleNamespace(
                k=int(parts[0]),
                cost=float(parts[1]),
                grad_norm=float(parts[3]),
                step_size=float(parts[4]),
                perturbation_norm=float(parts[5]),
                lyapunov_values=lyap,
            )
        )
    return records


def cmd_verify(args):
    settings = from_env()
    cfg = _load_config(args.config)
    sidecar_path = args.sidecar or os.path.splitext(args.traj)[0] + ".json"
    try:
        with open(sidecar_path) as fh:
            sidecar = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"sidecar not found: {sidecar_path}")
    method_kind = sidecar.get("method_kind")
    if args.method and args.method != method_kind:
        raise InputError(
            f"method mismatch: sidecar says {method_kind!r}, flag says {args.method!r}"
        )
    problem, _ = _build_problem(cfg["problem"], settings)
    records = _parse_traj_csv(args.traj)
    traj = descent.DescentTrajectory(
        records=records,
        terminated_reason=sidecar.get("terminated_reason", "unknown"),
        meta={"optimum_cost": problem.optimum_cost, "method_kind": method_kind},
    )
    if method_kind == "standard":
        report = verify.check_gated_decrease(traj, problem.pl_function, settings)
    elif method_kind == "natural_lqr":
        report = verify.check_v5_decrease(problem.plant, problem.opt, traj, problem.cert, settings)
    elif method_kind == "gauss_newton_lqr":
        report = verify.check_v6_decrease(problem.plant, problem.opt, traj, problem.cert, settings)
    else:
        raise InputError(f"sidecar has unknown method kind {method_kind!r}")
    epsilon = float(sidecar.get("perturbation_epsilon", 0.0))
    bound, _advisory = _predicted_bound(problem, epsilon)
    if bound is not None:
        inv = verify.invariance_check(traj, bound, settings)
        report.ultimate_bound = bound
        report.entered_bound_at = inv.entered_bound_at
        report.invariant_after_entry = inv.invariant_after_entry
    out_path = None
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        out_path = os.path.join(args.out, "report.json")
        with open(out_path, "w") as fh:
            fh.write(report.to_json(indent=2))
    violations = report.violations
    gated = sum(1 for v in report.per_step if v.gate_active)
    print(
        f"{report.check}: {gated} gated steps, {len(violations)} violations"
        + (f", report at {out_path}" if out_path else "")
    )
    if violations:
        first = violations[0]
        print(f"first violation at step {first.k} (slack {first.slack:.3e})")
        return 1
    return 0


def cmd_sweep(args):
    settings = from_env()
    cfg = _load_config(args.config)
    base = cfg["base"]
    axis = cfg["axis"]
    values = cfg["values"]
    reps = int(cfg.get("replications", 1))
    if axis not in ("epsilon", "seed", "method"):
        raise InputError("sweep axis must be epsilon, seed, or method")
    if not values:
        raise InputError("sweep values must be nonempty")
    if reps < 1:
        raise InputError("replications must be >= 1")

    tasks = []
    for value in values:
        for rep in range(reps):
            run_cfg = json.loads(json.dumps(base))  # deep copy
            pert = run_cfg.setdefault("perturbation", {"kind": "zero"})
            if axis == "epsilon":
                pert["epsilon"] = float(value)
                if pert.get("kind", "zero") == "zero" and float(value) > 0.0:
                    pert["kind"] = "iid_ball"
                pert["seed"] = int(pert.get("seed", 0)) + rep
            elif axis == "seed":
                pert["seed"] = int(value) + rep
            else:
                run_cfg.setdefault("method", {})["kind"] = str(value)
                pert["seed"] = int(pert.get("seed", 0)) + rep
            tasks.append((value, rep, run_cfg))

    def one(task):
        value, rep, run_cfg = task
        try:
            result = _run_experiment(run_cfg, settings, stop_at_bound=True)
            traj = result.traj
            gap = traj.cost_gap()
            bound = result.bound
            return {
                "axis": axis,
                "value": value,
                "replication": rep,
                "seed": run_cfg.get("perturbation", {}).get("seed", 0),
                "status": "ok",
                "terminated_reason": traj.terminated_reason,
                "iterations": len(traj.records) - 1,
                "final_cost_gap": gap,
                "predicted_bound": bound,
                "bound_respected": (gap <= bound) if bound is not None else None,
            }
        except IssgdError as exc:
            return {
                "axis": axis,
                "value": value,
                "replication": rep,
                "seed": run_cfg.get("perturbation", {}).get("seed", 0),
                "status": f"error: {exc}".replace(",", ";"),
                "terminated_reason": "",
                "iterations": "",
                "final_cost_gap": "",
                "predicted_bound": "",
                "bound_respected": "",
            }

    jobs = max(1, args.jobs)
    if jobs == 1:
        rows = [one(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, tasks))

    header = (
        "axis,value,replication,seed,status,terminated_reason,iterations,"
        "final_cost_gap,predicted_bound,bound_respected"
    )
    lines = [header]
    for row in rows:
        lines.append(
            ",".join(
                (
                    row["axis"],
                    str(row["value"]) if axis == "method" else _fmt(row["value"]),
                    str(row["replication"]),
                    str(row["seed"]),
                    row["status"],
                    str(row["terminated_reason"]),
                    str(row["iterations"]),
                    _fmt(row["final_cost_gap"]) if row["final_cost_gap"] != "" else "",
                    _fmt(row["predicted_bound"]) if row["predicted_bound"] not in ("", None) else "",
                    ""
                    if row["bound_respected"] in ("", None)
                    else ("true" if row["bound_respected"] else "false"),
                )
            )
        )
    os.makedirs(args.out, exist_ok=True)
    if args.format == "json":
        path = os.path.join(args.out, "sweep.json")
        with open(path, "w") as fh:
            json.dump(rows, fh, indent=2)
    else:
        path = os.path.join(args.out, "sweep.csv")
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def cmd_generate(args):
    settings = from_env()
    sample = problems.random_plant(args.n, args.m, args.seed, settings)
    payload = {
        "seed": args.seed,
        "A": sample.plant.A.to_rows(),
        "B": sample.plant.B.to_rows(),
        "Q": sample.plant.Q.to_rows(),
        "R": sample.plant.R.to_rows(),
        "k0": sample.K0.K.to_rows(),
        "K_star": sample.opt.K_star.to_rows(),
        "J_star": sample.opt.J_star,
    }
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"plant_n{args.n}m{args.m}s{args.seed}.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
    print(f"wrote {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="issgd",
        description="Perturbed gradient descent for LQR with ISS certification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve the ARE by policy iteration")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", default=None)
    p_solve.add_argument("--seed", type=int, default=None)
    p_solve.set_defaults(func=cmd_solve)

    p_desc = sub.add_parser("descend", help="run one descent experiment")
    p_desc.add_argument("--config", required=True)
    p_desc.add_argument("--out", default=".")
    p_desc.add_argument("--seed", type=int, default=None)
    p_desc.add_argument("--format", choices=("csv", "json"), default="csv")
    p_desc.set_defaults(func=cmd_descend)

    p_ver = sub.add_parser("verify", help="certify a stored trajectory")
    p_ver.add_argument("--traj", required=True)
    p_ver.add_argument("--sidecar", default=None)
    p_ver.add_argument("--config", required=True)
    p_ver.add_argument("--method", default=None)
    p_ver.add_argument("--out", default=None)
    p_ver.set_defaults(func=cmd_verify)

    p_sweep = sub.add_parser("sweep", help="run a sweep grid")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default=".")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sweep.set_defaults(func=cmd_sweep)

    p_gen = sub.add_parser("generate", help="generate a random plant file")
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--m", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", default=".")
    p_gen.set_defaults(func=cmd_generate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IssgdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
