"""Command-line driver for the experiments.

Every run writes, into ``--out``:

* ``config.resolved.toml``: the defaults merged with ``--config``;
* one or more CSV tables with fixed column orders (no timings, so identical
  configurations give identical bytes);
* MatrixMarket files of the spliced (or dumped) matrices;
* one JSON line per run appended to ``summary.jsonl`` with all norms,
  matrix statistics and per-phase timings.
"""
import argparse
import csv
import json
import os
import sys
import time

SCHEMA_VERSION = 1

DEFAULTS = {
    "patch": {"dim": 1, "h": None, "delta": None, "with_opt": True},
    "opt-compare": {"dim": 1, "h": None, "delta": None, "metric": "lumped",
                    "methods": ["exact_quadratic", "quasi_newton"]},
    "delta-conv": {"h": 0.0025, "deltas": [1.0, 0.5, 0.1, 0.05, 0.01]},
    "jump1d": {"delta": 0.1, "h": None, "spaces": ["P1", "P0"]},
    "cylinder2d": {"h": 0.05, "h_core": 0.025, "core_half": 0.5, "delta": 0.25, "r": 0.2,
                   "halfwidths": [0.2, 0.25, 0.3, 0.35, 0.4, 0.45]},
    "heat": {"h": 1.0 / 12, "delta": 0.2, "dt": 0.1, "t_end": 10.0, "diffusivity": 0.1,
             "ref_levels": 1, "window_halfwidth": 0.3,
             "strategies": ["fully_nonlocal", "moving", "moving_with_boundary_layer",
                            "fixed_annulus"],
             "sample_times": [2.0, 4.0, 6.0, 8.0, 10.0]},
    "verify-cases": {"cases": ["jump_1d", "cylinder_2d", "patch_linear_1d",
                               "patch_quadratic_1d", "patch_quadratic_1d_p0",
                               "patch_quadratic_2d"],
                     "n_points": 20, "rtol": 1e-4, "seed": 0},
    "dump-matrix": {"kernel": "fractional", "dim": 1, "h": 0.05, "delta": 0.1, "s": 0.75,
                    "alpha": None, "space": "P1"},
}


class ConfigError(ValueError):
    pass


def _read_toml(path):
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def resolve_config(command, path=None):
    """Defaults for ``command`` overridden by the ``[command]`` table of a TOML file.

    The file must carry ``schema_version``; unknown keys are rejected.
    """
    cfg = dict(DEFAULTS[command])
    if path is None:
        return cfg
    raw = _read_toml(path)
    version = raw.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ConfigError("config schema_version must be %d, got %r" % (SCHEMA_VERSION, version))
    unknown_tables = set(raw) - set(DEFAULTS)
    if unknown_tables:
        raise ConfigError("unknown config tables: %s" % ", ".join(sorted(unknown_tables)))
    table = raw.get(command, {})
    for key, value in table.items():
        if key not in cfg:
            raise ConfigError("unknown key %r in [%s]" % (key, command))
        default = cfg[key]
        if isinstance(default, list) and not isinstance(value, list):
            raise ConfigError("key %r in [%s] must be a list" % (key, command))
        if isinstance(default, bool) and not isinstance(value, bool):
            raise ConfigError("key %r in [%s] must be a boolean" % (key, command))
        cfg[key] = value
    return cfg


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError("cannot write %r to TOML" % (v,))


def write_resolved_config(path, command, cfg):
    lines = ["schema_version = %d" % SCHEMA_VERSION, "", "[%s]" % command]
    for k, v in cfg.items():
        if v is None:
            lines.append("# %s = (default)" % k)
        else:
            lines.append("%s = %s" % (k, _toml_value(v)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _jsonable(obj):
    """Drop private keys and convert numpy scalars and arrays."""
    import numpy as np

    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items() if not str(k).startswith("_")}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(getattr(v, "item", lambda: v)())


def matrix_stats(A):
    return {"shape": list(A.shape), "nnz": int(A.nnz)}


class Outputs:
    """Collects files written by one run inside the output directory."""

    def __init__(self, out, spy=False):
        self.out = out
        self.spy = spy
        self.files = []
        os.makedirs(out, exist_ok=True)

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.out, name)

    def table(self, name, columns, rows):
        write_csv(self.path(name), columns, rows)

    def matrix(self, name, A):
        from scipy.io import mmwrite

        from .splice import write_spy_csv

        mmwrite(self.path(name + ".mtx"), A.tocoo())
        if self.spy:
            write_spy_csv(self.path(name + "_spy.csv"), A)
        return matrix_stats(A)

    def splice_run(self, name, run):
        """MatrixMarket dump of ``A_S`` plus right-hand side and solution per global DOF."""
        stats = self.matrix(name, run.system.A_S)
        X = run.dofs.coords
        cols = ["dof", "side"] + ["x", "y"][:X.shape[1]] + ["h_S", "u"]
        n_L = run.dofs.n_L
        rows = []
        for i in range(run.system.n):
            r = {"dof": i, "side": "L" if i < n_L else "N", "h_S": float(run.system.h_S[i]),
                 "u": float(run.solution.u[i])}
            r.update(zip(["x", "y"], map(float, X[i])))
            rows.append(r)
        self.table(name + "_solution.csv", cols, rows)
        return stats


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_patch(cfg, io):
    from . import experiments as ex

    if cfg["dim"] == 1:
        kw = {k: cfg[k] for k in ("h", "delta") if cfg[k] is not None}
        rep = ex.patch_1d(with_opt=cfg["with_opt"], **kw)
        rows = []
        for c in rep["cases"]:
            run = c["_run"]
            c["matrix"] = io.splice_run("splice_%s_%s" % (c["case"], c["space"].replace("-", "")),
                                        run)
            rows.append({"case": c["case"], "space": c["space"], "kernel": c["kernel"],
                         "max_nodal_error": c.get("max_nodal_error"),
                         "fully_nonlocal_max_error": c.get("fully_nonlocal_max_error"),
                         "splice_L2": c.get("splice_L2"),
                         "fully_nonlocal_L2": c.get("fully_nonlocal_L2"),
                         "identity_error": c.get("identity_error"),
                         "residual": c["well_posedness"]["residual"],
                         "n": c["well_posedness"]["n"]})
        io.table("patch_1d.csv", ["case", "space", "kernel", "max_nodal_error",
                                  "fully_nonlocal_max_error", "splice_L2", "fully_nonlocal_L2",
                                  "identity_error", "residual", "n"], rows)
        return rep
    if cfg["dim"] != 2:
        raise ConfigError("dim must be 1 or 2")
    kw = {k: cfg[k] for k in ("h", "delta") if cfg[k] is not None}
    rep = ex.patch_2d(with_opt=cfg["with_opt"], **kw)
    rows = []
    for s in rep["splits"]:
        s["matrix"] = io.splice_run("splice_patch2d_%s" % s["split"], s["_run"])
        rows.append({"split": s["split"], "splice_Linf": s["splice_Linf"],
                     "fully_nonlocal_Linf": rep["fully_nonlocal_Linf"],
                     "identity_error": s["identity_error"],
                     "J": s.get("opt", {}).get("exact_quadratic", {}).get("J"),
                     "max_diff": s.get("opt", {}).get("exact_quadratic", {}).get("max_diff"),
                     "residual": s["well_posedness"]["residual"],
                     "n": s["well_posedness"]["n"]})
    io.table("patch_2d.csv", ["split", "splice_Linf", "fully_nonlocal_Linf", "identity_error",
                              "J", "max_diff", "residual", "n"], rows)
    return rep


def cmd_opt_compare(cfg, io):
    from . import experiments as ex

    kw = {k: cfg[k] for k in ("h", "delta") if cfg[k] is not None}
    if cfg["dim"] == 1:
        rep = ex.patch_1d(with_opt=False, **kw)
        items = [(c["case"], c["_run"]) for c in rep["cases"] if c["space"] == "P1-P1"]
    else:
        rep = ex.patch_2d(with_opt=False, **kw)
        items = [(s["split"], s["_run"]) for s in rep["splits"]]
    out = {"experiment": "opt_compare", "dim": cfg["dim"], "metric": cfg["metric"], "rows": []}
    rows = []
    for name, run in items:
        oc = ex.opt_compare(run, cfg["metric"], tuple(cfg["methods"]))
        X = run.dofs.coords
        for m in cfg["methods"]:
            r = oc[m]
            rows.append({"case": name, "method": m, "n_controls": oc["n_controls"], "J": r["J"],
                         "iterations": r["iterations"], "grad_norm": r["grad_norm"],
                         "max_diff": r["max_diff"]})
            res = oc["_" + m]
            theta = [{"control": i, "block": "theta_L" if i < len(res.theta_L) else "theta_N",
                      "value": float(v)}
                     for i, v in enumerate(list(res.theta_L) + list(res.theta_N))]
            io.table("theta_%s_%s.csv" % (name, m), ["control", "block", "value"], theta)
            diff = [dict(zip(["x", "y"], map(float, X[i])), dof=i,
                         difference=float(res.u[i] - run.solution.u[i]))
                    for i in range(run.system.n)]
            io.table("difference_%s_%s.csv" % (name, m),
                     ["dof"] + ["x", "y"][:X.shape[1]] + ["difference"], diff)
        out["rows"].append({"case": name, **oc})
    io.table("opt_compare.csv", ["case", "method", "n_controls", "J", "iterations",
                                 "grad_norm", "max_diff"], rows)
    return out


def cmd_delta_conv(cfg, io):
    from . import experiments as ex

    rep = ex.delta_convergence(h=cfg["h"], deltas=tuple(cfg["deltas"]))
    io.table("delta_convergence.csv", ["delta", "splice_L2", "fully_nonlocal_L2",
                                       "identity_error", "residual", "n"], rep["rows"])
    return rep


def cmd_jump1d(cfg, io):
    from . import analytic
    from . import experiments as ex

    ok, _ = analytic.verify_case(analytic.jump_1d_case(cfg["delta"]))
    if not ok:
        raise RuntimeError("jump_1d oracle gate failed; experiment disabled")
    rep = ex.jump_1d(delta=cfg["delta"], h=cfg["h"], spaces=tuple(cfg["spaces"]))
    rep["oracle_gate"] = True
    rows = []
    for r in rep["rows"]:
        r["matrix"] = io.splice_run("splice_jump1d_%s" % r["space"].replace("-", ""), r["_run"])
        rows.append({"space": r["space"], "splice_L2": r["splice_L2"],
                     "fully_nonlocal_L2": r["fully_nonlocal_L2"],
                     "identity_error": r["identity_error"],
                     "residual": r["well_posedness"]["residual"], "n": r["well_posedness"]["n"]})
    io.table("jump_1d.csv", ["space", "splice_L2", "fully_nonlocal_L2", "identity_error",
                             "residual", "n"], rows)
    return rep


def cmd_cylinder2d(cfg, io):
    from . import experiments as ex

    rep = ex.cylinder_2d_windows(h=cfg["h"], delta=cfg["delta"], r=cfg["r"],
                                 halfwidths=tuple(cfg["halfwidths"]), h_core=cfg["h_core"],
                                 core_half=cfg["core_half"])
    rows = [{"a": r["a"], "splice_L2": r["splice_L2"],
             "fully_nonlocal_L2": rep["fully_nonlocal_L2"], "identity_error": r["identity_error"],
             "residual": r["well_posedness"]["residual"], "n": r["well_posedness"]["n"]}
            for r in rep["rows"]]
    io.table("cylinder_2d_windows.csv", ["a", "splice_L2", "fully_nonlocal_L2",
                                         "identity_error", "residual", "n"], rows)
    return rep


def cmd_heat(cfg, io):
    import numpy as np

    from . import timestepping as ts

    tc = ts.TimeConfig(dt=cfg["dt"], t_end=cfg["t_end"], diffusivity=cfg["diffusivity"],
                       window_halfwidth=cfg["window_halfwidth"])
    problem, runs, (ref_problem, ref_run) = ts.run_heat_experiment(
        tc, h=cfg["h"], delta=cfg["delta"], ref_levels=cfg["ref_levels"],
        strategies=tuple(cfg["strategies"]))
    rows = []
    for s, r in runs.items():
        for k, t in enumerate(r.times):
            rows.append({"strategy": s, "t": float(round(t, 12)),
                         "L2": float(r.errors["L2"][k]), "L1": float(r.errors["L1"][k]),
                         "n_nonlocal": r.n_nonlocal[k - 1] if k else None})
    io.table("error_trace.csv", ["strategy", "t", "L2", "L1", "n_nonlocal"], rows)
    outline_rows = []
    for s, r in runs.items():
        for k, seg in enumerate(r.outlines):
            for x0, y0, x1, y1 in seg:
                outline_rows.append({"strategy": s, "step": k + 1, "x0": float(x0),
                                     "y0": float(y0), "x1": float(x1), "y1": float(y1)})
    io.table("window_outlines.csv", ["strategy", "step", "x0", "y0", "x1", "y1"], outline_rows)
    decay = ts.run_heat(problem, ts.TimeConfig(dt=cfg["dt"], t_end=min(cfg["t_end"], 2.0),
                                               diffusivity=cfg["diffusivity"]),
                        "moving", forcing=False)
    energy = ts.energy_trace(problem, decay)
    sample = {}
    for s, r in runs.items():
        idx = [int(np.argmin(np.abs(r.times - t))) for t in cfg["sample_times"]]
        sample[s] = [float(r.errors["L2"][i]) for i in idx]
    return {"experiment": "heat_2d", "h": cfg["h"], "delta": cfg["delta"],
            "n": problem.n, "n_reference": ref_problem.n, "mass_matrix": "consistent",
            "sampled_L2": sample, "sample_times": cfg["sample_times"],
            "energy_decays": bool(np.all(np.diff(energy) <= 1e-14 * energy[0])),
            "matrices": {"A_nonlocal": matrix_stats(problem.A_nonlocal),
                         "A_nonlocal_reference": matrix_stats(ref_problem.A_nonlocal)},
            "timings": {"coarse": problem.timings, "reference": ref_problem.timings,
                        **{s: r.timings for s, r in runs.items()},
                        "reference_run": ref_run.timings}}


def cmd_verify_cases(cfg, io):
    from . import analytic

    builders = {
        "jump_1d": lambda: analytic.jump_1d_case(0.1),
        "cylinder_2d": lambda: analytic.cylinder_2d_case((0.0, 0.0), 0.2, 0.25),
        "patch_linear_1d": lambda: analytic.patch_cases(1)[0],
        "patch_quadratic_1d": lambda: analytic.patch_cases(1)[1],
        "patch_quadratic_1d_p0": lambda: analytic.patch_cases(1, p0=True)[1],
        "patch_quadratic_2d": lambda: analytic.patch_cases(2)[0],
    }
    rows, summary = [], {"experiment": "verify_cases", "cases": {}}
    for name in cfg["cases"]:
        if name not in builders:
            raise ConfigError("unknown case %r" % name)
        ok, pts = analytic.verify_case(builders[name](), n_points=cfg["n_points"],
                                       rtol=cfg["rtol"], seed=cfg["seed"])
        summary["cases"][name] = {"pass": bool(ok), "max_err": max(p[3] for p in pts)}
        for x, f, o, e in pts:
            x = list(map(float, x)) if hasattr(x, "__len__") else [float(x)]
            rows.append({"case": name, "x": " ".join(repr(v) for v in x), "f": float(f),
                         "oracle": float(o), "err": float(e)})
    io.table("verify_cases.csv", ["case", "x", "f", "oracle", "err"], rows)
    return summary


def cmd_dump_matrix(cfg, io):
    from .assembly_nonlocal import assemble_nonlocal_stiffness
    from .kernel import make_kernel
    from .mesh import Box, EmptyRegion, build_domain_partition, padded_interval_mesh, \
        padded_square_mesh

    k = make_kernel(cfg["kernel"], cfg["dim"], cfg["delta"], s=cfg["s"], alpha=cfg["alpha"])
    make = padded_interval_mesh if cfg["dim"] == 1 else padded_square_mesh
    mesh = make(cfg["h"], cfg["delta"])
    part = build_domain_partition(mesh, Box([-1.0] * cfg["dim"], [1.0] * cfg["dim"]),
                                  EmptyRegion(), cfg["delta"])
    t0 = time.perf_counter()
    A = assemble_nonlocal_stiffness(part, k, cfg["space"]).tocsr()
    t = time.perf_counter() - t0
    stats = io.matrix("nonlocal_%s_%dd_%s" % (cfg["kernel"], cfg["dim"], cfg["space"]), A)
    return {"experiment": "dump_matrix", "kernel": k.describe(), "space": cfg["space"],
            "matrix": stats, "timings": {"assembly_nonlocal": t}}


COMMANDS = {
    "patch": (cmd_patch, "1D and 2D patch tests"),
    "opt-compare": (cmd_opt_compare, "optimization-based coupling against the splice"),
    "delta-conv": (cmd_delta_conv, "convergence to the local solution as the horizon shrinks"),
    "jump1d": (cmd_jump1d, "1D solution with a jump"),
    "cylinder2d": (cmd_cylinder2d, "2D disc indicator with a sweep of nonlocal windows"),
    "heat": (cmd_heat, "heat equation with moving and fixed nonlocal windows"),
    "verify-cases": (cmd_verify_cases, "check -L_N u = f for the analytic cases"),
    "dump-matrix": (cmd_dump_matrix, "write an assembled nonlocal matrix"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with a [<command>] table")
    common.add_argument("--threads", type=int, default=None, help="BLAS thread limit")
    common.add_argument("--out", default="nlsplice_out", help="output directory")
    common.add_argument("--spy", action="store_true", help="also write sparsity patterns as row,col,value CSV")
    p = argparse.ArgumentParser(prog="nlsplice", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return p


def run(command, cfg, out, spy=False):
    """Execute ``command`` with a resolved configuration and write all outputs."""
    io = Outputs(out, spy)
    write_resolved_config(io.path("config.resolved.toml"), command, cfg)
    t0 = time.perf_counter()
    try:
        report = COMMANDS[command][0](cfg, io)
    except Exception as exc:
        raise RuntimeError("%s failed: %s" % (command, exc)) from exc
    report = _jsonable(report)
    report["command"] = command
    report["wall_time"] = time.perf_counter() - t0
    report["files"] = sorted(set(io.files))
    with open(os.path.join(out, "summary.jsonl"), "a") as fh:
        fh.write(json.dumps(report, sort_keys=True) + "\n")
    return report


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("--threads must be positive", file=sys.stderr)
            return 2
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        cfg = resolve_config(args.command, args.config)
    except (ConfigError, OSError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    report = run(args.command, cfg, args.out, args.spy)
    print(json.dumps({k: report[k] for k in ("command", "wall_time", "files")}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
