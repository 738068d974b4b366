"""Command-line entry point.

Every subcommand resolves its configuration from built-in defaults, then an
optional ``--config`` JSON file, then explicit flags, and writes the resolved
config as ``config.json`` beside its outputs.  ``--threads`` and ``--out``
are runtime-only: they are not hashed and not written.

Exit status: 0 success, 1 contract violation or bad input, 2 KAM run that
did not converge (artifacts are still written).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from . import io as tio
from .constructions import (
    SingularProfile,
    critical_sphere_example,
    no_weak_derivative_example,
    random_band_limited,
    singular_example,
    sphere_profile,
    unbounded_derivative_example,
)
from .diophantine import GOLDEN, dioph_constant
from .experiments import VERDICT_HEADER, sharpness_table
from .kam import KamParams, apply_transform, kam_run
from .lattice import FourierMap, GridField, grid_points, sphere_count, stack_components
from .modulus import derivative_l2_bound, dini_sum, modulus_profile
from .norms import BlockSpec, WeightFn, cauchy_tail, derivative_sup_partial_sums, weight_partial_sums, weighted_block_norm

EXIT_OK, EXIT_CONTRACT, EXIT_NOT_CONVERGED = 0, 1, 2

COMMON = {"out": "torusreg_out", "threads": None, "config": None}

DEFAULTS = {
    "sphere": {"n": 2, "r": 1},
    "norm": {"input": None, "fixture": "single", "n": 2, "d": 1, "K": 12, "decay": 2.0, "seed": 0,
             "tau": 1.0, "b": 2},
    "construct": {"kind": "random", "n": 2, "d": 1, "tau": 1.0, "b": 2, "log_alpha": 1.0, "nu_max": 20,
                  "K": 100, "sigma": 0.8, "N": 256, "seed": 0, "decay": 2.0},
    "modulus": {"input": None, "fixture": "random", "n": 2, "d": 1, "K": 8, "decay": 2.0, "seed": 0,
                "order": 1, "b": 2, "nu_max": 8, "samples": 256},
    "dioph": {"omega": "1,1.41421356", "tau": 1.0, "kmax": 1000},
    "kam": {"omega": "golden", "perturbation": None, "eps": 1e-3, "k0": 4, "b": 2, "max_steps": 20,
            "tol": 1e-10, "residual_grid": 64, "transform_grid": 0},
    "sharpness": {"nu_max": 60, "K": 500, "nu_max_weak": 20},
}

# flag -> (type, help)
FLAGS = {
    "n": (int, "torus dimension"),
    "r": (int, "l1 radius"),
    "d": (int, "number of components"),
    "K": (int, "l1 cutoff"),
    "N": (int, "grid points per axis"),
    "tau": (float, "exponent tau (weight |k|^(2 tau + 2))"),
    "b": (int, "block base"),
    "log_alpha": (float, "log-weight exponent"),
    "nu_max": (int, "last block / dyadic node"),
    "nu_max_weak": (int, "last block of the axis-mode example"),
    "sigma": (float, "log exponent of the singular profile"),
    "seed": (int, "RNG seed"),
    "decay": (float, "coefficient decay exponent for random fixtures"),
    "input": (str, "coefficient JSON file"),
    "fixture": (str, "built-in map: single or random"),
    "kind": (str, "jzt2, jzt4a, jzt4b, singular or random"),
    "order": (int, "derivative order m"),
    "samples": (int, "shift samples per radius"),
    "omega": (str, "comma separated frequency, or golden / sqrt2"),
    "kmax": (int, "largest |k| scanned"),
    "perturbation": (str, "coefficient JSON of P (d = n)"),
    "eps": (float, "size of the built-in golden-mean perturbation"),
    "k0": (int, "first cutoff K_0"),
    "max_steps": (int, "Newton step limit"),
    "tol": (float, "stop when the block norm of Q drops below this"),
    "residual_grid": (int, "grid size of the conjugacy residual"),
    "transform_grid": (int, "write Psi - Id on this grid (0: skip)"),
}


class _Parser(argparse.ArgumentParser):
    """Argument errors (including unknown flags) exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONTRACT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="torusreg", description="Block-weighted Sobolev norms, sharpness examples and a KAM engine.")
    p.add_argument("--version", action="version", version=f"torusreg {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for cmd, defaults in DEFAULTS.items():
        sp = sub.add_parser(cmd, argument_default=argparse.SUPPRESS)
        sp.add_argument("--out", help="output directory (default torusreg_out)")
        sp.add_argument("--threads", type=int, help="cap on BLAS/OpenMP threads; results do not depend on it")
        sp.add_argument("--config", help="JSON config; explicit flags override it")
        for key in defaults:
            typ, text = FLAGS[key]
            names = [f"--{key.replace('_', '-')}"]
            if key == "b":
                names.append("--base")
            if key == "kind":
                sp.add_argument("kind", nargs="?", choices=["jzt2", "jzt4a", "jzt4b", "singular", "random"],
                                help=text)
                continue
            sp.add_argument(*names, dest=key, type=typ, help=f"{text} (default {defaults[key]})")
    return p


def resolve_config(args: argparse.Namespace) -> dict:
    cmd = args.command
    cfg = {"command": cmd, **COMMON, **DEFAULTS[cmd]}
    given = {k: v for k, v in vars(args).items() if k != "command"}
    if given.get("config"):
        filed = tio.read_config(given["config"])
        if filed.get("command", cmd) != cmd:
            raise ValueError(f"config file is for '{filed['command']}', not '{cmd}'")
        unknown = set(filed) - set(cfg)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(filed)
    cfg.update(given)
    return cfg


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def parse_omega(text: str) -> tuple:
    t = str(text).strip().lower()
    if t == "golden":
        return (1.0, GOLDEN)
    if t == "sqrt2":
        return (1.0, math.sqrt(2.0))
    try:
        om = tuple(float(v) for v in t.split(","))
    except ValueError:
        raise ValueError(f"cannot parse omega '{text}'") from None
    if len(om) < 2:
        raise ValueError("omega needs at least two entries")
    return om


def golden_perturbation(eps: float) -> FourierMap:
    """eps (cos x_1, cos(x_1 + x_2))."""
    return stack_components([FourierMap.cosine((1, 0), eps), FourierMap.cosine((1, 1), eps)])


def single_mode_fixture() -> FourierMap:
    """cos(x_1 + 2 x_2): one conjugate pair on |k| = 3."""
    return FourierMap.cosine((1, 2))


def _load_map(cfg: dict) -> FourierMap:
    if cfg.get("input"):
        return tio.read_fourier_map(cfg["input"])
    if cfg["fixture"] == "single":
        return single_mode_fixture()
    if cfg["fixture"] == "random":
        return random_band_limited(cfg["n"], cfg["d"], cfg["K"], cfg["decay"], cfg["seed"])
    raise ValueError(f"unknown fixture '{cfg['fixture']}'")


def _outdir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    tio.write_config(out / "config.json", cfg)
    return out


BLOCK_HEADER = ("nu", "theta", "sqrt_theta", "partial_sum")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_sphere(cfg: dict) -> int:
    n, r = cfg["n"], cfg["r"]
    if n < 1 or r < 0:
        raise ValueError("need n >= 1 and r >= 0")
    count = sphere_count(n, r)
    out = _outdir(cfg)
    tio.write_json(out / "sphere.json", {"n": n, "r": r, "count": count}, cfg)
    print(count)
    return EXIT_OK


def cmd_norm(cfg: dict) -> int:
    f = _load_map(cfg)
    value, series = weighted_block_norm(f, BlockSpec(cfg["b"], cfg["tau"]))
    out = _outdir(cfg)
    tio.write_csv(out / "blocks.csv", BLOCK_HEADER, series.rows(), cfg)
    tio.write_json(out / "summary.json", {"block_norm": value, "blocks": int(series.theta.size),
                                          "tail": cauchy_tail(series.partials)}, cfg)
    print(f"{value:.6g}")
    return EXIT_OK


def cmd_construct(cfg: dict) -> int:
    kind = cfg["kind"]
    out = _outdir(cfg)
    n, tau, b = cfg["n"], cfg["tau"], cfg["b"]
    spec = BlockSpec(b, tau)
    summary = {"kind": kind}
    if kind == "jzt2":
        prof = sphere_profile(n, tau, b, cfg["log_alpha"], cfg["nu_max"])
        f = critical_sphere_example(n, tau, b, cfg["log_alpha"], cfg["nu_max"])
        value, series = weighted_block_norm(f, spec)
        logp = weight_partial_sums(f, tau, WeightFn.log_power(cfg["log_alpha"]), b)
        tio.write_csv(out / "shells.csv", ("nu", "radius", "count", "log_h"),
                      [(v, r, c, lh) for v, r, c, lh in zip(prof.nu, f.radii, f.counts, prof.log_h)], cfg)
        tio.write_csv(out / "blocks.csv", BLOCK_HEADER + ("log_weight_partial",),
                      [row + (float(lp),) for row, lp in zip(series.rows(), logp)], cfg)
        summary.update(block_partial=value, block_tail=cauchy_tail(series.partials),
                       log_norm=float(logp[-1]), log_tail=cauchy_tail(logp))
    elif kind == "jzt4a":
        f = unbounded_derivative_example(n, tau, cfg["log_alpha"], cfg["K"])
        radii = list(range(2, cfg["K"] + 1))
        p1 = derivative_sup_partial_sums(f, 1, radii)
        p2 = derivative_sup_partial_sums(f, 2, radii)
        tio.write_fourier_map(out / "coeffs.json", f, cfg)
        tio.write_csv(out / "majorant.csv", ("R", "order1", "order2"), zip(radii, p1, p2), cfg)
        summary.update(modes=f.size, order1_total=float(p1[-1]), order2_total=float(p2[-1]))
    elif kind == "jzt4b":
        f = no_weak_derivative_example(n, tau, b, cfg["nu_max"], cfg["d"])
        value, series = weighted_block_norm(f, spec)
        tio.write_fourier_map(out / "coeffs.json", f, cfg)
        tio.write_csv(out / "blocks.csv", BLOCK_HEADER, series.rows(), cfg)
        summary.update(block_norm=value)
    elif kind == "singular":
        prof = SingularProfile(n, cfg["sigma"])
        fg, fm, tg = singular_example(n, cfg["sigma"], cfg["N"], cfg["K"], prof)
        value, series = weighted_block_norm(fm, spec)
        tio.write_grid(out / "f.grid", fg)
        tio.write_grid(out / "target.grid", tg)
        tio.write_fourier_map(out / "coeffs.json", fm, cfg)
        tio.write_csv(out / "blocks.csv", BLOCK_HEADER, series.rows(), cfg)
        summary.update(l2_reduced=prof.l2_reduced(), block_partial=value,
                       block_tail=cauchy_tail(series.partials))
        if n == 2:
            summary["l2_cartesian"] = prof.l2_cartesian()
    elif kind == "random":
        f = random_band_limited(n, cfg["d"], cfg["K"], cfg["decay"], cfg["seed"])
        value, series = weighted_block_norm(f, spec)
        tio.write_fourier_map(out / "coeffs.json", f, cfg)
        tio.write_csv(out / "blocks.csv", BLOCK_HEADER, series.rows(), cfg)
        summary.update(block_norm=value)
    else:
        raise ValueError(f"unknown construction '{kind}'")
    tio.write_json(out / "summary.json", summary, cfg)
    return EXIT_OK


def cmd_modulus(cfg: dict) -> int:
    f = _load_map(cfg)
    m, b = cfg["order"], cfg["b"]
    prof = modulus_profile(f, m, b, cfg["nu_max"], cfg["samples"])
    # rows in decreasing x; the bracket accumulates from x = 1 downwards
    lb = math.log(b)
    vals = prof.values[::-1]
    rows = []
    for i, (x, v) in enumerate(zip(prof.x[::-1], vals)):
        rows.append((float(x), float(v), lb * math.fsum(vals[1:i + 1]), lb * math.fsum(vals[:i + 1])))
    out = _outdir(cfg)
    tio.write_csv(out / "modulus.csv", ("x", "modulus", "dini_lower", "dini_upper"), rows, cfg)
    br = dini_sum(prof, b)
    tio.write_json(out / "summary.json", {"order": m, "dini_lower": br.lower, "dini_upper": br.upper,
                                          "l2_bound": derivative_l2_bound(f, m)}, cfg)
    return EXIT_OK


def cmd_dioph(cfg: dict) -> int:
    om = parse_omega(cfg["omega"])
    est = dioph_constant(om, cfg["tau"], cfg["kmax"])
    n = len(om)
    out = _outdir(cfg)
    tio.write_csv(out / "shells.csv", ("r", "shell_min", "running_alpha") + tuple(f"k{j}" for j in range(n)),
                  est.rows(), cfg)
    tio.write_json(out / "summary.json", {"omega": list(om), "tau": est.tau, "K": est.K,
                                          "alpha_est": est.alpha, "argmin": list(est.argmin)}, cfg)
    print(f"alpha_est={est.alpha:.10g} argmin={est.argmin}")
    return EXIT_OK


def cmd_kam(cfg: dict) -> int:
    om = parse_omega(cfg["omega"])
    P = tio.read_fourier_map(cfg["perturbation"]) if cfg.get("perturbation") else golden_perturbation(cfg["eps"])
    params = KamParams(K0=cfg["k0"], b=cfg["b"], max_steps=cfg["max_steps"], tol=cfg["tol"],
                       residual_grid=cfg["residual_grid"])
    res = kam_run(P, om, params)
    out = _outdir(cfg)
    tio.write_csv(out / "history.csv", ("step", "block_norm", "sup_norm", "omega_tilde_norm", "cutoff"),
                  [(h.step, h.block_norm, h.sup_norm, h.omega_tilde_norm, h.cutoff) for h in res.history], cfg)
    tio.write_json(out / "summary.json", {
        "converged": res.converged,
        "reason": res.reason,
        "steps": res.steps,
        "omega_tilde": [float(v) for v in res.omega_tilde],
        "residual": res.residual,
    }, cfg)
    Ng = cfg["transform_grid"]
    if Ng:
        X = grid_points(len(om), Ng)
        disp = apply_transform(res.chain, X) - X
        disp = np.mod(disp + math.pi, 2 * math.pi) - math.pi
        tio.write_grid(out / "transform.grid", GridField(len(om), len(om), Ng, disp.reshape((Ng,) * len(om) + (len(om),))))
    print(f"converged={res.converged} steps={res.steps} residual={res.residual:.3e}")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_sharpness(cfg: dict) -> int:
    rows = sharpness_table(cfg["nu_max"], cfg["K"], cfg["nu_max_weak"])
    out = _outdir(cfg)
    tio.write_csv(out / "verdict.csv", VERDICT_HEADER, [r.row() for r in rows], cfg)
    width = max(len(r.example) + len(r.check) for r in rows) + 3
    for r in rows:
        label = f"{r.example}: {r.check}"
        print(f"{label:<{width}} {r.value:<12.6g} {r.threshold:<12.6g} {'pass' if r.passed else 'FAIL'}")
    return EXIT_OK


HANDLERS = {
    "sphere": cmd_sphere,
    "norm": cmd_norm,
    "construct": cmd_construct,
    "modulus": cmd_modulus,
    "dioph": cmd_dioph,
    "kam": cmd_kam,
    "sharpness": cmd_sharpness,
}


def run(cfg: dict) -> int:
    threads = cfg.get("threads")
    if threads is not None and threads < 1:
        raise ValueError("--threads must be >= 1")
    with threadpool_limits(limits=threads):
        return HANDLERS[cfg["command"]](cfg)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return run(cfg)
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"torusreg: error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
