"""Command line entry point: ``spotvol simulate | estimate | mc-rate | kernel-info``.

Options come from built-in defaults, then an optional ``--config`` JSON file,
then explicit flags (flags win). The fully resolved option set is written
into every manifest.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import io
from .errors import ConfigError, SpotVolError
from .estimator import EstimatorConfig, default_kappa, estimate
from .kernels import make_kernel
from .rates import REGIONS, run_campaign
from .simulate import NoiseModel, make_scenario, simulate_observations
from .wavelets import make_basis

DEFAULTS: dict[str, dict[str, Any]] = {
    "simulate": {
        "scenario": "sine",
        "n": None,
        "noise_a": 0.01,
        "eta_law": "gaussian",
        "refinement": 16,
        "seed": None,
        "out": "obs.csv",
        "out_dir": ".",
        "keep_truth": False,
        "jobs": 1,
    },
    "estimate": {
        "input": None,
        "out": "estimate.csv",
        "out_dir": ".",
        "kernel": "step",
        "basis": "daubechies-4",
        "m": None,
        "alpha0": 0.25,
        "ell0": None,
        "ell1": None,
        "kappa": None,
        "cbar": None,
        "grid_size": 1025,
        "clip_nonneg": False,
        "seed": None,
        "jobs": 1,
    },
    "mc-rate": {
        "scenario": "sine",
        "noise_a": 0.01,
        "eta_law": "gaussian",
        "n_grid": [4096, 16384, 65536],
        "replicates": 20,
        "seed": None,
        "p": 2.0,
        "alpha0": 0.25,
        "kernel": "step",
        "basis": "daubechies-4",
        "refinement": 16,
        "region": "interior",
        "out": "campaign",
        "out_dir": ".",
        "jobs": 1,
    },
    "kernel-info": {
        "kernel": "step",
        "kernel_file": None,
        "cbar": 1.0,
        "a_sup": 0.0,
        "seed": None,
        "out_dir": ".",
        "jobs": 1,
    },
}


def _n_grid(text: str) -> list[int]:
    try:
        return [int(eval_int(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad n grid {text!r}") from None


def eval_int(token: str) -> int:
    """``"4096"`` or ``"2^12"`` -> 4096."""
    token = token.strip()
    if "^" in token:
        base, exp = token.split("^")
        return int(base) ** int(exp)
    return int(token)


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, help="base seed; all randomness derives from it")
    shared.add_argument("--out-dir", help="directory for output files")
    shared.add_argument("--config", help="JSON file with option values (flags override it)")
    shared.add_argument("--jobs", type=int, help="parallel workers for Monte Carlo cells")

    parser = argparse.ArgumentParser(prog="spotvol", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[shared], help="simulate noisy observations")
    p.add_argument("--scenario", help="constant | sine | ito | fbm")
    p.add_argument("--n", type=eval_int, help="number of increments (n + 1 observations)")
    p.add_argument("--noise-a", type=float, help="noise standard deviation a")
    p.add_argument("--eta-law", choices=["gaussian", "uniform", "rademacher"])
    p.add_argument("--refinement", type=int, help="Euler substeps per observation interval")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--keep-truth", action="store_const", const=True, help="also write x and sigma2 columns")

    p = sub.add_parser("estimate", parents=[shared], help="estimate sigma^2 from a t,z CSV")
    p.add_argument("--input", help="observation CSV with header t,z")
    p.add_argument("--out", help="output CSV path for t,sigma2_hat")
    p.add_argument("--kernel", help="step | sine")
    p.add_argument("--basis", help="haar | daubechies-4 | daubechies-6 | daubechies-8")
    p.add_argument("--m", type=int, help="block count (default floor(sqrt(n)))")
    p.add_argument("--alpha0", type=float)
    p.add_argument("--ell0", type=int)
    p.add_argument("--ell1", type=int)
    p.add_argument("--kappa", type=float, help="threshold constant (default from the deviation bound)")
    p.add_argument("--cbar", type=float, help="volatility sup-bound for the default threshold")
    p.add_argument("--grid-size", type=int, help="points of the output grid on [0, 1]")
    p.add_argument("--clip-nonneg", action="store_const", const=True, help="clip negative estimates to 0")

    p = sub.add_parser("mc-rate", parents=[shared], help="Monte Carlo rate campaign")
    p.add_argument("--scenario")
    p.add_argument("--noise-a", type=float)
    p.add_argument("--eta-law", choices=["gaussian", "uniform", "rademacher"])
    p.add_argument("--n-grid", type=_n_grid, help="comma separated sizes, e.g. 2^12,2^14,2^16")
    p.add_argument("--replicates", type=int)
    p.add_argument("--p", type=float, help="loss exponent")
    p.add_argument("--alpha0", type=float)
    p.add_argument("--kernel")
    p.add_argument("--basis")
    p.add_argument("--refinement", type=int)
    p.add_argument("--region", choices=sorted(REGIONS))
    p.add_argument("--out", help="output file prefix")

    p = sub.add_parser("kernel-info", parents=[shared], help="report kernel constants")
    p.add_argument("--kernel")
    p.add_argument("--kernel-file", help="JSON kernel descriptor")
    p.add_argument("--cbar", type=float)
    p.add_argument("--a-sup", type=float, help="noise sup-norm for the threshold constant")
    return parser


def resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    cfg = dict(DEFAULTS[args.command])
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(from_file) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        cfg.update(from_file)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _kernel(cfg: dict):
    if cfg.get("kernel_file"):
        try:
            with open(cfg["kernel_file"], encoding="utf-8") as fh:
                desc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read kernel file: {exc}") from None
        return make_kernel(desc)
    return make_kernel(cfg["kernel"])


def _out_path(cfg: dict, name: str) -> Path:
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / name


def cmd_simulate(cfg: dict, parser: argparse.ArgumentParser) -> int:
    if cfg["n"] is None:
        parser.error("simulate requires --n")
    if cfg["seed"] is None:
        parser.error("simulate requires --seed")
    scenario = make_scenario(cfg["scenario"])
    noise = NoiseModel(a=float(cfg["noise_a"]), eta_law=cfg["eta_law"])
    obs = simulate_observations(scenario, noise, int(cfg["n"]), seed=int(cfg["seed"]), refinement=int(cfg["refinement"]))
    path = _out_path(cfg, cfg["out"])
    io.write_observations(path, obs, keep_truth=bool(cfg["keep_truth"]))
    io.write_json(
        io.sidecar(path, "manifest.json"),
        io.manifest("simulate", cfg, scenario=scenario.describe(), noise=noise.describe(), rows=obs.n + 1),
    )
    print(json.dumps({"out": str(path), "n": obs.n, "seed": cfg["seed"]}))
    return 0


def cmd_estimate(cfg: dict, parser: argparse.ArgumentParser) -> int:
    if cfg["input"] is None:
        parser.error("estimate requires --input")
    obs, span = io.read_observations(cfg["input"])
    config = EstimatorConfig(
        m=cfg["m"],
        alpha0=float(cfg["alpha0"]),
        ell0=cfg["ell0"],
        ell1=cfg["ell1"],
        kappa_tilde=cfg["kappa"],
        kernel=cfg["kernel"],
        basis=cfg["basis"],
        cbar=cfg["cbar"],
        clip_nonneg=bool(cfg["clip_nonneg"]),
    )
    grid = np.linspace(0.0, 1.0, int(cfg["grid_size"]))
    est = estimate(obs, config, out_grid=grid)
    if not np.all(np.isfinite(est.values)):
        raise SpotVolError("estimate produced non-finite values")
    path = _out_path(cfg, cfg["out"])
    io.write_csv(path, ["t", "sigma2_hat"], [span["t0"] + span["horizon"] * grid, est.values])
    coef_path = io.sidecar(path, "coefficients.json")
    coef_path.write_text(est.coefficients.to_json() + "\n", encoding="utf-8")
    io.write_json(io.sidecar(path, "manifest.json"), io.manifest("estimate", cfg, estimate=est.manifest(), time_span=span))
    man = est.manifest()
    summary = {**{k: man[k] for k in ("n", "m", "ell0", "ell1", "tau")}, "kept": man["kept_detail"]}
    print(json.dumps(summary))
    return 0


def cmd_mc_rate(cfg: dict, parser: argparse.ArgumentParser) -> int:
    if cfg["seed"] is None:
        parser.error("mc-rate requires --seed")
    n_grid = [int(n) for n in cfg["n_grid"]]
    if len(n_grid) < 3:
        raise ConfigError("mc-rate needs an n grid with at least 3 sizes")
    if int(cfg["replicates"]) < 2:
        raise ConfigError("mc-rate needs at least 2 replicates per n")
    result = run_campaign(
        make_scenario(cfg["scenario"]),
        NoiseModel(a=float(cfg["noise_a"]), eta_law=cfg["eta_law"]),
        make_kernel(cfg["kernel"]),
        make_basis(cfg["basis"]),
        n_grid,
        int(cfg["replicates"]),
        int(cfg["seed"]),
        p=float(cfg["p"]),
        config=EstimatorConfig(alpha0=float(cfg["alpha0"]), kernel=cfg["kernel"], basis=cfg["basis"]),
        refinement=int(cfg["refinement"]),
        jobs=int(cfg["jobs"]),
    )
    region = cfg["region"]
    prefix = cfg["out"]
    payload = result.to_dict()
    result_path = _out_path(cfg, f"{prefix}.json")
    io.write_json(result_path, payload)
    # run config lives in the sidecar so result files do not depend on --jobs or --out-dir
    io.write_json(io.sidecar(result_path, "manifest.json"), io.manifest("mc-rate", cfg, n_grid=n_grid))
    errs = result.errors[region]
    ns = np.repeat(n_grid, result.replicates)
    reps = np.tile(np.arange(result.replicates), len(n_grid))
    io.write_csv(_out_path(cfg, f"{prefix}_errors.csv"), ["n", "replicate", "lp_error"], [ns, reps, errs.ravel()])
    summ = result.summary(region)
    io.write_csv(
        _out_path(cfg, f"{prefix}_summary.csv"),
        ["n", "median", "q25", "q75"],
        [n_grid, summ["median"], summ["q25"], summ["q75"]],
    )
    slope, se = result.slope(region)
    print(f"slope = {slope:.6f} +/- {se:.6f} (region {region}, p = {cfg['p']})")
    return 0


def cmd_kernel_info(cfg: dict, parser: argparse.ArgumentParser) -> int:
    kernel = _kernel(cfg)
    prof = kernel.profiles()
    kappa = default_kappa(kernel, float(cfg["a_sup"]) ** 2, float(cfg["cbar"]))
    lines = [
        f"kernel            {kernel.name}",
        f"bar_lambda        {kernel.bar_lambda:.6f}",
        f"||lambda||_L2     {kernel.l2_norm:.6f}",
        f"||lambda~||_L2    {kernel.normalized_l2_norm:.6f}",
        f"||Lambda||_L2     {prof.Lambda_l2():.6f}",
        f"||LambdaBar||_L2  {prof.LambdaBar_l2():.6f}",
        f"kappa (cbar={float(cfg['cbar']):g}, a={float(cfg['a_sup']):g})  {kappa:.6f}",
    ]
    print("\n".join(lines))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "mc-rate": cmd_mc_rate,
    "kernel-info": cmd_kernel_info,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, parser)
    except SpotVolError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4 if exc.exit_code == 1 else exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
