"""Command-line entry point: ``netpower <command> [flags]``.

Exit codes: 0 success, 2 configuration error, 3 runtime or statistical
degeneracy. Output files are written atomically, so a failed run leaves no
partial CSV behind.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .config import RunConfig, resolve
from .errors import ConfigError, DesignError, GraphFormatError, NetPowerError

log = logging.getLogger("netpower")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _graph(cfg: RunConfig):
    from .graph import generate, load_edge_list

    if cfg.graph_path is not None:
        try:
            return load_edge_list(cfg.graph_path)
        except OSError as exc:
            raise ConfigError(f"cannot read graph {cfg.graph_path}: {exc.strerror}") from None
    return generate(cfg.profile, cfg.seed)


# -- commands ------------------------------------------------------------------


def cmd_generate_graph(cfg: RunConfig, args) -> int:
    from .graph import generate, write_edge_list

    if cfg.profile is None:
        raise ConfigError("generate-graph needs a graph profile (graph.n, graph.density)")
    g = generate(cfg.profile, cfg.seed)
    path = cfg.out_dir / "graph.edgelist"
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        write_edge_list(g, tmp)
        os.replace(tmp, path)
    finally:
        tmp.unlink(missing_ok=True)
    print(f"n={g.n} edges={g.n_edges} density={g.density:.6f} path={path}")
    return EXIT_OK


def cmd_exposure_probs(cfg: RunConfig, args) -> int:
    from .design import exposure_probs_closed_form, exposure_probs_monte_carlo, is_independent
    from .errors import UnsupportedDesignError
    from .rng import as_key

    g = _graph(cfg)
    d = cfg.design(g.n)
    if args.mc:
        reps = int(cfg.get("exposure.replications", 100_000))
        pi = exposure_probs_monte_carlo(d, g, reps, as_key(cfg.seed).child("exposure"))
        method = "mc"
    else:
        if not is_independent(d):
            raise UnsupportedDesignError(f"{d.kind} design has no closed form; rerun with --mc")
        pi = exposure_probs_closed_form(d, g)
        method = "closed"
    lines = [f"# seed={cfg.seed}", "node,pi_d1,pi_d00,pi_d01,method"]
    lines += [f"{i},{r[0]!r},{r[1]!r},{r[2]!r},{method}" for i, r in enumerate(pi.tolist())]
    path = cfg.out_dir / "exposure_probs.csv"
    _write_atomic(path, "\n".join(lines) + "\n")
    print(f"wrote {path} ({g.n} nodes, method={method})")
    return EXIT_OK


def cmd_power(cfg: RunConfig, args) -> int:
    from .harness import ESTIMATE_HEADER, RITEST_HEADER, replicate_details, rows_to_csv, run_grid

    g = _graph(cfg)
    grid = cfg.grid()
    n_cells = len(grid.scenarios())
    log.info("power grid: %d cells x %d replicates, %d workers", n_cells, grid.replicates, args.workers)
    table = run_grid(g, grid, workers=args.workers)
    outputs = {cfg.out_dir / "power.csv": table.to_csv()}
    if args.details:
        for ci, sc in enumerate(grid.scenarios()):
            est, ri = replicate_details(
                g, sc, grid.replicates, grid.permutations, grid.seed, grid.tests, grid.joint_method
            )
            outputs[cfg.out_dir / "details" / f"cell{ci:04d}_estimates.csv"] = rows_to_csv(ESTIMATE_HEADER, est, grid.seed)
            outputs[cfg.out_dir / "details" / f"cell{ci:04d}_ritests.csv"] = rows_to_csv(RITEST_HEADER, ri, grid.seed)
    for path, text in outputs.items():
        _write_atomic(path, text)
    print(f"wrote {cfg.out_dir / 'power.csv'} ({n_cells} cells, {len(grid.tests)} tests)")
    return EXIT_OK


def cmd_degcor(cfg: RunConfig, args) -> int:
    from .harness import degree_correlation_study

    g = _graph(cfg)
    base, gammas, reps = cfg.degcor()
    table = degree_correlation_study(g, base, gammas, reps, cfg.seed, workers=args.workers, joint_method=cfg.joint_method())
    slope, se = table.slope()
    path = cfg.out_dir / "degcor.csv"
    _write_atomic(path, table.to_csv())
    print(f"wrote {path}; power-on-correlation slope {slope:.4f} (se {se:.4f})")
    return EXIT_OK


COMMANDS = {
    "generate-graph": (cmd_generate_graph, "generate a synthetic graph from a profile"),
    "exposure-probs": (cmd_exposure_probs, "per-node exposure-condition probabilities"),
    "power": (cmd_power, "power table over the scenario grid"),
    "degcor": (cmd_degcor, "power against realized degree/treatment correlation"),
}


def build_parser() -> argparse.ArgumentParser:
    from .harness import default_workers

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value configuration file")
    common.add_argument("--preset", choices=("desk", "paper"), help="named defaults, overridden by --config")
    common.add_argument("--seed", type=int, metavar="U64", help="master seed (required here or in the config)")
    common.add_argument("--workers", type=int, default=default_workers(), metavar="N", help="worker processes")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="netpower", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "exposure-probs":
            p.add_argument("--mc", action="store_true", help="Monte Carlo instead of the closed form")
        if name == "power":
            p.add_argument("--details", action="store_true", help="also write per-replicate estimate and test CSVs")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg = resolve(args.config, args.preset, args.seed, args.out)
        func = COMMANDS[args.command][0]
        return func(cfg, args)
    except (ConfigError, DesignError, GraphFormatError) as exc:
        print(f"netpower: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NetPowerError as exc:
        print(f"netpower: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
