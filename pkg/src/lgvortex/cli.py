"""Command line entry point.

Exit codes: 0 all checks pass, 1 a check failed or was unresolved,
2 usage or configuration error, 3 numerical non-convergence.
Log verbosity comes from the LGVORTEX_LOG environment variable.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from .config import config_from_mapping, load_document
from .errors import (ChannelNonConvergence, NoConvergence, NonConvergence, ParseError,
                     StageFailure, ValidationError)
from .pipeline import PLOTS, emit_plot_data, run

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

COMMANDS = {
    "solve": (["profile", "background"], "solve the radial profile and sample the 2D background"),
    "spectrum": (["spectrum"], "smallest singular values and zero modes of D"),
    "index": (["index"], "kernel counts of D and its adjoint and the index"),
    "verify-algebra": (["algebra"], "check the supersymmetry algebra relations"),
    "boson-map": (["bosonmap"], "map fermionic zero modes to bosonic fluctuations"),
    "report": (["all"], "full pipeline plus plot-ready tables"),
}
_NUMERIC = (NonConvergence, NoConvergence, ChannelNonConvergence)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML or JSON run configuration")
    p.add_argument("--n", type=int, help="vorticity")
    p.add_argument("--e", type=float, help="gauge coupling")
    p.add_argument("--v", type=float, help="vacuum expectation value")
    p.add_argument("--r-max", dest="r_max", type=float, help="radial cutoff (default 12/(ev))")
    p.add_argument("--m-r", dest="m_r", type=int, help="radial grid intervals")
    p.add_argument("--method", choices=["relaxation", "shooting"], help="profile solver")
    p.add_argument("--grid", "--m-xy", dest="m_xy", type=int, help="points per side of the 2D grid")
    p.add_argument("--scheme", choices=["central2", "central4"], help="difference stencil")
    p.add_argument("--k", type=int, help="number of singular values requested")
    p.add_argument("--tol-zero", dest="tol_zero", type=float,
                   help="kernel threshold (default 1e-3 ev)")
    p.add_argument("--seed", type=int, help="Lanczos start vector seed")
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.add_argument("--print-config", action="store_true",
                   help="print the effective configuration and exit")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lgvortex", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        _common(sub.add_parser(name, help=help_text, description=help_text))
    return p


def _load_document(path: Optional[Path]) -> dict:
    if path is None:
        return {}
    try:
        doc = load_document(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ParseError("configuration must be a key-value mapping")
    return doc


def main(argv: Optional[List[str]] = None) -> int:
    level = os.environ.get("LGVORTEX_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    keys = ("n", "e", "v", "r_max", "m_r", "method", "m_xy", "scheme", "k", "tol_zero", "seed",
            "output_dir")
    overrides = {k: getattr(args, k) for k in keys}
    overrides["pipeline"] = COMMANDS[args.command][0]
    try:
        cfg = config_from_mapping(_load_document(args.config), overrides)
    except (ParseError, ValidationError) as exc:
        print(f"lgvortex: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.print_config:
        print(cfg.to_yaml(), end="")
        return EXIT_OK

    try:
        manifest = run(cfg)
    except StageFailure as exc:
        print(f"lgvortex: {exc}", file=sys.stderr)
        return EXIT_NUMERIC if isinstance(exc.cause, _NUMERIC) else EXIT_CHECK
    if args.command == "report":
        for which in PLOTS:
            emit_plot_data(manifest, which)

    print(json.dumps({"output_dir": manifest.output_dir, "checks": manifest.checks},
                     indent=2, sort_keys=True))
    return EXIT_OK if manifest.all_passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
