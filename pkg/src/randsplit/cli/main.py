"""``randsplit`` command: parse arguments, run one experiment, write its artifacts.

Exit status is 0 when the run succeeds (and its check passes, for kinds that
have one), 2 when the check fails and 1 on any configuration or execution
error. Every outcome writes ``manifest.json`` to the output directory.
"""

import argparse
import os
import sys
import traceback

from .. import __version__
from .. import _kernels as K
from ..errors import RandSplitError
from . import output
from .config import KINDS, MANIFEST_MARKER, ConfigErrors, load_config
from .runners import RUNNERS

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randsplit",
        description="Random-splitting experiments for Lorenz-96 and truncated 2D Euler.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="kind", metavar="KIND", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", help="YAML config or a previous manifest.json")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key by dotted path")
        p.add_argument("--out", default="randsplit-out", help="output directory")
        p.add_argument("--seed", type=int, help="64-bit root seed (overrides run.seed)")
    return parser


def _manifest(kind, cfg, overrides, seed, status, code, errors, outputs=(), summary=None,
              substreams=None):
    return {
        MANIFEST_MARKER: 1,
        "version": __version__,
        "experiment": kind,
        "config": cfg.as_tree() if cfg is not None else None,
        "overrides": list(overrides),
        "seed": seed,
        "substreams": substreams or {},
        "status": status,
        "exit_code": code,
        "errors": list(errors),
        "outputs": list(outputs),
        "summary": summary or {},
    }


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {args.out}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    overrides = list(args.overrides) + ([f"run.seed={args.seed}"] if args.seed is not None else [])
    cfg = None
    try:
        cfg = load_config(args.config, args.overrides, args.kind, args.seed)
    except ConfigErrors as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        output.write_manifest(args.out, _manifest(args.kind, None, overrides, None, "error",
                                                  EXIT_ERROR, exc.problems))
        return EXIT_ERROR

    seed = cfg.run["seed"]
    K.set_threads()
    try:
        result = RUNNERS[cfg.experiment](cfg)
    except RandSplitError as exc:
        msg = f"{type(exc).__name__}: {exc}"
        print(f"error: {msg}", file=sys.stderr)
        output.write_manifest(args.out, _manifest(args.kind, cfg, overrides, seed, "error",
                                                  EXIT_ERROR, [msg]))
        return EXIT_ERROR
    except Exception as exc:  # unexpected failures still leave a manifest behind
        msg = f"{type(exc).__name__}: {exc}"
        traceback.print_exc()
        output.write_manifest(args.out, _manifest(args.kind, cfg, overrides, seed, "error",
                                                  EXIT_ERROR, [msg]))
        return EXIT_ERROR

    outputs = []
    for name, table in result.tables.items():
        fname = f"{name}.csv"
        output.write_table(os.path.join(args.out, fname), table.header, table.rows)
        outputs.append(fname)
    if result.passed is None:
        status, code = "ok", EXIT_OK
    elif result.passed:
        status, code = "pass", EXIT_OK
    else:
        status, code = "fail", EXIT_FAIL
    output.write_manifest(args.out, _manifest(args.kind, cfg, overrides, seed, status, code, [],
                                              outputs, result.summary, result.substreams))
    print(f"{cfg.experiment}: {status} (outputs in {args.out})")
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
