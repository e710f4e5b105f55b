"""Command-line entry point: ``wingsc-bench run|synth|demo``.

Exit codes: 0 success, 2 configuration error, 3 data or I/O error.
Errors are reported on stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources

from .bench import (
    ConfigError,
    DataError,
    SyntheticSource,
    emit_table,
    load_samples,
    parse_config,
    run_experiment,
    validate_config,
    write_table,
)
from .dataops import PGMFormatError, write_dataset

EXIT_CONFIG = 2
EXIT_DATA = 3


def _fail(kind, message, code, errors=()):
    payload = {"error": kind, "message": message}
    if errors:
        payload["fields"] = [{"path": p, "message": m} for p, m in errors]
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _with_overrides(spec, args):
    if getattr(args, "seed", None) is not None:
        spec = spec.model_copy(update={"seed": args.seed})
    return spec


def demo_config():
    text = resources.files("wingsc").joinpath("data/demo.json").read_text(encoding="utf-8")
    return validate_config(json.loads(text))


def _run(spec, args):
    table = run_experiment(spec, jobs=args.jobs)
    if args.out:
        write_table(table, args.out, args.format)
    sys.stdout.write(emit_table(table, args.format))
    return 0


def cmd_run(args):
    return _run(_with_overrides(parse_config(args.config), args), args)


def cmd_demo(args):
    return _run(_with_overrides(demo_config(), args), args)


def cmd_synth(args):
    spec = _with_overrides(parse_config(args.config), args)
    if not isinstance(spec.data_source, SyntheticSource):
        raise ConfigError(
            "synth needs a synthetic data_source",
            [("data_source.type", "expected 'synthetic'")],
        )
    if not args.out:
        raise ConfigError("synth needs --out DIR", [("--out", "required")])
    paths = write_dataset(load_samples(spec), args.out)
    print(f"wrote {len(paths)} images to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wingsc-bench",
        description="Recognition-rate sweeps for wing-loss sparse coding classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=("csv", "markdown"), default="csv")
        p.add_argument("--out", help="output table path (synth: output directory)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="worker threads per sweep cell")

    p = sub.add_parser("run", help="run the sweep described by a JSON config")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", help="write the config's synthetic dataset as PGM files")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("demo", help="run the bundled tiny sweep")
    common(p)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_CONFIG, exc.errors)
    except (DataError, PGMFormatError) as exc:
        return _fail("data", str(exc), EXIT_DATA)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_DATA)


if __name__ == "__main__":
    sys.exit(main())
