"""Command-line entry point: score / evaluate / report / parse / cache.

Exit codes: 0 success, 1 usage error, 2 data error, 3 transport failure.
Diagnostics go to stderr, data to stdout or files. Secrets come only from
the environment (``GEMBA_API_KEY``), never from flags or config files, so
run directories stay shareable.

A config file may supply any long flag as a flat ``key = value`` line
(TOML-like subset: ``#`` comments, bare or double-quoted values, commas for
lists). Flags override config values. ``lang.<code> = <Name>`` entries
extend the language-name table used in prompts.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .backend import BACKEND_KINDS, BackendConfig, ResponseCache, make_backend
from .corpus import load_evalset, validate_gold
from .errors import (
    AuthMissing,
    CacheMiss,
    DataError,
    GembaError,
    TransportError,
    UsageError,
)
from .metaeval import TauVariant, evaluate_all
from .parsing import AnswerDomain, ParsedScore, parse
from .prompts import PromptVariant, variant_names
from .report import (
    failure_table,
    render_distribution,
    render_failure_table,
    render_run_summary,
    run_distributions,
)
from .scoring import RetryPolicy, score_evalset

logger = logging.getLogger("gemba")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; this package reserves 2 for
    # data errors.
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def read_config(path: str | Path) -> dict[str, str]:
    """Parse the flat key-value config grammar described in the module docstring."""
    values: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
        value = value.strip()
        if value.startswith('"') and value.endswith('"') and len(value) >= 2:
            value = value[1:-1]
        values[key.strip()] = value
    return values


def _setting(args: argparse.Namespace, config: dict[str, str], key: str, default=None):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def _language_names(config: dict[str, str]) -> dict[str, str]:
    return {
        key.split(".", 1)[1]: value
        for key, value in config.items()
        if key.startswith("lang.") and value
    }


def _parse_pairs(raw) -> list[str]:
    if raw is None:
        raise UsageError("no language pair given; pass --pair or set 'pairs' in the config")
    if isinstance(raw, list):
        joined = ",".join(raw)
    else:
        joined = raw
    pairs = [p.strip() for p in joined.split(",") if p.strip()]
    if not pairs:
        raise UsageError("no language pair given")
    return pairs


def _variant(raw) -> PromptVariant:
    if raw is None:
        raise UsageError(f"no variant given; valid names: {', '.join(variant_names())}")
    return PromptVariant.from_name(str(raw))


def _backend_config(args: argparse.Namespace, config: dict[str, str]) -> BackendConfig:
    return BackendConfig(
        kind=str(_setting(args, config, "backend", "mock")),
        endpoint_url=str(_setting(args, config, "endpoint", "") or ""),
        model_name=str(_setting(args, config, "model", "mock")),
        max_tokens=int(_setting(args, config, "max_tokens", 100)),
        timeout=float(_setting(args, config, "timeout", 60.0)),
        max_parallel=int(_setting(args, config, "parallel", 1)),
        cache_path=str(_setting(args, config, "cache", "") or ""),
    )


def _policy(args: argparse.Namespace, config: dict[str, str]) -> RetryPolicy:
    ladder_raw = _setting(args, config, "ladder")
    kwargs = {}
    if ladder_raw is not None:
        try:
            kwargs["temperature_ladder"] = tuple(
                float(t.strip()) for t in str(ladder_raw).split(",") if t.strip()
            )
        except ValueError:
            raise UsageError(f"bad temperature ladder: {ladder_raw!r}") from None
    samples = _setting(args, config, "samples_per_rung")
    if samples is not None:
        kwargs["samples_per_rung"] = int(samples)
    cap = _setting(args, config, "give_up_after")
    if cap is not None:
        kwargs["give_up_after"] = int(cap)
    return RetryPolicy(**kwargs)


def _cmd_score(args: argparse.Namespace) -> int:
    config = read_config(args.config) if args.config else {}
    data_root = _setting(args, config, "data")
    run_dir = _setting(args, config, "run")
    if data_root is None:
        raise UsageError("no data root given; pass --data")
    if run_dir is None:
        raise UsageError("no run directory given; pass --run")
    pairs = _parse_pairs(_setting(args, config, "pair") or config.get("pairs"))
    variant = _variant(_setting(args, config, "variant"))
    backend = make_backend(_backend_config(args, config))
    policy = _policy(args, config)
    names = _language_names(config)

    aborted = 0
    for pair_code in pairs:
        evalset = load_evalset(data_root, pair_code, names or None)
        for warning in validate_gold(evalset):
            logger.warning("%s: %s", pair_code, warning)
        results = score_evalset(evalset, variant, backend, policy, run_dir)
        for system, (score, _records) in sorted(results.items()):
            logger.info(
                "%s %s %s: mean=%.3f scored=%d failed=%d aborted=%d",
                pair_code,
                variant.name,
                system,
                score.mean,
                score.scored_count,
                score.failed_count,
                score.aborted_count,
            )
            aborted += score.aborted_count
    if aborted:
        logger.error("%d segments aborted on transport failures; rerun to resume", aborted)
        return 3
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = read_config(args.config) if args.config else {}
    data_root = _setting(args, config, "data")
    run_dir = _setting(args, config, "run")
    if data_root is None or run_dir is None:
        raise UsageError("evaluate needs --run and --data")
    tau = TauVariant(str(_setting(args, config, "tau", TauVariant.TAU_B.value)))
    names = _language_names(config)

    run_root = Path(run_dir)
    if not run_root.is_dir():
        raise DataError(f"run directory not found: {run_root}")
    pair_codes = sorted(p.name for p in run_root.iterdir() if p.is_dir())
    gold = {code: load_evalset(data_root, code, names or None) for code in pair_codes}

    results = evaluate_all(run_dir, gold, tau, pool_accuracy=not args.per_pair_average)
    columns = sorted({code for result in results.values() for code in result.tau_by_pair})
    print("\t".join(["metric", "accuracy", "pairs", *columns]))
    from .metaeval import run_model_name

    for variant_name, result in results.items():
        model = next(
            (
                run_model_name(run_dir, code, variant_name)
                for code in pair_codes
                if run_model_name(run_dir, code, variant_name) != "unknown"
            ),
            "unknown",
        )
        taus = [
            f"{result.tau_by_pair[code]:.3f}" if code in result.tau_by_pair else "---"
            for code in columns
        ]
        print("\t".join([f"{model}-{variant_name}", f"{result.accuracy:.3f}", str(result.pairs_total), *taus]))
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    if args.kind == "distribution":
        for _variant_name, dist in run_distributions(args.run).items():
            sys.stdout.write(render_distribution(dist, args.format))
    elif args.kind == "failures":
        sys.stdout.write(render_failure_table(failure_table([args.run]), args.format))
    else:
        sys.stdout.write(render_run_summary(args.run, args.format))
    return 0


def _cmd_parse(args: argparse.Namespace) -> int:
    try:
        domain = AnswerDomain(args.domain)
    except ValueError:
        valid = ", ".join(d.value for d in AnswerDomain)
        raise UsageError(f"unknown domain {args.domain!r}; valid: {valid}") from None
    for line in sys.stdin:
        result = parse(domain, line.rstrip("\n"))
        if isinstance(result, ParsedScore):
            print(result.value)
        else:
            print(f"INVALID:{result}")
    return 0


def _cmd_cache(args: argparse.Namespace) -> int:
    cache = ResponseCache(args.path)
    if args.action == "compact":
        kept = cache.compact()
        logger.info("compacted %s to %d entries", args.path, kept)
        return 0
    models: dict[str, int] = {}
    for entry in cache.entries():
        models[entry["model"]] = models.get(entry["model"], 0) + 1
    print(f"entries\t{len(cache)}")
    for model in sorted(models):
        print(f"model:{model}\t{models[model]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gemba", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--version", action="version", version=f"gemba {__version__}")
        p.add_argument("--config", help="flat key=value config file; flags override it")

    score = sub.add_parser("score", parents=[], help="score a corpus into a run store")
    common(score)
    score.add_argument("--data", help="corpus root directory")
    score.add_argument("--pair", action="append", help="language pair code (repeatable or comma-separated)")
    score.add_argument("--variant", help=f"one of: {', '.join(variant_names())}")
    score.add_argument("--run", help="run store directory (created/resumed)")
    score.add_argument("--backend", choices=BACKEND_KINDS, help="completion source (default mock)")
    score.add_argument("--endpoint", help="HTTP endpoint URL for http backends")
    score.add_argument("--model", help="model name sent to the backend and recorded in the manifest")
    score.add_argument("--max-tokens", dest="max_tokens", type=int, help="completion token cap")
    score.add_argument("--timeout", type=float, help="HTTP timeout in seconds")
    score.add_argument("--parallel", type=int, help="max in-flight requests")
    score.add_argument("--cache", help="record answers to / replay answers from this cache file")
    score.add_argument("--ladder", help="comma-separated temperature ladder, e.g. 0.0,0.2,0.4")
    score.add_argument("--samples-per-rung", dest="samples_per_rung", type=int)
    score.add_argument("--give-up-after", dest="give_up_after", type=int)
    score.set_defaults(func=_cmd_score)

    evaluate = sub.add_parser("evaluate", help="correlate a run store with gold judgments")
    common(evaluate)
    evaluate.add_argument("--run", help="run store directory")
    evaluate.add_argument("--data", help="corpus root holding the gold judgments")
    evaluate.add_argument("--tau", choices=[t.value for t in TauVariant], help="tie treatment (default tau_b)")
    evaluate.add_argument(
        "--per-pair-average",
        action="store_true",
        help="average per-pair accuracies instead of pooling pair counts",
    )
    evaluate.set_defaults(func=_cmd_evaluate)

    report = sub.add_parser("report", help="render diagnostic tables from a run store")
    common(report)
    report.add_argument("--run", required=True, help="run store directory")
    report.add_argument(
        "--kind", choices=("distribution", "failures", "summary"), default="summary"
    )
    report.add_argument("--format", choices=("tsv", "md"), default="tsv")
    report.set_defaults(func=_cmd_report)

    parse_cmd = sub.add_parser("parse", help="normalize answer lines from stdin")
    common(parse_cmd)
    parse_cmd.add_argument("--domain", required=True, help="score_0_100 | stars_1_5 | class_label")
    parse_cmd.set_defaults(func=_cmd_parse)

    cache = sub.add_parser("cache", help="inspect or compact a replay cache")
    common(cache)
    cache.add_argument("action", choices=("inspect", "compact"))
    cache.add_argument("path", help="cache index file")
    cache.set_defaults(func=_cmd_cache)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            logging.getLogger().setLevel(logging.DEBUG)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TransportError, AuthMissing, CacheMiss) as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 3
    except GembaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("interrupted; completed records were flushed, rerun to resume", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
