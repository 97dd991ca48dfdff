import argparse
import json
import logging
import sys
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from . import __version__
from .analysis import (
    AnalysisError, MonteCarloSummary, det_A1, det_matches, eta_cramer_check, lp_bound, rank_report,
    verify_projection_identity, verify_rank_chain, verify_rank_monotonic, verify_stat_equiv,
)
from .indexing import IndexContext, check_constancy, check_inverse
from .params import (
    AntennaConfig, Case, ConfigError, UserAntennas, config_grid, derive, ic_derive,
    ic_sum_ldof, outside_time_sharing, per_user_ldof, region_vertices, scheme_params, sum_ldof,
)
from .precoder import build_plan
from .receiver import BlindAlignmentSimulator, DECODE_TOL
from .serialization import config_to_dict, dumps, load_config_text, load_ic_config_text, rational, write_csv
from .switching import assemble_schedule

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_CONFIG = 3
EXIT_ARGS = 4
EXIT_VERIFY = 5

SUITES = ("proj", "rank-monotonic", "rank-chain", "stat-equiv", "lp", "det", "cramer", "indexing")
SWEEP_AXES = ("K", "M", "N")
MAX_SIMULATED_N = 1500  # dense beamformers are n*M rows
SEED_LIMIT = 2 ** 64


class CLIError(Exception):
    """Base class for CLI errors"""
    pass


class _Parser(argparse.ArgumentParser):
    # argument problems map to exit code 4 instead of argparse's 2
    def error(self, message):
        raise CLIError(message)


@dataclass(frozen=True)
class RunConfig:
    command: str
    config_path: Optional[str] = None
    inline: Optional[str] = None
    seed: int = 0
    trials: int = BlindAlignmentSimulator.DEFAULT_TRIALS
    tol: float = DECODE_TOL
    fmt: str = "json"
    out: Optional[str] = None
    suites: Tuple[str, ...] = SUITES
    axis: Optional[str] = None
    values: Tuple[int, ...] = ()
    curves: Tuple[int, ...] = ()
    simulate: bool = False
    dump_plan: bool = False
    max_n: int = MAX_SIMULATED_N
    progress: bool = False

    def config_text(self) -> Optional[str]:
        if self.inline is not None:
            return self.inline
        if self.config_path is not None:
            try:
                return Path(self.config_path).read_text(encoding="utf-8")
            except OSError as e:
                raise CLIError(f"Cannot read config file: {str(e)}")
        return None


def _check_block_length(n: Optional[int], M: int, max_n: int) -> None:
    if n is not None and n > max_n:
        raise CLIError(f"Block length n={n} exceeds --max-n {max_n} "
                       f"(dense beamformers would have {n * M} rows)")


class BlindAlignCLI:
    def __init__(self, log_level: int = logging.INFO):
        self.logger = logging.getLogger("blindalign")
        self.logger.setLevel(log_level)

        if not self.logger.handlers:
            console_handler = logging.StreamHandler()
            console_handler.setFormatter(
                logging.Formatter('%(asctime)s - %(levelname)s - %(message)s')
            )
            self.logger.addHandler(console_handler)
        self.log_level = log_level

    def analyze(self, config: AntennaConfig, dump_plan: bool = False, seed: int = 0,
                max_n: int = MAX_SIMULATED_N) -> Dict[str, Any]:
        """Closed-form parameters and LDoF values.

        ``dump_plan`` adds the transmit plan, the switching schedule and the
        rank of the stacked beamformers for inspection.
        """
        derived = derive(config)
        report = {
            "case": derived.case.value,
            "T": list(derived.T),
            "Lmax": derived.Lmax,
            "Lambda": [k + 1 for k in derived.Lambda],
            "eta": rational(derived.eta),
            "sum_ldof": rational(sum_ldof(config)),
            "per_user": [rational(d) for d in per_user_ldof(config)],
            "n": derived.n,
            "S": list(derived.S),
            "Uvec": list(derived.Uvec),
            "Wvec": list(derived.Wvec),
            "U": derived.U,
            "W": derived.W,
            "a": list(derived.a),
        }
        if dump_plan:
            _check_block_length(derived.n, config.M, max_n)
            plan = build_plan(config, derived, seed=seed)
            stacked = rank_report(plan.stacked_beamformers())
            report["plan"] = plan.to_dict()
            report["schedule"] = assemble_schedule(derived).to_dict()
            report["beamformer_rank"] = {
                **stacked.to_dict(),
                "symbols": sum(plan.symbol_count(u) for u in plan.served),
            }
        return report

    def region(self, config: AntennaConfig, simulate: bool = False, seed: int = 0,
               trials: int = 1, tol: float = DECODE_TOL, progress: bool = False,
               max_n: int = MAX_SIMULATED_N) -> Dict[str, Any]:
        report = region_vertices(config)
        derived = derive(config)
        vertices = []
        for vertex in report.vertices:
            entry = {
                "active": [k + 1 for k in vertex.active],
                "ldof": list(vertex.values),
                "slacks": list(vertex.slacks),
                "beats_time_sharing": outside_time_sharing(config, vertex.values),
            }
            if simulate and vertex.active:
                _check_block_length(scheme_params(derived.T, derived.L, vertex.active).n, config.M, max_n)
                simulator = BlindAlignmentSimulator.for_config(
                    config, seed=seed, served=vertex.active, tol=tol, log_level=self.log_level)
                entry["simulation"] = simulator.run_trials(trials, seed, progress).to_dict()
            vertices.append(entry)
        return {"K": config.K, "vertices": vertices, "inequalities": [list(r) for r in report.coefficients]}

    def region_rows(self, config: AntennaConfig) -> Tuple[List[str], List[List[Any]]]:
        report = region_vertices(config)
        header = ["vertex", "active"]
        for k in range(1, config.K + 1):
            header += [f"d{k}_num", f"d{k}_den", f"d{k}"]
        rows = []
        for index, vertex in enumerate(report.vertices, start=1):
            row: List[Any] = [index, " ".join(str(k + 1) for k in vertex.active)]
            for d in vertex.values:
                row += [d.numerator, d.denominator, float(d)]
            rows.append(row)
        return header, rows

    def simulate(self, config: AntennaConfig, seed: int, trials: int, tol: float = DECODE_TOL,
                 progress: bool = False, max_n: int = MAX_SIMULATED_N) -> Dict[str, Any]:
        _check_block_length(derive(config).n, config.M, max_n)
        simulator = BlindAlignmentSimulator.for_config(config, seed=seed, tol=tol, log_level=self.log_level)
        self.logger.info(f"Simulating {trials} trials, n={simulator.plan.n}")
        summary = simulator.run_trials(trials, seed, progress)
        expected = sum_ldof(config)
        return {
            "config": config_to_dict(config),
            "case": simulator.derived.case.value,
            "n": simulator.plan.n,
            "expected_sum_ldof": expected,
            "per_user": list(per_user_ldof(config)),
            "symbols": [simulator.plan.symbol_count(k) for k in range(config.K)],
            **summary.to_dict(),
            "sum_ldof_matches": summary.ldof_ok and summary.sum_ldof == expected,
        }

    def ic(self, text: str, simulate: bool = False, seed: int = 0, trials: int = 1,
           tol: float = DECODE_TOL, progress: bool = False, max_n: int = MAX_SIMULATED_N) -> Dict[str, Any]:
        config = load_ic_config_text(text)
        derived = ic_derive(config)
        result: Dict[str, Any] = {
            "case": derived.case.value,
            "Lmax": derived.Lmax,
            "Lambda": [k + 1 for k in derived.Lambda],
            "eta": derived.eta,
            "sum_ldof": ic_sum_ldof(config),
            "n": derived.n if derived.case is Case.CASE3_2 else 1,
        }
        if simulate:
            _check_block_length(result["n"], derived.M, max_n)
            simulator = BlindAlignmentSimulator.for_ic(config, seed=seed, tol=tol, log_level=self.log_level)
            result["simulation"] = simulator.run_trials(trials, seed, progress).to_dict()
        return result

    def sweep(self, config: AntennaConfig, axis: str, values: Sequence[int],
              curves: Sequence[int] = ()) -> Tuple[List[str], List[List[Any]]]:
        """Sum LDoF along one axis; ``curves`` repeats the sweep for several common N"""
        if axis not in SWEEP_AXES:
            raise CLIError(f"Unsupported sweep axis '{axis}' (choose from {', '.join(SWEEP_AXES)})")
        if not values:
            raise CLIError("Sweep needs --range or --values")

        header = (["N"] if curves else []) + [axis, "sum_ldof_num", "sum_ldof_den", "sum_ldof"]
        rows = []
        for curve in (curves or [None]):
            base = config if curve is None else _with_common_N(config, curve)
            for value in values:
                point = _sweep_point(base, axis, value)
                d = sum_ldof(point)
                rows.append(([curve] if curves else []) + [value, d.numerator, d.denominator, float(d)])
        return header, rows

    def verify(self, config: Optional[AntennaConfig], suites: Sequence[str], trials: int,
               seed: int, progress: bool = False) -> Dict[str, Any]:
        unknown = [s for s in suites if s not in SUITES]
        if unknown:
            raise CLIError(f"Unknown suite(s): {', '.join(unknown)}")

        configs: Optional[List[AntennaConfig]] = [config] if config is not None else None
        results = {}
        for suite in suites:
            self.logger.info(f"Running suite {suite}")
            if suite == "proj":
                summary = verify_projection_identity(trials, seed=seed, progress=progress)
            elif suite == "rank-monotonic":
                summary = verify_rank_monotonic(trials, seed=seed, progress=progress)
            elif suite == "rank-chain":
                summary = verify_rank_chain(trials, seed=seed, progress=progress)
            elif suite == "stat-equiv":
                summary = verify_stat_equiv(trials, seed=seed, progress=progress)
            elif suite == "indexing":
                summary = _indexing_suite()
            else:
                if configs is None:
                    configs = _default_case3_grid()
                summary = _config_suite(suite, configs)
            results[suite] = summary.to_dict()
        return {"passed": all(r["passes"] == r["trials"] for r in results.values()), "suites": results}


def _with_common_N(config: AntennaConfig, N: int) -> AntennaConfig:
    return AntennaConfig(config.M, tuple(UserAntennas(N, u.L) for u in config.users))


def _sweep_point(config: AntennaConfig, axis: str, value: int) -> AntennaConfig:
    if axis == "K":
        return AntennaConfig(config.M, (config.users[0],) * value)
    if axis == "M":
        return AntennaConfig(value, config.users)
    return _with_common_N(config, value)


def _default_case3_grid() -> List[AntennaConfig]:
    configs = config_grid(range(1, 4), range(2, 6), range(1, 6), range(1, 4))
    return [c for c in configs if derive(c).case in (Case.CASE3_1, Case.CASE3_2)]


def _indexing_suite(max_entry: int = 4, max_users: int = 4) -> MonteCarloSummary:
    checked, failures = 0, []
    for size in range(1, max_users + 1):
        for S in product(range(1, max_entry + 1), repeat=size):
            ctx = IndexContext(S)
            ok = all(check_inverse(ctx, i) for i in range(1, size + 1)) and all(
                check_constancy(ctx, i, j)
                for i in range(1, size + 1) for j in range(1, size + 1) if i != j
            )
            checked += 1
            if not ok:
                failures.append(checked)
    return MonteCarloSummary("indexing", checked, checked - len(failures), tuple(failures))


def _config_suite(suite: str, configs: Sequence[AntennaConfig]) -> MonteCarloSummary:
    failures = []
    for index, config in enumerate(configs):
        derived = derive(config)
        if derived.case not in (Case.CASE3_1, Case.CASE3_2):
            raise ConfigError(f"{suite} suite needs M > L_max and a user with min(M, N_k) > L_max "
                              f"(M={config.M}, L_max={derived.Lmax}, case {derived.case.value})")
        if suite == "lp":
            ok = lp_bound(config) == max(derived.eta, Fraction(derived.Lmax))
        elif suite == "det":
            exact, numeric = det_A1(config)
            ok = det_matches(exact, numeric)
        else:
            ok = eta_cramer_check(config)
        if not ok:
            failures.append(index)
    return MonteCarloSummary(suite, len(configs), len(configs) - len(failures), tuple(failures))


def _parse_values(text: Optional[str]) -> Tuple[int, ...]:
    if not text:
        return ()
    try:
        if ":" in text:
            low, high = (int(v) for v in text.split(":"))
            return tuple(range(low, high + 1))
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise CLIError(f"Invalid integer list '{text}'")


def create_parser() -> argparse.ArgumentParser:
    """Create command line argument parser"""
    parser = _Parser(
        description="blindalign - blind interference alignment with reconfigurable antennas"
    )
    parser.add_argument('--version', action='version', version=f'blindalign {__version__}')

    common = argparse.ArgumentParser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument('--config', dest='config_path', help='Path to JSON config')
    source.add_argument('--inline', help='Inline JSON config')
    common.add_argument('--seed', type=int, default=0, help='Seed for all randomness')
    common.add_argument('--trials', type=int, default=BlindAlignmentSimulator.DEFAULT_TRIALS,
                        help='Number of seeded trials')
    common.add_argument('--tol', type=float, default=DECODE_TOL, help='Decode tolerance')
    common.add_argument('--format', dest='fmt', choices=('json', 'csv'), default=None,
                        help='Output format')
    common.add_argument('--out', help='Write output to this path instead of stdout')
    common.add_argument('--max-n', dest='max_n', type=int, default=MAX_SIMULATED_N,
                        help='Largest block length that is simulated or dumped')
    common.add_argument('--progress', action='store_true', help='Show progress bars')
    common.add_argument('--verbose', action='store_true', help='Debug logging')

    subparsers = parser.add_subparsers(dest='command', help='Available commands', parser_class=_Parser)
    analyze_parser = subparsers.add_parser('analyze', parents=[common], help='Closed-form parameters and LDoF')
    analyze_parser.add_argument('--dump-plan', action='store_true',
                                help='Include the transmit plan and switching schedule')
    region_parser = subparsers.add_parser('region', parents=[common], help='LDoF region vertices')
    region_parser.add_argument('--simulate', action='store_true', help='Realize each vertex by simulation')
    subparsers.add_parser('simulate', parents=[common], help='End-to-end simulation')
    verify_parser = subparsers.add_parser('verify', parents=[common], help='Run verification suites')
    verify_parser.add_argument('--suites', default=','.join(SUITES), help='Comma-separated suite names')
    sweep_parser = subparsers.add_parser('sweep', parents=[common], help='Sum LDoF along one axis')
    sweep_parser.add_argument('--axis', required=True, help='K, M or N')
    sweep_parser.add_argument('--range', dest='range_', help='Inclusive range a:b')
    sweep_parser.add_argument('--values', help='Comma-separated values')
    sweep_parser.add_argument('--curves', help='Common N values, one curve each')
    ic_parser = subparsers.add_parser('ic', parents=[common], help='Interference-channel sum LDoF')
    ic_parser.add_argument('--simulate', action='store_true', help='Simulate the embedding')
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    fmt = args.fmt or ("csv" if args.command == "sweep" else "json")
    if args.trials < 1:
        raise CLIError("--trials must be positive")
    if args.tol <= 0:
        raise CLIError("--tol must be positive")
    if not 0 <= args.seed < SEED_LIMIT:
        raise CLIError("--seed must lie in [0, 2**64)")
    if args.max_n < 1:
        raise CLIError("--max-n must be positive")
    suites = tuple(s for s in getattr(args, 'suites', ','.join(SUITES)).split(',') if s)
    values = _parse_values(getattr(args, 'values', None) or getattr(args, 'range_', None))
    return RunConfig(
        command=args.command, config_path=args.config_path, inline=args.inline, seed=args.seed,
        trials=args.trials, tol=args.tol, fmt=fmt, out=args.out, suites=suites,
        axis=getattr(args, 'axis', None), values=values,
        curves=_parse_values(getattr(args, 'curves', None)),
        simulate=getattr(args, 'simulate', False), dump_plan=getattr(args, 'dump_plan', False),
        max_n=args.max_n, progress=args.progress,
    )


def _execute(cli: BlindAlignCLI, run: RunConfig) -> Tuple[str, int]:
    text = run.config_text()
    if run.command == "ic":
        if text is None:
            raise CLIError("ic needs --config or --inline")
        if run.fmt != "json":
            raise CLIError("ic output is JSON only")
        return dumps(cli.ic(text, run.simulate, run.seed, run.trials, run.tol, run.progress,
                            run.max_n)), EXIT_OK

    config = load_config_text(text) if text is not None else None
    if run.command == "verify":
        report = cli.verify(config, run.suites, run.trials, run.seed, run.progress)
        return dumps(report), EXIT_OK if report["passed"] else EXIT_VERIFY

    if config is None:
        raise CLIError(f"{run.command} needs --config or --inline")
    if run.command == "sweep":
        header, rows = cli.sweep(config, run.axis, run.values, run.curves)
        if run.fmt == "csv":
            return write_csv(header, rows), EXIT_OK
        return dumps([dict(zip(header, row)) for row in rows]), EXIT_OK
    if run.command == "region":
        if run.fmt == "csv":
            return write_csv(*cli.region_rows(config)), EXIT_OK
        return dumps(cli.region(config, run.simulate, run.seed, run.trials, run.tol, run.progress,
                                run.max_n)), EXIT_OK
    if run.fmt != "json":
        raise CLIError(f"{run.command} output is JSON only")
    if run.command == "analyze":
        return dumps(cli.analyze(config, run.dump_plan, run.seed, run.max_n)), EXIT_OK
    return dumps(cli.simulate(config, run.seed, run.trials, run.tol, run.progress, run.max_n)), EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the CLI"""
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except CLIError as e:
        print(f"Error: {str(e)}", file=sys.stderr)
        return EXIT_ARGS

    if not args.command:
        parser.print_help()
        return EXIT_OK

    cli = BlindAlignCLI(logging.DEBUG if args.verbose else logging.WARNING)
    try:
        run = _run_config(args)
        output, code = _execute(cli, run)
    except json.JSONDecodeError as e:
        print(f"Error: malformed JSON config: {str(e)}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigError, AnalysisError) as e:
        print(f"Error: invalid config: {str(e)}", file=sys.stderr)
        return EXIT_CONFIG
    except CLIError as e:
        print(f"Error: {str(e)}", file=sys.stderr)
        return EXIT_ARGS

    if run.out:
        Path(run.out).write_text(output, encoding="utf-8")
    else:
        sys.stdout.write(output)
    return code


def main_cli() -> None:
    """Entry point for the CLI"""
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\nOperation cancelled by user")
        sys.exit(0)
    except Exception as e:
        print(f"Fatal error: {str(e)}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main_cli()
