__all__ = (
    'ArgParser',
    'CommandParser',
    'cmd_benchmark',
    'cmd_example_config',
    'cmd_synthesize',
    'cmd_verify',
    'read_result',
    'result_to_spec',
    'run_command',
)


import json
import logging
import os.path
import sys
from argparse import ArgumentParser, SUPPRESS

import numpy as np

from . import __version__
from .config import InstanceConfig, matrix_from_spec, matrix_to_spec
from .constants import (
    CONFIG_FILE,
    DEFAULT_REALISATIONS,
    DEFAULT_SEED,
    EXAMPLE_CONFIG,
    EXIT_CONFIG_ERROR,
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_SOLVER_FAILURE,
    EXIT_VERIFY_FAILED,
    TABLE_VARIANTS,
    VARIANTS,
)
from .errors import (
    CLIFatalError,
    CLIUsageError,
    DimensionMismatchError,
    InfeasibleBenchmarkError,
    InvalidConfigError,
)
from .log import setup_logging
from .namespaces import SynthesisResultSpec, VerifyReportSpec, _CmdOptionSpec
from .namespaces import InstanceConfigSpec
from .sim import benchmark_table, default_families, write_table
from .slp import (
    Controller,
    SystemResponse,
    achievability_residual,
    closed_loop_response,
)
from .synthesis import (
    EnergyBall,
    Instance,
    SynthesisResult,
    ZeroInit,
    synthesize,
)
from .utils import join_options, str_to_bool
from .verify import (
    check_inequality_chain,
    energy_ball_violation,
    regret_psd_margin,
    sample_certificate,
    tight_level_zero_init,
)
from ._types import SolverStatus

from collections.abc import Mapping
from os import PathLike
from typing import Any, Never


PROG = __package__

logger = logging.getLogger(__name__)


def _on_off(value: str) -> bool:
    return str_to_bool(value)


class CommandParser(ArgumentParser):
    '''
    An argument parser that exits with the config error code on misuse.
    '''
    def error(self, message: str) -> Never:
        '''Print usage and exit with the config error code.'''
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG_ERROR, f"{self.prog}: error: {message}\n")


class ArgParser(CommandParser):
    '''
    The command line parser of the command line utility.
    '''
    def __init__(self) -> None:
        super().__init__(
            prog=PROG,
            argument_default=SUPPRESS,
            description=(
                "Synthesise, verify and benchmark regret-optimal"
                " finite-horizon controllers."
            ),
        )
        self.add_arguments()

    def parse_args(
        self,
        args: list[str] = None
    ) -> tuple[InstanceConfigSpec, _CmdOptionSpec]:
        '''
        Parse command line arguments.
        Return config overrides separately from options that control
        what the command does.

        :param args: The args to parse, get from STDIN by default
        :type args: :class:`list[str]`
        '''
        opts = vars(super().parse_args(args))
        if opts.get('solver_tol', 1.0) <= 0.0:
            raise CLIUsageError("--solver-tol must be positive")
        if opts.get('realisations', 1) < 1:
            raise CLIUsageError("--realisations must be at least 1")
        overrides = {}
        if 'solver_tol' in opts:
            overrides['solver'] = {'tol': opts['solver_tol']}
        return overrides, opts

    def add_arguments(self) -> None:
        '''Equip the parser with all its arguments.'''
        self.add_argument(
            '--version', '-v',
            action='version',
            version=f"{PROG} {__version__}",
        )

        common = ArgumentParser(add_help=False, argument_default=SUPPRESS)
        common.add_argument(
            '--config', '-c',
            dest='config_file',
            help="The instance config file (Scuff, or JSON by extension).",
            metavar='FILE',
        )
        common.add_argument(
            '--out', '-o',
            dest='out',
            help="Where to write the command's output file.",
            metavar='FILE',
        )
        common.add_argument(
            '--solver-tol',
            dest='solver_tol',
            help="Feasibility and gap tolerance passed to the solver.",
            metavar='TOL',
            type=float,
        )
        common.add_argument(
            '--debug',
            action='store_true',
            help="Log debug messages.",
        )
        common.add_argument(
            '--log-file',
            dest='log_file',
            help="Write log messages to this file instead of STDERR.",
            metavar='FILE',
        )

        commands = self.add_subparsers(
            dest='command',
            parser_class=CommandParser,
            required=True,
        )

        synth = commands.add_parser(
            'synthesize',
            parents=[common],
            argument_default=SUPPRESS,
            help="Synthesise one controller and write a result file.",
        )
        synth.add_argument(
            '--variant',
            choices=VARIANTS,
            dest='variant',
            help="The controller to synthesise.",
            required=True,
        )
        synth.add_argument(
            '--constraints',
            choices=('on', 'off'),
            dest='constraints',
            help="Impose the instance's state and input constraints.",
        )

        verify = commands.add_parser(
            'verify',
            parents=[common],
            argument_default=SUPPRESS,
            help="Re-check a result file with independent oracles.",
        )
        verify.add_argument(
            '--results',
            dest='results',
            help="The result file written by 'synthesize'.",
            metavar='FILE',
            nargs=1,
            required=True,
        )

        bench = commands.add_parser(
            'benchmark',
            parents=[common],
            argument_default=SUPPRESS,
            help="Simulate controllers and write a normalised cost table.",
        )
        bench.add_argument(
            '--controllers',
            action='extend',
            choices=VARIANTS,
            dest='controllers',
            help="The controllers to compare, in column order.",
            metavar='VARIANT',
            nargs='+',
        )
        bench.add_argument(
            '--results',
            action='extend',
            dest='results',
            help="Result files of controllers to use instead of solving.",
            metavar='FILE',
            nargs='+',
        )
        bench.add_argument(
            '--seed',
            dest='seed',
            help="The base seed of every disturbance stream.",
            type=int,
        )
        bench.add_argument(
            '--realisations',
            dest='realisations',
            help="Realisations per random disturbance family.",
            type=int,
        )
        bench.add_argument(
            '--constraints',
            choices=('on', 'off'),
            dest='constraints',
            help="Impose the instance's state and input constraints.",
        )

        commands.add_parser(
            'example-config',
            parents=[common],
            argument_default=SUPPRESS,
            help="Write the canonical example instance config.",
        )


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (set, tuple)):
        return list(obj)
    raise TypeError(f"Cannot serialise {type(obj).__name__}")


def _write_json(data: Mapping, file: PathLike, indent: int = 4) -> None:
    absolute = os.path.abspath(os.path.expanduser(file))
    os.makedirs(os.path.dirname(absolute), exist_ok=True)
    with open(absolute, 'w') as f:
        f.write(json.dumps(data, indent=indent, default=_json_default) + '\n')


def _exit_code(status: SolverStatus) -> int:
    match status:
        case 'optimal' | 'near_optimal':
            return EXIT_OK
        case 'infeasible' | 'unbounded':
            return EXIT_INFEASIBLE
        case _:
            return EXIT_SOLVER_FAILURE


def result_to_spec(
    result: SynthesisResult,
    instance: Instance,
    constraints: bool,
) -> SynthesisResultSpec:
    '''The machine-readable form of `result` written by ``synthesize``.'''
    sys = instance.sys
    spec = SynthesisResultSpec(
        variant=result.variant,
        status=result.status,
        mu=result.mu,
        competitive_ratio=result.competitive_ratio,
        lambdas=list(result.lambdas),
        weight=result.weight,
        constraints=constraints,
        residuals=dict(result.residuals),
        solve_time=result.solve_time,
        iterations=result.iterations,
        diagnostics=dict(result.diagnostics),
        dims=dict(n=sys.n, m=sys.m, p=sys.p, T=sys.horizon),
    )
    if result.phi is not None:
        spec['Phi_x'] = matrix_to_spec(result.phi.Phi_x)
        spec['Phi_u'] = matrix_to_spec(result.phi.Phi_u)
    if result.controller is not None:
        spec['K'] = matrix_to_spec(result.controller.K)
    return spec


def read_result(file: PathLike) -> SynthesisResultSpec:
    absolute = os.path.abspath(os.path.expanduser(file))
    with open(absolute, 'r') as f:
        return json.load(f)


def _result_matrices(
    spec: SynthesisResultSpec,
    instance: Instance,
) -> tuple[SystemResponse, Controller]:
    '''
    The response and controller stored in a result file.

    :raises: :exc:`CLIFatalError` when the file lacks them or their
        dimensions disagree with the instance
    '''
    sys = instance.sys
    dims = spec.get('dims', {})
    expected = dict(n=sys.n, m=sys.m, p=sys.p, T=sys.horizon)
    if dims != expected:
        raise CLIFatalError(
            f"The result has dimensions {dims}, the config {expected}.",
            EXIT_CONFIG_ERROR
        )
    if not all(key in spec for key in ('Phi_x', 'Phi_u', 'K')):
        raise CLIFatalError(
            f"The result has status {spec.get('status')!r} and no"
            " controller to verify.",
            EXIT_VERIFY_FAILED
        )
    try:
        phi = SystemResponse.from_dense(
            matrix_from_spec(spec['Phi_x'], 'Phi_x'),
            matrix_from_spec(spec['Phi_u'], 'Phi_u'),
            sys.n, sys.p, tol=1e-9,
        )
        K = Controller.from_dense(
            matrix_from_spec(spec['K'], 'K'), sys.n, sys.m, tol=1e-9
        )
    except ValueError as e:
        raise CLIFatalError(f"Invalid result file: {e}", EXIT_CONFIG_ERROR)
    if phi.horizon != sys.horizon or K.horizon != sys.horizon:
        raise CLIFatalError(
            "The result's horizon does not match the config.",
            EXIT_CONFIG_ERROR
        )
    return phi, K


def verify_result(
    spec: SynthesisResultSpec,
    instance: Instance,
    tol: float,
    n_samples: int = 10_000,
    seed: int = DEFAULT_SEED,
) -> VerifyReportSpec:
    '''
    Re-check a stored result with the oracles of :mod:`verify`.

    Hard checks: achievability of the stored response, agreement of the
    stored controller's closed loop with it, nonnegative regret against
    the non-causal benchmark, the sampled certificate at the stored
    level, and, where they apply, the exact energy-ball maximum, the
    zero-initial-state tight level and the inequality chain.
    '''
    phi_file, K = _result_matrices(spec, instance)
    phi = closed_loop_response(instance.sys, K)
    cost, x0 = instance.cost, instance.x0
    variant = spec['variant']
    mu = spec.get('mu')
    checks = {}
    report = VerifyReportSpec(variant=variant, checks=checks)
    lines = []

    residual = achievability_residual(phi_file, instance.ops)
    report['achievability_residual'] = residual
    checks['achievable'] = residual <= tol
    mismatch = float(np.max(np.abs(phi.Phi - phi_file.Phi), initial=0.0))
    report['response_mismatch'] = mismatch
    checks['response_matches'] = mismatch <= tol * max(
        1.0, float(np.max(np.abs(phi_file.Phi), initial=0.0))
    )
    margin = regret_psd_margin(phi, cost, instance.unconstrained_benchmark)
    report['regret_psd_margin'] = margin
    checks['regret_nonnegative'] = margin >= -tol
    lines.append(f"achievability residual: {residual:.3g}")
    lines.append(f"closed-loop mismatch: {mismatch:.3g}")
    lines.append(f"regret PSD margin: {margin:.3g}")

    prefix = variant.split('-', 1)[0]
    match prefix:
        case 'dr':
            weight = instance.regret_weight('identity')
        case 'cr':
            weight = instance.regret_weight('benchmark')
        case 'custom':
            weight = instance.regret_weight(instance.weight)
        case _:
            weight = None

    if variant.endswith('energy') or variant == 'custom-weight':
        model = instance.model
        if variant.endswith('energy') or isinstance(model, EnergyBall):
            model = EnergyBall(instance.energy_bound, x0)
    elif variant.endswith('pwb'):
        model = instance.pointwise
    elif variant == 'hinf':
        model = ZeroInit()
    else:
        model = None

    if model is not None and mu is not None:
        dim, n = instance.sys.delta_dim, instance.sys.n
        if weight is None:
            O, W = np.zeros((dim, dim)), np.eye(dim)
        else:
            O, W = instance.benchmark.O, weight.W
        scale = tol * max(1.0, abs(mu))
        excess = sample_certificate(
            phi, cost, O, W, model, mu, n_samples=n_samples, seed=seed
        )
        report['certificate_excess'] = excess
        checks['certificate'] = excess <= scale
        lines.append(f"sampled certificate excess: {excess:.3g}")

        if isinstance(model, EnergyBall):
            worst = energy_ball_violation(
                phi, cost, O, W, x0, model.omega, mu
            )
            report['energy_ball_violation'] = worst
            checks['energy_ball_exact'] = worst <= scale
            lines.append(f"exact energy-ball excess: {worst:.3g}")
        elif isinstance(model, ZeroInit):
            level = tight_level_zero_init(phi, cost, O[n:, n:], W[n:, n:])
            report['tight_level'] = level
            checks['tight_level'] = level <= mu + scale
            lines.append(f"tight level: {level:.6g} (stored {mu:.6g})")

    if variant.endswith('pwb') and weight is not None:
        chain = check_inequality_chain(
            instance,
            weight=weight.provenance,
            constraints=bool(spec.get('constraints', False)),
            tol=max(tol, 1e-6),
        )
        report['chain'] = dict(
            mu_energy=chain.mu_energy,
            mu_pointwise=chain.mu_pointwise,
            floor=chain.floor,
            lower_estimate=chain.lower_estimate,
            soft_gap=chain.soft_gap,
            omega=chain.omega,
            holds=chain.holds,
            statuses=chain.statuses,
        )
        checks['chain'] = chain.holds
        lines.extend(chain.lines())

    report['lines'] = lines
    report['passed'] = all(checks.values())
    return report


def _load_instance(
    options: _CmdOptionSpec,
    overrides: InstanceConfigSpec,
) -> Instance:
    file = options.get('config_file', CONFIG_FILE)
    try:
        config = InstanceConfig.from_file(file, overrides=overrides)
    except FileNotFoundError:
        raise CLIFatalError(
            f"No config file at {file!r}."
            f" Try '{PROG} example-config --out {file}'."
        )
    return config.to_instance()


def cmd_synthesize(
    options: _CmdOptionSpec,
    overrides: InstanceConfigSpec = {},
) -> int:
    '''
    Synthesise the controller named by ``--variant`` and write its
    result file.

    :returns: The exit code for the solver status
    '''
    instance = _load_instance(options, overrides)
    variant = options['variant']
    constraints = _on_off(options.get('constraints', 'on'))
    try:
        result = synthesize(instance, variant, constraints)
    except ValueError as e:
        raise CLIFatalError(str(e))
    out = options.get('out', f"{variant}.json")
    _write_json(result_to_spec(result, instance, constraints), out)

    print(f"{variant}: status {result.status}")
    if result.mu is not None:
        print(f"{variant}: mu = {result.mu:.6g}")
    if result.competitive_ratio is not None:
        print(f"{variant}: competitive ratio = {result.competitive_ratio:.6g}")
    print(f"Wrote result file to {out!r}")
    return _exit_code(result.status)


def cmd_verify(
    options: _CmdOptionSpec,
    overrides: InstanceConfigSpec = {},
) -> int:
    '''
    Re-check a result file against the instance it was solved for and
    write a report.

    :returns: :obj:`constants.EXIT_OK` iff every hard check passes
    '''
    instance = _load_instance(options, overrides)
    file = options['results'][0]
    try:
        spec = read_result(file)
    except (OSError, json.JSONDecodeError) as e:
        raise CLIFatalError(f"Cannot read result file {file!r}: {e}")
    tol = max(1e-6, 100 * instance.settings.feas_tol)
    report = verify_result(spec, instance, tol)
    out = options.get('out', 'verify.json')
    _write_json(report, out)

    for line in report['lines']:
        print(line)
    failed = [name for name, ok in report['checks'].items() if not ok]
    if failed:
        print("Failed checks: " + join_options(failed, final_sep='and'))
    print(f"Wrote report to {out!r}")
    return EXIT_OK if report['passed'] else EXIT_VERIFY_FAILED


def _reductions(mus: Mapping[str, float | None]) -> dict[str, float]:
    '''Percentage by which each pwb level undercuts its energy-ball level.'''
    out = {}
    for prefix in ('dr', 'cr'):
        energy, pwb = mus.get(f"{prefix}-energy"), mus.get(f"{prefix}-pwb")
        if energy and pwb is not None:
            out[prefix] = 100.0 * (1.0 - pwb / energy)
    return out


def cmd_benchmark(
    options: _CmdOptionSpec,
    overrides: InstanceConfigSpec = {},
) -> int:
    '''
    Synthesise or load every controller, simulate the disturbance
    families and write the normalised cost table.

    Tables are all or nothing: any controller that fails aborts the
    command.
    '''
    instance = _load_instance(options, overrides)
    if instance.pointwise is None:
        raise CLIFatalError(
            "Benchmark families need a pointwise disturbance model."
        )
    constraints = _on_off(options.get('constraints', 'on'))
    names = list(options.get('controllers', TABLE_VARIANTS))
    controllers, mus, statuses = {}, {}, {}

    for file in options.get('results', ()):
        spec = read_result(file)
        _, K = _result_matrices(spec, instance)
        variant = spec['variant']
        controllers[variant] = K
        mus[variant] = spec.get('mu')
        statuses[variant] = spec['status']
        if variant not in names:
            names.append(variant)

    for variant in names:
        if variant in controllers:
            continue
        result = synthesize(instance, variant, constraints)
        statuses[variant] = result.status
        if not result.ok:
            raise CLIFatalError(
                f"Controller {variant!r} has status {result.status!r};"
                " refusing to write a partial table.",
                _exit_code(result.status)
            )
        controllers[variant] = result.controller
        mus[variant] = result.mu

    seed = options.get('seed', DEFAULT_SEED)
    n_realisations = options.get('realisations', DEFAULT_REALISATIONS)
    table = benchmark_table(
        {name: controllers[name] for name in names},
        default_families(instance.pointwise),
        instance,
        n_realisations,
        seed,
    )
    out = options.get('out', 'benchmark.csv')
    write_table(table, out)

    reductions = _reductions(mus)
    summary = dict(
        table=out,
        seed=seed,
        realisations=n_realisations,
        constraints=constraints,
        mu=mus,
        statuses=statuses,
        mu_reduction_percent=reductions,
    )
    _write_json(summary, os.path.splitext(out)[0] + '.json')

    print(table.to_string(float_format='%.4f'))
    for prefix, value in reductions.items():
        print(f"{prefix}: pwb level is {value:.1f}% below the energy-ball level")
    print(f"Wrote table to {out!r}")
    return EXIT_OK


def cmd_example_config(
    options: _CmdOptionSpec,
    overrides: InstanceConfigSpec = {},
) -> int:
    '''Write the canonical example config (Scuff, or JSON by extension).'''
    out = options.get('out', CONFIG_FILE)
    config = InstanceConfig.from_file(EXAMPLE_CONFIG, overrides=overrides)
    config.write(out)
    print(f"Wrote example config to {out!r}")
    return EXIT_OK


COMMANDS = {
    'synthesize': cmd_synthesize,
    'verify': cmd_verify,
    'benchmark': cmd_benchmark,
    'example-config': cmd_example_config,
}


def run_command(args: list[str] = None) -> int:
    '''
    Parse `args`, run the command and return its exit code.
    Errors are reported on STDERR and mapped to exit codes.
    '''
    parser = ArgParser()
    try:
        overrides, options = parser.parse_args(args)
    except CLIUsageError as e:
        parser.error(e.msg)

    level = logging.DEBUG if options.get('debug') else logging.WARNING
    setup_logging(level, options.get('log_file'))
    command = COMMANDS[options['command']]
    logger.debug(f"Running {options['command']!r} with {options}")

    try:
        return command(options, overrides)
    except InvalidConfigError as e:
        print(f"{PROG}: invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except InfeasibleBenchmarkError as e:
        print(f"{PROG}: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DimensionMismatchError as e:
        print(f"{PROG}: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except CLIFatalError as e:
        print(f"{PROG}: {e.msg}", file=sys.stderr)
        return e.exit_code
