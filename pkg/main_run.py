import argparse
import logging
import sys

import numpy as np

from config import DEFAULT_OUTPUT_DIR, OUTPUT_DIR_ENV_VAR, VERSION
from photonpaths_components.dynamics import TWO_PHOTON, default_window, density_grid, run_ensemble
from photonpaths_components.output_writer import RunOutputs, build_manifest, utc_now
from photonpaths_components.run_config import ConfigError, config_from_manifest, load_config_file, parse_config
from photonpaths_components.verify import (
    check_no_crossing,
    check_null_interval_bundle,
    check_optical_validity,
    check_superluminal_existence,
    run_suite,
    suite_failures,
)
from photonpaths_components.wavefunction import negative_frequency_leakage

logger = logging.getLogger('photonpaths')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

# command-line flag -> config key; every flag is passed through as text and validated by parse_config
CONFIG_FLAGS = {
    '--mass': 'mass',
    '--k0-over-sigma': 'k0_over_sigma',
    '--sigma': 'sigma',
    '--alpha': 'alpha',
    '--t0': 't0',
    '--t1': 't1',
    '--n-traj': 'n_traj',
    '--n-times': 'n_times',
    '--seed': 'seed',
    '--sampling': 'sampling',
    '--route': 'route',
    '--two-photon-density': 'two_photon_density',
    '--window': 'window',
    '--resolution': 'resolution',
    '--resolution-2d': 'resolution_2d',
    '--rtol': 'rtol',
    '--atol': 'atol',
    '--node-floor': 'node_floor',
    '--quad-nodes': 'quad_nodes',
    '--quad-halfwidth': 'quad_halfwidth',
    '--out': 'output_dir',
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help="flat 'key = value' run configuration file")
    for flag, key in CONFIG_FLAGS.items():
        common.add_argument(flag, dest=key, default=None, metavar=key.upper())

    parser = argparse.ArgumentParser(
        description="Average photon trajectories in Schwarzschild spacetime: ensembles, density grids and checks.")
    parser.add_argument('--version', action='version', version=f'%(prog)s {VERSION}')
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    parser.add_argument('--progress', action='store_true', help="show progress bars on stderr")
    parser.add_argument('--from-manifest', metavar='PATH',
                        help="re-run a previous run from its manifest.json (use --out to redirect)")
    parser.add_argument('--out', dest='manifest_out', default=None, help=argparse.SUPPRESS)
    subparsers = parser.add_subparsers(dest='command')
    subparsers.add_parser('single', parents=[common], help="single-photon trajectory ensemble")
    subparsers.add_parser('two-photon', parents=[common], help="two-photon trajectory ensemble")
    subparsers.add_parser('field', parents=[common], help="single-photon density and velocity grids")
    subparsers.add_parser('verify', parents=[common], help="full verification suite")
    return parser


def resolve_config(args):
    """
    Builds the RunConfig from a manifest, or from --config plus flags.
    Returns:
        RunConfig
    Raises:
        ConfigError: for invalid input or a missing subcommand.
    """
    if args.from_manifest:
        return config_from_manifest(args.from_manifest, output_dir=args.manifest_out)
    if not args.command:
        raise ConfigError("a subcommand is required: single, two-photon, field or verify")
    flags = {key: getattr(args, key) for key in CONFIG_FLAGS.values()}
    flags['scenario'] = args.command
    if args.config:
        return load_config_file(args.config, flags)
    return parse_config(flags=flags, source='command line')


def density_times(config):
    """Single-photon grids at every sample time; two-photon grids at the first, middle and last."""
    times = np.linspace(config.t0, config.t1, config.n_times)
    if config.scenario == TWO_PHOTON:
        return times[[0, times.size // 2, -1]]
    return times


def run_trajectories(run_cfg, outputs, progress):
    spec = run_cfg.wavepacket_spec()
    params = run_cfg.spacetime()
    ensemble_cfg = run_cfg.ensemble_config()
    bundle = run_ensemble(ensemble_cfg, spec, params, progress=progress)
    outputs.write_trajectories(bundle)

    window = ensemble_cfg.window or default_window(ensemble_cfg.t0, ensemble_cfg.t1, spec)
    resolution = ensemble_cfg.resolution if ensemble_cfg.scenario != TWO_PHOTON else ensemble_cfg.resolution_2d
    grids = [density_grid(t, window, resolution, spec, ensemble_cfg.scenario, params,
                          ensemble_cfg.two_photon_density) for t in density_times(ensemble_cfg)]
    outputs.write_density(grids)

    reports = [check_null_interval_bundle(bundle, spec, params, ensemble_cfg.route)]
    if ensemble_cfg.scenario != TWO_PHOTON:
        reports.append(check_no_crossing(bundle))
    return reports, bundle.failures, bundle.provenance


def run_field(run_cfg, outputs):
    spec = run_cfg.wavepacket_spec()
    params = run_cfg.spacetime()
    ensemble_cfg = run_cfg.ensemble_config()
    window = ensemble_cfg.window or default_window(ensemble_cfg.t0, ensemble_cfg.t1, spec)
    grids = [density_grid(t, window, ensemble_cfg.resolution, spec, params=params)
             for t in density_times(ensemble_cfg)]
    outputs.write_density(grids)
    reports = [check_superluminal_existence(spec, params), check_optical_validity(spec, params)]
    return reports, [], {'window': list(window), 'negative_frequency_leakage': negative_frequency_leakage(spec)}


def run(run_cfg, progress=False):
    """
    Executes one configured run and writes its files.
    Args:
        run_cfg (RunConfig): resolved configuration.
        progress (bool): show progress bars.
    Returns:
        int: exit status, 0 iff nothing failed.
    """
    started = utc_now()
    outputs = RunOutputs(run_cfg.output_dir)
    reports, failures, provenance, error = [], [], {}, None
    try:
        if run_cfg.scenario in ('single', 'two-photon'):
            reports, failures, provenance = run_trajectories(run_cfg, outputs, progress)
        elif run_cfg.scenario == 'field':
            reports, failures, provenance = run_field(run_cfg, outputs)
        else:
            reports = run_suite(run_cfg.spacetime(), run_cfg.suite_config(progress))
            failures = suite_failures(reports)
        outputs.write_report(reports)
    except Exception as e:
        logger.exception("Run stopped by an error")
        error = f"{type(e).__name__}: {e}"
        if reports:
            outputs.write_report(reports)

    finished = utc_now()
    outputs.write_manifest(build_manifest(run_cfg, started, finished, outputs, reports, failures,
                                          provenance, error))

    failed = [r for r in reports if r.failed]
    print("\n--- Run Summary ---")
    print(f"Scenario: {run_cfg.scenario}")
    print(f"Checks run: {len(reports)}, failed: {len(failed)}, "
          f"discrepancies documented: {sum(r.status == 'discrepancy-documented' for r in reports)}")
    for report in failed:
        print(f"  FAILED {report.name}: max error {report.max_error:.3e} > {report.tolerance:.1e}")
    print(f"Trajectory failures: {len(failures)}")
    if error:
        print(f"Run error: {error}")
    print(f"Output directory: {run_cfg.output_dir}")
    return 1 if (error or failed) else 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT, stream=sys.stderr)
    try:
        run_cfg = resolve_config(args)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return 2
    logger.info("photonpaths %s: scenario '%s', output in %s (default %s, override with %s)",
                VERSION, run_cfg.scenario, run_cfg.output_dir, DEFAULT_OUTPUT_DIR, OUTPUT_DIR_ENV_VAR)
    return run(run_cfg, progress=args.progress)


if __name__ == '__main__':
    sys.exit(main())
