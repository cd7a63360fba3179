"""
Run configuration: a flat "key = value" file plus command-line overrides.
"""
import logging
from dataclasses import dataclass, fields

from config import RUN_DEFAULTS
from photonpaths_components.dynamics import EnsembleConfig, ROUTES, STRATEGIES, TWO_PHOTON_DENSITIES
from photonpaths_components.geometry import SpacetimeParams
from photonpaths_components.output_writer import read_manifest
from photonpaths_components.verify import SuiteConfig
from photonpaths_components.wavefunction import QuadratureConfig, WavepacketSpec

logger = logging.getLogger(__name__)

RUN_SCENARIOS = ('single', 'two-photon', 'field', 'verify')


class ConfigError(ValueError):
    """Custom exception for invalid run configuration entries."""
    pass


def _parse_window(text):
    if text.strip().lower() in ('', 'none', 'auto'):
        return None
    parts = [p for p in text.replace(',', ' ').split() if p]
    if len(parts) != 2:
        raise ValueError("expected two numbers 'lo, hi'")
    lo, hi = float(parts[0]), float(parts[1])
    if not lo < hi:
        raise ValueError("window needs lo < hi")
    return (lo, hi)


def _parse_int(text):
    """Exact for plain integer text of any size; float forms such as 1e3 must be integral."""
    try:
        return int(text, 10)
    except ValueError:
        pass
    value = float(text)
    if not value.is_integer():
        raise ValueError("not an integer")
    return int(value)


def _choice(options):
    return (lambda v: v in options), "one of " + ", ".join(options)


# key -> (parser, check, accepted range as text)
_FIELDS = {
    'scenario': (str,) + _choice(RUN_SCENARIOS),
    'mass': (float, lambda v: v >= 0, ">= 0"),
    'k0_over_sigma': (float, lambda v: v > 0, "> 0"),
    'sigma': (float, lambda v: v > 0, "> 0"),
    'alpha': (float, lambda v: 0.0 <= v <= 1.0, "[0, 1]"),
    't0': (float, lambda v: abs(v) < 1e6, "finite"),
    't1': (float, lambda v: abs(v) < 1e6, "finite"),
    'n_traj': (_parse_int, lambda v: v >= 1, "integer >= 1"),
    'n_times': (_parse_int, lambda v: v >= 2, "integer >= 2"),
    'seed': (_parse_int, lambda v: 0 <= v < 2 ** 64, "integer in [0, 2^64)"),
    'sampling': (str,) + _choice(STRATEGIES),
    'route': (str,) + _choice(ROUTES),
    'two_photon_density': (str,) + _choice(TWO_PHOTON_DENSITIES),
    'window': (_parse_window, lambda v: True, "'lo, hi' with lo < hi, or none"),
    'resolution': (_parse_int, lambda v: v >= 2, "integer >= 2"),
    'resolution_2d': (_parse_int, lambda v: v >= 2, "integer >= 2"),
    'rtol': (float, lambda v: 0 < v < 1, "(0, 1)"),
    'atol': (float, lambda v: 0 < v < 1, "(0, 1)"),
    'node_floor': (float, lambda v: 0 <= v < 1, "[0, 1)"),
    'quad_nodes': (_parse_int, lambda v: v >= 8, "integer >= 8"),
    'quad_halfwidth': (float, lambda v: v > 0, "> 0"),
    'output_dir': (str, lambda v: bool(v.strip()), "non-empty path"),
}


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    mass: float
    k0_over_sigma: float
    sigma: float
    alpha: float
    t0: float
    t1: float
    n_traj: int
    n_times: int
    seed: int
    sampling: str
    route: str
    two_photon_density: str
    window: tuple
    resolution: int
    resolution_2d: int
    rtol: float
    atol: float
    node_floor: float
    quad_nodes: int
    quad_halfwidth: float
    output_dir: str
    defaulted: tuple = ()

    def wavepacket_spec(self):
        return WavepacketSpec.from_ratio(self.k0_over_sigma, self.sigma, self.alpha)

    def spacetime(self):
        return SpacetimeParams(m=self.mass)

    def quadrature_config(self):
        return QuadratureConfig(nodes=self.quad_nodes, support_halfwidth=self.quad_halfwidth)

    def ensemble_config(self):
        scenario = 'two-photon' if self.scenario == 'two-photon' else 'single'
        return EnsembleConfig(
            n_traj=self.n_traj, t0=self.t0, t1=self.t1, seed=self.seed, sampling=self.sampling,
            route=self.route, scenario=scenario, n_times=self.n_times, window=self.window,
            resolution=self.resolution, resolution_2d=self.resolution_2d, rtol=self.rtol,
            atol=self.atol, node_floor=self.node_floor, two_photon_density=self.two_photon_density)

    def suite_config(self, progress=False):
        return SuiteConfig(n_traj=self.n_traj, seed=self.seed, rtol=self.rtol, atol=self.atol,
                           node_floor=self.node_floor, quad_cfg=self.quadrature_config(), progress=progress)

    def to_dict(self):
        """Resolved keys in declaration order, window as a list."""
        result = {}
        for f in fields(self):
            if f.name == 'defaulted':
                continue
            value = getattr(self, f.name)
            result[f.name] = list(value) if isinstance(value, tuple) else value
        return result


def _coerce(key, value, where):
    if key not in _FIELDS:
        raise ConfigError(f"Unknown config key '{key}' {where}. Accepted keys: {', '.join(_FIELDS)}")
    parser, check, accepted = _FIELDS[key]
    try:
        if isinstance(value, str):
            parsed = parser(value.strip())
        elif key == 'window':
            parsed = None if value is None else _parse_window(f"{value[0]}, {value[1]}")
        else:
            parsed = parser(str(value)) if parser is not str else str(value)
    except (ValueError, TypeError, IndexError) as e:
        raise ConfigError(f"Invalid value {value!r} for '{key}' {where}: {e}. Accepted: {accepted}")
    if parsed is not None and not check(parsed):
        raise ConfigError(f"Value {parsed!r} for '{key}' {where} is out of range. Accepted: {accepted}")
    return parsed


def _parse_lines(text, source):
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"{source}, line {line_no}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split('=', 1))
        where = f"at {source}, line {line_no}"
        if key in values:
            raise ConfigError(f"Duplicate config key '{key}' {where}")
        values[key] = _coerce(key, value, where)
    return values


def parse_config(text=None, flags=None, source='<config>'):
    """
    Resolves a RunConfig from config text and command-line flags.
    Args:
        text (str, optional): flat "key = value" document; '#' starts a comment.
        flags (dict, optional): overrides; entries whose value is None are ignored.
        source (str): name used in error messages.
    Returns:
        RunConfig: with the keys filled from RUN_DEFAULTS listed in `defaulted`.
    Raises:
        ConfigError: naming the key, line and accepted range.
    """
    values = _parse_lines(text, source) if text else {}
    for key, value in (flags or {}).items():
        if value is None:
            continue
        values[key] = _coerce(key, value, "from command-line flags")

    defaulted = tuple(key for key in _FIELDS if key not in values)
    for key in defaulted:
        values[key] = RUN_DEFAULTS[key]
    if not values['t1'] > values['t0']:
        raise ConfigError(f"'t1' ({values['t1']}) must be greater than 't0' ({values['t0']})")
    config = RunConfig(defaulted=defaulted, **values)
    logger.debug("Resolved config from %s; defaulted keys: %s", source, ", ".join(defaulted) or "none")
    return config


def load_config_file(path, flags=None):
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except FileNotFoundError:
        raise ConfigError(f"Config file not found at {path}")
    return parse_config(text, flags, source=path)


def config_from_manifest(path, output_dir=None):
    """
    Rebuilds the RunConfig recorded in a run manifest.
    Args:
        path (str): manifest.json of a previous run.
        output_dir (str, optional): write the reproduction somewhere else.
    Returns:
        RunConfig
    """
    manifest = read_manifest(path)
    recorded = dict(manifest.get('config', {}))
    if output_dir is not None:
        recorded['output_dir'] = output_dir
    missing = [key for key in _FIELDS if key not in recorded]
    if missing:
        raise ConfigError(f"Manifest {path} lacks config keys: {', '.join(missing)}")
    config = parse_config(flags=recorded, source=path)
    return RunConfig(**dict(config.to_dict(), window=config.window,
                            defaulted=tuple(manifest.get('defaulted', ()))))
