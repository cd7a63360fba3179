import os

# Path to the directory where this config.py file is located
BASE_DIR = os.path.dirname(os.path.abspath(__file__))

VERSION = '0.3.0'

# Output directory; PHOTONPATHS_OUTPUT_DIR overrides the default
OUTPUT_DIR_ENV_VAR = 'PHOTONPATHS_OUTPUT_DIR'
DEFAULT_OUTPUT_DIR = os.environ.get(OUTPUT_DIR_ENV_VAR, os.path.join(BASE_DIR, 'runs', 'latest'))

# Sample run configuration (flat key = value text)
DEFAULT_CONFIG_FILE = os.path.join(BASE_DIR, 'example_run.cfg')

# Output file names
TRAJECTORIES_FILE = 'trajectories.csv'
DENSITY_FILE = 'density.csv'
REPORT_FILE = 'report.json'
MANIFEST_FILE = 'manifest.json'

# Defaults applied by run_config.parse_config; sigma = 1 fixes the length unit
RUN_DEFAULTS = {
    'scenario': 'single',
    'mass': 1.0,
    'k0_over_sigma': 15.0,
    'sigma': 1.0,
    'alpha': 0.5,
    't0': -3.0,
    't1': 3.0,
    'n_traj': 200,
    'n_times': 61,
    'seed': 0,
    'sampling': 'quantile',
    'route': 'kg-current',
    'two_photon_density': 'psi',
    'window': None,
    'resolution': 2048,
    'resolution_2d': 256,
    'rtol': 1e-9,
    'atol': 1e-12,
    'node_floor': 1e-12,
    'quad_nodes': 512,
    'quad_halfwidth': 12.0,
    'output_dir': DEFAULT_OUTPUT_DIR,
}
