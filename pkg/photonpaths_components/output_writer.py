"""
Plain-file exports: trajectory and density tables (CSV), check reports and the run
manifest (JSON). Data files hold no timestamps, so identical runs hash identically.
"""
import csv
import hashlib
import json
import logging
import math
import os
from datetime import datetime

import numpy as np
from dateutil import tz
from dateutil.parser import isoparse

from config import DENSITY_FILE, MANIFEST_FILE, REPORT_FILE, TRAJECTORIES_FILE, VERSION

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ['traj_id', 't', 'r', 'r_star', 'v', 'j0', 'j1', 'status']
TWO_PHOTON_TRAJECTORY_COLUMNS = ['traj_id', 'photon', 't', 'r', 'r_star', 'v', 'j0', 'j1', 'status']
DENSITY_COLUMNS = ['t', 'r_star', 'r', 'j0', 'j1', 'v']
DENSITY_2D_COLUMNS = ['t', 'r1_star', 'r2_star', 'density']
TIMESTAMP_KEYS = ('started_utc', 'finished_utc')


def format_float(value):
    """Shortest round-trip text for a float; nan and inf spelled out."""
    return repr(float(value))


def to_json_ready(obj):
    """Converts numpy scalars and arrays to builtins; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): to_json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_json_ready(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def file_sha256(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def utc_now():
    return datetime.now(tz=tz.tzutc())


def trajectory_rows(bundle):
    """Yields CSV rows sample by sample, one row per photon for coupled pairs."""
    for trajectory in bundle.trajectories:
        pair = trajectory.dimension == 2
        for photon in range(trajectory.dimension):
            for t, r_star, r, v, j0, j1 in trajectory.samples(photon):
                row = {
                    'traj_id': trajectory.traj_id,
                    't': format_float(t),
                    'r': format_float(r),
                    'r_star': format_float(r_star),
                    'v': format_float(v),
                    'j0': format_float(j0),
                    'j1': format_float(j1),
                    'status': trajectory.status,
                }
                if pair:
                    row['photon'] = photon + 1
                yield row


def write_trajectories_csv(path, bundle):
    two_photon = bool(bundle.trajectories) and bundle.trajectories[0].dimension == 2
    columns = TWO_PHOTON_TRAJECTORY_COLUMNS if two_photon else TRAJECTORY_COLUMNS
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=columns, lineterminator='\n')
        writer.writeheader()
        for row in trajectory_rows(bundle):
            writer.writerow(row)


def write_density_csv(path, grids):
    """
    Writes density grids stacked by time.
    Args:
        path (str): destination file.
        grids (list): DensityGrid records (single photon) or DensityGrid2D records (two photons).
    """
    two_photon = bool(grids) and hasattr(grids[0], 'density')
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(DENSITY_2D_COLUMNS if two_photon else DENSITY_COLUMNS)
        for grid in grids:
            t = format_float(grid.t)
            if two_photon:
                for i, r1 in enumerate(grid.r1_star):
                    for j, r2 in enumerate(grid.r2_star):
                        writer.writerow([t, format_float(r1), format_float(r2), format_float(grid.density[i, j])])
            else:
                for k in range(grid.r_star.size):
                    writer.writerow([t, format_float(grid.r_star[k]), format_float(grid.r[k]),
                                     format_float(grid.j0[k]), format_float(grid.j1[k]), format_float(grid.v[k])])


def write_json(path, payload):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(json.dumps(to_json_ready(payload), sort_keys=True, indent=2, allow_nan=False))
        f.write('\n')


def check_summary(report):
    return {'name': report.name, 'status': report.status, 'max_error': report.max_error,
            'tolerance': report.tolerance}


class RunOutputs:
    """Owns the output directory; every data file goes through here so its hash is recorded."""

    def __init__(self, output_dir):
        self.output_dir = output_dir
        self.hashes = {}
        os.makedirs(output_dir, exist_ok=True)

    def path(self, name):
        return os.path.join(self.output_dir, name)

    def _record(self, name):
        self.hashes[name] = file_sha256(self.path(name))
        logger.info("Wrote %s", self.path(name))

    def write_trajectories(self, bundle):
        write_trajectories_csv(self.path(TRAJECTORIES_FILE), bundle)
        self._record(TRAJECTORIES_FILE)

    def write_density(self, grids):
        write_density_csv(self.path(DENSITY_FILE), grids)
        self._record(DENSITY_FILE)

    def write_report(self, reports):
        write_json(self.path(REPORT_FILE), {'checks': [r.to_dict() for r in reports]})
        self._record(REPORT_FILE)

    def write_manifest(self, manifest):
        """The manifest is written last and is not hashed into itself."""
        write_json(self.path(MANIFEST_FILE), manifest)
        logger.info("Wrote %s", self.path(MANIFEST_FILE))


def build_manifest(config, started, finished, outputs, reports=(), failures=(), provenance=None, error=None):
    """
    Assembles the reproducibility manifest.
    Args:
        config (RunConfig): resolved run configuration.
        started, finished (datetime): UTC wall-clock bounds of the run.
        outputs (RunOutputs): written files and their hashes.
        reports (list): CheckReports of the run.
        failures (list): per-trajectory failure records.
        provenance (dict, optional): ensemble provenance (window, absolute node floor, negative-frequency leakage).
        error (str, optional): message of an exception that stopped the run.
    Returns:
        dict
    """
    return {
        'tool': 'photonpaths',
        'version': VERSION,
        'status': 'error' if error else ('failed' if any(r.failed for r in reports) else 'ok'),
        'error': error,
        'config': config.to_dict(),
        'defaulted': list(config.defaulted),
        'started_utc': started.isoformat(),
        'finished_utc': finished.isoformat(),
        'wall_clock_seconds': (finished - started).total_seconds(),
        'checks': [check_summary(r) for r in reports],
        'failures': list(failures),
        'provenance': provenance or {},
        'files': dict(sorted(outputs.hashes.items())),
    }


def read_manifest(path):
    """Loads a manifest, parsing its UTC timestamps back into datetimes."""
    with open(path, 'r', encoding='utf-8') as f:
        manifest = json.load(f)
    for key in TIMESTAMP_KEYS:
        if manifest.get(key):
            manifest[key] = isoparse(manifest[key])
    return manifest
