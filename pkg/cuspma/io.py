"""
Artifact writers: CSVs with round-trip floats, canonical JSON, verdicts and the
run manifest. Files are written to a sibling temporary and moved into place.
"""
import csv
import hashlib
import io
import json
import math
import os
from pathlib import Path

import numpy as np

from cuspma import __version__
from cuspma.estimates.report import COLUMNS as REPORT_COLUMNS

SNAPSHOT_COLUMNS = ('i', 'j', 's1', 's2', 'phi', 'residual')
PROBE_COLUMNS = ('probe_id', 'params', 'lhs', 'rhs', 'ratio', 'refinement_level', 'converged')
VERDICTS = ('pass', 'fail', 'flagged')


def fmt(x):
    '''CSV cell: floats with 17 significant digits, bools lower case.'''
    if isinstance(x, (bool, np.bool_)):
        return 'true' if x else 'false'
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), '.17g')
    if x is None:
        return ''
    return str(x)


def jsonable(obj):
    '''Plain-JSON copy of obj: numpy scalars and arrays unwrapped, non-finite floats as strings.'''
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def canonical_json_bytes(obj):
    s = json.dumps(jsonable(obj), sort_keys=True, ensure_ascii=False, separators=(',', ':')) + '\n'
    return s.encode('utf-8')


def config_hash(config_dict):
    return hashlib.sha256(canonical_json_bytes(config_dict)).hexdigest()


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + '.tmp')
    with tmp.open('w', encoding='utf-8', newline='\n') as f:
        f.write(text)
        f.flush()
        os.fsync(f.fileno())
    os.replace(str(tmp), str(path))


def write_json(path, obj):
    atomic_write_text(path, json.dumps(jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + '\n')


def write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        cells = [row[c] for c in header] if isinstance(row, dict) else row
        writer.writerow([fmt(c) for c in cells])
    atomic_write_text(path, buf.getvalue())


def snapshot_name(case, eps, grid):
    return '%s_%s_%d.csv' % (case, format(eps, 'g'), grid)


def write_snapshot(out, case, phi):
    '''
    Write phi and its residual node by node with a JSON sidecar.

    Returns:
        Path of the CSV
    '''
    grid = phi.grid
    residual = phi.residual if phi.residual is not None else np.zeros(grid.shape)
    rows = []
    for idx in np.ndindex(*grid.shape):
        i = idx[0]
        j = idx[1] if grid.k > 1 else 0
        s2 = grid.axis[j] if grid.k > 1 else None
        rows.append((i, j, grid.axis[i], s2, phi.values[idx], residual[idx]))
    path = Path(out) / snapshot_name(case, phi.eps, grid.N)
    write_csv(path, SNAPSHOT_COLUMNS, rows)
    sidecar = {
        'case': case,
        'eps': phi.eps,
        'grid': grid.N,
        'geometry': grid.geometry.to_dict(),
        'iterations': phi.iterations,
        'history': phi.history,
        'info': phi.info,
    }
    write_json(path.with_suffix('.json'), sidecar)
    return path


def probe_row(probe_id, params, lhs, rhs, refinement_level=0, converged=True):
    ratio = lhs / rhs if rhs not in (0, 0.) else float('nan')
    return {'probe_id': probe_id, 'params': canonical_json_bytes(params).decode().strip(),
            'lhs': float(lhs), 'rhs': float(rhs), 'ratio': float(ratio),
            'refinement_level': int(refinement_level), 'converged': bool(converged)}


def write_probe_csv(path, rows):
    write_csv(path, PROBE_COLUMNS, rows)


def write_report_csv(path, report):
    write_csv(path, REPORT_COLUMNS, report.rows)


def write_verdicts(out, verdicts):
    bad = {k: v for k, v in verdicts.items() if v not in VERDICTS}
    if bad:
        raise ValueError("invalid verdict values %s" % bad)
    write_json(Path(out) / 'verdicts.json', verdicts)


def write_manifest(out, command, config, extra=None):
    '''
    manifest.json: command, effective config, its sha256, grid, tolerances and version.
    '''
    d = config.to_dict()
    manifest = {
        'command': command,
        'config': d,
        'config_sha256': config_hash(d),
        'grid': config.grid,
        'tolerances': {'newton_tol': config.solver.newton_tol,
                       'compatibility_tol': config.solver.compatibility_tol,
                       'min_step': config.solver.min_step},
        'version': __version__,
    }
    if extra:
        manifest.update(extra)
    write_json(Path(out) / 'manifest.json', manifest)
    return manifest
