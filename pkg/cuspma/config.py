"""
Run configuration: JSON file -> frozen dataclasses, validated block by block.
"""
import json
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Tuple

from cuspma.errors import ConfigError
from cuspma.forcing import FORCINGS, make_forcing
from cuspma.geometry import ModelGeometry
from cuspma.solver.continuation import default_schedule
from cuspma.solver.newton import SolverConfig

COMMANDS = ('solve', 'sweep', 'geometry-report', 'verify-charts', 'verify-sobolev', 'estimates-report')
SUITES = ('I_functional', 'moser', 'inequalities', 'gaffney', 'cutoff')


def _reject_unknown(d, cls, block):
    if not isinstance(d, dict):
        raise ConfigError("expected an object, got %s" % type(d).__name__, field=block)
    known = {f.name for f in fields(cls)}
    extra = sorted(set(d) - known)
    if extra:
        raise ConfigError("unknown entries %s" % extra, field=block)


@dataclass(frozen=True)
class ForcingSpec:
    '''
    Attributes:
        name (str): key of cuspma.forcing.FORCINGS
        params (dict): constructor parameters
        p0 (float): exponent of the weighted functional, > 2n
    '''
    name: str = 'balanced_bump'
    params: dict = field(default_factory=dict)
    p0: float = 6.

    @classmethod
    def from_dict(cls, d):
        _reject_unknown(d, cls, 'forcing')
        spec = cls(**d)
        if not isinstance(spec.name, str) or spec.name not in FORCINGS:
            raise ConfigError("unknown forcing %r (known: %s)" % (spec.name, ', '.join(sorted(FORCINGS))),
                              field='forcing.name')
        if not isinstance(spec.params, dict):
            raise ConfigError("params must be an object", field='forcing.params')
        if not isinstance(spec.p0, (int, float)) or isinstance(spec.p0, bool):
            raise ConfigError("p0 must be a number, got %r" % (spec.p0,), field='forcing.p0')
        return spec

    def build(self, geometry):
        return make_forcing(self.name, geometry, self.params, self.p0)


@dataclass(frozen=True)
class ProbeConfig:
    '''
    Tunables of the diagnostic commands.

    Attributes:
        suites (tuple): estimates-report suites to run
        seed (int): seed of the random chart samples
        samples (int): random samples per chart identity
        sobolev_pair (tuple): (p, q) of the Sobolev probe
        sobolev_members (int): size of the test family
        q_schedule (tuple): exponents of the Moser ladders
        gaffney_p (tuple): exponents of u in the Gaffney probe
        gaffney_levels (int): nested solved boxes of the domain-growth probe
        cutoff_forcing (str): tailed forcing used for cutoff convergence
        cutoff_doublings (int): doublings of the cutoff scale
        uniformity_factor (float): allowed max/median of the norm columns
        chart_sum_k (int): cusp factors of the chart-sum bracket model
    '''
    suites: Tuple[str, ...] = SUITES
    seed: int = 0
    samples: int = 64
    sobolev_pair: Tuple[float, float] = (2., 4.)
    sobolev_members: int = 20
    q_schedule: Tuple[float, ...] = tuple(8. * 2 ** i for i in range(7))
    gaffney_p: Tuple[float, ...] = (1.,)
    gaffney_levels: int = 3
    cutoff_forcing: str = 'rho_power'
    cutoff_doublings: int = 6
    uniformity_factor: float = 2.
    chart_sum_k: int = 1

    def _check_types(self):
        for key in ('seed', 'samples', 'sobolev_members', 'gaffney_levels', 'cutoff_doublings', 'chart_sum_k'):
            if not isinstance(getattr(self, key), int) or isinstance(getattr(self, key), bool):
                raise TypeError("%s must be an integer" % key)
        for key in ('sobolev_pair', 'q_schedule', 'gaffney_p'):
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in getattr(self, key)):
                raise TypeError("%s must hold numbers" % key)
        if not isinstance(self.uniformity_factor, (int, float)):
            raise TypeError("uniformity_factor must be a number")
        if not all(isinstance(x, str) for x in self.suites) or not isinstance(self.cutoff_forcing, str):
            raise TypeError("suites and cutoff_forcing must be names")

    @classmethod
    def from_dict(cls, d):
        _reject_unknown(d, cls, 'probes')
        d = dict(d)
        try:
            for key in ('suites', 'sobolev_pair', 'q_schedule', 'gaffney_p'):
                if key in d:
                    d[key] = tuple(d[key])
            cfg = cls(**d)
            cfg._check_types()
        except (TypeError, ValueError) as err:
            raise ConfigError("malformed probes entry: %s" % err, field='probes')
        bad = sorted(set(cfg.suites) - set(SUITES))
        if bad:
            raise ConfigError("unknown suites %s" % bad, field='probes.suites')
        if len(cfg.sobolev_pair) != 2:
            raise ConfigError("expected (p, q)", field='probes.sobolev_pair')
        if cfg.samples < 1 or cfg.sobolev_members < 1 or cfg.gaffney_levels < 2:
            raise ConfigError("sample counts must be positive (gaffney_levels >= 2)", field='probes')
        if cfg.cutoff_forcing not in FORCINGS:
            raise ConfigError("unknown forcing %r" % cfg.cutoff_forcing, field='probes.cutoff_forcing')
        if cfg.chart_sum_k not in (1, 2):
            raise ConfigError("chart_sum_k must be 1 or 2", field='probes.chart_sum_k')
        if not cfg.uniformity_factor >= 1.:
            raise ConfigError("uniformity_factor must be >= 1", field='probes.uniformity_factor')
        return cfg


@dataclass(frozen=True)
class RunConfig:
    '''
    Attributes:
        geometry (ModelGeometry)
        grid (int): cells per s-axis
        forcing (ForcingSpec)
        solver (SolverConfig)
        schedule (tuple): strictly decreasing eps values
        probes (ProbeConfig)
        out (str): output directory
        case (str): case name used in artifact file names
    '''
    geometry: ModelGeometry = field(default_factory=ModelGeometry)
    grid: int = 64
    forcing: ForcingSpec = field(default_factory=ForcingSpec)
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(require_compatibility=True))
    schedule: Tuple[float, ...] = tuple(default_schedule())
    probes: ProbeConfig = field(default_factory=ProbeConfig)
    out: str = 'out'
    case: Optional[str] = None

    @property
    def case_name(self):
        return self.case or self.forcing.name

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("top level must be an object", field='config')
        known = {'geometry', 'forcing', 'solver', 'probes', 'out', 'case'}
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError("unknown entries %s" % extra, field='config')

        geo = dict(d.get('geometry', {}))
        grid = geo.pop('grid', 64)
        if not isinstance(grid, int) or isinstance(grid, bool):
            raise ConfigError("grid must be an integer, got %r" % (grid,), field='geometry.grid')
        _reject_unknown(geo, ModelGeometry, 'geometry')
        try:
            geometry = ModelGeometry(**geo)
        except ConfigError:
            raise
        except (TypeError, ValueError) as err:
            raise ConfigError(str(err), field='geometry')

        sol = dict(d.get('solver', {}))
        try:
            schedule = tuple(float(e) for e in sol.pop('schedule', default_schedule()))
        except (TypeError, ValueError):
            raise ConfigError("schedule must be a list of numbers", field='solver.schedule')
        sol.setdefault('require_compatibility', True)
        sol['grid'] = grid
        if 'epsilon' not in sol and schedule:
            sol['epsilon'] = schedule[0]
        solver = SolverConfig.from_dict(sol)
        _check_schedule(schedule)

        return cls(geometry=geometry, grid=int(grid), forcing=ForcingSpec.from_dict(d.get('forcing', {})),
                   solver=solver, schedule=schedule, probes=ProbeConfig.from_dict(d.get('probes', {})),
                   out=str(d.get('out', 'out')), case=d.get('case'))

    def override(self, grid=None, schedule=None, out=None):
        '''Apply CLI overrides; they take precedence over the file.'''
        d = self.to_dict()
        if grid is not None:
            d['geometry']['grid'] = grid
        if schedule is not None:
            d['solver']['schedule'] = list(schedule)
            d['solver'].pop('epsilon', None)
        if out is not None:
            d['out'] = out
        return RunConfig.from_dict(d)

    def to_dict(self):
        geo = self.geometry.to_dict()
        geo['grid'] = self.grid
        sol = self.solver.to_dict()
        sol.pop('grid')
        sol['schedule'] = list(self.schedule)
        probes = {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self.probes).items()}
        d = {'geometry': geo, 'forcing': asdict(self.forcing), 'solver': sol, 'probes': probes,
             'out': self.out}
        if self.case is not None:
            d['case'] = self.case
        return d


def _check_schedule(schedule):
    if not schedule:
        raise ConfigError("empty eps schedule", field='solver.schedule')
    if any(not 0. < e <= 1. for e in schedule):
        raise ConfigError("eps values must lie in (0, 1]", field='solver.schedule')
    if any(b >= a for a, b in zip(schedule[:-1], schedule[1:])):
        raise ConfigError("eps schedule must be strictly decreasing", field='solver.schedule')


def parse_schedule(text):
    '''"1,0.5,0.25" -> (1.0, 0.5, 0.25).'''
    try:
        return tuple(float(x) for x in text.split(',') if x.strip())
    except ValueError:
        raise ConfigError("malformed schedule %r" % text, field='solver.schedule')


def loads_config(text):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("malformed JSON at line %d, column %d: %s" % (err.lineno, err.colno, err.msg),
                          field='config')
    return RunConfig.from_dict(d)


def load_config(path):
    '''
    Read and validate a JSON run configuration.

    Args:
        path (str): config file

    Returns:
        RunConfig
    '''
    try:
        with open(path) as f:
            text = f.read()
    except OSError as err:
        raise ConfigError("cannot read %s: %s" % (path, err), field='config')
    return loads_config(text)
