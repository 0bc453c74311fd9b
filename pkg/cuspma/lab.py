import logging
import math
from pathlib import Path

import numpy as np

from cuspma import grid as fd
from cuspma import io
from cuspma.atlas import charts as qc
from cuspma.atlas.sobolev import (bracket_constant, bump_family, sobolev_family_probe, sobolev_ratio,
                                  sup_bound_probe)
from cuspma.config import RunConfig
from cuspma.errors import ConfigError
from cuspma.estimates.auxiliary import auxiliary_fields, differential_inequality_check
from cuspma.estimates.cutoff import cutoff_convergence
from cuspma.estimates.gaffney import control_flux, gaffney_control, gaffney_growth, gaffney_probe
from cuspma.estimates.measures import MeasureSpec, I_functional, moser_trace
from cuspma.estimates.report import norm_report
from cuspma.forcing import make_forcing
from cuspma.geometry import (CuspPoint, ModelGeometry, cusp_integral, cusp_volume, gauss_curvature_cusp,
                             gauss_curvature_fd, grad_rho_ratio, measure_bounds, quasi_isometry_constant)
from cuspma.solver.charts import chart_residual_family, charts_in_box, residual_budget
from cuspma.solver.continuation import epsilon_continuation
from cuspma.solver.newton import newton_solve
from cuspma.solver.operator import positivity_check


class CuspLab:
    def __init__(self, config=None, logger=None, log_file='cuspma.log'):
        """
        Attributes:
            config (RunConfig): validated run configuration
            geometry (ModelGeometry): the local model
            out (Path): artifact directory
            curvature_tol (float): tolerance of the closed-form curvature check
            curvature_fd_tol (float): tolerance of the finite-difference curvature oracle
            chart_tol (float): tolerance of the closed-form chart identities
            chart_fd_tol (float): tolerance of the chain-rule chart oracle
            bracket_max (float): admissible chart-sum bracket constant
            stability (float): relative drift allowed under refinement
            ladder_gap (float): admissible sup-recovery gap of the norm ladders
            large_s (float): cusp coordinate of the single-factor limit check
            control_rtol (float): agreement of the Gaffney controls with their closed forms
            chart_residual_s_max (float): far end of the one-factor box of the chart residual check
            chart_residual_grid (int): cells of that box
            chart_residual_factor (float): admissible chart residual in units of the grid residual

        Saved results:
            verdicts (dict): check-id -> pass | fail | flagged of the last command
            family (SolutionFamily): last solved family
            report (EstimateReport): last norm report
            artifacts (list): files written by the last command
        """
        self.config = config if config is not None else RunConfig()
        self.geometry = self.config.geometry
        self.out = Path(self.config.out)
        self.curvature_tol = 1e-6
        self.curvature_fd_tol = 1e-4
        self.chart_tol = 1e-12
        self.chart_fd_tol = 1e-6
        self.bracket_max = 100.
        self.stability = 0.2
        self.ladder_gap = 0.02
        self.large_s = 1e4
        self.geometry_samples = 8
        self.control_rtol = 1e-2
        self.chart_residual_s_max = 400.
        self.chart_residual_grid = 128
        self.chart_residual_factor = 10.
        # stored results
        self.verdicts = {}
        self.family = None
        self.report = None
        self.artifacts = []

        # logging setup
        if logger is not None:
            self.logger = logger
        else:
            self.logger = logging.getLogger('cuspma')
            self.logger.setLevel(logging.INFO)
            file_handler_set = any(type(handler) is logging.FileHandler
                                   for handler in self.logger.handlers)
            if log_file is not None and not file_handler_set:
                file_handler = logging.FileHandler(log_file, mode='w')
                formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
                file_handler.setLevel(logging.INFO)
                file_handler.setFormatter(formatter)
                self.logger.addHandler(file_handler)
            stream_handler_set = any(type(handler) is logging.StreamHandler
                                     for handler in self.logger.handlers)
            if not stream_handler_set:
                self.logger.addHandler(logging.StreamHandler())

        # debug flag
        self.debug = False

    def dump_flags(self):
        self.logger.info("=" * 35 + " CUSPMA FLAGS " + "=" * 35)
        g = self.geometry
        self.logger.info("n = %d, k = %d", g.n, g.k)
        self.logger.info("kappa = %.17g", g.kappa)
        self.logger.info("s_min = %.6f, s_max = %.6f", g.s_min, g.s_max)
        self.logger.info("grid = %d", self.config.grid)
        self.logger.info("forcing = %s %s (p0 = %g)", self.config.forcing.name, self.config.forcing.params,
                         self.config.forcing.p0)
        for key, value in self.config.solver.to_dict().items():
            self.logger.info("%s = %s", key, value)
        self.logger.info("schedule = %s", list(self.config.schedule))
        self.logger.info("suites = %s", list(self.config.probes.suites))
        self.logger.info("out = %s", self.out)

    def kernel(self, command):
        '''
        Run one command and write its artifacts, verdicts.json and manifest.json.

        Args:
            command (str): solve, sweep, geometry-report, verify-charts,
                verify-sobolev or estimates-report

        Returns:
            verdicts (dict): check-id -> pass | fail | flagged
        '''
        self.verdicts = {}
        self.artifacts = []
        key = command.upper().replace('-', '_')
        if key == 'SOLVE':
            self.solve()
        elif key == 'SWEEP':
            self.sweep()
        elif key in ('GEOMETRY_REPORT', 'GEOMETRY'):
            self.geometry_report()
        elif key in ('VERIFY_CHARTS', 'CHARTS'):
            self.verify_charts()
        elif key in ('VERIFY_SOBOLEV', 'SOBOLEV'):
            self.verify_sobolev()
        elif key in ('ESTIMATES_REPORT', 'ESTIMATES'):
            self.estimates_report()
        else:
            raise ConfigError("unknown command %r" % (command,), field='command')
        io.write_verdicts(self.out, self.verdicts)
        io.write_manifest(self.out, command, self.config, {'artifacts': sorted(self.artifacts)})
        failed = sorted(k for k, v in self.verdicts.items() if v == 'fail')
        self.logger.info("%s: %d verdicts, %d failed %s", command, len(self.verdicts), len(failed),
                         failed if failed else "")
        return dict(self.verdicts)

    @staticmethod
    def exit_code(verdicts):
        return 2 if any(v == 'fail' for v in verdicts.values()) else 0

    def _verdict(self, name, ok, flag=False):
        self.verdicts[name] = 'flagged' if flag else ('pass' if ok else 'fail')

    def _write_probes(self, name, rows):
        path = self.out / name
        io.write_probe_csv(path, rows)
        self.artifacts.append(path.name)

    def forcing(self, geometry=None):
        return self.config.forcing.build(geometry or self.geometry)

    # ---------------------------------------------------------------- geometry

    def geometry_report(self):
        g = self.geometry
        rows = []
        svals = np.geomspace(g.s_min, g.s_max, self.geometry_samples)
        dev = dev_fd = 0.
        for s in svals:
            K = gauss_curvature_cusp(s)
            Kfd = gauss_curvature_fd(s)
            dev = max(dev, abs(K + 4.))
            dev_fd = max(dev_fd, abs(Kfd - K))
            rows.append(io.probe_row('curvature', {'s': s}, K, -4.))
            rows.append(io.probe_row('curvature_fd', {'s': s}, Kfd, K))
        self._verdict('curvature_constant', dev <= self.curvature_tol)
        self._verdict('curvature_fd_oracle', dev_fd <= self.curvature_fd_tol)

        bounds = measure_bounds(g, m=self.geometry_samples)
        limit = grad_rho_ratio(CuspPoint((self.large_s,), (0.,), ()), lam=1.)
        rows.append(io.probe_row('grad_rho_sup', {'m': self.geometry_samples}, bounds.grad_ratio, 1.))
        rows.append(io.probe_row('grad_rho_limit', {'s': self.large_s}, limit.ratio, 1.))
        self._verdict('grad_rho_bounded', bounds.grad_ratio <= math.sqrt(g.k) + 1e-12)
        self._verdict('grad_rho_limit', abs(limit.ratio - 1.) <= 1e-3)

        vol = cusp_volume(g.s_min, g.s_max)
        vol_q = cusp_integral(None, g.s_min, g.s_max)
        vol_inf = cusp_volume(g.s_min)
        vol_inf_q = cusp_integral(None, g.s_min)
        rows.append(io.probe_row('cusp_volume', {'s0': g.s_min, 's1': g.s_max}, vol_q, vol))
        rows.append(io.probe_row('cusp_volume', {'s0': g.s_min, 's1': 'inf'}, vol_inf_q, vol_inf))
        self._verdict('volume_closed_form', abs(vol_q - vol) <= 1e-12 * vol and
                      abs(vol_inf_q - vol_inf) <= 1e-12 * vol_inf)

        qi = [quasi_isometry_constant(g, 1., None, m) for m in (self.geometry_samples, 2 * self.geometry_samples)]
        for level, c in enumerate(qi):
            rows.append(io.probe_row('quasi_isometry', {'m': self.geometry_samples * 2 ** level}, c, qi[0],
                                     refinement_level=level))
        self._verdict('quasi_isometry_stable', np.isfinite(qi[0]) and abs(qi[1] - qi[0]) <= self.stability * qi[0])
        self._write_probes('geometry.csv', rows)

    # ------------------------------------------------------------------ charts

    def verify_charts(self):
        g = self.geometry
        probes = self.config.probes
        rng = np.random.default_rng(probes.seed)
        seq = qc.covering_sequence(g.kappa, g.s_max, 1)
        rows = []
        err_cf = err_fd = err_w = 0.
        range_ok = True
        for delta in seq.delta_list:
            r = 0.75 * np.sqrt(rng.uniform(size=probes.samples))
            w = r * np.exp(2j * np.pi * rng.uniform(size=probes.samples))
            exact = (1. - np.abs(w) ** 2) ** -2.
            pm = qc.pullback_metric(delta, w)
            err_cf = max(err_cf, float(np.max(np.abs(pm - exact) / exact)))
            fd = np.array([qc.pullback_metric_fd(delta, x) for x in w])
            err_fd = max(err_fd, float(np.max(np.abs(fd - exact) / exact)))
            s = qc.pullback_weight(delta, w)
            logz = -np.log(np.abs(qc.quasi_map(delta, w)) ** 2)
            err_w = max(err_w, float(np.max(np.abs(s - logz) / logz)))
            scaled = (1. - delta) * s
            range_ok = range_ok and bool(np.all(scaled >= 2. / 7. - 1e-12) and np.all(scaled <= 28.))
            rows.append(io.probe_row('pullback_metric', {'delta': delta}, float(np.max(pm / exact)), 1.))
        self._verdict('chart_metric_closed_form', err_cf <= self.chart_tol)
        self._verdict('chart_metric_fd', err_fd <= self.chart_fd_tol)
        self._verdict('chart_weight', err_w <= self.chart_tol)
        self._verdict('chart_weight_range', range_ok)

        sigma1 = -0.6 * math.log(g.kappa)
        self._verdict('sigma_1', abs(seq.sigma_list[0] - sigma1) <= 1e-12)
        self._verdict('multiplicity', seq.multiplicity <= qc.MULTIPLICITY_BOUND)
        A_sigma = seq.A_sigma
        self._verdict('A_sigma_bounded', all(1. <= x < 2. for x in A_sigma))
        self._verdict('covers_domain', seq.covers_domain())
        rows.append(io.probe_row('multiplicity', seq.summary(), seq.multiplicity, qc.MULTIPLICITY_BOUND))

        kc = probes.chart_sum_k
        gk = ModelGeometry(kc, kc, g.kappa, g.s_max)
        seq_k = qc.covering_sequence(gk.kappa, gk.s_max, kc)
        cs = [bracket_constant(gk, seq_k, n_radial=16 * 2 ** lv, n_angle=32 * 2 ** lv) for lv in (0, 1)]
        for level, (c, results) in enumerate(cs):
            for name, res in sorted(results.items()):
                rows.append(io.probe_row('chart_sum:%s' % name, {'k': kc}, res.sum34, res.direct,
                                         refinement_level=level, converged=res.converged))
            rows.append(io.probe_row('bracket_constant', {'k': kc}, c, self.bracket_max, refinement_level=level))
        c0, c1 = cs[0][0], cs[1][0]
        self._verdict('bracket_constant', c1 <= self.bracket_max)
        self._verdict('bracket_stable', abs(c1 - c0) <= self.stability * c0)
        rows.extend(self._chart_residuals())
        self._write_probes('charts.csv', rows)

    def _chart_residuals(self):
        '''
        Solve one cusp factor on a long box and pull the solution back to every
        covering chart whose 1/2-disc image fits in it.
        '''
        g1 = ModelGeometry(1, 1, self.geometry.kappa, self.chart_residual_s_max)
        F = make_forcing('balanced_bump', g1)
        eps = self.config.schedule[0]
        grid = fd.TorusGrid(g1, self.chart_residual_grid)
        phi = newton_solve(F, self.config.solver.with_epsilon(eps), grid=grid)
        charts = charts_in_box(qc.covering_sequence(g1.kappa, g1.s_max, 1), g1)
        budget = residual_budget(phi, F)
        sups = chart_residual_family(phi, charts, F)
        rows = [io.probe_row('chart_residual', {'index': list(idx), 'eps': eps}, v,
                             self.chart_residual_factor * budget) for idx, v in sups.items()]
        rows.append(io.probe_row('chart_residual_budget', {'grid': self.chart_residual_grid, 'eps': eps},
                                 budget, budget))
        self.logger.info("chart residuals at eps = %g over %d charts: %s (budget %.3e)", eps, len(sups),
                         ', '.join('%.3e' % v for v in sups.values()), budget)
        if len(sups) < 2:
            self._verdict('chart_residual_budget', True, flag=True)
            self._verdict('chart_residual_uniform', True, flag=True)
            return rows
        values = list(sups.values())
        self._verdict('chart_residual_budget', max(values) <= self.chart_residual_factor * budget)
        # deeper charts see a flatter solution
        self._verdict('chart_residual_uniform', values[-1] <= values[0])
        return rows

    # ----------------------------------------------------------------- sobolev

    def verify_sobolev(self):
        g = self.geometry
        probes = self.config.probes
        p, q = probes.sobolev_pair
        family = bump_family(g, probes.sobolev_members)
        res = sobolev_family_probe(g, g.n, p, q, family, tol=self.stability)
        rows = [io.probe_row('sobolev_ratio', {'p': p, 'q': q, 'radius': v.radius}, r, res.max_ratio)
                for v, r in zip(family, res.ratios)]
        rows.append(io.probe_row('sobolev_max', {'p': p, 'q': q}, res.refined_max, res.max_ratio,
                                 refinement_level=1, converged=res.stable))
        self._verdict('sobolev_finite', np.isfinite(res.max_ratio))
        self._verdict('sobolev_stable', res.stable)

        v = family[len(family) // 2]
        r1 = sobolev_ratio(v, p, q, g.n)
        r2 = sobolev_ratio(v.scaled(3.7), p, q, g.n)
        rows.append(io.probe_row('sobolev_homogeneity', {'factor': 3.7}, r2, r1))
        self._verdict('sobolev_homogeneity', abs(r2 - r1) <= 1e-12 * max(r1, 1.))

        F = self.forcing()
        sup = sup_bound_probe(F, self.config.forcing.p0, g, q_schedule=probes.q_schedule)
        for qq, val in zip(sup.q_schedule, sup.ladder):
            rows.append(io.probe_row('sup_ladder', {'q': qq}, val, sup.sup))
        mono = all(b >= a * (1. - 1e-12) for a, b in zip(sup.ladder[:-1], sup.ladder[1:]))
        self._verdict('sup_bound_ladder', mono and sup.gap <= self.ladder_gap, flag=sup.diverged)
        self._write_probes('sobolev.csv', rows)

    # ------------------------------------------------------------------ solver

    def solve(self):
        F = self.forcing()
        cfg = self.config.solver.with_epsilon(self.config.schedule[0])
        phi = newton_solve(F, cfg, self.geometry)
        path = io.write_snapshot(self.out, self.config.case_name, phi)
        self.artifacts += [path.name, path.with_suffix('.json').name]
        self._verdict('newton_converged', phi.history[-1] <= cfg.newton_tol)
        pos = positivity_check(phi)
        self._verdict('positivity', pos.positive, flag=not pos.positive)
        self._verdict('max_principle', phi.info['max_principle_gap'] <= cfg.newton_tol + 1e-12)
        return phi

    def sweep(self):
        F = self.forcing()
        self.family = epsilon_continuation(F, list(self.config.schedule), self.config.solver, self.geometry)
        for phi in self.family.fields:
            path = io.write_snapshot(self.out, self.config.case_name, phi)
            self.artifacts += [path.name, path.with_suffix('.json').name]
        self.report = norm_report(self.family, self.geometry, self.config.forcing.p0,
                                  self.config.probes.uniformity_factor, self.config.solver.newton_tol)
        io.write_report_csv(self.out / 'report.csv', self.report)
        self.artifacts.append('report.csv')
        self.verdicts.update(self.report.verdicts)
        return self.family

    # --------------------------------------------------------------- estimates

    def estimates_report(self):
        self.sweep()
        g = self.geometry
        probes = self.config.probes
        F = self.family.forcing
        p0 = self.config.forcing.p0
        rows = []
        suites = set(probes.suites)
        if g.n < 2:
            self.logger.info("n = 1: weighted functional, dnu ladder and Laplacian checks skipped")

        if 'I_functional' in suites and g.n >= 2:
            ires = I_functional(F, p0, g, warn=False)
            rows.append(io.probe_row('I_functional', {'p0': p0, 'boxes': ires.boxes}, ires.value,
                                     ires.extrapolated, converged=not ires.diverged))
            self._verdict('I_finite', np.isfinite(ires.value), flag=ires.diverged)

        if 'moser' in suites:
            tags = ('dmu', 'dnu') if g.n >= 2 else ('dmu',)
            for tag in tags:
                ok = True
                for phi in self.family.fields:
                    ladder = moser_trace(phi, MeasureSpec(tag), probes.q_schedule)
                    ok = ok and ladder.nondecreasing and ladder.gap <= self.ladder_gap
                    rows.append(io.probe_row('moser_%s' % tag, {'eps': phi.eps, 'q': ladder.q[-1]},
                                             ladder.norms[-1], ladder.sup))
                self._verdict('moser_%s' % tag, ok)

        bounds = measure_bounds(g, m=self.geometry_samples)
        phi = self.family.fields[-1]
        aux = auxiliary_fields(phi, F, bounds.curvature, bounds.bisectional_floor, bounds.scalar_curvature)
        if 'inequalities' in suites:
            which = ('trace', 'lap', 'grad') if g.n >= 2 else ('grad',)
            for name in which:
                ok = True
                for other in self.family.fields:
                    a = aux if other is phi else auxiliary_fields(other, F, bounds.curvature,
                                                                  bounds.bisectional_floor,
                                                                  bounds.scalar_curvature)
                    chk = differential_inequality_check(other, F, name, a)
                    ok = ok and chk.count == 0
                    rows.append(io.probe_row('inequality_%s' % name, {'eps': other.eps}, chk.min_slack,
                                             float(np.max(chk.band)), converged=chk.count == 0))
                self._verdict('inequality_%s' % name, ok)

        if 'gaffney' in suites:
            cfg = self.config.solver.with_epsilon(self.family.schedule[0])
            width = g.s_max - g.s_min
            grown = [g.s_min + width * 2 ** i for i in range(probes.gaffney_levels)]
            for p in probes.gaffney_p:
                res = gaffney_probe(phi, p, aux)
                for S, flux in zip(res.S, res.flux):
                    rows.append(io.probe_row('gaffney', {'p': p, 'S': S}, flux, res.flux[0]))
                if not F.compact:
                    self.logger.info("gaffney p = %g: forcing %s is not compactly supported", p, F.name)
                    self._verdict('gaffney_p%g' % p, True, flag=True)
                    continue
                growth = gaffney_growth(F, cfg, g, p, probes.gaffney_levels, bounds.curvature)
                for S, flux in zip(growth.s_max, growth.flux):
                    rows.append(io.probe_row('gaffney_growth', {'p': p, 'S': S, 'eps': cfg.epsilon},
                                             flux, growth.flux[0]))
                self._verdict('gaffney_p%g' % p, growth.vanishing)
            largest = fd.TorusGrid(g.with_s_max(grown[-1]), phi.grid.N * 2 ** (probes.gaffney_levels - 1))
            for control in ('grad_rho', 'grad_log_rho'):
                res = gaffney_control(largest, control, grown)
                for S, flux in zip(res.S, res.flux):
                    rows.append(io.probe_row('gaffney_%s' % control, {'S': S}, flux, res.flux[0]))
                exact = [control_flux(control, S, g.s_min, g.k) for S in res.S]
                matches = all(abs(a - b) <= self.control_rtol * abs(b) for a, b in zip(res.flux, exact))
                if control == 'grad_rho':
                    # non-integrable control: constant for one factor, growing like log S beyond
                    shape = res.flux[-1] > 0. and all(b >= (1. - self.control_rtol) * a
                                                      for a, b in zip(res.flux[:-1], res.flux[1:]))
                else:
                    # integrable control: flux under (2 pi)^k k s_min^{1-k} / S
                    shape = all(abs(f) <= (1. + self.control_rtol) * (2. * math.pi) ** g.k * g.k
                                * g.s_min ** (1 - g.k) / S for S, f in zip(res.S, res.flux))
                self._verdict('gaffney_control_%s' % control, matches and shape)

        if 'cutoff' in suites and g.n >= 2:
            Ft = make_forcing(probes.cutoff_forcing, g, p0=p0)
            conv = cutoff_convergence(Ft, p0, g, probes.cutoff_doublings)
            for k, rem in zip(conv.scales, conv.remainders):
                rows.append(io.probe_row('cutoff', {'k': k, 'forcing': Ft.name}, rem, conv.total))
            self.verdicts['cutoff_convergence'] = conv.verdict

        self._write_probes('estimates.csv', rows)
        return self.report
