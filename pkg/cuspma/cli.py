"""
Batch entry point:

    cuspma <command> --config run.json [--out DIR] [--grid N] [--eps-schedule 1,0.5,0.25]

Exit codes: 0 all verdicts pass or flagged, 2 a verdict failed, 3 numerical
non-convergence, 4 configuration error (including unmet preconditions and
unsupported dimensions).
"""
import argparse
import logging
import sys

from cuspma.config import COMMANDS, RunConfig, load_config, parse_schedule
from cuspma.errors import ConfigError, NonConvergenceError, PreconditionError, UnsupportedError
from cuspma.lab import CuspLab

EXIT_OK = 0
EXIT_VERDICT = 2
EXIT_NONCONVERGENCE = 3
EXIT_CONFIG = 4


class _ArgumentParser(argparse.ArgumentParser):
    '''Reports usage errors as ConfigError instead of exiting.'''

    def error(self, message):
        raise ConfigError("%s: %s" % (self.prog, message), field='argv')


def _parse_args(argv):
    ap = _ArgumentParser(prog='cuspma', description="Numerical lab for the perturbed complex "
                         "Monge-Ampere equation on cusp models")
    ap.add_argument('command', help="one of: %s" % ', '.join(COMMANDS))
    ap.add_argument('--config', help="JSON run configuration (defaults apply when omitted)")
    ap.add_argument('--out', help="artifact directory, overrides the config")
    ap.add_argument('--grid', type=int, help="cells per s-axis, overrides the config")
    ap.add_argument('--eps-schedule', help="comma separated eps values, overrides the config")
    ap.add_argument('--log-file', help="also log to this file")
    ap.add_argument('--debug', action='store_true', help="log at DEBUG level")
    return ap.parse_args(argv)


def run(command, config, log_file=None, debug=False):
    '''
    Run a command on a validated RunConfig.

    Returns:
        exit code (int)
    '''
    if command not in COMMANDS:
        raise ConfigError("unknown command %r (known: %s)" % (command, ', '.join(COMMANDS)), field='command')
    lab = CuspLab(config, log_file=log_file)
    if debug:
        lab.logger.setLevel(logging.DEBUG)
        lab.debug = True
    lab.dump_flags()
    verdicts = lab.kernel(command)
    return lab.exit_code(verdicts)


def main(argv=None):
    logger = logging.getLogger('cuspma')
    try:
        ns = _parse_args(sys.argv[1:] if argv is None else argv)
        config = load_config(ns.config) if ns.config else RunConfig()
        schedule = parse_schedule(ns.eps_schedule) if ns.eps_schedule else None
        config = config.override(grid=ns.grid, schedule=schedule, out=ns.out)
        return run(ns.command, config, ns.log_file, ns.debug)
    except (ConfigError, PreconditionError, UnsupportedError) as err:
        logger.error("configuration error: %s", err)
        print("error: %s" % err, file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as err:
        logger.error("non-convergence: %s", err)
        print("error: %s" % err, file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == '__main__':
    sys.exit(main())
