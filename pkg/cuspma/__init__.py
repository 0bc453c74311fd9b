__version__ = '1.0'

from cuspma import lab


def Lab(config=None, logger=None, log_file='cuspma.log'):
    return lab.CuspLab(config, logger, log_file)
