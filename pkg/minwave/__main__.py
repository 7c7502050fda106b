"""Primary module for minwave."""
import sys
import logging
import argparse
import minwave.util as util
import minwave.yaml as yaml
import minwave.runner as runner
from minwave.const import (CONF_FILE, CONF_LOGGER, CONF_LEVEL, EXIT_IO,
                           EXIT_VALIDATION, COMMANDS)
from minwave.const import (__version__, ARG_COMMAND, ARG_CONFIG, ARG_OUT_DIR,
                           ARG_TOLERANCE, ARG_MAX_ITERS, ARG_QUADRATURE,
                           ARG_SEED)
from minwave.exceptions import ValidationError

LOGGER = logging.getLogger(__name__)


class Parser(object):
    """Argument parsing class."""

    def __init__(self):
        """Intialize arguments for parser."""
        self.parser = argparse.ArgumentParser('minwave')
        self.add_args()

    def add_args(self):
        """Adds arguments."""
        self.parser.add_argument(
            ARG_COMMAND,
            help="Subcommand to run.",
            choices=COMMANDS
        )
        self.parser.add_argument(
            '--{}'.format(ARG_CONFIG.replace('_', '-')),
            help="Config file, or a directory holding config.yaml.",
            type=str,
            required=True
        )
        self.parser.add_argument(
            '--{}'.format(ARG_OUT_DIR.replace('_', '-')),
            help="Directory for result tables and the summary record.",
            type=str
        )
        self.parser.add_argument(
            '--{}'.format(ARG_TOLERANCE.replace('_', '-')),
            help="Relative residual at which CG stops.",
            type=float
        )
        self.parser.add_argument(
            '--{}'.format(ARG_MAX_ITERS.replace('_', '-')),
            help="Iteration limit of CG.",
            type=int
        )
        self.parser.add_argument(
            '--{}'.format(ARG_QUADRATURE.replace('_', '-')),
            help="Polar order of the sphere quadrature for greens-table.",
            type=int
        )
        self.parser.add_argument(
            '--{}'.format(ARG_SEED.replace('_', '-')),
            help="Seed for random trial fields and starts.",
            type=int
        )
        self.parser.add_argument(
            '--{}'.format('version'),
            action='version',
            version='%(prog)s {version}'.format(version=__version__)
        )

    @property
    def args(self):
        """Return list of args."""
        return self.parser.parse_args()


def get_arguments():
    """Gets command line arguments."""
    opts = dict()
    parser = Parser()
    for arg in vars(parser.args):
        opts[arg] = getattr(parser.args, arg)
    return opts


def main():
    """Run the requested subcommand."""
    args = get_arguments()
    try:
        config = yaml.load_yaml(args[ARG_CONFIG])
    except OSError as err:
        LOGGER.error("Could not read configuration: %s", err)
        sys.exit(EXIT_IO)
    except ValidationError as err:
        LOGGER.error("%s", err)
        sys.exit(EXIT_VALIDATION)
    util.set_loggers(
        LOGGER,
        file=config[CONF_LOGGER][CONF_FILE],
        level=config[CONF_LOGGER][CONF_LEVEL]
    )
    sys.exit(runner.run(config, args[ARG_COMMAND], args))


if __name__ == '__main__':
    main()
