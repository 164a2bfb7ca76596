import logging
from contextlib import contextmanager

from django.core.management.base import CommandError

from .artifacts import config_digest
from .exceptions import ConfigError, CrossValidationError, DivergenceError, NetworkSaturatedError, SchemaError
from .runconfig import load_run_config

logger = logging.getLogger(__name__)

EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_SCHEMA = 4
EXIT_CONFIG = 5
EXIT_RUNTIME = 6


class RunConfigCommandMixin:
    """
    mixin for the edgecast commands.

    - adds the shared --config, --seed, --out and --jobs flags.
    - loads the merged RunConfig into ``self.run_config``.
    - turns toolkit failures into one-line ``kind: detail`` CommandErrors,
      each kind with its own exit code.
    """

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON run configuration file')
        parser.add_argument('--seed', type=int, help='master seed (overrides the config file)')
        parser.add_argument('--out', help='output directory (overrides the config file)')
        parser.add_argument('--jobs', type=int, help='worker threads for parallel fits')

    def load_config(self, options):
        with self.reporting_errors():
            self.run_config = load_run_config(options.get('config'), {
                'seed': options.get('seed'),
                'output_dir': options.get('out'),
                'jobs': options.get('jobs'),
            })
        self.digest = config_digest(self.run_config.to_dict())
        self.out_dir = self.run_config.output_dir
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.run_config

    def output(self, name):
        return self.out_dir / name

    @property
    def stamp(self):
        return {'seed': self.run_config.seed, 'digest': self.digest}

    @contextmanager
    def reporting_errors(self):
        try:
            yield
        except FileNotFoundError as exc:
            raise CommandError(f'missing file: {exc.filename or exc}', returncode=EXIT_MISSING_FILE) from exc
        except SchemaError as exc:
            raise CommandError(f'schema: {exc}', returncode=EXIT_SCHEMA) from exc
        except ConfigError as exc:
            raise CommandError(f'config: {exc}', returncode=EXIT_CONFIG) from exc
        except (DivergenceError, NetworkSaturatedError, CrossValidationError) as exc:
            raise CommandError(f'runtime: {exc}', returncode=EXIT_RUNTIME) from exc
        except ValueError as exc:
            raise CommandError(f'runtime: {exc}', returncode=EXIT_RUNTIME) from exc
