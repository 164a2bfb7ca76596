"""
The merged run configuration behind every command.

Precedence is command flags, then the JSON config file, then the defaults of
each module's own config dataclass.
"""

import errno
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from django.conf import settings

from .baselines import BaselineKind, validate_hyperparameters
from .clustering import ClusteringConfig
from .datagen import GenConfig
from .exceptions import ConfigError
from .forms import ClusteringForm, GenerationForm, LinkForm, NetworkForm, PipelineForm, TrainingForm
from .latency import LinkModel
from .neural import TrainConfig
from .pipeline import PipelineConfig

TOP_LEVEL_KEYS = ('seed', 'output_dir', 'jobs')


@dataclass(frozen=True)
class NetworkOptions:
    trunk_layers: tuple[int, ...] = (128, 64)
    dropout_rate: float = 0.2

    def __post_init__(self):
        if not self.trunk_layers or min(self.trunk_layers) < 1:
            raise ValueError('trunk layer widths must be at least 1')
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError('dropout_rate must lie in [0, 1)')


# section -> (form, dataclass)
SECTIONS = {
    'generation': (GenerationForm, GenConfig),
    'link': (LinkForm, LinkModel),
    'network': (NetworkForm, NetworkOptions),
    'training': (TrainingForm, TrainConfig),
    'clustering': (ClusteringForm, ClusteringConfig),
    'pipeline': (PipelineForm, PipelineConfig),
}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    output_dir: Path = field(default_factory=lambda: Path(settings.EDGECAST_OUTPUT_DIR))
    jobs: int = 1
    generation: GenConfig = GenConfig()
    link: LinkModel = LinkModel()
    network: NetworkOptions = NetworkOptions()
    training: TrainConfig = TrainConfig()
    clustering: ClusteringConfig = ClusteringConfig()
    pipeline: PipelineConfig = PipelineConfig()
    baselines: dict[str, dict] = field(default_factory=dict)

    def hyperparameters(self):
        """Validated hyperparameters of every baseline kind."""
        return {str(kind): validate_hyperparameters(kind, self.baselines.get(str(kind))) for kind in BaselineKind}

    def to_dict(self):
        """Everything that shapes the outputs; the output directory and job count do not."""
        data = asdict(self)
        del data['output_dir'], data['jobs']
        data['baselines'] = self.hyperparameters()
        return data


def _section_errors(name, form):
    details = []
    for key, messages in form.errors.items():
        where = name if key == '__all__' else f'{name}.{key}'
        details.append(f'{where}: {" ".join(messages)}')
    return '; '.join(details)


def _build_section(name, data):
    if not isinstance(data, dict):
        raise ConfigError(f'{name}: expected an object')
    form_class, config_class = SECTIONS[name]
    unknown = sorted(set(data) - set(form_class.base_fields))
    if unknown:
        raise ConfigError(f'{name}: unknown keys {", ".join(unknown)}')
    form = form_class(data)
    if not form.is_valid():
        raise ConfigError(_section_errors(name, form))
    try:
        return config_class(**form.overrides())
    except ValueError as exc:
        raise ConfigError(f'{name}: {exc}') from None


def _build_baselines(data):
    if not isinstance(data, dict):
        raise ConfigError('baselines: expected an object')
    for kind, params in data.items():
        if not isinstance(params, dict):
            raise ConfigError(f'baselines.{kind}: expected an object')
        validate_hyperparameters(kind, params)
    return {str(BaselineKind(kind)): dict(params) for kind, params in data.items()}


def run_config_from_dict(data, overrides=None):
    if not isinstance(data, dict):
        raise ConfigError('config: expected a JSON object')
    unknown = sorted(set(data) - set(TOP_LEVEL_KEYS) - set(SECTIONS) - {'baselines'})
    if unknown:
        raise ConfigError(f'config: unknown keys {", ".join(unknown)}')

    values = {key: data[key] for key in TOP_LEVEL_KEYS if key in data}
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})
    for key in ('seed', 'jobs'):
        if key in values and (not isinstance(values[key], int) or isinstance(values[key], bool)):
            raise ConfigError(f'{key}: expected an integer')
    if values.get('seed', 0) < 0:
        raise ConfigError('seed: must be non-negative')
    if values.get('jobs', 1) < 1:
        raise ConfigError('jobs: must be at least 1')
    if 'output_dir' in values:
        values['output_dir'] = Path(values['output_dir'])

    for name in SECTIONS:
        if name in data:
            values[name] = _build_section(name, data[name])
    if 'baselines' in data:
        values['baselines'] = _build_baselines(data['baselines'])

    config = RunConfig(**values)
    return replace(config, generation=replace(config.generation, seed=config.seed))


def load_run_config(path=None, overrides=None):
    """Read ``path`` (when given), apply flag ``overrides`` and validate every section."""
    data = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(errno.ENOENT, 'No such file', str(path))
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f'{path}: not valid JSON ({exc.msg})') from None
    return run_config_from_dict(data, overrides)
