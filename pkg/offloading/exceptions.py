class EdgecastError(Exception):
    """Base class for failures the toolkit reports by name."""


class ConfigError(EdgecastError):
    """A run configuration failed validation."""


class SchemaError(EdgecastError):
    """A dataset or artifact file does not match the expected layout or version."""


class DivergenceError(EdgecastError):

    def __init__(self, epoch):
        super().__init__(f'divergence at epoch {epoch}')
        self.epoch = epoch


class NetworkSaturatedError(EdgecastError):

    def __init__(self):
        super().__init__('network saturated')


class CrossValidationError(EdgecastError):
    """Cross-validation was refused or produced no usable fold."""
