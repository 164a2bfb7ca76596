from django import forms

from .baselines import HYBRID, BaselineKind


def _number_list(value, *, length=None, cast=float, positive=True):
    if value is None:
        return None
    if not isinstance(value, (list, tuple)):
        raise forms.ValidationError('Enter a list.')
    if length is not None and len(value) != length:
        raise forms.ValidationError(f'Enter exactly {length} values.')
    try:
        items = tuple(cast(v) for v in value)
    except (TypeError, ValueError):
        raise forms.ValidationError('Enter numbers only.') from None
    if positive and min(items) <= 0:
        raise forms.ValidationError('Every value must be positive.')
    return items


class SectionForm(forms.Form):
    """
    Validates one config section.

    Every field is optional; only keys present in the data override the
    defaults, and a present key may be null only when listed in ``nullable``.
    """

    nullable = ()

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        for form_field in self.fields.values():
            form_field.required = False

    def clean(self):
        cleaned_data = super().clean()
        for name in self.data:
            if name in self.fields and name not in self.nullable and name not in self.errors \
                    and cleaned_data.get(name) is None:
                self.add_error(name, 'This field cannot be null.')
        return cleaned_data

    def overrides(self):
        return {name: self.cleaned_data[name] for name in self.data if name in self.fields}


class GenerationForm(SectionForm):
    n_devices = forms.IntegerField(min_value=1)
    private_fraction = forms.FloatField(min_value=0.0, max_value=1.0)
    computational_fraction = forms.FloatField(min_value=0.0, max_value=1.0)
    area_side_meters = forms.FloatField(min_value=0.0)
    hotspot_radius_meters = forms.FloatField(min_value=0.0)
    availability_mean = forms.FloatField(min_value=0.0, max_value=1.0)
    availability_std = forms.FloatField(min_value=0.0)
    noise_std = forms.FloatField(min_value=0.0)
    load_mean = forms.FloatField(min_value=0.0, max_value=1.0)
    load_std = forms.FloatField(min_value=0.0)
    ram_levels = forms.JSONField()
    manufacturer_vocab = forms.JSONField()
    clock_rate_range_hz = forms.JSONField()
    cpi_range = forms.JSONField()
    speed_spread = forms.FloatField(min_value=0.0, max_value=1.0)
    n_latent_clusters = forms.IntegerField(min_value=1)
    sensor_type_weights = forms.JSONField()

    def clean_ram_levels(self):
        return _number_list(self.cleaned_data['ram_levels'], cast=int)

    def clean_manufacturer_vocab(self):
        vocab = self.cleaned_data['manufacturer_vocab']
        if vocab is None:
            return None
        if not isinstance(vocab, list) or not vocab or not all(isinstance(v, str) and v for v in vocab):
            raise forms.ValidationError('Enter a non-empty list of names.')
        if len(set(vocab)) != len(vocab):
            raise forms.ValidationError('Names must be unique.')
        return tuple(vocab)

    def clean_clock_rate_range_hz(self):
        return _number_list(self.cleaned_data['clock_rate_range_hz'], length=2)

    def clean_cpi_range(self):
        return _number_list(self.cleaned_data['cpi_range'], length=2)

    def clean_sensor_type_weights(self):
        weights = self.cleaned_data['sensor_type_weights']
        if weights is None:
            return None
        if not isinstance(weights, dict) or not weights:
            raise forms.ValidationError('Enter a mapping of device type to weight.')
        try:
            return {str(k): float(v) for k, v in weights.items()}
        except (TypeError, ValueError):
            raise forms.ValidationError('Weights must be numbers.') from None


class LinkForm(SectionForm):
    d2d_threshold_meters = forms.FloatField()
    d2d_throughput_bps = forms.FloatField()
    cellular_throughput_bps = forms.FloatField()


class NetworkForm(SectionForm):
    trunk_layers = forms.JSONField()
    dropout_rate = forms.FloatField(min_value=0.0, max_value=1.0)

    def clean_trunk_layers(self):
        return _number_list(self.cleaned_data['trunk_layers'], cast=int)


class TrainingForm(SectionForm):
    epochs = forms.IntegerField(min_value=1)
    batch_size = forms.IntegerField(min_value=1)
    learning_rate = forms.FloatField()
    early_stop_patience = forms.IntegerField(min_value=1)
    validation_fraction = forms.FloatField(min_value=0.0, max_value=1.0)
    loss_weights = forms.JSONField()

    def clean_loss_weights(self):
        return _number_list(self.cleaned_data['loss_weights'], length=3)


class ClusteringForm(SectionForm):
    k_min = forms.IntegerField(min_value=2)
    k_max = forms.IntegerField(min_value=2)
    n_init = forms.IntegerField(min_value=1)
    max_iters = forms.IntegerField(min_value=1)
    tol = forms.FloatField(min_value=0.0)

    def clean(self):
        cleaned_data = super().clean()
        k_min = cleaned_data.get('k_min')
        k_max = cleaned_data.get('k_max')
        if k_min is not None and k_max is not None and k_max < k_min:
            raise forms.ValidationError('k_max cannot be below k_min.')
        return cleaned_data


class PipelineForm(SectionForm):
    nullable = ('k',)

    availability_min = forms.FloatField(min_value=0.0, max_value=1.0)
    recluster_period_s = forms.FloatField()
    load_increment = forms.FloatField(min_value=0.0, max_value=1.0)
    training_tasks = forms.IntegerField(min_value=2)
    n_tasks = forms.IntegerField(min_value=1)
    mean_interarrival_s = forms.FloatField()
    # null selects K with the elbow method
    k = forms.IntegerField(min_value=1)
    predictor = forms.ChoiceField(choices=[(HYBRID, HYBRID), *BaselineKind.choices])
