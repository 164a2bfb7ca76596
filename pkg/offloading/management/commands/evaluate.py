import pandas as pd
from django.core.management.base import BaseCommand

from offloading.artifacts import read_interactions, read_json, write_csv, write_text
from offloading.domain import encode_interactions
from offloading.mixins import RunConfigCommandMixin
from offloading.neural import head_scores, predictor_from_dict, profile_targets

ROWS = (
    ('Classification head 1 (manufacturer)', 'F1', 'head1_f1'),
    ('Classification head 2 (privileges)', 'F1', 'head2_f1'),
    ('Regression head', 'MSE', 'regression_mse'),
)


class Command(RunConfigCommandMixin, BaseCommand):
    help = "Score a trained hybrid network head by head on an interactions CSV"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('interactions', help='interactions CSV, usually interactions_test.csv')
        parser.add_argument('model', help='model JSON written by train')

    def handle(self, *args, **options):
        self.load_config(options)

        with self.reporting_errors():
            predictor = predictor_from_dict(read_json(options['model']))
            interactions = read_interactions(options['interactions'])
            model = predictor.regressor.model
            inputs = encode_interactions(interactions, predictor.input_codec)
            scores = head_scores(model, inputs, profile_targets(model.codec, [i.target for i in interactions]))

        frame = pd.DataFrame([
            {'output': output, 'metric': metric, 'value': scores[key]} for output, metric, key in ROWS
        ], columns=['output', 'metric', 'value'])
        write_csv(self.output('evaluation.csv'), frame, **self.stamp)

        lines = [f'{"Output":<40} {"Metric":<6} {"Value":>8}']
        lines += [f'{output:<40} {metric:<6} {scores[key]:>8.4f}' for output, metric, key in ROWS]
        table = '\n'.join(lines) + '\n'
        write_text(self.output('evaluation.txt'), table, **self.stamp)

        self.stdout.write(table)
        self.stdout.write(self.style.SUCCESS(f"Done. Evaluated {len(interactions)} interactions."))
