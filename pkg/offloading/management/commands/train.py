import pandas as pd
from django.core.management.base import BaseCommand

from offloading.artifacts import read_interactions, write_csv, write_json
from offloading.mixins import RunConfigCommandMixin
from offloading.neural import HybridRegressor, predictor_to_dict
from offloading.pipeline import train_predictor

HISTORY_COLUMNS = ['epoch', 'l1', 'l2', 'l3', 'total', 'val_total']


class Command(RunConfigCommandMixin, BaseCommand):
    help = "Train the hybrid network on an interactions CSV"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('interactions', help='interactions CSV written by generate')

    def handle(self, *args, **options):
        config = self.load_config(options)

        with self.reporting_errors():
            interactions = read_interactions(options['interactions'])
            predictor = train_predictor(
                interactions, HybridRegressor.name, seed=config.seed, train_config=config.training,
                trunk_layers=config.network.trunk_layers, dropout_rate=config.network.dropout_rate,
            )

        model = predictor.regressor.model
        history = pd.DataFrame([
            [s.epoch, s.head1_loss, s.head2_loss, s.regression_loss, s.total, s.val_total] for s in model.history
        ], columns=HISTORY_COLUMNS)
        write_csv(self.output('history.csv'), history, **self.stamp)
        write_json(self.output('model.json'), predictor_to_dict(predictor), **self.stamp)

        best = min(model.history, key=lambda s: s.val_total)
        self.stdout.write(f"  Trained on {len(interactions)} interactions for {len(model.history)} epoch(s)")
        self.stdout.write(
            self.style.SUCCESS(f"\nDone. Best validation loss {best.val_total:.4f} at epoch {best.epoch}.")
        )
