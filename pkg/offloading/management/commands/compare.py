from django.core.management.base import BaseCommand

from offloading.artifacts import read_interactions, write_csv, write_text
from offloading.baselines import HYBRID, baseline_factories, compare_all
from offloading.domain import encode_interactions, fit_input_codec, fit_profile_codec
from offloading.mixins import RunConfigCommandMixin
from offloading.neural import HybridRegressor


class Command(RunConfigCommandMixin, BaseCommand):
    help = "Cross-validate the seven baselines and the hybrid network on an interactions CSV"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('interactions', help='interactions CSV written by generate')
        parser.add_argument('--folds', type=int,
                            help='k-fold instead of leave-one-out (required above EDGECAST_LOOCV_CAP rows)')

    def handle(self, *args, **options):
        config = self.load_config(options)
        hyperparameters = config.hyperparameters()

        with self.reporting_errors():
            interactions = read_interactions(options['interactions'])
            input_codec = fit_input_codec(interactions)
            profiles = [i.target for i in interactions]
            codec = fit_profile_codec(profiles)
            factories = baseline_factories(codec, hyperparameters, config.seed)
            factories[HYBRID] = lambda: HybridRegressor(
                codec, trunk_layers=config.network.trunk_layers, dropout_rate=config.network.dropout_rate,
                train_config=config.training, seed=config.seed,
            )
            report = compare_all(
                encode_interactions(interactions, input_codec), profiles, codec, factories,
                seed=config.seed, folds=options.get('folds'), jobs=config.jobs, hyperparameters=hyperparameters,
            )

        write_csv(self.output('comparison.csv'), report.to_frame(), **self.stamp)
        table = report.to_table()
        write_text(self.output('comparison.txt'), table, **self.stamp)

        self.stdout.write(table)
        self.stdout.write(
            self.style.SUCCESS(f"Done. {len(report.rows)} models compared ({report.protocol}), "
                               f"best baseline {report.best_baseline}.")
        )
