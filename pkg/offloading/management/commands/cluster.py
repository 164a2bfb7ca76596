import numpy as np
import pandas as pd
from django.core.management.base import BaseCommand, CommandError

from offloading.artifacts import read_population, write_csv, write_json
from offloading.clustering import elbow_select_k, kmeans_pp_fit
from offloading.mixins import EXIT_RUNTIME, RunConfigCommandMixin
from offloading.pipeline import edge_computer_points


class Command(RunConfigCommandMixin, BaseCommand):
    help = "Cluster the edge computers of a population and write the elbow curve"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('devices', help='devices CSV written by generate')
        parser.add_argument('--k', type=int, help='keep this K instead of the elbow choice')

    def handle(self, *args, **options):
        config = self.load_config(options)
        clustering = config.clustering

        with self.reporting_errors():
            population = read_population(options['devices'])
            _, codec, points = edge_computer_points(population)
            k_max = min(clustering.k_max, len(np.unique(points, axis=0)) - 1)
            if k_max < clustering.k_min:
                raise CommandError('runtime: too few distinct edge computers to cluster', returncode=EXIT_RUNTIME)
            elbow = elbow_select_k(
                points, range(clustering.k_min, k_max + 1), config.seed, n_init=clustering.n_init,
                max_iters=clustering.max_iters, tol=clustering.tol, jobs=config.jobs, codec=codec,
            )
            k = options.get('k') or elbow.k_star
            model = elbow.models.get(k) or kmeans_pp_fit(
                points, k, config.seed + k, clustering.max_iters, clustering.tol,
                n_init=clustering.n_init, codec=codec,
            )

        curve = pd.DataFrame(elbow.curve_rows(), columns=['k', 'distortion', 'silhouette'])
        write_csv(self.output('elbow.csv'), curve, **self.stamp)
        write_json(self.output('cluster_model.json'), {
            'model': model.to_dict(),
            'k_star': elbow.k_star,
            'silhouette_k': elbow.silhouette_k,
        }, **self.stamp)

        self.stdout.write(f"  Distortion elbow: k={elbow.k_star}")
        self.stdout.write(f"  Silhouette optimum: k={elbow.silhouette_k}")
        self.stdout.write(
            self.style.SUCCESS(f"\nDone. {len(points)} edge computers in {model.k} clusters.")
        )
