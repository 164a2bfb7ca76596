from dataclasses import replace

from django.core.management.base import BaseCommand

from offloading.artifacts import write_csv, write_json
from offloading.mixins import RunConfigCommandMixin
from offloading.pipeline import run_scenario


class Command(RunConfigCommandMixin, BaseCommand):
    help = "Run an end-to-end offloading scenario over simulated time"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--tasks', type=int, help='tasks to offload (default: pipeline.n_tasks)')

    def handle(self, *args, **options):
        config = self.load_config(options)
        pipeline = config.pipeline

        with self.reporting_errors():
            if options.get('tasks'):
                pipeline = replace(pipeline, n_tasks=options['tasks'])
            report = run_scenario(
                config.generation, pipeline, seed=config.seed, link=config.link, clustering=config.clustering,
                train_config=config.training, trunk_layers=config.network.trunk_layers,
                dropout_rate=config.network.dropout_rate, hyperparameters=config.hyperparameters(),
                jobs=config.jobs,
            )

        summary = report.summary()
        write_csv(self.output('decisions.csv'), report.to_frame(), **self.stamp)
        write_json(self.output('scenario.json'), {'summary': summary, 'config': config.to_dict()}, **self.stamp)

        self.stdout.write(f"  Mean latency: {summary['latency_mean_s']:.4f} s (p95 {summary['latency_p95_s']:.4f} s)")
        self.stdout.write(f"  Fallback rate: {summary['fallback_rate']:.3f}")
        self.stdout.write(f"  Mean regret: {summary['regret_mean']:.4f}")
        self.stdout.write(
            self.style.SUCCESS(f"\nDone. {summary['tasks']} tasks offloaded, {summary['refits']} refit(s).")
        )
