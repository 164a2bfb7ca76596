from django.core.management.base import BaseCommand

from offloading.artifacts import devices_frame, interactions_frame, write_csv
from offloading.datagen import generate_interactions, generate_population
from offloading.mixins import RunConfigCommandMixin

# test interactions come from their own RNG stream
TEST_STREAM = 4


class Command(RunConfigCommandMixin, BaseCommand):
    help = "Generate a synthetic IoT population and its training and test interaction sets"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--tasks', type=int, help='training interactions (default: pipeline.training_tasks)')
        parser.add_argument('--test-tasks', type=int, help='held-out interactions (default: a fifth of --tasks)')

    def handle(self, *args, **options):
        config = self.load_config(options)
        n_tasks = options.get('tasks') or config.pipeline.training_tasks
        n_test = options.get('test_tasks') or max(n_tasks // 5, 1)

        with self.reporting_errors():
            population = generate_population(config.generation)
            common = {'link': config.link, 'availability_min': config.pipeline.availability_min}
            interactions = generate_interactions(population, n_tasks, config.seed, **common)
            held_out = generate_interactions(population, n_test, [config.seed, TEST_STREAM], **common)

        write_csv(self.output('devices.csv'), devices_frame(population), **self.stamp)
        write_csv(self.output('interactions.csv'), interactions_frame(interactions), **self.stamp)
        write_csv(self.output('interactions_test.csv'), interactions_frame(held_out), **self.stamp)

        n_ecs = sum(d.is_edge_computer for d in population)
        self.stdout.write(
            self.style.SUCCESS(
                f"Done. {len(population)} devices ({n_ecs} edge computers), "
                f"{len(interactions)} training and {len(held_out)} test interactions in {self.out_dir}."
            )
        )
