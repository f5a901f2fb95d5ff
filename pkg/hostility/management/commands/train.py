import logging
from pathlib import Path

from tqdm import tqdm

from hostility.management.base import (
    FRAMES_FILE,
    TRUTH_FILE,
    SentryCommand,
    detection,
    effective_seed,
    scenario_config_for,
    scenario_dirs,
)
from services.exceptions import EmptyInputError
from services.features import FeaturePipeline
from services.net_mlp import Mlp, TrainConfig, batch_loss, save_mlp, train
from services.simgen import label_examples, read_truth
from services.track_model import read_frames

logger = logging.getLogger(__name__)


def scenario_examples(directory: Path, max_objects: int):
    """Labelled examples from one simulated scenario directory."""
    frames = read_frames(directory / FRAMES_FILE)
    truth = read_truth(directory / TRUTH_FILE)
    cfg = scenario_config_for(directory / FRAMES_FILE)
    return label_examples(frames, truth, FeaturePipeline(cfg.feature_config()), max_objects)


class Command(SentryCommand):
    help = 'Trains the hostility network on labelled examples drawn from simulated scenarios.'

    def add_arguments(self, parser):
        parser.add_argument('--scenarios', type=str, required=True, help='Directory of scenario sub-directories.')
        parser.add_argument('--out', type=str, required=True, help='Network checkpoint to write.')
        parser.add_argument('--seed', type=int, help='Seed for weight init and batch order.')
        parser.add_argument('--epochs', type=int, help='Training epochs (default from settings).')
        parser.add_argument('--learning-rate', type=float, dest='learning_rate')
        parser.add_argument('--batch-size', type=int, dest='batch_size')
        parser.add_argument('--hidden', type=int, help='Hidden units.')
        parser.add_argument('--max-objects', type=int, dest='max_objects', help='Object slots in the input layer.')

    def run_command(self, *args, **options):
        seed = effective_seed(options['seed'])
        max_objects = options['max_objects'] or detection('MAX_OBJECTS')
        hidden = options['hidden'] or detection('HIDDEN_DIM')
        cfg = TrainConfig(
            learning_rate=options['learning_rate'] or detection('LEARNING_RATE'),
            epochs=detection('EPOCHS') if options['epochs'] is None else options['epochs'],
            seed=seed,
            batch_size=options['batch_size'] or detection('BATCH_SIZE'),
        )

        examples = []
        directories = scenario_dirs(options['scenarios'])
        for directory in tqdm(directories, desc='label', disable=not self.show_progress):
            examples.extend(scenario_examples(directory, max_objects))
        if not examples:
            raise EmptyInputError(f"No frame in {len(directories)} scenario(s) has an object inside the target zone")

        model = Mlp.initialize(max_objects, hidden, seed)
        before = batch_loss(model, examples)
        model = train(model, examples, cfg)
        after = batch_loss(model, examples)
        save_mlp(model, options['out'])
        self.success(
            f"Trained on {len(examples)} examples from {len(directories)} scenarios: "
            f"loss {before:.4f} -> {after:.4f}; wrote {options['out']}"
        )
