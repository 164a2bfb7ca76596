"""
Reading and writing the files the commands exchange.

Every CSV starts with a ``# edgecast <version> seed=<seed> config=<hash>``
line; JSON files carry the same facts under ``meta``.
"""

import errno
import hashlib
import json
from pathlib import Path

import pandas as pd

from . import __version__
from .domain import PROFILE_FIELDS, DeviceRecord, EdgeProfile, Interaction, TaskRequest, input_row
from .exceptions import SchemaError

HEADER_PREFIX = '# edgecast '

DEVICE_COLUMNS = [
    'id', 'x_meters', 'y_meters', 'battery_level', 'privileges', 'mobility', 'device_type', *PROFILE_FIELDS,
]
INTERACTION_COLUMNS = [
    'task_id', 'requester_id', 'instruction_count', 'message_size_bits', 'importance', 'priority', 'timestamp',
    'requester_x_meters', 'requester_y_meters', 'requester_battery_level', 'requester_privileges',
    'requester_mobility', 'requester_device_type', *[f'target_{name}' for name in PROFILE_FIELDS], 'ec_id',
]


def config_digest(config):
    """First 12 hex digits of the SHA-256 of the canonical JSON form of ``config``."""
    canonical = json.dumps(config, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def header_line(seed, digest):
    return f'{HEADER_PREFIX}{__version__} seed={seed} config={digest}'


def meta(seed, digest):
    return {'tool': 'edgecast', 'version': __version__, 'seed': seed, 'config': digest}


def write_csv(path, frame, *, seed, digest):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as handle:
        handle.write(header_line(seed, digest) + '\n')
        frame.to_csv(handle, index=False, lineterminator='\n')
    return path


def read_csv(path, columns=()):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(errno.ENOENT, 'No such file', str(path))
    with open(path) as handle:
        first = handle.readline()
    if not first.startswith(HEADER_PREFIX):
        raise SchemaError(f'{path}: missing edgecast header line')
    frame = pd.read_csv(path, comment='#', keep_default_na=True)
    missing = [column for column in columns if column not in frame.columns]
    if missing:
        raise SchemaError(f'{path}: missing columns {", ".join(missing)}')
    return frame


def write_text(path, text, *, seed, digest):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(header_line(seed, digest) + '\n' + text)
    return path


def write_json(path, payload, *, seed, digest):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {**payload, 'meta': meta(seed, digest)}
    path.write_text(json.dumps(document, sort_keys=True, indent=2) + '\n')
    return path


def read_json(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(errno.ENOENT, 'No such file', str(path))
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f'{path}: not valid JSON ({exc.msg})') from None
    if not isinstance(document, dict):
        raise SchemaError(f'{path}: expected a JSON object')
    return document


def devices_frame(population):
    return pd.DataFrame([device.as_row() for device in population], columns=DEVICE_COLUMNS)


def population_from_frame(frame):
    try:
        return [DeviceRecord.from_row(row) for row in frame.to_dict('records')]
    except (KeyError, ValueError) as exc:
        raise SchemaError(f'devices: {exc}') from None


def interactions_frame(interactions):
    rows = []
    for interaction in interactions:
        task = interaction.task
        rows.append({
            'task_id': task.task_id,
            'requester_id': task.requester_id,
            'timestamp': task.timestamp,
            **input_row(task, interaction.requester),
            **interaction.target.as_row('target_'),
            'ec_id': interaction.ec_id,
        })
    return pd.DataFrame(rows, columns=INTERACTION_COLUMNS)


def interactions_from_frame(frame):
    interactions = []
    try:
        for row in frame.to_dict('records'):
            requester = DeviceRecord(
                id=str(row['requester_id']),
                location=(float(row['requester_x_meters']), float(row['requester_y_meters'])),
                battery_level=float(row['requester_battery_level']),
                privileges=str(row['requester_privileges']),
                mobility=str(row['requester_mobility']),
                device_type=str(row['requester_device_type']),
            )
            task = TaskRequest(
                requester_id=requester.id,
                instruction_count=int(row['instruction_count']),
                message_size_bits=int(row['message_size_bits']),
                importance=int(row['importance']),
                priority=int(row['priority']),
                timestamp=float(row['timestamp']),
                task_id=int(row['task_id']),
            )
            target = EdgeProfile.from_row(row, prefix='target_')
            interactions.append(Interaction(task=task, requester=requester, target=target, ec_id=str(row['ec_id'])))
    except (KeyError, ValueError) as exc:
        raise SchemaError(f'interactions: {exc}') from None
    return interactions


def read_population(path):
    return population_from_frame(read_csv(path, DEVICE_COLUMNS))


def read_interactions(path):
    interactions = interactions_from_frame(read_csv(path, INTERACTION_COLUMNS))
    if not interactions:
        raise SchemaError(f'{path}: no interaction rows')
    return interactions
