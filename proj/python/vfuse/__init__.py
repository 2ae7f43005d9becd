"""Subclass-decomposed late fusion for video concept detection."""

import json

from ._vfuse import (
    ConfigError,
    DataError,
    DegenerateLabelsError,
    average_precision,
    encode_bow,
    learn_weights,
    preset_names,
    smooth,
    video_score,
)
from . import _vfuse

__all__ = [
    "ConfigError",
    "DataError",
    "DegenerateLabelsError",
    "average_precision",
    "encode_bow",
    "evaluate",
    "experiment",
    "learn_weights",
    "preset_names",
    "smooth",
    "synth",
    "video_score",
]


def evaluate(video_ids, scores, labels, run_id=""):
    """AP, P@10 and P@100 of a scored list as a dict."""
    return json.loads(_vfuse.evaluate_json(list(video_ids), list(scores), list(labels), run_id))


def synth(preset, seed, out_dir):
    """Writes a preset corpus to out_dir and returns its generator config."""
    return json.loads(_vfuse.synth(preset, seed, str(out_dir)))


def experiment(config):
    """Runs one fusion setting over a corpus directory; config uses the CLI's JSON keys."""
    return json.loads(_vfuse.experiment_json(json.dumps(config)))
