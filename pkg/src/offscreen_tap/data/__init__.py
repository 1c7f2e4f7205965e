"""
offscreen_tap.data - Labels, synthetic generator, augmentation and dataset files.
"""

from offscreen_tap.data.augment import augment_batch, augment_scale, augment_shift
from offscreen_tap.data.dataset import SampleArrays, load_dataset, save_dataset
from offscreen_tap.data.labels import Sample, TapLabel, region_center, region_id
from offscreen_tap.data.synth import SynthConfig, SynthStream, synthesize, synthesize_stream

__all__ = [
    "Sample",
    "SampleArrays",
    "SynthConfig",
    "SynthStream",
    "TapLabel",
    "augment_batch",
    "augment_scale",
    "augment_shift",
    "load_dataset",
    "region_center",
    "region_id",
    "save_dataset",
    "synthesize",
    "synthesize_stream",
]
