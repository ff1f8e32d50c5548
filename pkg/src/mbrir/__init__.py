"""Multiband shoebox room impulse responses for speech-enhancement datasets.

The package samples rooms with per-octave-band reverberation targets, renders
them with the image-source method (single-band, multiband, and with receiver
and source directivity), checks the results with independent decay and onset
estimators, and assembles clean/degraded speech pairs.
"""
from .directivity import (DirectivityTable, ReceiverFilterSet, apply_receiver, cardioid_table,
                          default_source_table, read_directivity_table, read_receiver_set,
                          synthetic_sphere_set, weight_source)
from .errors import (BudgetExceeded, DegenerateData, InsufficientDecay, LengthMismatch,
                     LengthTooShort, MbrirError, OutDirUnwritable, PlacementFailure,
                     SilentInput, SilentReference, TooShort, ZeroNoise, ZeroSpeech)
from .filterbank import FilterBank, apply_filterbank
from .ism import (ReflectionList, Rir, emission_directions, enumerate_images, synthesize)
from .mixture import (MixtureRecord, SignalModel, build_mixtures, log_spectral_distance,
                      make_mixture, pick_chunk, si_sdr)
from .pipeline import generate, render_configs, shared_geometry_export
from .render import RenderOptions, render
from .rooms import (BandSpec, GammaParams, RoomConfig, Variant, fit_gamma, sabine_absorption,
                    sample_room, sample_t60_bands)
from .seeding import mix_seed
from .audio import read_audio, write_audio
from .settings import BAND_CENTERS_HZ, DEFAULT_SETTINGS, Settings, load_settings
from .validate import decay_fit, detect_onset, schroeder_t60

__version__ = "0.1.0"
