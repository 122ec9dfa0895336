"""Self-supervised learning of speech temporal modulations.

Sub-band FDLP modulation spectra over 1.5 s windows, modulation dropout,
a self-attention predictor trained to fill deleted 2-8 Hz modulations from
context, and layer-wise probes of the learned temporal structure.
"""

from .augment import AugmentPolicy, maybe_augment, mix_at_snr
from .corpus import (CorpusManifest, ManifestEntry, load_manifest, read_features,
                     read_wav, save_manifest, scan_corpus, write_features, write_wav)
from .dsp import (AudioBuffer, FdlpSpectrogram, LpModel, MaskSpec,
                  ModulationSpectrum, WindowedSegment, apply_modulation_dropout,
                  extract_features, fit_complex_fdlp, lp_to_modulation_cepstrum,
                  modulation_bin_range, overlap_add_spectrogram, segment_utterance,
                  subband_decompose, subtract_band_means, synthesize_log_envelope)
from .predictor import (ActivationTrace, PredictorConfig, PredictorParams,
                        backward, forward, full_l1_loss, init_params,
                        masked_l1_loss)
from .probe import LayerProbeReport, band_energy_ratio, emit_report, \
    layer_modulation_spectra
from .training import (TrainHyper, TrainState, export_encoder, load_checkpoint,
                       save_checkpoint, train)

__version__ = "0.1.0"
