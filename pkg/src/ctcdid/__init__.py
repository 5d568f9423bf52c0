"""Dialect identification as a limited-vocabulary CTC task.

Training targets repeat the utterance's dialect tag once per estimated
word; the encoder learns frame-level dialect tokens with CTC loss, and an
utterance label is the majority vote over the greedy decode, computed
either over the full utterance or chunk by chunk in streaming mode.
"""

from .checkpoint import Checkpoint
from .corpus import SynthSpec, Utterance, load_manifest, load_wav, split_corpus, synthesize_corpus, write_wav
from .ctc import collapse, ctc_feasible, ctc_loss, ctc_loss_grad, ctc_loss_grad_batch, greedy_decode
from .decode import UNKNOWN, Prediction, majority_vote, predict
from .encoder import Encoder, EncoderConfig
from .evaluation import (ConfusionMatrix, compare_label_prep, duration_bin_report, fit, predict_all,
                         run_sweep, stream_predict_all,
                         score, weighted_f1)
from .features import FeatureConfig, extract_features
from .labels import LAH, Exact, Vocabulary, build_target, estimate_word_count, prepare_targets
from .streaming import StreamConfig, StreamState, stream_infer, stream_predict
from .train import TrainConfig, train
from .vad import EnergyVad, SpeechSegments, VadConfig, detect_speech

__version__ = "0.1.0"
