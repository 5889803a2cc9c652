"""Speech-corpus engineering toolkit for speaker-similarity-driven TTS work:
resampling/PSOLA augmentation, stand-in speaker embeddings, EER/CS/WER
metrics, exact t-SNE, and corpus manifest plumbing."""

from .audio_io import AudioClip, read_wav, resample, speed_change, write_wav
from .dataset import (
    AugmentationJob,
    Manifest,
    UtteranceRecord,
    execute_plan,
    generate_eer_pairs,
    load_manifest,
    plan_augmentation,
    save_manifest,
    select_best_augmented,
    select_subset,
)
from .embedding import (
    EmbeddingSet,
    EmbeddingVector,
    cosine_similarity,
    euclidean_distance,
    extract_standin_embedding,
    load_embeddings,
    save_embeddings,
    select_k_nearest,
    speaker_centroid,
)
from .errors import SpkraugError
from .metrics import (
    LossTerms,
    LossWeights,
    ScoredPair,
    batch_cs_loss,
    combined_loss,
    eer_loss,
    equal_error_rate,
    load_pairs,
    save_pairs,
    score_pairs,
    tokenize_transcript,
    word_error_rate,
)
from .psola import PitchMarks, PitchTrack, estimate_f0, place_pitch_marks, psola_modify
from .spectral import (
    Spectrogram,
    griffin_lim,
    istft,
    magnitude_spectrogram,
    read_spectrogram,
    stft,
    write_spectrogram,
)
from .tsne import TsneConfig, conditional_probabilities, kl_divergence, kl_gradient, run_tsne

__version__ = "0.1.0"

__all__ = [
    "AudioClip", "read_wav", "write_wav", "resample", "speed_change",
    "Spectrogram", "stft", "istft", "magnitude_spectrogram", "griffin_lim",
    "read_spectrogram", "write_spectrogram",
    "PitchTrack", "PitchMarks", "estimate_f0", "place_pitch_marks", "psola_modify",
    "EmbeddingVector", "EmbeddingSet", "cosine_similarity", "euclidean_distance",
    "select_k_nearest", "speaker_centroid", "extract_standin_embedding",
    "load_embeddings", "save_embeddings",
    "ScoredPair", "LossTerms", "LossWeights", "combined_loss", "batch_cs_loss",
    "equal_error_rate", "eer_loss", "word_error_rate", "tokenize_transcript",
    "load_pairs", "save_pairs", "score_pairs",
    "TsneConfig", "conditional_probabilities", "kl_gradient", "kl_divergence", "run_tsne",
    "UtteranceRecord", "Manifest", "AugmentationJob", "load_manifest", "save_manifest",
    "select_subset", "plan_augmentation", "execute_plan", "select_best_augmented",
    "generate_eer_pairs",
    "SpkraugError",
    "__version__",
]
