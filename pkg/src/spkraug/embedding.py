"""Speaker embeddings: storage, distances, nearest-neighbour selection.

Real systems produce embeddings with a neural speaker-verification model;
this module stores and queries those, and additionally ships a small
deterministic stand-in extractor (mel log-energy statistics) so the whole
pipeline can run self-contained.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .audio_io import AudioClip
from .errors import (
    ClipTooShortError,
    DimensionMismatchError,
    EmbeddingFileError,
    KTooLargeError,
    UnknownSpeakerError,
    ZeroNormError,
)
from .spectral import magnitude_spectrogram

STANDIN_MEL_BANDS = 80
STANDIN_DIMENSION = 2 * STANDIN_MEL_BANDS
MIN_CLIP_SECONDS = 0.2
_LOG_FLOOR = 1e-10


@dataclass
class EmbeddingVector:
    utterance_id: str
    speaker_id: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or len(self.values) == 0:
            raise DimensionMismatchError("values must be a non-empty 1-D vector")
        if not np.all(np.isfinite(self.values)):
            raise ZeroNormError(f"{self.utterance_id}: embedding has non-finite values")

    @property
    def dimension(self) -> int:
        return len(self.values)


@dataclass
class EmbeddingSet:
    dimension: int
    entries: list = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.dimension != self.dimension:
                raise DimensionMismatchError(
                    f"{e.utterance_id}: dimension {e.dimension}, set is {self.dimension}"
                )
            if e.utterance_id in seen:
                raise EmbeddingFileError(f"duplicate utterance_id {e.utterance_id!r}")
            seen.add(e.utterance_id)
        self._by_id = {e.utterance_id: e for e in self.entries}

    @classmethod
    def from_entries(cls, entries) -> "EmbeddingSet":
        entries = list(entries)
        if not entries:
            raise EmbeddingFileError("cannot build an embedding set from zero entries")
        return cls(entries[0].dimension, entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, utterance_id: str) -> bool:
        return utterance_id in self._by_id

    def get(self, utterance_id: str) -> EmbeddingVector:
        if utterance_id not in self._by_id:
            raise KeyError(utterance_id)
        return self._by_id[utterance_id]

    def speakers(self) -> list:
        out = []
        for e in self.entries:
            if e.speaker_id not in out:
                out.append(e.speaker_id)
        return out


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dimension != b.dimension:
        raise DimensionMismatchError(f"{a.dimension} vs {b.dimension}")
    na = np.linalg.norm(a.values)
    nb = np.linalg.norm(b.values)
    if na == 0.0 or nb == 0.0:
        raise ZeroNormError("cosine similarity undefined for zero-norm vectors")
    return float(np.clip(np.dot(a.values, b.values) / (na * nb), -1.0, 1.0))


def euclidean_distance(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dimension != b.dimension:
        raise DimensionMismatchError(f"{a.dimension} vs {b.dimension}")
    return float(np.linalg.norm(a.values - b.values))


def select_k_nearest(natural: EmbeddingVector, candidates: EmbeddingSet, k: int) -> list:
    """ids of the k candidates closest to `natural` in Euclidean distance.

    Ties are broken by ascending utterance_id, so the result does not depend
    on the order candidates were loaded in.
    """
    if k > len(candidates):
        raise KTooLargeError(f"k={k} but only {len(candidates)} candidates")
    if k < 0:
        raise KTooLargeError(f"k must be non-negative, got {k}")
    ranked = sorted(
        ((euclidean_distance(natural, c), c.utterance_id) for c in candidates),
    )
    return [uid for _, uid in ranked[:k]]


def speaker_centroid(embeddings: EmbeddingSet, speaker_id: str) -> EmbeddingVector:
    """Arithmetic mean of one speaker's embeddings."""
    rows = [e.values for e in embeddings if e.speaker_id == speaker_id]
    if not rows:
        raise UnknownSpeakerError(f"no embeddings for speaker {speaker_id!r}")
    mean = np.mean(np.stack(rows), axis=0)
    return EmbeddingVector(f"centroid:{speaker_id}", speaker_id, mean)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def _mel_filterbank_cached(n_bands: int, fft_size: int, sample_rate: int) -> np.ndarray:
    n_bins = fft_size // 2 + 1
    edges_hz = _mel_to_hz(np.linspace(0.0, _hz_to_mel(sample_rate / 2.0), n_bands + 2))
    bin_hz = np.arange(n_bins) * sample_rate / fft_size
    fb = np.zeros((n_bands, n_bins))
    for b in range(n_bands):
        lo, center, hi = edges_hz[b], edges_hz[b + 1], edges_hz[b + 2]
        rising = (bin_hz - lo) / (center - lo)
        falling = (hi - bin_hz) / (hi - center)
        fb[b] = np.clip(np.minimum(rising, falling), 0.0, None)
    fb.setflags(write=False)
    return fb


def mel_filterbank(n_bands: int, fft_size: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filters, n_bands x (fft_size//2 + 1), spanning 0..Nyquist."""
    return _mel_filterbank_cached(int(n_bands), int(fft_size), int(sample_rate)).copy()


def extract_standin_embedding(clip: AudioClip, utterance_id: str = "",
                              speaker_id: str = "") -> EmbeddingVector:
    """Deterministic non-neural embedding: mel log-energy statistics.

    The waveform is RMS-normalized (so overall gain cancels), analyzed into
    80 mel-band log power energies, and summarized by each band's mean and
    standard deviation over time. The 160-dim result is L2-normalized.
    """
    if clip.duration_seconds < MIN_CLIP_SECONDS:
        raise ClipTooShortError(
            f"need at least {MIN_CLIP_SECONDS} s, got {clip.duration_seconds:.3f} s"
        )
    x = clip.samples
    rms = np.sqrt(np.mean(x * x))
    if rms > 0:
        x = x / rms
    spec = magnitude_spectrogram(AudioClip(x, clip.sample_rate))
    fb = _mel_filterbank_cached(STANDIN_MEL_BANDS, spec.fft_size, clip.sample_rate)
    energies = spec.magnitudes ** 2 @ fb.T  # frames x bands
    logs = np.log(energies + _LOG_FLOOR)
    feats = np.concatenate([logs.mean(axis=0), logs.std(axis=0)])
    norm = np.linalg.norm(feats)
    if norm == 0.0:
        raise ZeroNormError("degenerate clip produced an all-zero feature vector")
    return EmbeddingVector(utterance_id, speaker_id, feats / norm)


def save_embeddings(embeddings: EmbeddingSet, path) -> None:
    """Write the TSV format: `#dim=D` header then id, speaker, D floats per row."""
    lines = [f"#dim={embeddings.dimension}"]
    for e in embeddings:
        vals = "\t".join(repr(float(v)) for v in e.values)
        lines.append(f"{e.utterance_id}\t{e.speaker_id}\t{vals}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_embeddings(path) -> EmbeddingSet:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("#dim="):
        raise EmbeddingFileError(f"{path}: missing #dim= header")
    try:
        dim = int(lines[0][5:])
    except ValueError:
        raise EmbeddingFileError(f"{path}: unparseable header {lines[0]!r}") from None
    if dim < 1:
        raise EmbeddingFileError(f"{path}: dimension must be positive, got {dim}")
    entries = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2 + dim:
            raise EmbeddingFileError(
                f"{path}:{lineno}: expected {2 + dim} fields, found {len(parts)}"
            )
        try:
            values = np.array([float(v) for v in parts[2:]])
        except ValueError:
            raise EmbeddingFileError(f"{path}:{lineno}: non-numeric value") from None
        vec = EmbeddingVector(parts[0], parts[1], values)
        if np.linalg.norm(vec.values) == 0.0:
            raise EmbeddingFileError(f"{path}:{lineno}: zero-norm embedding")
        entries.append(vec)
    return EmbeddingSet(dim, entries)
