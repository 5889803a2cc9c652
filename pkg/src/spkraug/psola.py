"""Pitch tracking and time-domain pitch-synchronous overlap-add (TD-PSOLA).

Duration and F0 are modified independently: grains of two local periods are
cut at analysis pitch marks, re-selected along a time-scaled axis, and
overlap-added at a spacing of period / f0_ratio. Unvoiced stretches keep
their original spacing so noise is never pitch-shifted.
"""

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip
from .errors import (
    EmptyClipError,
    InvalidRangeError,
    InvalidRatioError,
    NoPitchMarksError,
)

F0_WINDOW_SECONDS = 0.025
F0_HOP_SECONDS = 0.010
UNVOICED_STEP_SECONDS = 0.010
VOICING_THRESHOLD = 0.5
DEFAULT_F0_MIN = 60.0
DEFAULT_F0_MAX = 400.0

MIN_RATIO = 0.5
MAX_RATIO = 2.0


@dataclass
class PitchTrack:
    """Per-frame F0 estimates; 0 Hz marks an unvoiced frame."""

    frame_shift: float  # seconds between frame starts
    f0_values: np.ndarray
    voicing: np.ndarray

    def __post_init__(self):
        self.f0_values = np.asarray(self.f0_values, dtype=np.float64)
        self.voicing = np.asarray(self.voicing, dtype=bool)
        if self.f0_values.shape != self.voicing.shape or self.f0_values.ndim != 1:
            raise InvalidRangeError("f0_values and voicing must be matching 1-D arrays")
        if np.any((self.f0_values == 0) != ~self.voicing):
            raise InvalidRangeError("f0 must be 0 exactly on unvoiced frames")

    @property
    def n_frames(self) -> int:
        return len(self.f0_values)


@dataclass
class PitchMarks:
    """Strictly increasing sample indices, one per period in voiced spans."""

    positions: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.int64)
        if self.positions.ndim != 1:
            raise InvalidRangeError("positions must be 1-D")
        if len(self.positions) > 1 and np.any(np.diff(self.positions) <= 0):
            raise InvalidRangeError("positions must be strictly increasing")

    def __len__(self) -> int:
        return len(self.positions)


def estimate_f0(clip: AudioClip, f0_min: float = DEFAULT_F0_MIN,
                f0_max: float = DEFAULT_F0_MAX) -> PitchTrack:
    """Autocorrelation pitch tracker: 25 ms frames every 10 ms.

    Each frame is mean-removed and its unbiased normalized autocorrelation
    searched over lags for [f0_min, f0_max]; the peak is refined by parabolic
    interpolation, and the frame is voiced when the peak is >= 0.5.
    """
    sr = clip.sample_rate
    if not (0 < f0_min < f0_max < sr / 4):
        raise InvalidRangeError(
            f"need 0 < f0_min < f0_max < sample_rate/4, got [{f0_min}, {f0_max}] at {sr} Hz"
        )
    win = int(round(F0_WINDOW_SECONDS * sr))
    hop = int(round(F0_HOP_SECONDS * sr))
    x = clip.samples
    if len(x) < win:
        return PitchTrack(F0_HOP_SECONDS, np.zeros(0), np.zeros(0, dtype=bool))
    n_frames = 1 + (len(x) - win) // hop

    idx = np.arange(n_frames)[:, None] * hop + np.arange(win)[None, :]
    frames = x[idx]
    frames = frames - frames.mean(axis=1, keepdims=True)

    # autocorrelation of every frame at once, lags 0..win-1
    nfft = 1 << int(np.ceil(np.log2(2 * win)))
    spectra = np.fft.rfft(frames, n=nfft, axis=1)
    acf = np.fft.irfft(spectra * np.conj(spectra), n=nfft, axis=1)[:, :win]
    acf /= (win - np.arange(win))[None, :]  # unbiased: no taper bias at the peak

    lag_min = max(2, int(np.ceil(sr / f0_max)))
    lag_max = min(win - 2, int(np.floor(sr / f0_min)))
    if lag_min >= lag_max:
        raise InvalidRangeError(f"search range [{f0_min}, {f0_max}] leaves no usable lags")

    energy = acf[:, 0]
    searchable = energy > 1e-12
    norm = np.ones_like(acf)
    norm[searchable] = acf[searchable] / energy[searchable, None]

    region = norm[:, lag_min:lag_max + 1]
    best = region.max(axis=1)
    voiced = searchable & (best >= VOICING_THRESHOLD)

    # The ACF peaks at every multiple of the true period; prefer the shortest
    # lag whose local maximum is nearly as tall as the global one, which keeps
    # period-doubled subharmonics from winning ties.
    is_local_max = (region >= norm[:, lag_min - 1:lag_max]) & \
                   (region >= norm[:, lag_min + 1:lag_max + 2])
    candidate = is_local_max & (region >= 0.9 * best[:, None])
    has_candidate = candidate.any(axis=1)
    peak_off = np.where(has_candidate, np.argmax(candidate, axis=1),
                        np.argmax(region, axis=1))
    peak_lag = peak_off + lag_min

    f0 = np.zeros(n_frames)
    rows = np.flatnonzero(voiced)
    for i in rows:
        lag = peak_lag[i]
        left, mid, right = norm[i, lag - 1], norm[i, lag], norm[i, lag + 1]
        denom = left - 2.0 * mid + right
        delta = 0.0 if denom >= -1e-15 else np.clip(0.5 * (left - right) / denom, -0.5, 0.5)
        f0[i] = np.clip(sr / (lag + delta), f0_min, f0_max)

    return PitchTrack(F0_HOP_SECONDS, f0, voiced)


def _track_lookup(track: PitchTrack, sr: int):
    """Map a sample position to the nearest frame's (voiced, f0)."""
    win = int(round(F0_WINDOW_SECONDS * sr))
    hop = int(round(track.frame_shift * sr))

    def lookup(pos: float):
        if track.n_frames == 0:
            return False, 0.0
        i = int(round((pos - win / 2) / hop))
        i = min(max(i, 0), track.n_frames - 1)
        return bool(track.voicing[i]), float(track.f0_values[i])

    return lookup


def place_pitch_marks(clip: AudioClip, track: PitchTrack) -> PitchMarks:
    """Walk the clip placing one mark per period, snapped to waveform maxima.

    Voiced spans advance by the local period and snap each mark to the
    highest sample within a quarter period either side; unvoiced spans fall
    back to a uniform 10 ms grid.
    """
    n = len(clip)
    if n == 0:
        raise EmptyClipError("cannot place pitch marks on an empty clip")
    x = clip.samples
    sr = clip.sample_rate
    step_unvoiced = int(round(UNVOICED_STEP_SECONDS * sr))
    lookup = _track_lookup(track, sr)

    marks = []
    voiced0, f00 = lookup(0)
    if voiced0:
        first_period = int(round(sr / f00))
        pos = int(np.argmax(x[:min(first_period, n)]))
    else:
        pos = 0
    marks.append(pos)

    while True:
        voiced, f0 = lookup(marks[-1])
        if voiced:
            period = sr / f0
            target = marks[-1] + period
            half = period / 4.0
            lo = max(int(np.ceil(target - half)), marks[-1] + 1)
            hi = min(int(np.floor(target + half)), n - 1)
            if lo > hi:
                break
            nxt = lo + int(np.argmax(x[lo:hi + 1]))
        else:
            nxt = marks[-1] + step_unvoiced
            if nxt >= n:
                break
        marks.append(nxt)

    return PitchMarks(np.asarray(marks, dtype=np.int64))


def _grain_window(left: int, right: int) -> np.ndarray:
    """Asymmetric two-period window: sin^2 ramp up, cos^2 ramp down.

    Adjacent grains placed at their native marks sum to exactly one.
    """
    t_rise = np.arange(left) / left
    t_fall = np.arange(right) / right
    return np.concatenate([np.sin(0.5 * np.pi * t_rise) ** 2,
                           np.cos(0.5 * np.pi * t_fall) ** 2])


def psola_modify(clip: AudioClip, duration_ratio: float, f0_ratio: float,
                 f0_min: float = DEFAULT_F0_MIN, f0_max: float = DEFAULT_F0_MAX) -> AudioClip:
    """TD-PSOLA duration and pitch modification.

    duration_ratio multiplies the length (1.3 = 30% longer); f0_ratio
    multiplies voiced F0. Output length is round(len * duration_ratio);
    overlap-add is renormalized so the result never exceeds the input peak.
    """
    for name, ratio in (("duration_ratio", duration_ratio), ("f0_ratio", f0_ratio)):
        if not (MIN_RATIO <= ratio <= MAX_RATIO) or not np.isfinite(ratio):
            raise InvalidRatioError(f"{name} must lie in [{MIN_RATIO}, {MAX_RATIO}], got {ratio}")

    track = estimate_f0(clip, f0_min, f0_max)
    marks_obj = place_pitch_marks(clip, track)
    marks = marks_obj.positions
    if len(marks) < 3:
        raise NoPitchMarksError(
            f"found only {len(marks)} pitch marks; input is shorter than two periods"
        )

    x = clip.samples
    n = len(x)
    sr = clip.sample_rate
    lookup = _track_lookup(track, sr)

    gaps = np.diff(marks)
    # local analysis period per interior mark: mean of the two adjacent gaps
    periods = 0.5 * (gaps[:-1] + gaps[1:])
    voiced_mark = np.array([lookup(m)[0] for m in marks[1:-1]])
    interior = marks[1:-1]

    out_len = int(round(n * duration_ratio))
    margin = int(gaps.max()) + 1
    num = np.zeros(out_len + 2 * margin)
    den = np.zeros(out_len + 2 * margin)

    s = float(interior[0]) * duration_ratio
    while s < out_len:
        u = s / duration_ratio
        k = int(np.searchsorted(interior, u))
        if k == 0:
            j = 0
        elif k >= len(interior):
            j = len(interior) - 1
        else:
            # ties go to the earlier mark
            j = k - 1 if u - interior[k - 1] <= interior[k] - u else k
        center = marks[j + 1]
        left = center - marks[j]
        right = marks[j + 2] - center
        window = _grain_window(left, right)
        grain = x[marks[j]:marks[j + 2]] * window

        start = int(round(s)) - left + margin
        num[start:start + left + right] += grain
        den[start:start + left + right] += window

        hop_out = periods[j] / f0_ratio if voiced_mark[j] else periods[j]
        s += max(hop_out, 1.0)

    out = num[margin:margin + out_len]
    weight = den[margin:margin + out_len]
    out = out / np.maximum(weight, 0.25)
    return AudioClip(out, sr)
