"""Objective measures: EER, cosine-similarity loss, combined loss, WER.

The combined loss is L = alpha*l_l1 + beta*l_attention + gamma*l_sv, where
the SV term is either the batch cosine-similarity loss or the EER of the
batch against natural references.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding import EmbeddingSet, cosine_similarity
from .errors import (
    EmptyReferenceError,
    InsufficientReferencesError,
    LengthMismatchError,
    MissingClassError,
    MissingEmbeddingError,
    NonFiniteError,
    PairFileError,
)
from .rng import rng_for

DEFAULT_LOSS_WEIGHTS = (1.0, 1.0, 0.1)  # not from any publication; see README
WER_PUNCTUATION = '.,;:!?"'


@dataclass
class ScoredPair:
    """One verification trial; score is None until it has been computed."""

    enroll_id: str
    test_id: str
    same_speaker: bool
    score: float = None

    def __post_init__(self):
        if self.score is not None:
            self.score = float(self.score)
            if not np.isfinite(self.score):
                raise NonFiniteError(f"pair {self.enroll_id}/{self.test_id}: score not finite")


@dataclass(frozen=True)
class LossTerms:
    l_l1: float
    l_attention: float
    l_sv: float

    def __post_init__(self):
        vals = (self.l_l1, self.l_attention, self.l_sv)
        if not all(np.isfinite(v) for v in vals):
            raise NonFiniteError(f"loss terms must be finite, got {vals}")
        if self.l_l1 < 0 or self.l_attention < 0:
            raise NonFiniteError("l_l1 and l_attention must be non-negative")


@dataclass(frozen=True)
class LossWeights:
    alpha: float = DEFAULT_LOSS_WEIGHTS[0]
    beta: float = DEFAULT_LOSS_WEIGHTS[1]
    gamma: float = DEFAULT_LOSS_WEIGHTS[2]

    def __post_init__(self):
        vals = (self.alpha, self.beta, self.gamma)
        if not all(np.isfinite(v) for v in vals):
            raise NonFiniteError(f"loss weights must be finite, got {vals}")


def combined_loss(terms: LossTerms, weights: LossWeights) -> float:
    """Weighted sum of the three training-loss terms."""
    return float(weights.alpha * terms.l_l1
                 + weights.beta * terms.l_attention
                 + weights.gamma * terms.l_sv)


def batch_cs_loss(synth, natural) -> float:
    """1 - mean cosine similarity over aligned pairs; 0 when identical."""
    if len(synth) != len(natural) or len(synth) == 0:
        raise LengthMismatchError(
            f"need equal non-empty batches, got {len(synth)} vs {len(natural)}"
        )
    sims = [cosine_similarity(s, n) for s, n in zip(synth, natural)]
    return float(1.0 - np.mean(sims))


def equal_error_rate(pairs) -> tuple:
    """EER and its threshold from a scored trial list.

    Sweeps every distinct score (plus a sentinel above the maximum) as a
    threshold with FRR(t) = fraction of genuine scores < t and FAR(t) =
    fraction of impostor scores >= t, then interpolates linearly between the
    two operating points where FAR - FRR changes sign.
    """
    genuine = np.array([p.score for p in pairs if p.same_speaker], dtype=np.float64)
    impostor = np.array([p.score for p in pairs if not p.same_speaker], dtype=np.float64)
    if any(p.score is None for p in pairs):
        raise NonFiniteError("all pairs must be scored before computing EER")
    if len(genuine) == 0 or len(impostor) == 0:
        raise MissingClassError(
            f"need both classes, got {len(genuine)} genuine / {len(impostor)} impostor"
        )

    scores = np.unique(np.concatenate([genuine, impostor]))
    thresholds = np.append(scores, scores[-1] + 1.0)
    prev_t = prev_far = prev_frr = None
    for t in thresholds:
        frr = float(np.mean(genuine < t))
        far = float(np.mean(impostor >= t))
        diff = far - frr
        if diff == 0.0:
            return frr, float(t)
        if diff < 0.0:
            # crossing lies between the previous threshold and this one
            d1 = prev_far - prev_frr
            d2 = diff
            lam = d1 / (d1 - d2)
            eer = prev_frr + lam * (frr - prev_frr)
            return float(eer), float(prev_t + lam * (t - prev_t))
        prev_t, prev_far, prev_frr = float(t), far, frr
    raise AssertionError("threshold sweep found no crossing")  # pragma: no cover


def eer_loss(batch_synth: EmbeddingSet, reference_pool: EmbeddingSet,
             per_utterance_refs: int = 1, seed: int = 0) -> float:
    """EER of synthesized embeddings against sampled natural references.

    Each synthesized utterance is paired with `per_utterance_refs` natural
    utterances of its own speaker and the same number from other speakers,
    drawn without replacement by a generator derived from `seed`.
    """
    if per_utterance_refs < 1:
        raise InsufficientReferencesError(
            f"per_utterance_refs must be >= 1, got {per_utterance_refs}"
        )
    by_speaker = {}
    for e in reference_pool:
        by_speaker.setdefault(e.speaker_id, []).append(e)

    rng = rng_for(seed, "metrics.eer_loss")
    pairs = []
    for synth in batch_synth:
        same = by_speaker.get(synth.speaker_id, [])
        diff = [e for e in reference_pool if e.speaker_id != synth.speaker_id]
        if len(same) < per_utterance_refs or len(diff) < per_utterance_refs:
            raise InsufficientReferencesError(
                f"speaker {synth.speaker_id!r}: have {len(same)} same / {len(diff)} other "
                f"references, need {per_utterance_refs} of each"
            )
        for pool, flag in ((same, True), (diff, False)):
            picks = rng.choice(len(pool), size=per_utterance_refs, replace=False)
            for i in picks:
                ref = pool[int(i)]
                pairs.append(ScoredPair(synth.utterance_id, ref.utterance_id, flag,
                                        cosine_similarity(synth, ref)))
    eer, _ = equal_error_rate(pairs)
    return eer


def word_error_rate(reference, hypothesis) -> tuple:
    """(WER, substitutions, deletions, insertions) via Levenshtein alignment.

    Unit costs; on ties the alignment prefers substitution, then insertion,
    then deletion, which fixes the reported count split deterministically.
    """
    ref = list(reference)
    hyp = list(hypothesis)
    if not ref:
        raise EmptyReferenceError("reference transcript has no tokens")

    # each cell carries (distance, subs, dels, ins)
    prev = [(j, 0, 0, j) for j in range(len(hyp) + 1)]
    for i in range(1, len(ref) + 1):
        cur = [(i, 0, i, 0)]
        for j in range(1, len(hyp) + 1):
            if ref[i - 1] == hyp[j - 1]:
                d, s, dl, ins = prev[j - 1]
                cur.append((d, s, dl, ins))
                continue
            d_sub, s_sub, dl_sub, in_sub = prev[j - 1]
            d_ins, s_ins, dl_ins, in_ins = cur[j - 1]
            d_del, s_del, dl_del, in_del = prev[j]
            best = (d_sub + 1, s_sub + 1, dl_sub, in_sub)
            if d_ins + 1 < best[0]:
                best = (d_ins + 1, s_ins, dl_ins, in_ins + 1)
            if d_del + 1 < best[0]:
                best = (d_del + 1, s_del, dl_del + 1, in_del)
            cur.append(best)
        prev = cur

    _, subs, dels, ins = prev[len(hyp)]
    return (subs + dels + ins) / len(ref), subs, dels, ins


def tokenize_transcript(text: str) -> list:
    """Lowercase, drop `.,;:!?"` characters, split on whitespace."""
    cleaned = text.lower().translate({ord(c): None for c in WER_PUNCTUATION})
    return cleaned.split()


def save_pairs(pairs, path) -> None:
    """TSV rows enroll, test, same|diff, and the score when present."""
    lines = []
    for p in pairs:
        label = "same" if p.same_speaker else "diff"
        row = f"{p.enroll_id}\t{p.test_id}\t{label}"
        if p.score is not None:
            row += f"\t{repr(float(p.score))}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_pairs(path) -> list:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    pairs = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) not in (3, 4):
            raise PairFileError(f"{path}:{lineno}: expected 3 or 4 fields, found {len(parts)}")
        if parts[2] not in ("same", "diff"):
            raise PairFileError(f"{path}:{lineno}: label must be same|diff, got {parts[2]!r}")
        score = None
        if len(parts) == 4:
            try:
                score = float(parts[3])
            except ValueError:
                raise PairFileError(f"{path}:{lineno}: bad score {parts[3]!r}") from None
        pairs.append(ScoredPair(parts[0], parts[1], parts[2] == "same", score))
    if not pairs:
        raise PairFileError(f"{path}: no pairs found")
    return pairs


def score_pairs(pairs, embeddings: EmbeddingSet) -> list:
    """Fill in missing scores using cosine similarity of stored embeddings."""
    out = []
    for p in pairs:
        if p.score is not None:
            out.append(p)
            continue
        for uid in (p.enroll_id, p.test_id):
            if uid not in embeddings:
                raise MissingEmbeddingError(f"no embedding for utterance {uid!r}")
        score = cosine_similarity(embeddings.get(p.enroll_id), embeddings.get(p.test_id))
        out.append(ScoredPair(p.enroll_id, p.test_id, p.same_speaker, score))
    return out
