"""Desk-scale dual-encoder contrastive model on a synthetic paired dataset.

Both encoder branches are affine: the image branch maps flattened pixels to
the shared embedding space, the text branch mean-pools a learned token table
and projects. That keeps every gradient exact and training deterministic in
seconds, which is all the benchmark needs: a model whose retrieval quality
genuinely degrades as images are occluded.

Synthetic studies share a latent vector z per study: the image renders z as
a grid of constant-intensity cells plus Gaussian noise, and the paired text
encodes quantized z as tokens like ``t17``. All losses return the loss value
together with exact analytic gradients; ``train`` is plain mini-batch
gradient descent.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import ImageTensor, Manifest, ReportText, StudyRecord
from .scoring import ClassifierHead, sigmoid

TOKEN_RE = re.compile(r"\bt(\d+)\b")
PARAMS_MAGIC = b"XTOY"
PARAMS_VERSION = 1
BCE_EPS = 1e-7


class ParamsFileError(Exception):
    """Raised for malformed or incompatible encoder parameter files."""


@dataclass(frozen=True)
class SyntheticPairSpec:
    """Shape and randomness of the generated paired dataset."""

    n_studies: int
    latent_dim: int = 8
    image_side: int = 16
    vocab_size: int = 64
    noise_sigma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_studies < 1:
            raise ValueError("n_studies must be >= 1")
        if self.image_side**2 < self.latent_dim:
            raise ValueError("image_side^2 must be >= latent_dim")
        if self.vocab_size < self.latent_dim:
            raise ValueError("vocab_size must allow at least one bin per latent dim")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    @property
    def bins_per_dim(self) -> int:
        return self.vocab_size // self.latent_dim


@dataclass
class ToyEncoderParams:
    """All trainable parameters of the dual encoder.

    w_img/b_img: affine image branch over flattened pixels.
    tok_table: (vocab, token_dim) embedding table, mean-pooled per sequence.
    w_txt/b_txt: affine projection of the pooled token vector.
    temperature: softmax temperature of the contrastive objective.
    head: optional pair classifier (present after bce training).
    """

    w_img: np.ndarray
    b_img: np.ndarray
    tok_table: np.ndarray
    w_txt: np.ndarray
    b_txt: np.ndarray
    temperature: float = 0.07
    head: ClassifierHead | None = None
    image_side: int = field(default=0)
    channels: int = 1

    def __post_init__(self):
        self.w_img = np.asarray(self.w_img, dtype=np.float64)
        self.b_img = np.asarray(self.b_img, dtype=np.float64)
        self.tok_table = np.asarray(self.tok_table, dtype=np.float64)
        self.w_txt = np.asarray(self.w_txt, dtype=np.float64)
        self.b_txt = np.asarray(self.b_txt, dtype=np.float64)
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        d = self.w_img.shape[0]
        if self.b_img.shape != (d,) or self.w_txt.shape[0] != d or self.b_txt.shape != (d,):
            raise ValueError("encoder branch output dimensions disagree")
        if self.w_txt.shape[1] != self.tok_table.shape[1]:
            raise ValueError("token table width must match the text projection input")
        for name, a in (("w_img", self.w_img), ("b_img", self.b_img),
                        ("tok_table", self.tok_table), ("w_txt", self.w_txt),
                        ("b_txt", self.b_txt)):
            if not np.isfinite(a).all():
                raise ValueError(f"{name} contains non-finite entries")
        if self.image_side == 0:
            side = int(round(math.sqrt(self.w_img.shape[1] / self.channels)))
            self.image_side = side
        if self.image_side**2 * self.channels != self.w_img.shape[1]:
            raise ValueError("w_img input size does not match image_side^2 * channels")

    @property
    def embed_dim(self) -> int:
        return int(self.w_img.shape[0])

    @property
    def vocab_size(self) -> int:
        return int(self.tok_table.shape[0])


def init_params(spec: SyntheticPairSpec, embed_dim: int = 16, token_dim: int = 32,
                head_hidden: int = 0, temperature: float = 0.07,
                seed: int | None = None) -> ToyEncoderParams:
    """Random small-scale initialization for the given dataset geometry."""
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    n_pixels = spec.image_side**2
    scale_img = 1.0 / math.sqrt(n_pixels)
    scale_txt = 1.0 / math.sqrt(token_dim)
    head = None
    if head_hidden > 0:
        head = ClassifierHead(
            w1=rng.normal(0, 1.0 / math.sqrt(embed_dim), size=(head_hidden, embed_dim)),
            b1=np.zeros(head_hidden),
            w2=rng.normal(0, 1.0 / math.sqrt(head_hidden), size=head_hidden),
            b2=0.0,
        )
    return ToyEncoderParams(
        w_img=rng.normal(0, scale_img, size=(embed_dim, n_pixels)),
        b_img=np.zeros(embed_dim),
        tok_table=rng.normal(0, 1.0, size=(spec.vocab_size, token_dim)),
        w_txt=rng.normal(0, scale_txt, size=(embed_dim, token_dim)),
        b_txt=np.zeros(embed_dim),
        temperature=temperature,
        head=head,
        image_side=spec.image_side,
    )


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

BACKGROUND = 0.5


def render_margin(image_side: int) -> int:
    """Width of the constant background frame around the signal region.

    Roughly 10% of the side: wide enough that a block with side fraction 0.9
    covers the whole signal region wherever it lands, so the heaviest
    benchmark corruption leaves no usable signal.
    """
    return math.ceil(image_side / 10)


def render_latent(z: np.ndarray, image_side: int) -> np.ndarray:
    """Render a latent vector as a grid of constant-intensity cells.

    The interior of the image (inside a background frame of
    ``render_margin`` width) is split into a ceil(sqrt(c)) x ceil(sqrt(c))
    cell grid; cell i is filled with z_i (already in [0, 1]); surplus cells
    repeat the latent cyclically so the whole interior carries signal.
    """
    c = z.size
    g = math.ceil(math.sqrt(c))
    margin = render_margin(image_side)
    inner = image_side - 2 * margin
    if inner * inner < c:
        raise ValueError(
            f"latent_dim {c} does not fit the {inner}x{inner} interior of a "
            f"{image_side}px image"
        )
    img = np.full((image_side, image_side), BACKGROUND, dtype=np.float64)
    bounds = [margin + round(i * inner / g) for i in range(g + 1)]
    for gy in range(g):
        for gx in range(g):
            img[bounds[gy]:bounds[gy + 1], bounds[gx]:bounds[gx + 1]] = z[(gy * g + gx) % c]
    return img


def tokens_for_latent(z: np.ndarray, spec: SyntheticPairSpec) -> list[int]:
    """Quantize each latent component into its per-dimension token id."""
    bins = spec.bins_per_dim
    ids = []
    for c, v in enumerate(z):
        b = min(int(v * bins), bins - 1)
        ids.append(c * bins + b)
    return ids


def tokens_to_text(token_ids: list[int]) -> str:
    return " ".join(f"t{t}" for t in token_ids)


def parse_tokens(text: str) -> list[int]:
    """Extract ``t<id>`` tokens from report text, in order."""
    return [int(m) for m in TOKEN_RE.findall(text)]


def gen_synthetic_pairs(
    spec: SyntheticPairSpec,
) -> tuple[list[ImageTensor], list[list[int]], Manifest]:
    """Generate matched image/token-sequence pairs plus their manifest.

    Latents are uniform in [0.15, 0.85] so the occlusion fill value 0 sits
    outside the data range. Reports carry the token string in both findings
    and impression, which keeps them past the section filter.
    """
    rng = np.random.default_rng(spec.seed)
    images: list[ImageTensor] = []
    token_seqs: list[list[int]] = []
    studies: list[StudyRecord] = []
    for i in range(spec.n_studies):
        z = 0.15 + 0.7 * rng.random(spec.latent_dim)
        img = render_latent(z, spec.image_side)
        if spec.noise_sigma > 0:
            img = img + rng.normal(0, spec.noise_sigma, size=img.shape)
        img = np.clip(img, 0.0, 1.0)
        tokens = tokens_for_latent((z - 0.15) / 0.7, spec)
        token_text = tokens_to_text(tokens)
        study_id = f"study_{i:05d}"
        report = ReportText(
            sections={
                "history": "synthetic study",
                "findings": token_text,
                "impression": token_text,
            },
            raw=f"FINDINGS: {token_text}\nIMPRESSION: {token_text}",
        )
        images.append(ImageTensor.from_array(img))
        token_seqs.append(tokens)
        studies.append(StudyRecord(
            study_id=study_id,
            image_refs=(f"images/{study_id}.png",),
            report=report,
        ))
    return images, token_seqs, Manifest(studies=tuple(studies))


# ---------------------------------------------------------------------------
# Encoders
# ---------------------------------------------------------------------------

def encode_image(params: ToyEncoderParams, image: ImageTensor) -> np.ndarray:
    """Affine image embedding of the flattened pixel vector."""
    x = image.flat()
    if x.size != params.w_img.shape[1]:
        raise ValueError(
            f"image has {x.size} pixels but the encoder expects {params.w_img.shape[1]}"
        )
    return params.w_img @ x + params.b_img


def encode_text(params: ToyEncoderParams, tokens) -> np.ndarray:
    """Affine projection of the mean token embedding."""
    ids = np.asarray(list(tokens), dtype=np.int64)
    if ids.size == 0:
        raise ValueError("token sequence is empty")
    if ids.min() < 0 or ids.max() >= params.vocab_size:
        raise ValueError(f"token id out of range [0, {params.vocab_size})")
    pooled = params.tok_table[ids].mean(axis=0)
    return params.w_txt @ pooled + params.b_txt


def l2_normalize_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if (norms == 0).any():
        raise ValueError("cannot normalize a zero embedding")
    return m / norms


# ---------------------------------------------------------------------------
# Losses (value + exact gradients w.r.t. the loss inputs)
# ---------------------------------------------------------------------------

def info_nce_loss(
    image_embs: np.ndarray, text_embs: np.ndarray, temperature: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Symmetric in-batch contrastive cross-entropy over cosine logits.

    Embeddings are L2-normalized internally; logits are pairwise cosines
    divided by the temperature; the two softmax directions (image->text and
    text->image) are averaged. Returns (loss, d/d image_embs, d/d text_embs)
    with gradients taken w.r.t. the raw (pre-normalization) embeddings.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    u_raw = np.asarray(image_embs, dtype=np.float64)
    w_raw = np.asarray(text_embs, dtype=np.float64)
    if u_raw.shape != w_raw.shape or u_raw.ndim != 2:
        raise ValueError("image and text batches must share a (B, D) shape")
    b = u_raw.shape[0]
    if b < 2:
        raise ValueError("in-batch contrastive loss needs batch size >= 2")

    u = l2_normalize_rows(u_raw)
    w = l2_normalize_rows(w_raw)
    logits = (u @ w.T) / temperature

    shifted_r = logits - logits.max(axis=1, keepdims=True)
    log_p_row = shifted_r - np.log(np.exp(shifted_r).sum(axis=1, keepdims=True))
    shifted_c = logits - logits.max(axis=0, keepdims=True)
    log_p_col = shifted_c - np.log(np.exp(shifted_c).sum(axis=0, keepdims=True))
    diag = np.arange(b)
    loss = -0.5 / b * (log_p_row[diag, diag].sum() + log_p_col[diag, diag].sum())

    g_logits = 0.5 / b * ((np.exp(log_p_row) - np.eye(b)) + (np.exp(log_p_col) - np.eye(b)))
    g_u = (g_logits @ w) / temperature
    g_w = (g_logits.T @ u) / temperature

    def back_through_norm(g_unit, unit, raw):
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        return (g_unit - unit * (g_unit * unit).sum(axis=1, keepdims=True)) / norms

    return float(loss), back_through_norm(g_u, u, u_raw), back_through_norm(g_w, w, w_raw)


def triplet_loss(
    anchor: np.ndarray, positive: np.ndarray, negative: np.ndarray, margin: float
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Euclidean hinge loss max(0, d(a,p) - d(a,n) + margin).

    Returns (loss, d/d anchor, d/d positive, d/d negative). The subgradient
    is zero at the hinge point and wherever a distance is exactly zero.
    """
    if margin < 0:
        raise ValueError("margin must be >= 0")
    a = np.asarray(anchor, dtype=np.float64)
    p = np.asarray(positive, dtype=np.float64)
    n = np.asarray(negative, dtype=np.float64)
    if not (a.shape == p.shape == n.shape):
        raise ValueError("anchor, positive, negative must share a shape")
    d_ap = float(np.linalg.norm(a - p))
    d_an = float(np.linalg.norm(a - n))
    loss = d_ap - d_an + margin
    ga = np.zeros_like(a)
    gp = np.zeros_like(p)
    gn = np.zeros_like(n)
    if loss <= 0.0:
        return 0.0, ga, gp, gn
    if d_ap > 0.0:
        ga += (a - p) / d_ap
        gp -= (a - p) / d_ap
    if d_an > 0.0:
        ga -= (a - n) / d_an
        gn += (a - n) / d_an
    return float(loss), ga, gp, gn


def bce_pair_loss(
    head: ClassifierHead, v_i: np.ndarray, v_t: np.ndarray, label: int
) -> tuple[float, dict[str, np.ndarray], np.ndarray, np.ndarray]:
    """Binary cross-entropy of the pair classifier on one (image, text) pair.

    The predicted probability is clamped to [eps, 1 - eps] before the log.
    Returns (loss, head gradients keyed w1/b1/w2/b2, d/d v_i, d/d v_t).
    """
    if label not in (0, 1):
        raise ValueError("label must be 0 or 1")
    vi = np.asarray(v_i, dtype=np.float64)
    vt = np.asarray(v_t, dtype=np.float64)
    if vi.shape != vt.shape:
        raise ValueError("v_i and v_t must share a shape")
    diff = vi - vt
    absdiff = np.abs(diff)
    pre = head.w1 @ absdiff + head.b1
    hidden = np.maximum(pre, 0.0)
    logit = float(head.w2 @ hidden + head.b2)
    y_hat = float(sigmoid(logit))
    y_clamped = min(max(y_hat, BCE_EPS), 1.0 - BCE_EPS)
    loss = -(label * math.log(y_clamped) + (1 - label) * math.log(1.0 - y_clamped))

    # d loss / d logit: zero when the clamp is active, (y_hat - y) otherwise.
    if y_hat < BCE_EPS or y_hat > 1.0 - BCE_EPS:
        g_logit = 0.0
    else:
        g_logit = y_hat - label
    g_hidden = g_logit * head.w2
    g_pre = g_hidden * (pre > 0.0)
    grads = {
        "w1": np.outer(g_pre, absdiff),
        "b1": g_pre,
        "w2": g_logit * hidden,
        "b2": np.asarray(g_logit),
    }
    g_absdiff = head.w1.T @ g_pre
    g_diff = g_absdiff * np.sign(diff)
    return float(loss), grads, g_diff, -g_diff


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""


@dataclass
class _GradAccumulator:
    w_img: np.ndarray
    b_img: np.ndarray
    tok_table: np.ndarray
    w_txt: np.ndarray
    b_txt: np.ndarray
    head: dict[str, np.ndarray] | None

    @classmethod
    def zeros_like(cls, params: ToyEncoderParams) -> "_GradAccumulator":
        head = None
        if params.head is not None:
            head = {
                "w1": np.zeros_like(params.head.w1),
                "b1": np.zeros_like(params.head.b1),
                "w2": np.zeros_like(params.head.w2),
                "b2": np.zeros(()),
            }
        return cls(
            w_img=np.zeros_like(params.w_img),
            b_img=np.zeros_like(params.b_img),
            tok_table=np.zeros_like(params.tok_table),
            w_txt=np.zeros_like(params.w_txt),
            b_txt=np.zeros_like(params.b_txt),
            head=head,
        )


def _accumulate_image_grad(acc: _GradAccumulator, g_emb: np.ndarray, x: np.ndarray) -> None:
    acc.w_img += np.outer(g_emb, x)
    acc.b_img += g_emb


def _accumulate_text_grad(
    acc: _GradAccumulator, params: ToyEncoderParams, g_emb: np.ndarray,
    tokens: list[int], pooled: np.ndarray,
) -> None:
    acc.w_txt += np.outer(g_emb, pooled)
    acc.b_txt += g_emb
    g_pooled = params.w_txt.T @ g_emb
    share = g_pooled / len(tokens)
    for t in tokens:
        acc.tok_table[t] += share


def train(
    params: ToyEncoderParams,
    images: list[ImageTensor],
    token_seqs: list[list[int]],
    objective: str = "infonce",
    epochs: int = 100,
    lr: float = 0.5,
    batch_size: int = 32,
    seed: int = 0,
    margin: float = 0.5,
) -> tuple[ToyEncoderParams, list[float]]:
    """Mini-batch gradient descent on matched (image, tokens) pairs.

    objective is one of infonce, triplet, bce. Deterministic for a fixed
    seed; returns the trained parameters (the input is not mutated) and the
    per-epoch mean loss trace. Raises TrainingDiverged on non-finite loss.
    """
    if objective not in ("infonce", "triplet", "bce"):
        raise ValueError(f"unknown objective {objective!r}")
    if len(images) != len(token_seqs) or not images:
        raise ValueError("need equally many images and token sequences, at least one pair")
    if objective == "bce" and params.head is None:
        raise ValueError("bce objective requires params with a classifier head")

    work = replace(
        params,
        w_img=params.w_img.copy(),
        b_img=params.b_img.copy(),
        tok_table=params.tok_table.copy(),
        w_txt=params.w_txt.copy(),
        b_txt=params.b_txt.copy(),
    )
    rng = np.random.default_rng(seed)
    n = len(images)
    xs = [im.flat() for im in images]
    trace: list[float] = []

    for _epoch in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            if objective == "infonce" and idx.size < 2:
                continue  # in-batch negatives need at least two pairs
            loss = _train_step(work, xs, token_seqs, idx, objective, lr, rng, margin)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"loss became {loss} at epoch {_epoch}, batch starting {start}"
                )
            epoch_loss += loss
            n_batches += 1
        trace.append(epoch_loss / max(n_batches, 1))
    return work, trace


def _train_step(
    work: ToyEncoderParams,
    xs: list[np.ndarray],
    token_seqs: list[list[int]],
    idx: np.ndarray,
    objective: str,
    lr: float,
    rng: np.random.Generator,
    margin: float,
) -> float:
    b = idx.size
    pooled = [work.tok_table[token_seqs[i]].mean(axis=0) for i in idx]
    img_embs = np.stack([work.w_img @ xs[i] + work.b_img for i in idx])
    txt_embs = np.stack([work.w_txt @ p + work.b_txt for p in pooled])
    acc = _GradAccumulator.zeros_like(work)

    if objective == "infonce":
        loss, g_img, g_txt = info_nce_loss(img_embs, txt_embs, work.temperature)
        for row, i in enumerate(idx):
            _accumulate_image_grad(acc, g_img[row], xs[i])
            _accumulate_text_grad(acc, work, g_txt[row], token_seqs[i], pooled[row])
    elif objective == "triplet":
        # Negative text for each anchor: the next pair in the shuffled batch.
        loss = 0.0
        for row, i in enumerate(idx):
            neg_row = (row + 1) % b
            if neg_row == row:
                continue
            l, ga, gp, gn = triplet_loss(img_embs[row], txt_embs[row], txt_embs[neg_row], margin)
            loss += l
            _accumulate_image_grad(acc, ga / b, xs[i])
            _accumulate_text_grad(acc, work, gp / b, token_seqs[i], pooled[row])
            _accumulate_text_grad(
                acc, work, gn / b, token_seqs[idx[neg_row]], pooled[neg_row]
            )
        loss /= b
    else:  # bce: one matched and one mismatched pair per batch element
        loss = 0.0
        n_terms = 2 * b
        for row, i in enumerate(idx):
            for label, txt_row in ((1, row), (0, (row + 1) % b)):
                if label == 0 and txt_row == row:
                    continue
                l, g_head, g_vi, g_vt = bce_pair_loss(
                    work.head, img_embs[row], txt_embs[txt_row], label
                )
                loss += l
                _accumulate_image_grad(acc, g_vi / n_terms, xs[i])
                _accumulate_text_grad(
                    acc, work, g_vt / n_terms, token_seqs[idx[txt_row]], pooled[txt_row]
                )
                for key in ("w1", "b1", "w2", "b2"):
                    acc.head[key] += g_head[key] / n_terms
        loss /= n_terms

    work.w_img -= lr * acc.w_img
    work.b_img -= lr * acc.b_img
    work.tok_table -= lr * acc.tok_table
    work.w_txt -= lr * acc.w_txt
    work.b_txt -= lr * acc.b_txt
    if acc.head is not None:
        work.head = ClassifierHead(
            w1=work.head.w1 - lr * acc.head["w1"],
            b1=work.head.b1 - lr * acc.head["b1"],
            w2=work.head.w2 - lr * acc.head["w2"],
            b2=work.head.b2 - lr * float(acc.head["b2"]),
        )
    return float(loss)


# ---------------------------------------------------------------------------
# Parameter file format: magic "XTOY", u32 version, dims, f32 LE arrays
# ---------------------------------------------------------------------------

def save_params(params: ToyEncoderParams, path: str | Path) -> None:
    """Serialize parameters as versioned little-endian float32 arrays."""
    head = params.head
    with open(path, "wb") as f:
        f.write(PARAMS_MAGIC)
        d = params.embed_dim
        token_dim = params.tok_table.shape[1]
        hidden = head.hidden_dim if head is not None else 0
        f.write(struct.pack(
            "<IIIIIIIf",
            PARAMS_VERSION,
            params.image_side,
            params.channels,
            d,
            token_dim,
            params.vocab_size,
            hidden,
            params.temperature,
        ))
        arrays = [params.w_img, params.b_img, params.tok_table, params.w_txt, params.b_txt]
        if head is not None:
            arrays += [head.w1, head.b1, head.w2, np.asarray([head.b2])]
        for a in arrays:
            f.write(np.asarray(a, dtype="<f4").tobytes(order="C"))


def load_params(path: str | Path) -> ToyEncoderParams:
    """Read a parameter file written by save_params."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != PARAMS_MAGIC:
        raise ParamsFileError(f"bad magic {raw[:4]!r}, expected {PARAMS_MAGIC!r}")
    header_size = 4 + struct.calcsize("<IIIIIIIf")
    if len(raw) < header_size:
        raise ParamsFileError("truncated header")
    version, side, channels, d, token_dim, vocab, hidden, temperature = struct.unpack(
        "<IIIIIIIf", raw[4:header_size]
    )
    if version != PARAMS_VERSION:
        raise ParamsFileError(f"unsupported version {version}")
    n_pixels = side * side * channels
    shapes = [(d, n_pixels), (d,), (vocab, token_dim), (d, token_dim), (d,)]
    if hidden > 0:
        shapes += [(hidden, d), (hidden,), (hidden,), (1,)]
    offset = header_size
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape))
        nbytes = 4 * count
        if offset + nbytes > len(raw):
            raise ParamsFileError("truncated parameter data")
        arrays.append(
            np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
            .astype(np.float64)
            .reshape(shape)
        )
        offset += nbytes
    if offset != len(raw):
        raise ParamsFileError(f"{len(raw) - offset} trailing bytes")
    head = None
    if hidden > 0:
        head = ClassifierHead(w1=arrays[5], b1=arrays[6], w2=arrays[7], b2=float(arrays[8][0]))
    return ToyEncoderParams(
        w_img=arrays[0],
        b_img=arrays[1],
        tok_table=arrays[2],
        w_txt=arrays[3],
        b_txt=arrays[4],
        temperature=float(temperature),
        head=head,
        image_side=side,
        channels=channels,
    )
