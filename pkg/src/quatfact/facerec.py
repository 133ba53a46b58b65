"""Color face recognition on top of the quaternion factorization.

Training stacks the vectorized training faces as the columns of one
quasi non-negative matrix, factorizes it as ``X = W @ H``, and keeps the
basis ``W``, the encodings ``H`` and a cached Gram-matrix factorization.
A probe ``G`` is encoded by the least-squares solve
``h = (W* @ W)^{-1} (W* @ G)`` and matched to the training column whose
encoding has the largest real cosine similarity; ties go to the smallest
index.  Channel and gray pipelines do the same arithmetic per real plane.

The synthetic corpus generator plants an exact integer-valued factorization
(basis patterns and encodings are small integers), so images survive the
8-bit PPM round trip with the planted structure intact.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .imaging import ColorImage, load_ppm, save_ppm
from .qmatrix import (
    DomainError,
    HermitianSolver,
    QMatrix,
    ShapeError,
    re_inner,
)
from .solvers import AdmmState, FactorPair, PGConfig, qadmm_run, qipg_run
from .baselines import RealAdmmState, RealFactorPair, nmf_admm, nmf_pg
from .initializers import InitBundle

__all__ = [
    "ManifestError",
    "FaceDataset",
    "RecognitionModel",
    "ChannelModel",
    "GrayModel",
    "CorpusBundle",
    "vectorize_image",
    "unvectorize",
    "train",
    "encode_probe",
    "similarity",
    "classify",
    "train_channels",
    "classify_channels",
    "train_gray",
    "classify_gray",
    "accuracy",
    "save_model",
    "load_model",
    "generate_corpus",
    "write_corpus",
    "load_corpus",
]

_MODEL_MAGIC = b"QFACMDL1"


class ManifestError(ValueError):
    """A corpus manifest is missing or malformed."""


def vectorize_image(img: ColorImage) -> QMatrix:
    """Straighten an image into an (m*n) x 1 pure-quaternion column.

    Column-major order, so pixels of one image column stay contiguous.
    """
    cols = [p.reshape(-1, 1, order="F") for p in img.planes]
    return QMatrix.from_imag(*cols)


def unvectorize(column: QMatrix, height: int, width: int) -> ColorImage:
    """Inverse of :func:`vectorize_image` (clamps like any display path)."""
    planes = [p.reshape(height, width, order="F")
              for p in (column.a1, column.a2, column.a3)]
    return ColorImage(*planes)


@dataclass
class FaceDataset:
    """Vectorized faces with identity labels and a train/test split."""

    images: List[QMatrix]
    labels: List[int]
    split: List[str]
    paths: Optional[List[str]] = None
    image_shape: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        if not (len(self.images) == len(self.labels) == len(self.split)):
            raise ValueError("images, labels and split must be parallel")
        if self.paths is not None and len(self.paths) != len(self.images):
            raise ValueError("paths must parallel images")
        lengths = {img.rows for img in self.images}
        if len(lengths) > 1:
            raise ShapeError(f"images have mixed lengths {sorted(lengths)}")
        bad = {s for s in self.split} - {"train", "test"}
        if bad:
            raise ValueError(f"split values must be train/test, got {bad}")

    def indices(self, role: str) -> List[int]:
        return [i for i, s in enumerate(self.split) if s == role]

    @property
    def vector_length(self) -> int:
        return self.images[0].rows if self.images else 0


def _stack_columns(columns: Sequence[QMatrix]) -> QMatrix:
    planes = [np.hstack([col.planes[p] for col in columns])
              for p in range(4)]
    return QMatrix(*planes)


@dataclass
class RecognitionModel:
    """Trained quaternion basis, encodings, labels, and Gram solver."""

    W: QMatrix
    H: QMatrix
    labels: List[int]
    ridge: float = 0.0
    training_residual: float = math.nan
    _solver: Optional[HermitianSolver] = field(default=None, repr=False)

    def __post_init__(self):
        if self.H.cols != len(self.labels):
            raise ShapeError("one label per encoding column is required")
        if self._solver is None:
            gram = self.W.conj_t() @ self.W
            if self.ridge > 0.0:
                gram = gram + self.ridge * QMatrix.eye(gram.rows)
            self._solver = HermitianSolver(gram)

    @property
    def rank(self) -> int:
        return self.W.cols


def train(dataset: FaceDataset, rank: int, method: str = "qadmm",
          iters: int = 4, seed: int = 0, alpha: float = 0.01,
          beta: float = 0.01, rho: float = 0.01, sigma: float = 0.001,
          ridge: float = 0.0, stop_tol: float = 0.0,
          init: Optional[FactorPair] = None) -> RecognitionModel:
    """Factorize the training columns and build a recognition model.

    ``method`` is ``"qadmm"`` or ``"qipgm"``.  ``init`` overrides the seeded
    starting point (its W/H are also used as the multiplier method's splits,
    with zero multipliers).
    """
    if method not in ("qadmm", "qipgm"):
        raise ValueError(f"method must be 'qadmm' or 'qipgm', got {method!r}")
    train_idx = dataset.indices("train")
    if not train_idx:
        raise ValueError("training split is empty")
    x = _stack_columns([dataset.images[i] for i in train_idx])
    mu = x.cols
    mn = x.rows
    if not 1 <= rank <= min(mn, mu):
        raise ValueError(
            f"rank {rank} out of range for {mn} pixels x {mu} images")

    if init is None:
        bundle = InitBundle.draw(seed, mn, rank, mu)
        pair0 = bundle.factor_pair()
    else:
        pair0 = init

    if method == "qadmm":
        if init is None:
            state = bundle.admm_state(alpha, beta)
        else:
            zero_w = QMatrix.zeros(*pair0.W.shape)
            zero_h = QMatrix.zeros(*pair0.H.shape)
            state = AdmmState(pair0.W, pair0.H, pair0.W, pair0.H,
                              zero_w, zero_h, alpha, beta)
        result = qadmm_run(x, state, iters, stop_tol=stop_tol)
    else:
        cfg = PGConfig(rho=rho, sigma=sigma, max_iters=iters,
                       stop_tol=stop_tol)
        result = qipg_run(x, pair0, cfg)

    w, h = result.pair.W, result.pair.H
    resid = (x - w @ h).norm() / max(x.norm(), np.finfo(float).tiny)
    labels = [dataset.labels[i] for i in train_idx]
    return RecognitionModel(w, h, labels, ridge=ridge,
                            training_residual=resid)


def encode_probe(model: RecognitionModel, probe: QMatrix) -> QMatrix:
    """Least-squares encoding of one probe column against the basis."""
    if probe.rows != model.W.rows or probe.cols != 1:
        raise ShapeError(
            f"probe must be {model.W.rows} x 1, got {probe.shape}")
    return model._solver.solve_left(model.W.conj_t() @ probe)


def similarity(h: QMatrix, c: QMatrix) -> float:
    """Real cosine similarity of two encodings, in [-1, 1].

    Raises
    ------
    DomainError
        If either vector is zero.
    """
    nh, nc = h.norm(), c.norm()
    if nh == 0.0 or nc == 0.0:
        raise DomainError("cosine similarity of a zero vector is undefined")
    return re_inner(h, c) / (nh * nc)


def _cosine_scores(h_planes, h_norm, basis_planes, basis_norms) -> np.ndarray:
    """Vectorized cosines of one encoding against every training column.

    Columns with zero norm (or a zero probe encoding) score -inf so they
    can never win the argmax.
    """
    mu = basis_norms.shape[0]
    if h_norm == 0.0:
        return np.full(mu, -np.inf)
    num = np.zeros(mu)
    for hp, bp in zip(h_planes, basis_planes):
        num += bp.T @ hp.ravel()
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = num / (h_norm * basis_norms)
    scores[basis_norms == 0.0] = -np.inf
    return scores


def classify(model: RecognitionModel, probe: QMatrix) -> Tuple[int, float]:
    """Best-matching training column index and its similarity score."""
    h = encode_probe(model, probe)
    basis_norms = np.sqrt(sum(p * p for p in model.H.planes).sum(axis=0))
    scores = _cosine_scores(h.planes, h.norm(), model.H.planes, basis_norms)
    t_star = int(np.argmax(scores))
    return t_star, float(scores[t_star])


# ---------------------------------------------------------------------------
# per-channel and gray pipelines
# ---------------------------------------------------------------------------

class _RealGram:
    """Cached Cholesky of W.T @ W + ridge * I for repeated encodings."""

    def __init__(self, w: np.ndarray, ridge: float):
        import scipy.linalg

        gram = w.T @ w + ridge * np.eye(w.shape[1])
        try:
            self._factor = scipy.linalg.cho_factor(gram)
        except scipy.linalg.LinAlgError as exc:
            from .qmatrix import SingularMatrixError

            raise SingularMatrixError(
                f"channel Gram matrix is singular: {exc}") from exc
        self.w = w

    def encode(self, g: np.ndarray) -> np.ndarray:
        import scipy.linalg

        return scipy.linalg.cho_solve(self._factor, self.w.T @ g)


@dataclass
class ChannelModel:
    """Three independent real factorizations, one per color channel."""

    pairs: Tuple[RealFactorPair, RealFactorPair, RealFactorPair]
    labels: List[int]
    ridge: float = 0.0
    _grams: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        if self._grams is None:
            self._grams = tuple(_RealGram(p.W, self.ridge)
                                for p in self.pairs)


@dataclass
class GrayModel:
    """Single-channel real factorization of gray-level faces."""

    pair: RealFactorPair
    labels: List[int]
    ridge: float = 0.0
    _gram: Optional[_RealGram] = field(default=None, repr=False)

    def __post_init__(self):
        if self._gram is None:
            self._gram = _RealGram(self.pair.W, self.ridge)


def _channel_planes(columns: Sequence[QMatrix]):
    return [np.hstack([col.planes[p] for col in columns])
            for p in (1, 2, 3)]


def _train_real(x: np.ndarray, l_mat: np.ndarray, s_mat: np.ndarray,
                method: str, iters: int, alpha: float, beta: float,
                rho: float, sigma: float) -> RealFactorPair:
    if method == "radmm":
        state = RealAdmmState(l_mat, s_mat, l_mat, s_mat, l_mat, s_mat,
                              alpha, beta)
        pair, _, _ = nmf_admm(x, state, iters)
    elif method == "ripgm":
        cfg = PGConfig(rho=rho, sigma=sigma, max_iters=iters)
        pair, _ = nmf_pg(x, RealFactorPair(l_mat, s_mat), cfg)
    else:
        raise ValueError(f"method must be 'radmm' or 'ripgm', got {method!r}")
    return pair


def train_channels(dataset: FaceDataset, rank: int, method: str = "radmm",
                   iters: int = 4, seed: int = 0, alpha: float = 0.01,
                   beta: float = 0.01, rho: float = 0.01,
                   sigma: float = 0.001, ridge: float = 0.0) -> ChannelModel:
    """Train one real factorization per color channel (red, green, blue)."""
    train_idx = dataset.indices("train")
    if not train_idx:
        raise ValueError("training split is empty")
    columns = [dataset.images[i] for i in train_idx]
    planes = _channel_planes(columns)
    mn, mu = planes[0].shape
    if not 1 <= rank <= min(mn, mu):
        raise ValueError(
            f"rank {rank} out of range for {mn} pixels x {mu} images")
    bundle = InitBundle.draw(seed, mn, rank, mu)
    pairs = tuple(
        _train_real(x, l_mat, s_mat, method, iters, alpha, beta, rho, sigma)
        for x, (l_mat, s_mat) in zip(planes, bundle.channel_pairs()))
    labels = [dataset.labels[i] for i in train_idx]
    return ChannelModel(pairs, labels, ridge=ridge)


def _real_cosine_scores(h: np.ndarray, h_basis: np.ndarray) -> np.ndarray:
    """Cosines of a real encoding against every column, -inf on zeros."""
    norms = np.linalg.norm(h_basis, axis=0)
    h_norm = float(np.linalg.norm(h))
    mu = h_basis.shape[1]
    if h_norm == 0.0:
        return np.full(mu, -np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = (h_basis.T @ h.ravel()) / (h_norm * norms)
    scores[norms == 0.0] = -np.inf
    return scores


def classify_channels(model: ChannelModel,
                      probe: QMatrix) -> Tuple[int, float]:
    """Sum of the three per-channel cosines; degenerate channels are skipped.

    A channel whose probe encoding or training column is zero contributes
    nothing; if every channel degenerates for a column its total is -inf.
    """
    mu = len(model.labels)
    totals = np.zeros(mu)
    contributed = np.zeros(mu, dtype=bool)
    for plane_idx, (pair, gram) in enumerate(zip(model.pairs, model._grams),
                                             start=1):
        g = probe.planes[plane_idx].reshape(-1, 1)
        h = gram.encode(g)
        scores = _real_cosine_scores(h, pair.H)
        usable = np.isfinite(scores)
        totals[usable] += scores[usable]
        contributed |= usable
    totals[~contributed] = -np.inf
    t_star = int(np.argmax(totals))
    return t_star, float(totals[t_star])


def train_gray(dataset: FaceDataset, rank: int, method: str = "radmm",
               iters: int = 4, seed: int = 0, alpha: float = 0.01,
               beta: float = 0.01, rho: float = 0.01, sigma: float = 0.001,
               ridge: float = 0.0) -> GrayModel:
    """Train the gray-level pipeline (channel mean of each face)."""
    train_idx = dataset.indices("train")
    if not train_idx:
        raise ValueError("training split is empty")
    columns = [dataset.images[i] for i in train_idx]
    planes = _channel_planes(columns)
    x = (planes[0] + planes[1] + planes[2]) / 3.0
    mn, mu = x.shape
    if not 1 <= rank <= min(mn, mu):
        raise ValueError(
            f"rank {rank} out of range for {mn} pixels x {mu} images")
    bundle = InitBundle.draw(seed, mn, rank, mu)
    l_mat, s_mat = bundle.gray_pair()
    pair = _train_real(x, l_mat, s_mat, method, iters, alpha, beta, rho,
                       sigma)
    labels = [dataset.labels[i] for i in train_idx]
    return GrayModel(pair, labels, ridge=ridge)


def classify_gray(model: GrayModel, probe: QMatrix) -> Tuple[int, float]:
    """Real cosine match of the gray-level probe encoding."""
    g = ((probe.a1 + probe.a2 + probe.a3) / 3.0).reshape(-1, 1)
    h = model._gram.encode(g)
    scores = _real_cosine_scores(h, model.pair.H)
    t_star = int(np.argmax(scores))
    return t_star, float(scores[t_star])


def accuracy(predicted: Sequence, truth: Sequence) -> float:
    """Fraction of probes whose predicted label matches the true one."""
    if len(predicted) != len(truth):
        raise ValueError("prediction and truth lengths differ")
    if not truth:
        raise ValueError("empty test set")
    hits = sum(1 for p, t in zip(predicted, truth) if p == t)
    return hits / len(truth)


# ---------------------------------------------------------------------------
# model persistence (flat little-endian binary container)
# ---------------------------------------------------------------------------
#
# Layout: 8-byte magic "QFACMDL1"; three uint64 (rows, rank, columns); one
# float64 ridge; the four planes of W then of H as row-major float64; one
# uint64 label count; labels as int64.  All fields little-endian.

def save_model(model: RecognitionModel, path) -> None:
    rows, rank = model.W.shape
    mu = model.H.cols
    out = bytearray()
    out += _MODEL_MAGIC
    out += struct.pack("<QQQ", rows, rank, mu)
    out += struct.pack("<d", model.ridge)
    for plane in (*model.W.planes, *model.H.planes):
        out += np.ascontiguousarray(plane, dtype="<f8").tobytes()
    out += struct.pack("<Q", len(model.labels))
    out += np.asarray(model.labels, dtype="<i8").tobytes()
    Path(path).write_bytes(bytes(out))


def load_model(path) -> RecognitionModel:
    data = Path(path).read_bytes()
    if data[:8] != _MODEL_MAGIC:
        raise ValueError(f"{path}: not a recognition model file")
    rows, rank, mu = struct.unpack_from("<QQQ", data, 8)
    (ridge,) = struct.unpack_from("<d", data, 32)
    pos = 40

    def take(r, c):
        nonlocal pos
        n = r * c * 8
        arr = np.frombuffer(data[pos:pos + n], dtype="<f8").reshape(r, c)
        pos += n
        return arr

    w_planes = [take(rows, rank) for _ in range(4)]
    h_planes = [take(rank, mu) for _ in range(4)]
    (count,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    labels = np.frombuffer(data[pos:pos + count * 8], dtype="<i8")
    if labels.size != count:
        raise ValueError(f"{path}: truncated label table")
    return RecognitionModel(QMatrix(*w_planes), QMatrix(*h_planes),
                            [int(v) for v in labels], ridge=ridge)


# ---------------------------------------------------------------------------
# synthetic corpus with a planted exact factorization
# ---------------------------------------------------------------------------

@dataclass
class CorpusBundle:
    """Generated faces plus the integer factorization they came from."""

    images: List[ColorImage]
    labels: List[int]
    planted: FactorPair
    height: int
    width: int


def generate_corpus(n_ids: int = 10, per_id: int = 5, height: int = 24,
                    width: int = 24, seed: int = 0,
                    shared: int = 15) -> CorpusBundle:
    """Build ``n_ids * per_id`` faces from integer basis patterns.

    Each identity owns one basis column; every image mixes it with a few
    shared perturbation columns.  All pixel values are exact small integers,
    so writing and re-reading 8-bit files preserves the planted rank
    ``n_ids + shared`` factorization exactly.
    """
    rng = np.random.default_rng(seed)
    mn = height * width
    l_gen = n_ids + shared
    basis = [rng.integers(0, 16, size=(mn, l_gen)).astype(float)
             for _ in range(3)]
    encodings = np.zeros((l_gen, n_ids * per_id))
    labels = []
    col = 0
    for ident in range(n_ids):
        for _ in range(per_id):
            h = np.zeros(l_gen)
            h[ident] = float(rng.integers(3, 6))
            picks = rng.choice(shared, size=min(4, shared), replace=False)
            h[n_ids + picks] = rng.integers(1, 3, size=picks.size).astype(float)
            encodings[:, col] = h
            labels.append(ident)
            col += 1

    planted_w = QMatrix.from_imag(*basis)
    planted_h = QMatrix.from_real(encodings)
    product = planted_w @ planted_h
    if product.planes[1].max() > 255.0:
        raise AssertionError("generator produced out-of-range pixels")

    images = []
    for t in range(n_ids * per_id):
        planes = [product.planes[p][:, t].reshape(height, width, order="F")
                  for p in (1, 2, 3)]
        images.append(ColorImage(*planes))
    return CorpusBundle(images, labels, FactorPair(planted_w, planted_h),
                        height, width)


def write_corpus(out_dir, bundle: CorpusBundle, eta: Optional[int] = None):
    """Write the corpus as PPM files plus ``manifest.csv``.

    Per identity, the first ``eta`` images are marked train and the rest
    test; with ``eta`` equal to the images-per-identity count every image is
    listed under both roles (a train-equals-test corpus).  Returns the
    manifest path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    per_id = {}
    rows = []
    for t, (img, label) in enumerate(zip(bundle.images, bundle.labels)):
        name = f"face_{t:03d}.ppm"
        save_ppm(img, out_dir / name)
        seen = per_id.get(label, 0)
        per_id[label] = seen + 1
        count_for_label = bundle.labels.count(label)
        if eta is None:
            eta_label = max(1, count_for_label - 1)
        else:
            eta_label = eta
        if eta_label >= count_for_label:
            rows.append((name, label, "train"))
            rows.append((name, label, "test"))
        elif seen < eta_label:
            rows.append((name, label, "train"))
        else:
            rows.append((name, label, "test"))
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "label", "split"])
        writer.writerows(rows)
    return manifest


def load_corpus(manifest_path, eta: Optional[int] = None,
                seed: int = 0) -> FaceDataset:
    """Load a directory-of-PPMs corpus described by a manifest CSV.

    The manifest needs ``path`` and ``label`` columns; ``split`` values of
    train/test are honored when present, otherwise ``eta`` images per
    identity are drawn as the training split with the given seed.
    """
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    with open(manifest_path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        for required in ("path", "label"):
            if required not in fields:
                raise ManifestError(
                    f"manifest is missing required column '{required}'")
        has_split = "split" in fields
        rows = list(reader)
    if not rows:
        raise ManifestError("manifest lists no images")

    images, labels, split, paths, shapes = [], [], [], [], set()
    for idx, row in enumerate(rows):
        try:
            label = int(row["label"])
        except (TypeError, ValueError):
            raise ManifestError(
                f"row {idx + 1}: label {row['label']!r} is not an integer")
        img = load_ppm(base / row["path"])
        shapes.add((img.height, img.width))
        images.append(vectorize_image(img))
        labels.append(label)
        paths.append(row["path"])
        if has_split:
            value = (row["split"] or "").strip()
            if value not in ("train", "test"):
                raise ManifestError(
                    f"row {idx + 1}: split {value!r} is not train/test")
            split.append(value)
    if len(shapes) > 1:
        raise ManifestError(f"images have mixed sizes {sorted(shapes)}")

    if not has_split:
        if eta is None:
            raise ManifestError(
                "manifest has no 'split' column; pass a per-identity "
                "training count")
        rng = np.random.default_rng(seed)
        split = ["test"] * len(images)
        by_label = {}
        for i, label in enumerate(labels):
            by_label.setdefault(label, []).append(i)
        for label, members in sorted(by_label.items()):
            chosen = rng.permutation(len(members))[:eta]
            for j in chosen:
                split[members[j]] = "train"

    shape = next(iter(shapes))
    return FaceDataset(images, labels, split, paths=paths, image_shape=shape)
