"""RotatE embeddings: complex entity vectors rotated by unit-modulus predicates.

A triplet (h, r, t) is scored by s = gamma - ||h o r - t|| where `o` is the
element-wise complex product and r has modulus 1 per coordinate (guaranteed
by storing predicate phases, not free complex numbers).  Training minimizes
a logistic margin loss over corrupted negatives with plain seeded SGD, so a
given (graph, config) always produces the same model bit for bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .kg import TRAIN, KnowledgeGraph, Triplet
from .seeds import rng_stream

log = logging.getLogger(__name__)

L1 = "l1"
L2 = "l2"


@dataclass
class TrainConfig:
    seed: int
    dim: int = 200
    gamma: float = 12.0
    negatives: int = 4
    neg_weight: float | None = None  # defaults to `negatives` (uniform averaging)
    learning_rate: float = 1e-2
    epochs: int = 100
    batch_size: int = 512
    norm: str = L1

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.negatives < 1:
            raise ValueError("negatives-per-positive must be >= 1")
        if self.neg_weight is not None and self.neg_weight <= 0:
            raise ValueError("neg_weight must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.norm not in (L1, L2):
            raise ValueError(f"norm must be {L1!r} or {L2!r}")

    @property
    def effective_neg_weight(self) -> float:
        return float(self.negatives if self.neg_weight is None else self.neg_weight)


class RotatEModel:
    """Entity embeddings (complex, n_entities x dim) and predicate phases
    (radians, n_predicates x dim) with margin `gamma`."""

    def __init__(
        self,
        entity_embeddings: np.ndarray,
        predicate_phases: np.ndarray,
        gamma: float,
        norm: str = L1,
    ):
        entity_embeddings = np.asarray(entity_embeddings, dtype=np.complex128)
        predicate_phases = np.asarray(predicate_phases, dtype=np.float64)
        if entity_embeddings.ndim != 2 or predicate_phases.ndim != 2:
            raise ValueError("embeddings and phases must be 2-d arrays")
        if entity_embeddings.shape[1] != predicate_phases.shape[1]:
            raise ValueError("entity and predicate dimensions differ")
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        if norm not in (L1, L2):
            raise ValueError(f"norm must be {L1!r} or {L2!r}")
        if not (np.all(np.isfinite(entity_embeddings.view(np.float64)))
                and np.all(np.isfinite(predicate_phases))):
            raise ValueError("model parameters must be finite")
        self.entities = entity_embeddings
        self.phases = predicate_phases
        self.gamma = float(gamma)
        self.norm = norm

    @classmethod
    def init_random(
        cls, n_entities: int, n_predicates: int, config: TrainConfig
    ) -> "RotatEModel":
        """Entity components uniform in +-gamma/(2 dim); phases uniform in +-pi."""
        rng = rng_stream(config.seed, "init")
        bound = 0.5 * config.gamma / config.dim
        re = rng.uniform(-bound, bound, size=(n_entities, config.dim))
        im = rng.uniform(-bound, bound, size=(n_entities, config.dim))
        phases = rng.uniform(-np.pi, np.pi, size=(n_predicates, config.dim))
        return cls(re + 1j * im, phases, config.gamma, config.norm)

    @property
    def dim(self) -> int:
        return self.entities.shape[1]

    @property
    def n_entities(self) -> int:
        return self.entities.shape[0]

    @property
    def n_predicates(self) -> int:
        return self.phases.shape[0]

    def rotations(self, r: np.ndarray | Sequence[int]) -> np.ndarray:
        return np.exp(1j * self.phases[r])

    def rotation_table(self) -> np.ndarray:
        """exp(i*phases) for every predicate; worth precomputing when scoring
        many proposals against a fixed model."""
        return np.exp(1j * self.phases)

    def distance_batch(self, h, r, t, rot_table: np.ndarray | None = None) -> np.ndarray:
        """||h o r - t|| per triplet, the configured norm over per-coordinate
        complex moduli."""
        rot = self.rotations(r) if rot_table is None else rot_table[r]
        z = self.entities[h] * rot - self.entities[t]
        m = np.abs(z)
        if self.norm == L1:
            return m.sum(axis=-1)
        return np.sqrt((m * m).sum(axis=-1))

    def score_batch(self, h, r, t, rot_table: np.ndarray | None = None) -> np.ndarray:
        return self.gamma - self.distance_batch(h, r, t, rot_table)

    def distance(self, h: int, r: int, t: int) -> float:
        return float(self.distance_batch(np.array([h]), np.array([r]), np.array([t]))[0])

    def score(self, h: int, r: int, t: int) -> float:
        return self.gamma - self.distance(h, r, t)

    def copy(self) -> "RotatEModel":
        return RotatEModel(self.entities.copy(), self.phases.copy(), self.gamma, self.norm)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def loss(
    model: RotatEModel,
    positive: Triplet,
    negatives: Sequence[Triplet],
    config: TrainConfig,
) -> float:
    """-log sigma(s_pos) - sum_i (1/k) log sigma(-s_neg_i)."""
    if len(negatives) != config.negatives:
        raise ValueError(
            f"expected {config.negatives} negatives, got {len(negatives)}"
        )
    k = config.effective_neg_weight
    s_pos = model.score(*positive)
    negs = np.asarray(negatives, dtype=np.int64)
    s_neg = model.score_batch(negs[:, 0], negs[:, 1], negs[:, 2])
    return float(_softplus(-s_pos) + (_softplus(s_neg) / k).sum())


@dataclass
class GradientSet:
    """Sparse loss gradient: only parameters of involved ids appear."""

    dim: int
    entities: dict[int, np.ndarray] = field(default_factory=dict)  # complex (dim,)
    phases: dict[int, np.ndarray] = field(default_factory=dict)  # float (dim,)

    def entity_grad(self, entity_id: int) -> np.ndarray:
        return self.entities.get(entity_id, np.zeros(self.dim, dtype=np.complex128))

    def phase_grad(self, predicate_id: int) -> np.ndarray:
        return self.phases.get(predicate_id, np.zeros(self.dim, dtype=np.float64))

    def _add_entity(self, entity_id: int, g: np.ndarray) -> None:
        if entity_id in self.entities:
            self.entities[entity_id] = self.entities[entity_id] + g
        else:
            self.entities[entity_id] = g.astype(np.complex128)

    def _add_phase(self, predicate_id: int, g: np.ndarray) -> None:
        if predicate_id in self.phases:
            self.phases[predicate_id] = self.phases[predicate_id] + g
        else:
            self.phases[predicate_id] = g.astype(np.float64)


def _grad_contributions(model: RotatEModel, h, r, t, coef):
    """Per-triplet gradient pieces given coef = dL/d(distance).

    Returns (g_head, g_tail, g_phase) aligned with (h, r, t); the complex
    entries carry d/d(re) in their real part and d/d(im) in their imaginary
    part.  The L1 subgradient at a zero-modulus coordinate is 0.
    """
    rot = model.rotations(r)
    u = model.entities[h] * rot
    z = u - model.entities[t]
    m = np.abs(z)
    unit = np.where(m > 0, z / np.where(m > 0, m, 1.0), 0.0)
    if model.norm == L1:
        g = coef[..., None] * unit
    else:
        d = np.sqrt((m * m).sum(axis=-1, keepdims=True))
        scale = np.where(d > 0, m / np.where(d > 0, d, 1.0), 0.0)
        g = coef[..., None] * scale * unit
    g_head = g * np.conj(rot)
    g_tail = -g
    g_phase = (g * np.conj(u)).imag
    return g_head, g_tail, g_phase


def gradients(
    model: RotatEModel,
    positive: Triplet,
    negatives: Sequence[Triplet],
    config: TrainConfig,
) -> GradientSet:
    """Analytic partial derivatives of `loss` w.r.t. every involved parameter."""
    if len(negatives) != config.negatives:
        raise ValueError(
            f"expected {config.negatives} negatives, got {len(negatives)}"
        )
    k = config.effective_neg_weight
    out = GradientSet(dim=model.dim)

    trips = np.asarray([positive, *negatives], dtype=np.int64)
    scores = model.score_batch(trips[:, 0], trips[:, 1], trips[:, 2])
    # dL/d(distance): positive 1 - sigma(s); each negative -(1/k) sigma(s)
    coef = np.empty(len(trips))
    coef[0] = 1.0 - expit(scores[0])
    coef[1:] = -expit(scores[1:]) / k

    g_head, g_tail, g_phase = _grad_contributions(
        model, trips[:, 0], trips[:, 1], trips[:, 2], coef
    )
    for i, (hh, rr, tt) in enumerate(trips):
        out._add_entity(int(hh), g_head[i])
        out._add_entity(int(tt), g_tail[i])
        out._add_phase(int(rr), g_phase[i])
    return out


def _triplet_codes(h, r, t, n_entities: int, n_predicates: int) -> np.ndarray:
    return (np.asarray(h, dtype=np.int64) * n_predicates + np.asarray(r)) * n_entities + np.asarray(t)


class _TripletIndex:
    """Sorted-code membership tests for batches of candidate triplets."""

    def __init__(self, triplets: Sequence[Triplet], n_entities: int, n_predicates: int):
        self.n_entities = n_entities
        self.n_predicates = n_predicates
        if len(triplets):
            arr = np.asarray(triplets, dtype=np.int64)
            self._codes = np.sort(_triplet_codes(arr[:, 0], arr[:, 1], arr[:, 2], n_entities, n_predicates))
        else:
            self._codes = np.empty(0, dtype=np.int64)

    def contains(self, h, r, t) -> np.ndarray:
        codes = _triplet_codes(h, r, t, self.n_entities, self.n_predicates)
        idx = np.searchsorted(self._codes, codes)
        idx = np.minimum(idx, len(self._codes) - 1) if len(self._codes) else idx
        if not len(self._codes):
            return np.zeros(codes.shape, dtype=bool)
        return self._codes[idx] == codes


def _sample_negatives(h, r, t, config: TrainConfig, n_entities: int, index: _TripletIndex, rng):
    """Corrupt head or tail (uniform coin) with a uniform entity, resampling
    draws that land back in the train split."""
    B = len(h)
    n = config.negatives
    corrupt_head = rng.random((B, n)) < 0.5
    ents = rng.integers(0, n_entities, size=(B, n))
    r_mat = np.broadcast_to(r[:, None], (B, n))
    for _ in range(100):
        nh = np.where(corrupt_head, ents, h[:, None])
        nt = np.where(corrupt_head, t[:, None], ents)
        bad = index.contains(nh, r_mat, nt)
        if not bad.any():
            return nh, nt
        ents = np.where(bad, rng.integers(0, n_entities, size=(B, n)), ents)
    log.warning("negative sampling kept colliding after 100 rounds; keeping collisions")
    return np.where(corrupt_head, ents, h[:, None]), np.where(corrupt_head, t[:, None], ents)


def train(
    kg: KnowledgeGraph, config: TrainConfig
) -> tuple[RotatEModel, list[float]]:
    """Seeded SGD over shuffled train triplets; returns the model and the
    mean per-triplet loss of each epoch."""
    trips = kg.triplets_in({TRAIN})
    if not trips:
        raise ValueError("train split is empty")
    n_e, n_p = kg.n_entities, kg.n_predicates
    index = _TripletIndex(trips, n_e, n_p)
    model = RotatEModel.init_random(n_e, n_p, config)
    k = config.effective_neg_weight
    lr = config.learning_rate

    arr = np.asarray(trips, dtype=np.int64)
    shuffle_rng = rng_stream(config.seed, "shuffle")
    neg_rng = rng_stream(config.seed, "negatives")

    epoch_losses: list[float] = []
    for _epoch in range(config.epochs):
        perm = shuffle_rng.permutation(len(arr))
        total = 0.0
        for start in range(0, len(arr), config.batch_size):
            batch = arr[perm[start : start + config.batch_size]]
            h, r, t = batch[:, 0], batch[:, 1], batch[:, 2]
            B = len(batch)
            nh, nt = _sample_negatives(h, r, t, config, n_e, index, neg_rng)
            nr = np.broadcast_to(r[:, None], nh.shape)

            s_pos = model.score_batch(h, r, t)
            s_neg = model.score_batch(nh.ravel(), nr.ravel(), nt.ravel()).reshape(B, -1)
            total += float((_softplus(-s_pos) + (_softplus(s_neg) / k).sum(axis=1)).sum())

            coef_pos = 1.0 - expit(s_pos)
            coef_neg = (-expit(s_neg) / k).ravel()
            gh_p, gt_p, gph_p = _grad_contributions(model, h, r, t, coef_pos)
            gh_n, gt_n, gph_n = _grad_contributions(
                model, nh.ravel(), nr.ravel(), nt.ravel(), coef_neg
            )

            grad_ent = np.zeros_like(model.entities)
            grad_ph = np.zeros_like(model.phases)
            np.add.at(grad_ent, h, gh_p)
            np.add.at(grad_ent, t, gt_p)
            np.add.at(grad_ph, r, gph_p)
            np.add.at(grad_ent, nh.ravel(), gh_n)
            np.add.at(grad_ent, nt.ravel(), gt_n)
            np.add.at(grad_ph, nr.ravel(), gph_n)

            model.entities -= lr * grad_ent
            model.phases -= lr * grad_ph
        epoch_losses.append(total / len(arr))
    return model, epoch_losses


# ---------------------------------------------------------------------------
# checkpoint I/O (text, 17 significant digits: exact float64 round trip)


def _fmt(values) -> str:
    return " ".join(f"{v:.17g}" for v in values)


def save_model(model: RotatEModel, path) -> None:
    """Header (`rotate v1`, dim, gamma, entities, predicates), then one row of
    2*dim reals per entity and one row of dim phases per predicate."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("rotate v1\n")
        f.write(f"dim={model.dim}\n")
        f.write(f"gamma={model.gamma:.17g}\n")
        f.write(f"entities={model.n_entities}\n")
        f.write(f"predicates={model.n_predicates}\n")
        for row in model.entities:
            parts = np.empty(2 * model.dim)
            parts[0::2] = row.real
            parts[1::2] = row.imag
            f.write(_fmt(parts) + "\n")
        for row in model.phases:
            f.write(_fmt(row) + "\n")


def load_model(
    path,
    norm: str = L1,
    expect_entities: int | None = None,
    expect_predicates: int | None = None,
) -> RotatEModel:
    """Strict reader for `save_model` output; any structural mismatch rejects."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != "rotate v1":
        raise ValueError(f"{path}: not a 'rotate v1' checkpoint")
    header: dict[str, str] = {}
    for expected_key, line in zip(("dim", "gamma", "entities", "predicates"), lines[1:5]):
        key, _, value = line.partition("=")
        if key != expected_key or not value:
            raise ValueError(f"{path}: malformed header line {line!r}")
        header[key] = value
    try:
        dim = int(header["dim"])
        gamma = float(header["gamma"])
        n_e = int(header["entities"])
        n_p = int(header["predicates"])
    except (KeyError, ValueError) as e:
        raise ValueError(f"{path}: bad header: {e}") from None
    if expect_entities is not None and n_e != expect_entities:
        raise ValueError(f"{path}: checkpoint has {n_e} entities, expected {expect_entities}")
    if expect_predicates is not None and n_p != expect_predicates:
        raise ValueError(f"{path}: checkpoint has {n_p} predicates, expected {expect_predicates}")
    body = lines[5:]
    if len(body) < n_e + n_p:
        raise ValueError(f"{path}: truncated checkpoint ({len(body)} rows, need {n_e + n_p})")
    entities = np.empty((n_e, dim), dtype=np.complex128)
    for i in range(n_e):
        parts = np.array(body[i].split(), dtype=np.float64)
        if parts.size != 2 * dim:
            raise ValueError(f"{path}: entity row {i} has {parts.size} values, need {2 * dim}")
        entities[i] = parts[0::2] + 1j * parts[1::2]
    phases = np.empty((n_p, dim), dtype=np.float64)
    for i in range(n_p):
        parts = np.array(body[n_e + i].split(), dtype=np.float64)
        if parts.size != dim:
            raise ValueError(f"{path}: predicate row {i} has {parts.size} values, need {dim}")
        phases[i] = parts
    return RotatEModel(entities, phases, gamma, norm)
