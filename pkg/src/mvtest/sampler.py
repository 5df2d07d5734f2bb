"""Seedable, splittable multivariate normal data generation.

Streams are PCG64 generators seeded through ``numpy.random.SeedSequence``;
substreams are keyed by ``(scenario_id, replicate_index)`` via the
sequence's spawn key, so every replicate's data is a pure function of the
master seed and its indices, regardless of which worker runs it.

Normal variates come from the Marsaglia polar method applied to the
stream's uniform doubles. Variates are produced in fixed-size blocks and
buffered, so scalar and batched draws yield the same sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidSpec
from .numkernel import CholeskyFactor, cholesky

# uniform pairs consumed per refill of the normal buffer
POLAR_BLOCK = 256

_MASK64 = (1 << 64) - 1


class RngState:
    """A deterministic stream of uniforms and standard normals.

    Not safe to share between workers; derive one per replicate with
    :func:`rng_substream`.
    """

    def __init__(self, master_seed: int, key: tuple[int, ...] = ()):
        self.master_seed = int(master_seed) & _MASK64
        self.key = tuple(int(k) for k in key)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.key)
        self._gen = np.random.Generator(np.random.PCG64(seq))
        self._buf = np.empty(0)
        self._pos = 0
        self.position = 0  # normals handed out so far

    def __repr__(self):
        return f"RngState(seed={self.master_seed}, key={self.key}, position={self.position})"

    def uniforms(self, n: int) -> np.ndarray:
        return self._gen.random(n)

    def _refill(self) -> None:
        u = 2.0 * self._gen.random(2 * POLAR_BLOCK) - 1.0
        v1, v2 = u[0::2], u[1::2]
        s = v1 * v1 + v2 * v2
        ok = (s > 0.0) & (s < 1.0)
        v1, v2, s = v1[ok], v2[ok], s[ok]
        mult = np.sqrt(-2.0 * np.log(s) / s)
        fresh = np.empty(2 * len(s))
        fresh[0::2] = v1 * mult
        fresh[1::2] = v2 * mult
        self._buf = np.concatenate([self._buf[self._pos:], fresh])
        self._pos = 0

    def normals(self, n: int) -> np.ndarray:
        """Next ``n`` standard normal variates."""
        while len(self._buf) - self._pos < n:
            self._refill()
        out = self._buf[self._pos:self._pos + n].copy()
        self._pos += n
        self.position += n
        return out


def rng_new(master_seed: int) -> RngState:
    return RngState(master_seed)


def rng_substream(master: RngState, scenario_id: int, replicate_index: int) -> RngState:
    """Independent stream determined by (master seed, scenario, replicate)."""
    return RngState(master.master_seed, master.key + (scenario_id, replicate_index))


def std_normal(rng: RngState) -> float:
    return float(rng.normals(1)[0])


# ---------------------------------------------------------------------------
# covariance structures


@dataclass(frozen=True)
class CovarianceSpec:
    """Declarative per-group covariance structure.

    ``kind`` is one of ``identity``, ``shared-diagonal``, ``scaled-identity``,
    ``toeplitz`` or ``explicit``. ``values`` holds the diagonal for
    ``shared-diagonal``, one variance per group for ``scaled-identity`` and
    one correlation per group for ``toeplitz``; ``matrices`` holds one
    matrix per group for ``explicit``.
    """

    kind: str
    r: int
    g: int
    values: tuple[float, ...] = ()
    sigma2: float = 1.0
    matrices: tuple = field(default=(), compare=False)

    KINDS = ("identity", "shared-diagonal", "scaled-identity", "toeplitz", "explicit")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidSpec(f"unknown covariance kind {self.kind!r}")
        if self.r < 1 or self.g < 1:
            raise InvalidSpec("r and g must be positive")
        vals = self.values
        if self.kind == "shared-diagonal":
            if len(vals) != self.r or min(vals) <= 0:
                raise InvalidSpec(f"shared-diagonal needs {self.r} positive values, got {vals}")
        elif self.kind == "scaled-identity":
            if len(vals) != self.g or min(vals) <= 0:
                raise InvalidSpec(f"scaled-identity needs {self.g} positive variances, got {vals}")
        elif self.kind == "toeplitz":
            if len(vals) != self.g or max(abs(v) for v in vals) >= 1:
                raise InvalidSpec(f"toeplitz needs {self.g} correlations in (-1, 1), got {vals}")
            if not self.sigma2 > 0:
                raise InvalidSpec("toeplitz sigma2 must be positive")
        elif self.kind == "explicit":
            if len(self.matrices) != self.g:
                raise InvalidSpec(f"explicit needs {self.g} matrices, got {len(self.matrices)}")

    @classmethod
    def identity(cls, r: int, g: int) -> "CovarianceSpec":
        return cls("identity", r, g)

    @classmethod
    def shared_diagonal(cls, values: Sequence[float], g: int) -> "CovarianceSpec":
        return cls("shared-diagonal", len(values), g, tuple(float(v) for v in values))

    @classmethod
    def scaled_identity(cls, r: int, variances: Sequence[float]) -> "CovarianceSpec":
        return cls("scaled-identity", r, len(variances), tuple(float(v) for v in variances))

    @classmethod
    def toeplitz(cls, r: int, rhos: Sequence[float], sigma2: float = 1.0) -> "CovarianceSpec":
        return cls("toeplitz", r, len(rhos), tuple(float(v) for v in rhos), float(sigma2))

    @classmethod
    def explicit(cls, matrices) -> "CovarianceSpec":
        mats = tuple(np.array(m, dtype=float) for m in matrices)
        if not mats:
            raise InvalidSpec("explicit covariance needs at least one matrix")
        return cls("explicit", mats[0].shape[0], len(mats), matrices=mats)

    @property
    def label(self) -> str:
        def fmt(vals):
            return ",".join(f"{v:g}" for v in vals)

        if self.kind == "identity":
            return "identity"
        if self.kind == "shared-diagonal":
            return f"diag({fmt(self.values)})"
        if self.kind == "scaled-identity":
            return f"scaled-identity({fmt(self.values)})"
        if self.kind == "toeplitz":
            return f"toeplitz({fmt(self.values)})"
        return "explicit"

    @property
    def homogeneous(self) -> bool:
        if self.kind in ("identity", "shared-diagonal"):
            return True
        if self.kind in ("scaled-identity", "toeplitz"):
            return len(set(self.values)) == 1
        return all(np.array_equal(self.matrices[0], m) for m in self.matrices[1:])


def build_cov(spec: CovarianceSpec, group_index: int) -> np.ndarray:
    """Realized ``r x r`` covariance matrix for one group."""
    if not 0 <= group_index < spec.g:
        raise InvalidSpec(f"group index {group_index} out of range for g={spec.g}")
    r = spec.r
    if spec.kind == "identity":
        return np.eye(r)
    if spec.kind == "shared-diagonal":
        return np.diag(spec.values)
    if spec.kind == "scaled-identity":
        return spec.values[group_index] * np.eye(r)
    if spec.kind == "toeplitz":
        rho = spec.values[group_index]
        lags = np.abs(np.subtract.outer(np.arange(r), np.arange(r)))
        return spec.sigma2 * rho ** lags
    m = np.array(spec.matrices[group_index], dtype=float)
    if m.shape != (r, r):
        raise InvalidSpec(f"explicit matrix {group_index} has shape {m.shape}, expected {(r, r)}")
    if not np.allclose(m, m.T):
        raise InvalidSpec(f"explicit matrix {group_index} is not symmetric")
    return m


def mvn_sample(rng: RngState, mean, chol: CholeskyFactor) -> np.ndarray:
    """One draw of ``mean + L z`` with ``z`` iid standard normal."""
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (chol.dim,):
        raise DimensionMismatch(f"mean has shape {mean.shape}, factor has dim {chol.dim}")
    return mean + chol.lower @ rng.normals(chol.dim)


def group_factors(spec: CovarianceSpec) -> list[CholeskyFactor]:
    return [cholesky(build_cov(spec, i)) for i in range(spec.g)]


def gen_dataset(spec: CovarianceSpec, sizes: Sequence[int], means=None, rng: RngState = None,
                factors: Sequence[CholeskyFactor] | None = None):
    """Draw ``sizes[i]`` rows from ``N(means[i], Sigma_i)`` for every group.

    Rows are generated group by group in order, each row consuming ``r``
    consecutive normals, which is the same stream :func:`mvn_sample` would
    consume. Pass ``factors`` (from :func:`group_factors`) to reuse
    factorizations across many datasets.
    """
    from .manova import GroupedDataset

    if rng is None:
        raise ValueError("gen_dataset needs an RngState")
    if len(sizes) != spec.g:
        raise DimensionMismatch(f"{len(sizes)} group sizes for g={spec.g}")
    if min(sizes) < 1:
        raise ValueError(f"every group needs at least one row, got sizes {tuple(sizes)}")
    r = spec.r
    if means is None:
        means = np.zeros((spec.g, r))
    means = np.asarray(means, dtype=float)
    if means.shape != (spec.g, r):
        raise DimensionMismatch(f"means must have shape {(spec.g, r)}, got {means.shape}")
    if factors is None:
        factors = group_factors(spec)
    groups = []
    for i, n in enumerate(sizes):
        L = factors[i].lower
        z = rng.normals(n * r).reshape(n, r)
        groups.append(means[i] + z @ L.T)
    return GroupedDataset(groups)
