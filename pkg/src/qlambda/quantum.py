"""Dense state-vector quantum memory.

Basis index bits are read as b0 ... b_{n-1} with b0 the most significant
bit, so qubit ``i`` is axis ``i`` of the amplitude tensor of shape (2,)*n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = 1e-9
EPS_DROP = 1e-12
DEFAULT_MAX_QUBITS = 12


class QuantumError(ValueError):
    pass


class CapacityError(QuantumError):
    """Raised when allocating a qubit would exceed the configured cap."""


class QuantumState:
    """Immutable normalized state of ``n`` qubits (n = 0 is the scalar 1)."""

    __slots__ = ("n", "amp")

    def __init__(self, amp, normalize: bool = False, check: bool = True):
        a = np.array(amp, dtype=complex).reshape(-1)
        n = a.size.bit_length() - 1
        if a.size != 1 << n:
            raise QuantumError(f"amplitude vector length {a.size} is not a power of two")
        norm = np.linalg.norm(a)
        if normalize:
            if norm == 0:
                raise QuantumError("cannot normalize the zero vector")
            a = a / norm
        elif check and abs(norm - 1) > EPS:
            raise QuantumError(f"state is not normalized (norm {norm:.12g})")
        a.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "amp", a)

    def __setattr__(self, name, value):
        raise AttributeError("QuantumState is immutable")

    @classmethod
    def empty(cls) -> "QuantumState":
        return cls([1.0])

    @classmethod
    def basis(cls, bits: str) -> "QuantumState":
        a = np.zeros(1 << len(bits), dtype=complex)
        a[int(bits, 2) if bits else 0] = 1
        return cls(a)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "QuantumState":
        dim = 1 << n
        return cls(rng.normal(size=dim) + 1j * rng.normal(size=dim), normalize=True)

    def tensor(self) -> np.ndarray:
        return self.amp.reshape((2,) * self.n)

    @classmethod
    def from_tensor(cls, t: np.ndarray, check: bool = True) -> "QuantumState":
        return cls(np.asarray(t).reshape(-1), check=check)

    def kron(self, other: "QuantumState") -> "QuantumState":
        return QuantumState(np.kron(self.amp, other.amp))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amp))

    def allclose(self, other: "QuantumState", tol: float = EPS) -> bool:
        return self.n == other.n and bool(np.max(np.abs(self.amp - other.amp)) <= tol)

    def to_pairs(self) -> list[list[float]]:
        return [[float(z.real), float(z.imag)] for z in self.amp]

    @classmethod
    def from_pairs(cls, pairs) -> "QuantumState":
        return cls([complex(re, im) for re, im in pairs])

    def ket(self, precision: int = 4) -> str:
        if self.n == 0:
            return "|>"
        parts = []
        for idx, z in enumerate(self.amp):
            if abs(z) < 10**-precision:
                continue
            bits = format(idx, f"0{self.n}b")
            if abs(z.imag) < 10**-precision:
                coef = f"{z.real:.{precision}g}"
            else:
                coef = f"({z.real:.{precision}g}{z.imag:+.{precision}g}j)"
            parts.append(f"{coef}|{bits}>")
        return " + ".join(parts)

    def __repr__(self):
        return f"QuantumState({self.ket()})"


@dataclass(frozen=True)
class Permutation:
    """Bijection on {0..n-1} stored as an index array."""

    image: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.image) != list(range(len(self.image))):
            raise QuantumError(f"not a permutation: {self.image}")

    def __len__(self):
        return len(self.image)

    def __call__(self, i: int) -> int:
        return self.image[i]

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.image)
        for i, j in enumerate(self.image):
            inv[j] = i
        return Permutation(tuple(inv))

    def compose(self, other: "Permutation") -> "Permutation":
        """``self ∘ other``."""
        return Permutation(tuple(self.image[other.image[i]] for i in range(len(self.image))))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def swap(cls, n: int, i: int, j: int) -> "Permutation":
        img = list(range(n))
        img[i], img[j] = img[j], img[i]
        return cls(tuple(img))

    @classmethod
    def to_front(cls, n: int, i: int) -> "Permutation":
        """Swap ``i`` with position 0."""
        return cls.swap(n, 0, i)

    @classmethod
    def pair_to_front(cls, n: int, i: int, j: int) -> "Permutation":
        """Send ``i`` to 0 and ``j`` to 1, fixing everything else where possible."""
        if i == j:
            raise QuantumError("pair_to_front needs distinct indices")
        first = cls.swap(n, 0, i)
        j2 = first(j)
        return cls.swap(n, 1, j2).compose(first)

    @classmethod
    def to_last(cls, n: int, i: int) -> "Permutation":
        return cls.swap(n, i, n - 1)


def permute_state(q: QuantumState, s: Permutation) -> QuantumState:
    """Amplitude of |b_s(0) ... b_s(n-1)> becomes the old amplitude of |b0 ... b_{n-1}>.

    Equivalently, new qubit ``k`` is old qubit ``s(k)``.
    """
    if len(s) != q.n:
        raise QuantumError(f"permutation of size {len(s)} applied to {q.n} qubits")
    if q.n == 0:
        return q
    return QuantumState.from_tensor(np.transpose(q.tensor(), s.image), check=False)


def new_qubit(q: QuantumState, max_qubits: int = DEFAULT_MAX_QUBITS) -> QuantumState:
    """q ⊗ |0>; the fresh qubit gets index ``q.n``."""
    if q.n + 1 > max_qubits:
        raise CapacityError(f"qubit cap of {max_qubits} exceeded")
    a = np.zeros(2 * q.amp.size, dtype=complex)
    a[0::2] = q.amp
    return QuantumState(a, check=False)


def _check_index(q: QuantumState, i: int):
    if not 0 <= i < q.n:
        raise QuantumError(f"qubit index {i} out of range for {q.n} qubits")


def apply_unary(q: QuantumState, gate: np.ndarray, i: int) -> QuantumState:
    _check_index(q, i)
    g = np.asarray(gate, dtype=complex)
    t = np.tensordot(g, q.tensor(), axes=([1], [i]))
    return QuantumState.from_tensor(np.moveaxis(t, 0, i), check=False)


def apply_binary(q: QuantumState, gate: np.ndarray, i: int, j: int) -> QuantumState:
    """Apply a 4x4 gate with ``i`` as its first (most significant) qubit and ``j`` its second."""
    _check_index(q, i)
    _check_index(q, j)
    if i == j:
        raise QuantumError(f"binary gate applied twice to qubit {i}")
    g = np.asarray(gate, dtype=complex).reshape(2, 2, 2, 2)
    t = np.tensordot(g, q.tensor(), axes=([2, 3], [i, j]))
    return QuantumState.from_tensor(np.moveaxis(t, [0, 1], [i, j]), check=False)


def outcome_probability(q: QuantumState, i: int, b: int) -> float:
    _check_index(q, i)
    sl = np.take(q.tensor(), b, axis=i)
    return float(np.sum(np.abs(sl) ** 2))


def project(q: QuantumState, i: int, b: int) -> QuantumState:
    """Post-measurement state for outcome ``b`` on qubit ``i``, with that qubit removed."""
    _check_index(q, i)
    sl = np.take(q.tensor(), b, axis=i)
    norm = np.linalg.norm(sl)
    if norm == 0:
        raise QuantumError(f"outcome {b} on qubit {i} has probability zero")
    return QuantumState(np.asarray(sl).reshape(-1) / norm, check=False)


def measure(q: QuantumState, i: int) -> list[tuple[int, float, QuantumState]]:
    """Outcomes ``(bit, probability, post_state)``; negligible outcomes are dropped."""
    _check_index(q, i)
    out = []
    for b in (0, 1):
        p = outcome_probability(q, i, b)
        if p >= EPS_DROP:
            out.append((b, p, project(q, i, b)))
    total = sum(p for _, p, _ in out)
    # renormalize away rounding drift so branch weights sum to 1
    return [(b, p / total, s) for b, p, s in out]
