"""Built-in and user-supplied gate tables."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

UNITARY_TOL = 1e-9


class GateError(ValueError):
    pass


@dataclass(frozen=True)
class GateDef:
    name: str
    arity: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.arity not in (1, 2):
            raise GateError(f"gate {self.name}: arity must be 1 or 2, got {self.arity}")
        dim = 2**self.arity
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (dim, dim):
            raise GateError(f"gate {self.name}: expected {dim}x{dim} matrix, got {m.shape}")
        err = np.max(np.abs(m.conj().T @ m - np.eye(dim)))
        if err > UNITARY_TOL:
            raise GateError(f"gate {self.name}: matrix is not unitary (max deviation {err:.3g})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


_S = 1 / np.sqrt(2)

BUILTIN_GATES = {
    "H": GateDef("H", 1, np.array([[_S, _S], [_S, -_S]])),
    "NOT": GateDef("NOT", 1, np.array([[0, 1], [1, 0]])),
    "CNOT": GateDef(
        "CNOT",
        2,
        np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
    ),
}


class GateTable:
    """Mapping from gate name to its arity and unitary matrix.

    H, NOT and CNOT are always present; extra gates can be registered
    or loaded from JSON.
    """

    def __init__(self, gates: dict[str, GateDef] | None = None):
        self._gates = dict(BUILTIN_GATES)
        if gates:
            self._gates.update(gates)

    def __contains__(self, name):
        return name in self._gates

    def __getitem__(self, name) -> GateDef:
        return self._gates[name]

    def __iter__(self):
        return iter(self._gates)

    def arity(self, name: str) -> int:
        return self._gates[name].arity

    def add(self, name: str, matrix) -> GateDef:
        m = _to_matrix(matrix)
        arity = {2: 1, 4: 2}.get(m.shape[0])
        if arity is None:
            raise GateError(f"gate {name}: matrix must be 2x2 or 4x4")
        gate = GateDef(name, arity, m)
        self._gates[name] = gate
        return gate

    @classmethod
    def from_json(cls, source) -> "GateTable":
        """Load ``{"NAME": {"matrix": [[[re, im], ...], ...]}}`` or ``{"NAME": [[...]]}``."""
        if isinstance(source, (str, Path)):
            data = json.loads(Path(source).read_text())
        else:
            data = source
        table = cls()
        for name, spec in data.items():
            matrix = spec["matrix"] if isinstance(spec, dict) else spec
            gate = table.add(name, matrix)
            if isinstance(spec, dict) and "arity" in spec and spec["arity"] != gate.arity:
                raise GateError(f"gate {name}: declared arity {spec['arity']} does not match matrix")
        return table


def _to_matrix(rows) -> np.ndarray:
    def entry(x):
        if isinstance(x, (list, tuple)):
            re, im = x
            return complex(re, im)
        return complex(x)

    m = np.array([[entry(x) for x in row] for row in rows], dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise GateError("gate matrix must be square")
    return m


DEFAULT_GATES = GateTable()
