"""Gate and state strings.

Gate grammar::

    gate    := factor (("*" | "⊗") factor)*
    factor  := NAME | NAME "(" REAL ")" | "matrix:" MATRIX
    MATRIX  := "[" row (";" row)* "]"
    row     := "[" complex ("," complex)* "]"   (row brackets may be omitted)
    complex := "[" re "," im "]" | REAL

Two-slot names (``identity``, ``cnot``, ``cnot_rev``, ``swap``,
``grandfather``, ``random``) act on (system, CTC); ``i``, ``x``, ``y``, ``z``,
``h``, ``rx``, ``ry``, ``rz`` are single-qubit.

State strings: ``0``, ``1``, ``+``, ``-``, bit strings such as ``01``,
``bell:phi+`` (also ``phi-``, ``psi+``, ``psi-``) and ``amps:[...]``.
"""
import re
import warnings

import numpy as np

from ctcsim.qstate import PureState, Unitary, unitarity_residual

_S2 = 1 / np.sqrt(2)

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
H = _S2 * np.array([[1, 1], [1, -1]], dtype=complex)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CNOT_REV = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
GRANDFATHER = np.kron(I2, X) @ SWAP


def rx(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def random_unitary(dim, seed):
    """Haar-random unitary from a seeded generator (QR with phase fix)."""
    rng = np.random.default_rng(seed)
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


_FIXED = {
    "identity": (np.eye(4, dtype=complex), (2, 2)),
    "i": (I2, (2,)),
    "id": (I2, (2,)),
    "x": (X, (2,)),
    "y": (Y, (2,)),
    "z": (Z, (2,)),
    "h": (H, (2,)),
    "cnot": (CNOT, (2, 2)),
    "cnot_rev": (CNOT_REV, (2, 2)),
    "swap": (SWAP, (2, 2)),
    "grandfather": (GRANDFATHER, (2, 2)),
}
_ROTATIONS = {"rx": rx, "ry": ry, "rz": rz}


class GateParseError(ValueError):
    def __init__(self, message, position, text):
        super().__init__(f"{message} at position {position} in {text!r}")
        self.position = position
        self.text = text


class NonUnitaryError(ValueError):
    def __init__(self, residual):
        super().__init__(f"matrix literal is not unitary: max |U^dag U - I| = {residual:.3e}")
        self.residual = residual


_NUMBER = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class _Parser:
    def __init__(self, text, seed):
        self.text = text
        self.pos = 0
        self.seed = seed

    def fail(self, message):
        raise GateParseError(message, self.pos, self.text)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch):
        if self.peek() != ch:
            self.fail(f"expected {ch!r}")
        self.pos += 1

    def number(self):
        self.skip_ws()
        m = _NUMBER.match(self.text, self.pos)
        if not m:
            self.fail("expected a number")
        self.pos = m.end()
        return float(m.group())

    def complex_entry(self):
        if self.peek() == "[":
            self.pos += 1
            re_ = self.number()
            self.expect(",")
            im = self.number()
            self.expect("]")
            return complex(re_, im)
        return complex(self.number())

    def row(self):
        self.expect("[")
        entries = [self.complex_entry()]
        while self.peek() == ",":
            self.pos += 1
            entries.append(self.complex_entry())
        self.expect("]")
        return entries

    def bare_row(self):
        entries = [self.complex_entry()]
        while self.peek() == ",":
            self.pos += 1
            entries.append(self.complex_entry())
        return entries

    def _rows(self, read):
        self.expect("[")
        rows = [read()]
        while self.peek() == ";":
            self.pos += 1
            rows.append(read())
        self.expect("]")
        width = len(rows[0])
        if any(len(r) != width for r in rows) or len(rows) != width:
            self.fail(f"matrix literal must be square, got row lengths {[len(r) for r in rows]}")
        return np.array(rows, dtype=complex)

    def matrix(self):
        # Rows may be bracketed ("[[[1,0],[0,0]];...]") or bare ("[[1,0],[0,0];...]").
        start = self.pos
        try:
            return self._rows(self.row)
        except GateParseError as first:
            self.pos = start
            try:
                return self._rows(self.bare_row)
            except GateParseError as second:
                raise max(first, second, key=lambda e: e.position) from None

    def factor(self):
        self.skip_ws()
        if self.text.startswith("matrix:", self.pos):
            self.pos += len("matrix:")
            m = self.matrix()
            residual = unitarity_residual(m)
            if residual > 1e-10:
                raise NonUnitaryError(residual)
            side = m.shape[0]
            k = int(round(np.log2(side))) if side > 0 else 0
            dims = (2,) * k if 2 ** k == side else (side,)
            return m, dims
        m = _NAME.match(self.text, self.pos)
        if not m:
            self.fail("expected a gate name")
        name = m.group().lower()
        start = self.pos
        self.pos = m.end()
        arg = None
        if self.peek() == "(":
            self.pos += 1
            arg = self.number()
            self.expect(")")
        if name in _FIXED:
            if arg is not None:
                self.fail(f"gate {name!r} takes no argument")
            mat, dims = _FIXED[name]
            return mat.copy(), dims
        if name in _ROTATIONS:
            if arg is None:
                self.fail(f"gate {name!r} needs an angle")
            return _ROTATIONS[name](arg), (2,)
        if name == "random":
            seed = self.seed if arg is None else int(arg)
            return random_unitary(4, seed), (2, 2)
        self.pos = start
        self.fail(f"unknown gate {name!r}")

    def gate(self):
        mat, dims = self.factor()
        while self.peek() in ("*", "⊗"):
            self.pos += 1
            m2, d2 = self.factor()
            mat, dims = np.kron(mat, m2), dims + d2
        if self.peek():
            self.fail("unexpected trailing input")
        return mat, dims


def build_gate(spec: str, seed: int = 0) -> Unitary:
    """Parse a gate string into a :class:`Unitary`.

    ``seed`` is used by the bare ``random`` gate.
    """
    mat, dims = _Parser(spec, seed).gate()
    return Unitary(mat, dims)


_BELL = {
    "phi+": np.array([1, 0, 0, 1]) * _S2,
    "phi-": np.array([1, 0, 0, -1]) * _S2,
    "psi+": np.array([0, 1, 1, 0]) * _S2,
    "psi-": np.array([0, 1, -1, 0]) * _S2,
}
_SINGLE = {
    "0": np.array([1, 0]),
    "1": np.array([0, 1]),
    "+": np.array([1, 1]) * _S2,
    "-": np.array([1, -1]) * _S2,
}


def parse_state(spec: str) -> PureState:
    text = spec.strip()
    if text.startswith("bell:"):
        key = text[5:].strip().lower()
        if key not in _BELL:
            raise GateParseError(f"unknown Bell state {key!r}", 5, spec)
        return PureState(_BELL[key], (2, 2))
    if text.startswith("amps:"):
        p = _Parser(text, 0)
        p.pos = 5
        amps = np.array(p.row(), dtype=complex)
        if p.peek():
            p.fail("unexpected trailing input")
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise GateParseError("zero amplitude vector", 5, spec)
        if abs(norm - 1) > 1e-6:
            warnings.warn(f"state {spec!r} has norm {norm:.6g}; normalizing", stacklevel=2)
        amps = amps / norm
        side = len(amps)
        k = int(round(np.log2(side)))
        dims = (2,) * k if 2 ** k == side and k > 0 else (side,)
        return PureState(amps, dims)
    if text and all(ch in _SINGLE for ch in text):
        vec = np.ones(1)
        for ch in text:
            vec = np.kron(vec, _SINGLE[ch])
        return PureState(vec, (2,) * len(text))
    pos = next((i for i, ch in enumerate(text) if ch not in _SINGLE), 0)
    raise GateParseError("unrecognized state", pos, spec)
