"""Gate-level circuit construction and simulation.

The gate set is fixed: X, H, CNOT, CCX (multi-controlled X), CRY
(multi-controlled Y rotation), SWAP, and DIAG_SIGN (a +/-1 diagonal).
Circuits store layers of gates acting on disjoint wires; layerization is
greedy, placing each gate in the earliest layer whose wires are free.

Wire convention: wire 0 carries the most significant bit of a basis index,
so a register listed as wires (w0, w1, ...) reads its value big-endian.

Two evaluation paths exist. `apply` propagates a full statevector and
supports every gate kind. `apply_basis` propagates a single computational
basis state through classical (permutation) gates only, which is what the
one-hot decoder, data loader, and QROM need for exhaustive checks far
beyond the dense-simulation regime.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError

X, H, CNOT, CCX, CRY, SWAP, DIAG_SIGN = (
    "X", "H", "CNOT", "CCX", "CRY", "SWAP", "DIAG_SIGN")
GATE_KINDS = {X, H, CNOT, CCX, CRY, SWAP, DIAG_SIGN}
CLASSICAL_KINDS = {X, CNOT, CCX, SWAP}

_MIN_WIRES = {X: 1, H: 1, CNOT: 2, CCX: 2, CRY: 1, SWAP: 2, DIAG_SIGN: 1}
_EXACT_WIRES = {X: 1, H: 1, CNOT: 2, SWAP: 2}


@dataclass(frozen=True)
class Gate:
    """One gate: kind, wires it acts on, optional parameter.

    CNOT/CCX/CRY list control wires first and the target last. CRY's param
    is the rotation angle; DIAG_SIGN's param is a +/-1 vector of length
    2**len(wires) indexed big-endian by the wire bits.
    """

    kind: str
    wires: tuple[int, ...]
    param: float | np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        wires = tuple(int(w) for w in self.wires)
        object.__setattr__(self, "wires", wires)
        if len(set(wires)) != len(wires):
            raise ValueError(f"duplicate wires in {self.kind}: {wires}")
        if len(wires) < _MIN_WIRES[self.kind]:
            raise ValueError(f"{self.kind} needs >= {_MIN_WIRES[self.kind]} wires")
        if self.kind in _EXACT_WIRES and len(wires) != _EXACT_WIRES[self.kind]:
            raise ValueError(f"{self.kind} takes exactly {_EXACT_WIRES[self.kind]} wires")
        if self.kind == CRY:
            if self.param is None:
                raise ValueError("CRY needs an angle")
            object.__setattr__(self, "param", float(self.param))
        elif self.kind == DIAG_SIGN:
            signs = np.asarray(self.param, dtype=float)
            if signs.shape != (2 ** len(wires),):
                raise ValueError("DIAG_SIGN needs 2**len(wires) signs")
            if not np.all(np.abs(signs) == 1.0):
                raise ValueError("DIAG_SIGN entries must be +1 or -1")
            signs.setflags(write=False)
            object.__setattr__(self, "param", signs)
        elif self.param is not None:
            raise ValueError(f"{self.kind} takes no parameter")


@dataclass
class Circuit:
    """A layered gate sequence on `n_qubits` wires.

    meta carries builder bookkeeping (register wire lists, ancilla counts,
    reported permutations); it does not affect simulation.
    """

    n_qubits: int
    layers: list[list[Gate]]
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_gates(cls, n_qubits: int, gates, meta: dict | None = None) -> "Circuit":
        """Greedy layerization: earliest layer with all wires free."""
        next_free = [0] * n_qubits
        layers: list[list[Gate]] = []
        for g in gates:
            if max(g.wires) >= n_qubits:
                raise ValueError(f"gate {g.kind} wire {max(g.wires)} out of range")
            at = max(next_free[w] for w in g.wires)
            if at == len(layers):
                layers.append([])
            layers[at].append(g)
            for w in g.wires:
                next_free[w] = at + 1
        return cls(n_qubits=n_qubits, layers=layers, meta=meta or {})

    @property
    def gates(self) -> list[Gate]:
        return [g for layer in self.layers for g in layer]

    @property
    def depth(self) -> int:
        return len(self.layers)

    def inverse_gates(self) -> list[Gate]:
        """Reversed gate list; valid inverse for self-inverse gate kinds.

        CRY is inverted by negating its angle; DIAG_SIGN is its own inverse.
        """
        out = []
        for g in reversed(self.gates):
            if g.kind == CRY:
                out.append(Gate(CRY, g.wires, -g.param))
            else:
                out.append(g)
        return out


def bits_of(value: int, width: int) -> list[int]:
    """Big-endian bit list of `value` (index 0 = most significant)."""
    return [(value >> (width - 1 - k)) & 1 for k in range(width)]


def value_of(bits) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def basis_state(n_qubits: int, index: int = 0) -> np.ndarray:
    psi = np.zeros(2 ** n_qubits, dtype=complex)
    psi[index] = 1.0
    return psi


def _controlled_view(tensor, controls):
    idx = [slice(None)] * tensor.ndim
    for c in controls:
        idx[c] = 1
    return tensor[tuple(idx)], [c for c in range(tensor.ndim) if c not in controls]


def apply(circuit: Circuit, state: np.ndarray) -> np.ndarray:
    """Propagate a statevector through the circuit, returning a new array."""
    n = circuit.n_qubits
    if state.shape != (2 ** n,):
        raise ValueError(f"state length {state.shape} does not match {n} qubits")
    psi = np.array(state, dtype=complex).reshape([2] * n)
    for layer in circuit.layers:
        for g in layer:
            _apply_gate(psi, g, n)
    return psi.reshape(-1)


def _apply_gate(psi, g: Gate, n: int) -> None:
    kind = g.kind
    if kind in (X, CNOT, CCX):
        *controls, target = g.wires
        view, free = _controlled_view(psi, controls)
        t = free.index(target)
        lo = view[(slice(None),) * t + (0,)].copy()
        view[(slice(None),) * t + (0,)] = view[(slice(None),) * t + (1,)]
        view[(slice(None),) * t + (1,)] = lo
    elif kind == H:
        t = g.wires[0]
        a = psi[(slice(None),) * t + (0,)].copy()
        b = psi[(slice(None),) * t + (1,)].copy()
        inv = 1.0 / math.sqrt(2.0)
        psi[(slice(None),) * t + (0,)] = (a + b) * inv
        psi[(slice(None),) * t + (1,)] = (a - b) * inv
    elif kind == CRY:
        *controls, target = g.wires
        view, free = _controlled_view(psi, controls)
        t = free.index(target)
        a = view[(slice(None),) * t + (0,)].copy()
        b = view[(slice(None),) * t + (1,)].copy()
        c, s = math.cos(g.param / 2.0), math.sin(g.param / 2.0)
        view[(slice(None),) * t + (0,)] = c * a - s * b
        view[(slice(None),) * t + (1,)] = s * a + c * b
    elif kind == SWAP:
        w0, w1 = g.wires
        psi[...] = np.swapaxes(psi, w0, w1)
    elif kind == DIAG_SIGN:
        k = len(g.wires)
        signs = np.asarray(g.param).reshape([2] * k)
        signs = signs.transpose(np.argsort(g.wires))
        shape = [2 if w in set(g.wires) else 1 for w in range(n)]
        psi *= signs.reshape(shape)
    else:  # pragma: no cover
        raise ValueError(f"unhandled gate kind {kind}")


def apply_basis(circuit: Circuit, bits) -> list[int]:
    """Propagate one computational basis state through classical gates.

    Only permutation gates (X, CNOT, CCX, SWAP) are allowed; anything else
    raises ValueError. Runs in O(gates), independent of qubit count.
    """
    state = [int(b) for b in bits]
    if len(state) != circuit.n_qubits:
        raise ValueError("bit string length does not match circuit")
    for g in circuit.gates:
        kind = g.kind
        if kind == X:
            state[g.wires[0]] ^= 1
        elif kind in (CNOT, CCX):
            *controls, target = g.wires
            if all(state[c] for c in controls):
                state[target] ^= 1
        elif kind == SWAP:
            a, b = g.wires
            state[a], state[b] = state[b], state[a]
        else:
            raise ValueError(f"{kind} gate is not classical; use apply()")
    return state


def dense_unitary(circuit: Circuit) -> np.ndarray:
    """Full 2^n x 2^n matrix of the circuit (intended for n_qubits <= 10)."""
    dim = 2 ** circuit.n_qubits
    if circuit.n_qubits > 14:
        raise ValueError("dense matrix requested for more than 14 qubits")
    U = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        U[:, col] = apply(circuit, basis_state(circuit.n_qubits, col))
    return U


def resources(circuit: Circuit) -> dict:
    """Depth, gate count, qubit count, and ancilla count of a circuit."""
    return {
        "depth": circuit.depth,
        "gates": sum(len(layer) for layer in circuit.layers),
        "qubits": circuit.n_qubits,
        "ancillas": int(circuit.meta.get("n_ancillas", 0)),
    }


# -- text serialization ------------------------------------------------------

def serialize_circuit(circuit: Circuit) -> str:
    """One gate per line: KIND wire[,wire...] [param].

    CRY's param is the angle in full repr precision; DIAG_SIGN's is its
    sign vector as a +/- string. A header line records the qubit count.
    """
    lines = [f"# qubits {circuit.n_qubits}"]
    for g in circuit.gates:
        wires = ",".join(str(w) for w in g.wires)
        if g.kind == CRY:
            lines.append(f"CRY {wires} {g.param!r}")
        elif g.kind == DIAG_SIGN:
            signs = "".join("+" if s > 0 else "-" for s in g.param)
            lines.append(f"DIAG_SIGN {wires} {signs}")
        else:
            lines.append(f"{g.kind} {wires}")
    return "\n".join(lines) + "\n"


def parse_circuit(text: str) -> Circuit:
    n_qubits = None
    gates = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "qubits":
                n_qubits = int(parts[1])
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ParseError(f"line {lineno}: expected 'KIND wires [param]'")
        kind, wirespec = parts[0], parts[1]
        try:
            wires = tuple(int(w) for w in wirespec.split(","))
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad wire list {wirespec!r}") from exc
        param = None
        if len(parts) == 3:
            if kind == DIAG_SIGN:
                param = np.array([1.0 if ch == "+" else -1.0 for ch in parts[2]])
            else:
                try:
                    param = float(parts[2])
                except ValueError as exc:
                    raise ParseError(f"line {lineno}: bad parameter") from exc
        try:
            gates.append(Gate(kind, wires, param))
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
    if n_qubits is None:
        n_qubits = 1 + max((max(g.wires) for g in gates), default=0)
    return Circuit.from_gates(n_qubits, gates)


# -- one-hot decoder ---------------------------------------------------------

def decoder_permutation(n_address: int) -> list[int]:
    """Reported one-hot assignment: address i lights output wire i XOR 1."""
    return [i ^ 1 for i in range(2 ** n_address)]


def build_decoder(n_address: int) -> Circuit:
    """Unary decoder: |i>|0...> -> |i> |e_{pi(i)}> with pi(i) = i XOR 1.

    The address register is preserved. Construction is a routing tree,
    branching on address bits most-significant first; each level's shared
    address bit is copied across parents with a CNOT fanout tree that is
    uncomputed within the level. Interior routing wires keep the hot path
    (cleared again by the inverse pass inside a QROM). For one address bit
    the circuit is the minimal 4-gate form.

    meta: address_wires, onehot_wires, pi, n_ancillas.
    """
    if n_address < 1:
        raise ValueError("decoder needs at least one address bit")
    n = n_address
    N = 2 ** n
    address = list(range(n))
    onehot = list(range(n, n + N))
    meta = {"address_wires": address, "onehot_wires": onehot,
            "pi": decoder_permutation(n)}
    if n == 1:
        gates = [Gate(CNOT, (0, onehot[0])), Gate(X, (0,)),
                 Gate(CNOT, (0, onehot[1])), Gate(X, (0,))]
        meta["n_ancillas"] = 0
        return Circuit.from_gates(1 + N, gates, meta)

    next_wire = n + N
    # interior routing levels j = 1..n-1 hold 2^j path wires
    levels = []
    for j in range(1, n):
        levels.append(list(range(next_wire, next_wire + 2 ** j)))
        next_wire += 2 ** j
    levels.append(onehot)  # level n

    gates: list[Gate] = []
    copy_pool_start = next_wire

    v0, v1 = levels[0]
    gates += [Gate(CNOT, (address[0], v1)), Gate(X, (address[0],)),
              Gate(CNOT, (address[0], v0)), Gate(X, (address[0],))]

    for j in range(2, n + 1):
        parents = levels[j - 2]
        children = levels[j - 1]
        bit_wire = address[j - 1]
        n_parents = len(parents)
        copies = list(range(next_wire, next_wire + n_parents - 1))
        next_wire += n_parents - 1
        # fanout the level's address bit: sources double each round
        fanout: list[Gate] = []
        sources = [bit_wire]
        remaining = list(copies)
        while remaining:
            new_sources = []
            for s in sources:
                if not remaining:
                    break
                t = remaining.pop(0)
                fanout.append(Gate(CNOT, (s, t)))
                new_sources.append(t)
            sources += new_sources
        gates += fanout
        controls = [bit_wire] + copies
        leaf = j == n
        for p in range(n_parents):
            P, c = parents[p], controls[p]
            hi, lo = children[2 * p], children[2 * p + 1]
            if leaf:
                # flipped child order at the leaves: pi(i) = i XOR 1
                gates += [Gate(CCX, (P, c, hi)), Gate(CNOT, (P, lo)),
                          Gate(CNOT, (hi, lo))]
            else:
                gates += [Gate(CCX, (P, c, lo)), Gate(CNOT, (P, hi)),
                          Gate(CNOT, (lo, hi))]
        gates += [Gate(CNOT, g.wires) for g in reversed(fanout)]

    meta["scratch_wires"] = list(range(n + N, copy_pool_start))
    meta["copy_wires"] = list(range(copy_pool_start, next_wire))
    meta["n_ancillas"] = next_wire - n - N
    return Circuit.from_gates(next_wire, gates, meta)


# -- dictionary data loader --------------------------------------------------

def build_data_loader(dictionary: dict[int, int], n_onehot: int,
                      word_width: int) -> Circuit:
    """Write data words conditioned on one-hot input wires.

    dictionary maps one-hot wire index (0-based, < n_onehot) to a word in
    [0, 2**word_width); bit t of a word drives output wire t. Per output
    bit, the hot wires carrying that bit feed an OR tree (OR realized as an
    X-conjugated Toffoli computing NOR, then flipped) whose root feeds one
    CNOT; the tree is uncomputed afterwards, so all OR ancillas return to 0.

    meta: onehot_wires, output_wires, n_ancillas.
    """
    for idx, word in dictionary.items():
        if not 0 <= idx < n_onehot:
            raise ValueError(f"one-hot index {idx} outside [0, {n_onehot})")
        if not 0 <= word < 2 ** word_width:
            raise ValueError(f"word {word} does not fit in {word_width} bits")
    onehot = list(range(n_onehot))
    outputs = list(range(n_onehot, n_onehot + word_width))
    next_wire = n_onehot + word_width
    gates: list[Gate] = []
    for t in range(word_width):
        sources = sorted(i for i, w in dictionary.items() if (w >> t) & 1)
        if not sources:
            continue
        if len(sources) == 1:
            gates.append(Gate(CNOT, (sources[0], outputs[t])))
            continue
        tree: list[Gate] = []
        current = list(sources)
        while len(current) > 1:
            merged = []
            for a, b in zip(current[0::2], current[1::2]):
                z = next_wire
                next_wire += 1
                tree += [Gate(X, (a,)), Gate(X, (b,)), Gate(CCX, (a, b, z)),
                         Gate(X, (a,)), Gate(X, (b,)), Gate(X, (z,))]
                merged.append(z)
            if len(current) % 2:
                merged.append(current[-1])
            current = merged
        gates += tree
        gates.append(Gate(CNOT, (current[0], outputs[t])))
        gates += [Gate(g.kind, g.wires) for g in reversed(tree)]
    meta = {"onehot_wires": onehot, "output_wires": outputs,
            "n_ancillas": next_wire - n_onehot - word_width}
    return Circuit.from_gates(next_wire, gates, meta)


# -- QROM and oracles --------------------------------------------------------

def build_qrom(table, word_width: int) -> Circuit:
    """Table lookup |i>|0^m> -> |i>|table[i]> via decode, load, un-decode.

    The table is padded with zero words to the next power of two; reading a
    padded address returns 0. All routing wires and OR ancillas are restored
    to |0> for every basis input.

    meta: address_wires, output_wires, n_address_bits, n_ancillas.
    """
    table = [int(v) for v in table]
    if not table:
        raise ValueError("empty table")
    for v in table:
        if not 0 <= v < 2 ** word_width:
            raise ValueError(f"table value {v} does not fit in {word_width} bits")
    n = max(1, math.ceil(math.log2(len(table))))
    N = 2 ** n
    padded = table + [0] * (N - len(table))

    dec = build_decoder(n)
    pi = dec.meta["pi"]
    dictionary = {pi[i]: padded[i] for i in range(N) if padded[i] != 0}

    onehot = dec.meta["onehot_wires"]
    out_base = dec.n_qubits
    outputs = list(range(out_base, out_base + word_width))
    loader_local = build_data_loader(dictionary, N, word_width)
    # remap loader wires: one-hot -> decoder's one-hot block, outputs and
    # OR ancillas appended after the decoder's wires
    n_or_anc = loader_local.meta["n_ancillas"]

    def remap(w: int) -> int:
        if w < N:
            return onehot[w]
        return out_base + (w - N)

    gates = dec.gates
    gates += [Gate(g.kind, tuple(remap(w) for w in g.wires), g.param)
              for g in loader_local.gates]
    gates += dec.inverse_gates()
    n_qubits = out_base + word_width + n_or_anc
    meta = {
        "address_wires": dec.meta["address_wires"],
        "output_wires": outputs,
        "n_address_bits": n,
        "table_size": len(table),
        "word_width": word_width,
        "n_ancillas": n_qubits - n - word_width,
    }
    return Circuit.from_gates(n_qubits, gates, meta)


def encode_fixed_point(value: float, bits: int, scale: float) -> int:
    """Two's-complement fixed-point code of `value` at resolution `scale`."""
    v = round(value / scale)
    if not -(2 ** (bits - 1)) <= v < 2 ** (bits - 1):
        raise ValueError(f"value {value} overflows {bits}-bit fixed point "
                         f"at scale {scale}")
    return v % (2 ** bits)


def decode_fixed_point(code: int, bits: int, scale: float) -> float:
    if code >= 2 ** (bits - 1):
        code -= 2 ** bits
    return code * scale


def build_position_oracle(structure, bits: int = 24,
                          scale: float = 1.0 / 256.0) -> Circuit:
    """QROM mapping atom index to fixed-point packed (x, y, z) coordinates.

    Each coordinate becomes a `bits`-wide two's-complement field at
    resolution `scale`; the word is x | y << bits | z << 2*bits. Overflow
    names the offending atom.
    """
    words = []
    for atom in structure.atoms:
        fields = []
        for coord in atom.position:
            try:
                fields.append(encode_fixed_point(coord, bits, scale))
            except ValueError as exc:
                raise ValueError(f"atom {atom.id}: {exc}") from exc
        words.append(fields[0] | fields[1] << bits | fields[2] << (2 * bits))
    circuit = build_qrom(words, 3 * bits)
    circuit.meta.update({"bits_per_coord": bits, "scale": scale})
    return circuit


def decode_position_word(word: int, bits: int, scale: float) -> tuple:
    mask = 2 ** bits - 1
    return tuple(decode_fixed_point((word >> (k * bits)) & mask, bits, scale)
                 for k in range(3))


def build_sparse_index_oracle(j_table: np.ndarray, n_sites: int) -> Circuit:
    """QROM over (row, slot) -> neighbor index with an all-ones sentinel.

    j_table is the (N, K) array of k-th smallest neighbor indices, with
    slots past a row's degree marked by -1; those map to the sentinel (the
    all-ones output word). The address is row bits then slot bits
    (row-major flattening); rows and slots are padded to powers of two
    with sentinel words. The output register is ceil(log2(n_sites + 1))
    bits wide so the sentinel collides with no real index.
    """
    j_table = np.asarray(j_table, dtype=np.int64)
    n_rows, n_slots = j_table.shape
    out_bits = max(1, math.ceil(math.log2(n_sites + 1)))
    sentinel = 2 ** out_bits - 1
    if np.any(j_table >= sentinel):
        raise ValueError("neighbor index outside output register range")
    j_table = np.where(j_table < 0, sentinel, j_table)
    row_bits = max(1, math.ceil(math.log2(n_rows)))
    slot_bits = max(1, math.ceil(math.log2(n_slots)))
    flat = np.full(2 ** (row_bits + slot_bits), sentinel, dtype=np.int64)
    for i in range(n_rows):
        base = i << slot_bits
        flat[base:base + n_slots] = j_table[i]
        flat[base + n_slots:base + 2 ** slot_bits] = sentinel
    circuit = build_qrom(flat.tolist(), out_bits)
    circuit.meta.update({"row_bits": row_bits, "slot_bits": slot_bits,
                         "sentinel": sentinel, "out_bits": out_bits})
    return circuit
