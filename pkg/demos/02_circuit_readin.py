"""
Reversible read-in circuits
===========================

Three table-lookup primitives built from classical reversible gates:
a unary decoder, a one-hot data loader, and a QROM that combines them.
Everything is simulated exactly on basis states.
"""
from gnmqsim import circuits as qc

# ---- decoder: |i>|0..0> -> |i>|e_pi(i)> ------------------------------
dec = qc.build_decoder(3)
print("decoder(3):", qc.resources(dec))
for addr in (0, 5):
    bits = [0] * dec.n_qubits
    for pos, b in enumerate(qc.bits_of(addr, 3)):
        bits[pos] = b
    out = qc.apply_basis(dec, bits)
    hot = [out[w] for w in dec.meta["onehot_wires"]]
    print(f"  address {addr} lights unary line {hot.index(1)}")

# ---- data loader: one-hot line -> stored word ------------------------
# a 2-bit dictionary on 4 lines; absent keys read back as zero
table = {1: 0b10, 2: 0b11, 3: 0b01}
loader = qc.build_data_loader(table, n_onehot=4, word_width=2)
for hot in range(4):
    bits = [0] * loader.n_qubits
    bits[loader.meta["onehot_wires"][hot]] = 1
    out = qc.apply_basis(loader, bits)
    word = sum(out[w] << t for t, w in enumerate(loader.meta["output_wires"]))
    print(f"  line {hot} -> word {word:02b}")

# ---- QROM: address -> stored word, ancillas uncomputed ---------------
values = [v * 7 % 16 for v in range(13)]       # ragged size, padded to 16
qrom = qc.build_qrom(values, word_width=4)
res = qc.resources(qrom)
print(f"qrom(13 items): depth {res['depth']}, gates {res['gates']}, "
      f"qubits {res['qubits']}")
bits = [0] * qrom.n_qubits
for pos, b in enumerate(qc.bits_of(9, qrom.meta["n_address_bits"])):
    bits[pos] = b
out = qc.apply_basis(qrom, bits)
word = sum(out[w] << t for t, w in enumerate(qrom.meta["output_wires"]))
print(f"  address 9 reads {word}, table says {values[9]}")
