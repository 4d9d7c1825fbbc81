"""Regenerate replay_sdp.txt and replay_sdp.ref with an external conic solver."""
import numpy as np
import cvxpy as cp

rng = np.random.default_rng(20240611)
n = 6
l, q, ps, hm = 3, 4, 3, 2
rows = l + q + ps * ps + 2 * hm * hm


def interior():
    s = np.concatenate([rng.uniform(0.5, 1.5, l)])
    v = rng.normal(size=q - 1)
    s = np.concatenate([s, [np.linalg.norm(v) + 1.0], v])
    m = rng.normal(size=(ps, ps))
    s = np.concatenate([s, (m @ m.T + np.eye(ps)).flatten(order="F")])
    c = rng.normal(size=(hm, hm)) + 1j * rng.normal(size=(hm, hm))
    hh = c @ c.conj().T + np.eye(hm)
    return np.concatenate([s, hh.real.flatten(order="F"), hh.imag.flatten(order="F")])


G = np.round(rng.normal(size=(rows, n)), 3)
G[rng.uniform(size=G.shape) < 0.3] = 0.0
A = np.round(rng.normal(size=(1, n)), 3)
x0 = rng.normal(size=n)
h = G @ x0 + interior()
b = A @ x0
z0 = interior()
y0 = rng.normal(size=1)
c = -(G.T @ z0 + A.T @ y0)
h = np.round(h, 6)
b = np.round(b, 6)
c = np.round(c, 6)

x = cp.Variable(n)
s = h - G @ x
cons = [A @ x == b, s[:l] >= 0, cp.SOC(s[l], s[l + 1:l + q])]
o = l + q
S = cp.reshape(s[o:o + ps * ps], (ps, ps), order="F")
cons.append((S + S.T) / 2 >> 0)
o += ps * ps
R = cp.reshape(s[o:o + hm * hm], (hm, hm), order="F")
I = cp.reshape(s[o + hm * hm:o + 2 * hm * hm], (hm, hm), order="F")
Rs, Is = (R + R.T) / 2, (I - I.T) / 2
cons.append(cp.bmat([[Rs, -Is], [Is, Rs]]) >> 0)
prob = cp.Problem(cp.Minimize(c @ x), cons)
prob.solve(solver=cp.CLARABEL)

with open("replay_sdp.txt", "w") as f:
    f.write("isac-conic 1\n")
    f.write(f"vars {n}\n")
    f.write(f"cones nonneg {l} soc 1 {q} psd 1 {ps} hpsd 1 {hm}\n")
    f.write(f"c {n}\n" + "\n".join(repr(float(v)) for v in c) + "\n")
    nz = [(i, j, G[i, j]) for j in range(n) for i in range(rows) if G[i, j] != 0]
    f.write(f"G {rows} {len(nz)}\n" + "".join(f"{i} {j} {float(v)!r}\n" for i, j, v in nz))
    f.write(f"h {rows}\n" + "\n".join(repr(float(v)) for v in h) + "\n")
    nz = [(0, j, A[0, j]) for j in range(n) if A[0, j] != 0]
    f.write(f"A 1 {len(nz)}\n" + "".join(f"{i} {j} {float(v)!r}\n" for i, j, v in nz))
    f.write("b 1\n" + repr(float(b[0])) + "\n")
    f.write("end\n")
with open("replay_sdp.ref", "w") as f:
    f.write(repr(float(prob.value)) + "\n")
print(prob.status, prob.value)
