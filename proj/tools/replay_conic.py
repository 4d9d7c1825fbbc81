#!/usr/bin/env python3
"""Solve a recorded isac-conic problem file with cvxpy and print the optimum."""
import argparse
import sys

import numpy as np
import scipy.sparse as sp
import cvxpy as cp


def read_problem(path):
    lines = [l.strip() for l in open(path) if l.strip() and not l.lstrip().startswith("#")]
    pos = 0

    def take():
        nonlocal pos
        pos += 1
        return lines[pos - 1].split()

    assert take()[:2] == ["isac-conic", "1"]
    n = int(take()[1])
    tok = take()[1:]
    cones = {}
    i = 0
    cones["nonneg"] = int(tok[1])
    i = 2
    for name in ("soc", "psd", "hpsd"):
        assert tok[i] == name
        k = int(tok[i + 1])
        cones[name] = [int(v) for v in tok[i + 2:i + 2 + k]]
        i += 2 + k

    def vec(tag):
        t = take()
        assert t[0] == tag
        return np.array([float(take()[0]) for _ in range(int(t[1]))])

    def mat(tag, cols):
        t = take()
        assert t[0] == tag
        rows, nnz = int(t[1]), int(t[2])
        trip = [take() for _ in range(nnz)]
        r = [int(a[0]) for a in trip]
        c = [int(a[1]) for a in trip]
        v = [float(a[2]) for a in trip]
        return sp.csc_matrix((v, (r, c)), shape=(rows, cols))

    c = vec("c")
    G = mat("G", n)
    h = vec("h")
    A = mat("A", n)
    b = vec("b")
    return c, G, h, A, b, cones


def build(c, G, h, A, b, cones):
    n = c.size
    x = cp.Variable(n)
    s = h - G @ x
    cons = []
    if A.shape[0]:
        cons.append(A @ x == b)
    o = cones["nonneg"]
    if o:
        cons.append(s[:o] >= 0)
    for d in cones["soc"]:
        cons.append(cp.SOC(s[o], s[o + 1:o + d]))
        o += d
    for m in cones["psd"]:
        S = cp.reshape(s[o:o + m * m], (m, m), order="F")
        cons.append((S + S.T) / 2 >> 0)
        o += m * m
    for m in cones["hpsd"]:
        R = cp.reshape(s[o:o + m * m], (m, m), order="F")
        I = cp.reshape(s[o + m * m:o + 2 * m * m], (m, m), order="F")
        Rs, Is = (R + R.T) / 2, (I - I.T) / 2
        cons.append(cp.bmat([[Rs, -Is], [Is, Rs]]) >> 0)
        o += 2 * m * m
    return cp.Problem(cp.Minimize(c @ x), cons), x


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("problem")
    ap.add_argument("--solver", default="CLARABEL")
    args = ap.parse_args()
    prob, x = build(*read_problem(args.problem))
    prob.solve(solver=args.solver)
    print(f"status {prob.status}")
    print(f"objective {float(prob.value)!r}" if prob.value is not None else "objective none")
    if x.value is not None:
        print("x " + " ".join(repr(float(v)) for v in x.value))
    return 0 if prob.status.startswith("optimal") else 1


if __name__ == "__main__":
    sys.exit(main())
