"""Minimal SDPA sparse reader and an independent cvxpy solve of it."""

import json
import re

import cvxpy as cp
import numpy as np


def read_sdpa(text):
    lines = [ln for ln in text.splitlines() if ln.strip() and ln.lstrip()[0] not in "\"*"]
    tokens = lambda ln: [t for t in re.split(r"[\s,{}()]+", ln) if t]
    m = int(tokens(lines[0])[0])
    nblocks = int(tokens(lines[1])[0])
    dims = [int(t) for t in tokens(lines[2])[:nblocks]]
    c = np.array([float(t) for t in tokens(lines[3])[:m]])
    entries = [[] for _ in range(m + 1)]
    for ln in lines[4:]:
        i, b, r, col, v = tokens(ln)[:5]
        entries[int(i)].append((int(b) - 1, int(r) - 1, int(col) - 1, float(v)))
    return dims, c, entries


def solve_sdpa_dual(text, solver="CLARABEL"):
    """max F0.Y s.t. Fi.Y = ci, Y psd; returns the optimal value."""
    dims, c, entries = read_sdpa(text)
    blocks = []
    for d in dims:
        if d > 0:
            blocks.append(cp.Variable((d, d), symmetric=True))
        else:
            blocks.append(cp.Variable(-d, nonneg=True))

    def inner(row):
        terms = []
        for b, r, col, v in row:
            if dims[b] < 0:
                terms.append(v * blocks[b][r])
            elif r == col:
                terms.append(v * blocks[b][r, r])
            else:
                terms.append(2 * v * blocks[b][r, col])
        return cp.sum(cp.hstack(terms)) if terms else 0

    cons = [Y >> 0 for Y, d in zip(blocks, dims) if d > 0]
    cons += [inner(entries[i]) == c[i - 1] for i in range(1, len(entries))]
    prob = cp.Problem(cp.Maximize(inner(entries[0])), cons)
    prob.solve(solver=solver)
    return prob.status, prob.value


def manifest(text):
    return json.loads(text)
