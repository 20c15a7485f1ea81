#!/usr/bin/env python3
"""Solve the regression programs with external solvers and freeze the optima.

Reads every JSON program in crates/core/tests/fixtures/programs and writes
crates/core/tests/fixtures/reference_optima.json. CVXOPT (conelp, LDL KKT
solver) supplies the reference optimum; Clarabel's result is recorded next
to it for information.

The program form is

    min c'x + c0   s.t.  A x = b,  h - G x in K.

Rotated cones (a, b, u) with 2ab >= |u|^2 become
((a + b)/sqrt2, (a - b)/sqrt2, u) in the second-order cone. PSD blocks are
stored as scaled upper triangles (column-major, off-diagonals times sqrt2),
which is Clarabel's PSDTriangleConeT layout; CVXOPT receives the full
column-major matrix. The cost vector is divided by max(1, |c|_inf) before
solving and the optimum scaled back.
"""

import argparse
import json
import math
import pathlib

import clarabel
import cvxopt
import numpy as np
import scipy.sparse as sp
from cvxopt import matrix, solvers, spmatrix

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "crates" / "core" / "tests" / "fixtures"
TOL = 1e-9


def sparse(m):
    return sp.csr_matrix(
        (m["vals"], (m["rows"], m["cols"])), shape=(m["nrows"], m["ncols"])
    )


def block_dim(c):
    return c["order"] * (c["order"] + 1) // 2 if c["type"] == "psd_real" else c["dim"]


def rotate(g, h, cones):
    """Rewrites rotated blocks as second-order blocks."""
    g = g.tolil()
    h = h.copy()
    r = 1.0 / math.sqrt(2.0)
    off = 0
    out = []
    for c in cones:
        dim = block_dim(c)
        if c["type"] == "rotated_second_order":
            a, b = g[off].toarray(), g[off + 1].toarray()
            g[off], g[off + 1] = r * (a + b), r * (a - b)
            ha, hb = h[off], h[off + 1]
            h[off], h[off + 1] = r * (ha + hb), r * (ha - hb)
            out.append({"type": "second_order", "dim": dim})
        else:
            out.append(c)
        off += dim
    return g.tocsr(), h, out


def load(path):
    prog = json.loads(path.read_text())
    g, h, cones = rotate(
        sparse(prog["cone_matrix"]), np.asarray(prog["cone_rhs"], dtype=float), prog["cones"]
    )
    c = np.asarray(prog["objective"], dtype=float)
    return {
        "c": c,
        "gamma": max(1.0, float(np.abs(c).max(initial=0.0))),
        "offset": prog.get("objective_offset", 0.0),
        "a": sparse(prog["eq_matrix"]),
        "b": np.asarray(prog["eq_rhs"], dtype=float),
        "g": g,
        "h": h,
        "cones": cones,
    }


def solve_clarabel(p):
    cones = [clarabel.ZeroConeT(p["a"].shape[0])] if p["a"].shape[0] else []
    for c in p["cones"]:
        kind = c["type"]
        if kind == "nonneg":
            cones.append(clarabel.NonnegativeConeT(c["dim"]))
        elif kind == "second_order":
            cones.append(clarabel.SecondOrderConeT(c["dim"]))
        else:
            cones.append(clarabel.PSDTriangleConeT(c["order"]))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = 500
    n = len(p["c"])
    sol = clarabel.DefaultSolver(
        sp.csc_matrix((n, n)),
        p["c"] / p["gamma"],
        sp.vstack([p["a"], p["g"]]).tocsc(),
        np.concatenate([p["b"], p["h"]]),
        cones,
        settings,
    ).solve()
    return {"status": str(sol.status), "objective": sol.obj_val * p["gamma"] + p["offset"]}


def svec_to_full(k):
    """Maps an svec block of order k to the column-major full matrix."""
    t = sp.lil_matrix((k * k, k * (k + 1) // 2))
    idx = 0
    for j in range(k):
        for i in range(j + 1):
            f = 1.0 if i == j else 1.0 / math.sqrt(2.0)
            t[j * k + i, idx] = f
            t[i * k + j, idx] = f
            idx += 1
    return t.tocsr()


def to_cvx(m):
    m = sp.coo_matrix(m)
    return spmatrix(m.data.tolist(), m.row.tolist(), m.col.tolist(), size=m.shape)


def solve_cvxopt(p):
    parts = {"l": [], "q": [], "s": []}
    dims = {"l": 0, "q": [], "s": []}
    off = 0
    for c in p["cones"]:
        d = block_dim(c)
        g, h = p["g"][off:off + d], p["h"][off:off + d]
        if c["type"] == "psd_real":
            t = svec_to_full(c["order"])
            parts["s"].append((t @ g, t @ h))
            dims["s"].append(c["order"])
        elif c["type"] == "nonneg":
            parts["l"].append((g, h))
            dims["l"] += d
        else:
            parts["q"].append((g, h))
            dims["q"].append(d)
        off += d
    blocks = parts["l"] + parts["q"] + parts["s"]
    g = sp.vstack([b[0] for b in blocks])
    h = np.concatenate([b[1] for b in blocks])
    solvers.options.update(
        show_progress=False, abstol=TOL, reltol=TOL, feastol=TOL, maxiters=200, refinement=2
    )
    eq = {}
    if p["a"].shape[0]:
        eq = {"A": to_cvx(p["a"]), "b": matrix(p["b"])}
    sol = solvers.conelp(
        matrix(p["c"] / p["gamma"]), to_cvx(g), matrix(h), dims, kktsolver="ldl", **eq
    )
    return {
        "status": sol["status"],
        "objective": sol["primal objective"] * p["gamma"] + p["offset"],
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(FIXTURES / "reference_optima.json"))
    args = ap.parse_args()
    ref = {
        "reference": f"cvxopt {cvxopt.__version__}",
        "secondary": f"clarabel {clarabel.__version__}",
        "programs": {},
    }
    for path in sorted((FIXTURES / "programs").glob("*.json")):
        p = load(path)
        cx = solve_cvxopt(p)
        cl = solve_clarabel(p)
        ref["programs"][path.stem] = {"cvxopt": cx, "clarabel": cl}
        print(
            f"{path.stem:24s} cvxopt {cx['status']:10s} {cx['objective']:.10g}"
            f"   clarabel {cl['status']:14s} {cl['objective']:.10g}"
        )
    pathlib.Path(args.out).write_text(json.dumps(ref, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
