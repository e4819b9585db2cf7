"""Sampling helpers shared by the test modules."""

import numpy as np

# edge A: B -> C, edge B: C -> A, edge C: A -> B
EDGE_ENDS = {0: ((-1, -1), (1, -1)), 1: ((1, -1), (-1, 1)), 2: ((-1, 1), (-1, -1))}


def random_interior_points(n, seed=0):
    """Uniform points in the reference triangle (reflection of the square's upper half)."""
    rng = np.random.default_rng(seed)
    r, s = rng.uniform(-1, 1, (2, n))
    flip = r + s > 0
    r[flip], s[flip] = -s[flip], -r[flip]
    return r, s


def edge_points(k, n=200):
    t = np.linspace(0, 1, n)
    (r0, s0), (r1, s1) = EDGE_ENDS[k]
    return r0 + t * (r1 - r0), s0 + t * (s1 - s0)


def random_quadratic(rng):
    """Coefficients c of c0 + c1 x + c2 y + c3 x^2 + c4 x y + c5 y^2 in [-1, 1] and its evaluator."""
    c = rng.uniform(-1, 1, 6)

    def f(x, y):
        return c[0] + c[1] * x + c[2] * y + c[3] * x**2 + c[4] * x * y + c[5] * y**2

    return c, f


# criterion number -> list of (check label, passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, list] = {}

CRITERIA = {
    1: "construction fidelity",
    2: "(p-1)-exactness",
    3: "convergence study",
    4: "nonexistence certificate",
    5: "property suites",
}


def record(criterion, label, passed, detail=""):
    ACCEPTANCE.setdefault(criterion, []).append((label, bool(passed), detail))
    status = "PASS" if passed else "FAIL"
    print(f"criterion {criterion} [{label}]: {status} {detail}".rstrip())
    return bool(passed)
