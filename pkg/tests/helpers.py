"""Shared builders for the test suite: the worked example, randomized
transversal problems with known roots, and a random expression generator."""
from __future__ import annotations

import numpy as np

from gammachain import expr
from gammachain.chain import ProblemSpec

EXAMPLE = dict(g="-x0*(1+x2)", phi="q-p", f="1+x*sin(2*pi*t)", a=2.0, b=2, T=1.0)


def example_problem() -> ProblemSpec:
    return ProblemSpec.from_strings(**EXAMPLE)


def central_fd(fun, x: float, h: float = 1e-6) -> float:
    return (fun(x + h) - fun(x - h)) / (2.0 * h)


def _poly_str(coeffs, pv: str, qv: str) -> str:
    c0, c1, c2, c3, c4 = (float(c) for c in coeffs)
    return (f"({c0!r}) + ({c1!r})*{pv} + ({c2!r})*{qv}"
            f" + ({c3!r})*{pv}^2 + ({c4!r})*{pv}*{qv}")


def make_transversal_problem(rng: np.random.Generator, b: int):
    """A problem whose bifurcation function is exactly a polynomial with
    known, well-separated transversal roots.

    g is built as target(x0) + c*(x2 - phi(x0, x1)), so composing with the
    lifted third argument cancels the phi terms identically and leaves
    Phi(u) = target(u).  Returns (problem, roots, slopes at the roots).
    """
    while True:
        n_roots = int(rng.integers(1, 4))
        roots = np.sort(rng.uniform(-2.0, 2.0, n_roots))
        if n_roots == 1 or float(np.min(np.diff(roots))) > 0.4:
            break
    s = float(rng.uniform(0.5, 2.0)) * (1.0 if rng.random() < 0.5 else -1.0)
    c = float(rng.uniform(0.5, 2.0)) * (1.0 if rng.random() < 0.5 else -1.0)
    a = float(rng.uniform(0.5, 4.0))
    phi_coeffs = rng.uniform(-1.5, 1.5, 5)

    target = f"({s!r})" + "".join(f"*(x0-({float(r)!r}))" for r in roots)
    g = f"{target} + ({c!r})*(x2 - ({_poly_str(phi_coeffs, 'x0', 'x1')}))"
    problem = ProblemSpec.from_strings(g, _poly_str(phi_coeffs, "p", "q"),
                                       "sin(2*pi*t)", a, b, 1.0)
    slopes = np.array([s * np.prod([r_i - r_j for r_j in roots if r_j != r_i])
                       for r_i in roots])
    return problem, roots, slopes


def transversal_suite(count: int = 20, seed: int = 20260808):
    """Deterministic randomized suite over shapes b in {1, 2, 3, 5}."""
    rng = np.random.default_rng(seed)
    shapes = [1, 2, 3, 5]
    suite = []
    while len(suite) < count:
        b = shapes[len(suite) % len(shapes)]
        problem, roots, slopes = make_transversal_problem(rng, b)
        if float(np.min(np.abs(slopes))) < 0.05:
            continue  # nearly tangent roots make the determinant check noisy
        suite.append((problem, roots, slopes))
    return suite


_FUNCS = ("sin", "cos", "exp", "abs")


def random_expr(rng: np.random.Generator, variables: tuple[str, ...],
                depth: int = 0) -> expr.Expr:
    """Random tree over the full grammar; power exponents stay integer."""
    if depth >= 3 or rng.random() < 0.3:
        if variables and rng.random() < 0.65:
            return expr.Var(str(rng.choice(variables)))
        return expr.Num(float(np.round(rng.uniform(-3.0, 3.0), 3)))
    roll = rng.random()
    if roll < 0.5:
        op = str(rng.choice(["+", "-", "*", "/"]))
        return expr.BinOp(op, random_expr(rng, variables, depth + 1),
                          random_expr(rng, variables, depth + 1))
    if roll < 0.6:
        return expr.BinOp("^", random_expr(rng, variables, depth + 1),
                          expr.Num(float(rng.integers(2, 4))))
    if roll < 0.7:
        return expr.Neg(random_expr(rng, variables, depth + 1))
    func = str(rng.choice(_FUNCS))
    return expr.Call(func, random_expr(rng, variables, depth + 1))


def smooth_sample_points(e: expr.Expr, variables: tuple[str, ...],
                         rng: np.random.Generator, var: str, want: int = 5,
                         tries: int = 60):
    """Bindings where the expression evaluates and looks smooth in ``var``.

    Smoothness filter: two central differences with halved steps must
    agree, which rejects kinks of abs and pole neighborhoods.
    """
    points = []
    for _ in range(tries):
        if len(points) >= want:
            break
        bindings = {v: float(rng.uniform(-2.0, 2.0)) for v in variables}

        def along(x):
            nb = dict(bindings)
            nb[var] = x
            return expr.evaluate(e, nb)

        x0 = bindings[var]
        try:
            fd1 = central_fd(along, x0, 1e-6)
            fd2 = central_fd(along, x0, 5e-7)
        except expr.EvalError:
            continue
        if abs(fd1 - fd2) > 1e-6 * (1.0 + abs(fd1)):
            continue
        points.append((bindings, fd1))
    return points
