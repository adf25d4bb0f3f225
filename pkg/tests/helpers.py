"""Shared generators for randomized tests."""

import numpy as np


def random_safe_expr(rng, variables, depth=3):
    """Random expression string that is smooth and finite for |variables| <= 2."""
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.6:
            return str(rng.choice(variables))
        return f"{rng.uniform(0.1, 2.0):.3f}"
    a = random_safe_expr(rng, variables, depth - 1)
    b = random_safe_expr(rng, variables, depth - 1)
    kind = rng.integers(0, 12)
    return [
        f"({a} + {b})",
        f"({a} - {b})",
        f"({a} * {b})",
        f"({a}) / (1.5 + ({b})^2)",
        f"sin({a})",
        f"cos({a})",
        f"exp(0.3 * sin({a}))",
        f"log(2 + cos({a}))",
        f"sqrt(1 + ({a})^2)",
        f"tan(0.4 * sin({a}))",
        f"abs(2.5 + sin({a}))",
        f"(1.2 + cos({a}))^(0.5 * sin({b}))",
    ][kind]


def smooth_random_curve(rng, x, scale=0.5):
    """A smooth random profile: low-order trigonometric polynomial."""
    y = np.full_like(x, rng.normal())
    L = x[-1] - x[0]
    for k in range(1, 4):
        y += scale / k * (rng.normal() * np.sin(k * np.pi * x / L) + rng.normal() * np.cos(k * np.pi * x / L))
    return y


def smooth_bump(rng, x):
    """Random smooth function vanishing at both ends of x."""
    s = (x - x[0]) / (x[-1] - x[0])
    base = np.sin(np.pi * s)
    v = base * (rng.normal() + rng.normal() * s + rng.normal() * np.cos(3 * s))
    v[0] = v[-1] = 0.0
    return v
