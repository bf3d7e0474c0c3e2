"""Independent reference computations used as test oracles."""
import math


def fixed_step_bisection(operands, gamma, h, width=1e-12):
    """Root of ``sum h(o - z) = gamma`` on ``[min(o) - gamma - 1, max(o)]``.

    Pure Python, no numpy, no Newton: a deliberately naive second route.
    """
    g = lambda z: sum(h(o - z) for o in operands) - gamma
    lo, hi = min(operands) - gamma - 1.0, max(operands)
    while g(lo) < 0:
        lo -= max(1.0, hi - lo)
    # strictly positive h (softplus) can exceed gamma at max(o)
    while g(hi) > 0:
        hi += max(1.0, hi - lo)
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def relu(u):
    return u if u > 0 else 0.0


def softplus(t):
    def h(u):
        v = u / t
        return u if v > 30 else t * math.log1p(math.exp(v))
    return h


def power(eta):
    e = 1.0 / (eta - 1.0)
    return lambda u: u**e if u > 0 else 0.0
