import numpy as np
import pytest

FD_STEP = 1e-5

# lines collected by tests/test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def numeric_grad(f, x, step=FD_STEP):
    """Central differences of scalar f at every entry of x (x is restored)."""
    x = np.asarray(x)
    g = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + step
        fp = f()
        x[i] = old - step
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * step)
    return g


def rel_err(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12)
    return float(np.max(np.abs(a - b)) / scale)


def naive_conv2d(x, w, b, padding="same"):
    """Five nested loops over (n, o, i, j) with an inner (c, u, v) sum."""
    n_, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    ph, pw = (kh // 2, kw // 2) if padding == "same" else (0, 0)
    ho, wo = h + 2 * ph - kh + 1, wd + 2 * pw - kw + 1
    y = np.zeros((n_, cout, ho, wo))
    for n in range(n_):
        for o in range(cout):
            for i in range(ho):
                for j in range(wo):
                    acc = b[o]
                    for c in range(cin):
                        for u in range(kh):
                            for v in range(kw):
                                r, s = i + u - ph, j + v - pw
                                if 0 <= r < h and 0 <= s < wd:
                                    acc += x[n, c, r, s] * w[o, c, u, v]
                    y[n, o, i, j] = acc
    return y


def brute_force_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
