import numpy as np
import pytest


def ncc(a, b):
    """Zero-mean normalised cross-correlation of two equally shaped arrays."""
    a = np.asarray(a, dtype=np.float64) - np.mean(a)
    b = np.asarray(b, dtype=np.float64) - np.mean(b)
    return float(np.sum(a * b) / np.sqrt(np.sum(a * a) * np.sum(b * b)))


def checker(n=64, cell=8, lo=0.1, hi=0.9):
    yy, xx = np.mgrid[0:n, 0:n]
    return np.where(((xx // cell) + (yy // cell)) % 2 == 1, hi, lo).astype(np.float64)


def smooth_pattern(x, y):
    """Band-limited texture used for sub-pixel flow tests."""
    return (0.5 + 0.2 * np.sin(0.35 * x + 0.15 * y) + 0.15 * np.cos(0.28 * y - 0.1 * x)
            + 0.1 * np.sin(0.2 * x + 0.33 * y))


def brute_force_convolve(img, k):
    """Double-loop replicate-edge convolution."""
    h, w = img.shape
    s = k.shape[0]
    r = s // 2
    out = np.zeros_like(img, dtype=np.float64)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for j in range(s):
                for i in range(s):
                    yy = min(max(y + r - j, 0), h - 1)
                    xx = min(max(x + r - i, 0), w - 1)
                    acc += k[j, i] * img[yy, xx]
            out[y, x] = acc
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance report

_AC_RESULTS = {}


@pytest.fixture
def record_ac():
    """Store ``(passed, detail)`` for an acceptance criterion."""

    def record(name, passed, detail=""):
        _AC_RESULTS[name] = (bool(passed), detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _AC_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_AC_RESULTS, key=lambda n: int(n[2:])):
        passed, detail = _AC_RESULTS[name]
        terminalreporter.write_line(f"{name} {'PASS' if passed else 'FAIL'}  {detail}")
