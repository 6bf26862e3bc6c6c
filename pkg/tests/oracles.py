"""Independent reference implementations used as test oracles."""

import mpmath


def d_exact(n: int) -> float:
    """Average BST path normalizer at 50 digits."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    with mpmath.workdps(50):
        n = mpmath.mpf(n)
        return float(2 * (mpmath.log(n - 1) + mpmath.euler) - 2 * (n - 1) / n)


def brute_path(tree, x, node=0, edges=0):
    """Walk one point down ``tree`` node by node, counting edges."""
    f = int(tree.feature[node])
    if f < 0:
        return edges + d_exact(int(tree.size[node]))
    child = tree.left[node] if x[f] < tree.threshold[node] else tree.right[node]
    return brute_path(tree, x, int(child), edges + 1)


def brute_scores(trees, window, omega):
    out = []
    for x in window.tolist():
        paths = [brute_path(t, x) for t in trees]
        with mpmath.workdps(50):
            mean = mpmath.fsum(paths) / len(paths)
            out.append(float(mpmath.power(2, -mean / mpmath.mpf(d_exact(omega)))))
    return out
