"""Element matrices for P1 Stokes and lowest-order Nedelec on triangles.

All routines are vectorised over a batch of triangles given as an array of
vertex coordinates with shape ``(nt, 3, 2)``.
"""
import numpy as np

# local edges (a, b) of a triangle, oriented a -> b before global sign fixes
LOCAL_EDGES = ((0, 1), (1, 2), (0, 2))


def barycentric_gradients(X):
    """Return ``(area, grads)`` with ``grads[t, a]`` = gradient of lambda_a."""
    X = np.asarray(X, dtype=float)
    d1 = X[:, 1] - X[:, 0]
    d2 = X[:, 2] - X[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * np.abs(det)
    # rows of inv([d1 d2]) give grad lambda_1, grad lambda_2
    g1 = np.column_stack([d2[:, 1], -d2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-d1[:, 1], d1[:, 0]]) / det[:, None]
    g0 = -g1 - g2
    return area, np.stack([g0, g1, g2], axis=1)


def p1_stiffness(X):
    area, G = barycentric_gradients(X)
    return area[:, None, None] * np.einsum("tad,tbd->tab", G, G)


def p1_gradient(X):
    """``B[t, i, j, d] = int phi_i d_d(psi_j)`` for P1 test phi and P1 pressure psi."""
    area, G = barycentric_gradients(X)
    return np.broadcast_to((area / 3.0)[:, None, None, None] * G[:, None, :, :],
                           (len(area), 3, 3, 2)).copy()


def stokes_element(X, beta, hT):
    """9x9 symmetric element matrix ordered ``(u0,u1,u2, v0,v1,v2, p0,p1,p2)``.

    Block form ``[[K, 0, Bx], [0, K, By], [Bx^T, By^T, -beta hT^2 K]]``.
    """
    K = p1_stiffness(X)
    B = p1_gradient(X)
    nt = K.shape[0]
    E = np.zeros((nt, 9, 9))
    E[:, 0:3, 0:3] = K
    E[:, 3:6, 3:6] = K
    E[:, 0:3, 6:9] = B[..., 0]
    E[:, 3:6, 6:9] = B[..., 1]
    E[:, 6:9, 0:3] = np.swapaxes(B[..., 0], 1, 2)
    E[:, 6:9, 3:6] = np.swapaxes(B[..., 1], 1, 2)
    E[:, 6:9, 6:9] = -beta * (np.asarray(hT, dtype=float) ** 2)[..., None, None] * K
    return E


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def whitney_rot(X, signs):
    """Constant rot of the three Whitney functions of each triangle.

    ``signs[t, e]`` is +1 when local edge ``e`` (see ``LOCAL_EDGES``) is
    globally oriented a -> b, -1 otherwise.
    """
    _, G = barycentric_gradients(X)
    rot = np.stack([2.0 * _cross(G[:, a], G[:, b]) for a, b in LOCAL_EDGES], axis=1)
    return rot * signs


def nedelec_elements(X, signs):
    """Return ``(curlcurl, mass)`` 3x3 element matrices for line-integral DOFs."""
    area, G = barycentric_gradients(X)
    rot = whitney_rot(X, signs)
    N = area[:, None, None] * rot[:, :, None] * rot[:, None, :]
    # int lambda_i lambda_j = area (1 + delta_ij) / 12
    L = (np.ones((3, 3)) + np.eye(3)) / 12.0
    GG = np.einsum("tad,tbd->tab", G, G)
    M = np.zeros_like(N)
    for e, (a, b) in enumerate(LOCAL_EDGES):
        for f, (c, d) in enumerate(LOCAL_EDGES):
            # (la gb - lb ga).(lc gd - ld gc)
            M[:, e, f] = (L[a, c] * GG[:, b, d] - L[a, d] * GG[:, b, c]
                          - L[b, c] * GG[:, a, d] + L[b, d] * GG[:, a, c])
    M *= area[:, None, None] * signs[:, :, None] * signs[:, None, :]
    return N, M


def whitney_eval(X, signs, points):
    """Evaluate the three (signed) Whitney functions of each triangle at ``points``.

    ``points`` has shape ``(nt, 2)``; result has shape ``(nt, 3, 2)``.
    """
    X = np.asarray(X, dtype=float)
    area, G = barycentric_gradients(X)
    lam = np.empty((len(X), 3))
    lam[:, 1:] = np.einsum("tad,td->ta", G[:, 1:], points - X[:, 0])
    lam[:, 0] = 1.0 - lam[:, 1] - lam[:, 2]
    out = np.stack([lam[:, a, None] * G[:, b] - lam[:, b, None] * G[:, a]
                    for a, b in LOCAL_EDGES], axis=1)
    return out * signs[:, :, None]
