"""Smoke test for the thinflow_py extension.

Build and install first:
    pip install --no-build-isolation -e crates/python
"""

import math

import thinflow_py as tf


def main():
    curve = tf.Curve.circle(1.0)
    pos, tan, nrm, kappa_w, metric = curve.frame(0.3)
    assert abs(kappa_w + 1.0) < 1e-14
    assert abs(curve.length() - 2.0 * math.pi) < 1e-12

    dom = tf.ThinDomain(curve, [0.0], [1.0, 0.3, 1], 0.1)
    report = dom.validate()
    assert report["passed"], report
    assert abs(dom.jacobian(0.0, 0.05) - 1.05) < 1e-14

    grid = tf.ThinGrid(dom, 64, 8)
    sgrid = grid.surface()
    thetas = sgrid.thetas()
    v = [[math.cos(t) for t in thetas], [0.5 * math.sin(2 * t) for t in thetas]]

    # Averaging an extension multiplies by the average of 1, which is
    # 1 + O(eps) on a curved band.
    u = grid.extend(v)
    mu = grid.average(u)
    m1 = grid.average(grid.extend([[1.0] * 64]))[0]
    assert max(abs(a - 1.0) for a in m1) < 0.1
    err = max(abs(a - b * m) for ca, cb in zip(mu, v) for a, b, m in zip(ca, cb, m1))
    assert err < 1e-12, err
    assert grid.pairing_defect(u, v) < 1e-12

    # Constant data follow the logistic law w' = 2 w (1 - w).
    w0 = 0.25
    u0 = [[[math.sqrt(w0)] * 8 for _ in range(64)]]
    sol = tf.solve_thin(grid, u0, 1.0, 1e-3, 0.2)
    w = sol["field"][0][10][3] ** 2
    e = math.exp(0.4)
    exact = w0 * e / (1.0 - w0 + w0 * e)
    assert abs(w - exact) < 1e-3, (w, exact)
    assert len(sol["trace"]) == 201

    fd = tf.solve_surface(sgrid, v, [0.0], [1.0, 0.3, 1], 1.0, 1e-3, 0.1, snapshots=[0.05])
    gal = tf.solve_surface(sgrid, v, [0.0], [1.0, 0.3, 1], 1.0, 1e-3, 0.1,
                           scheme_name="semi_implicit_cn", backend="galerkin", modes=8)
    diff = [[a - b for a, b in zip(ca, cb)] for ca, cb in zip(fd["field"], gal["field"])]
    assert sgrid.norm(diff, "l2") < 1e-2
    assert [t for t, _ in fd["snapshots"]] == [0.05, 0.1]

    slope, _, _ = tf.fit_rate([(0.2, 0.04), (0.1, 0.01), (0.05, 0.0025)])
    assert abs(slope - 2.0) < 1e-12

    table = tf.check_invariants("", ["grid.m_theta=64", "grid.m_sigma=8"], seed=1)
    assert all(row[3] for row in table), table

    try:
        tf.ThinDomain(curve, [0.0], [1.0], 1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("epsilon >= 1 must be rejected")

    print("thinflow_py smoke test passed")


if __name__ == "__main__":
    main()
