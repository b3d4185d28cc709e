import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condexp.kernels import (
    EmpiricalMeasure,
    KernelError,
    KernelSpec,
    OperatorMatrix,
    UnderflowError,
    convolve,
    diffusion_kernel,
    evaluate_kernel,
    gaussian_kernel,
    kernel_matrix,
    markov_gaussian,
    markov_normalize,
    rkhs_inner,
    symmetrize_diffusion,
)


def random_cloud(rng, n, d):
    return rng.uniform(0, 1, size=(n, d))


# --- gaussian_kernel -------------------------------------------------------


def test_gaussian_kernel_values():
    assert gaussian_kernel([0.3, -1.0], [0.3, -1.0], 0.7) == 1.0
    assert gaussian_kernel([0.0], [1.0], 1.0) == pytest.approx(0.36787944, abs=1e-8)
    # squared distance 2 at delta 0.5
    assert gaussian_kernel([0.0, 0.0], [1.0, 1.0], 0.5) == pytest.approx(0.01831564, abs=1e-8)
    assert gaussian_kernel([0.2, 0.5], [0.9, 0.1], 0.3) == gaussian_kernel([0.9, 0.1], [0.2, 0.5], 0.3)


@pytest.mark.parametrize("delta", [0.0, -1.0, np.inf, np.nan])
def test_gaussian_kernel_rejects_bad_bandwidth(delta):
    with pytest.raises(KernelError):
        gaussian_kernel([0.0], [1.0], delta)


def test_gaussian_kernel_dimension_mismatch():
    with pytest.raises(KernelError, match="dimension"):
        gaussian_kernel([0.0, 1.0], [1.0], 1.0)


# --- kernel_matrix ---------------------------------------------------------


def test_kernel_matrix_single_point():
    km = kernel_matrix(KernelSpec("gaussian", 0.3), [[0.5, 0.5]], [[0.5, 0.5]])
    np.testing.assert_array_equal(km.entries, [[1.0]])


def test_kernel_matrix_exactly_symmetric():
    pts = random_cloud(np.random.default_rng(0), 40, 3)
    e = kernel_matrix(KernelSpec("gaussian", 0.2), pts, pts).entries
    assert np.array_equal(e, e.T)


def test_kernel_matrix_collinear_points():
    pts = np.array([[0.0], [1.0], [2.0]])
    e = kernel_matrix(KernelSpec("gaussian", 1.0), pts, pts).entries
    # hand evaluation of exp(-dist^2): neighbours e^-1, ends e^-4
    assert e[0, 1] == pytest.approx(math.exp(-1), abs=1e-15)
    assert e[1, 2] == pytest.approx(math.exp(-1), abs=1e-15)
    assert e[0, 2] == pytest.approx(math.exp(-4), abs=1e-15)
    assert e[0, 2] == pytest.approx(e[0, 1] ** 4, rel=1e-14)


def test_kernel_matrix_errors():
    with pytest.raises(KernelError):
        kernel_matrix(KernelSpec("gaussian", 1.0), np.zeros((0, 2)), [[0.0, 0.0]])
    with pytest.raises(KernelError):
        kernel_matrix(KernelSpec("diffusion", 1.0), [[0.0]], [[0.0]])
    with pytest.raises(KernelError, match="dimension"):
        kernel_matrix(KernelSpec("gaussian", 1.0), [[0.0, 1.0]], [[0.0, 1.0, 2.0]])


def test_gaussian_matrix_positive_definite():
    rng = np.random.default_rng(3)
    for n in (5, 20, 50):
        pts = random_cloud(rng, n, 2)
        ev = np.linalg.eigvalsh(kernel_matrix(KernelSpec("gaussian", 0.05), pts, pts).entries)
        assert ev.min() >= -1e-8 * ev.max()


def test_kernel_spec_validation():
    with pytest.raises(KernelError):
        KernelSpec("laplace", 1.0)
    with pytest.raises(KernelError):
        KernelSpec("gaussian", 0.0)


# --- markov_normalize ------------------------------------------------------


def test_markov_normalize_constant_kernel():
    pts = np.linspace(0, 1, 5)[:, None]
    mu = EmpiricalMeasure.uniform(pts)
    out = markov_normalize(OperatorMatrix(np.ones((5, 5)), pts, pts), mu)
    np.testing.assert_allclose(out.entries, 1.0, rtol=0, atol=1e-15)


def test_markov_normalize_two_point():
    pts = np.array([[0.0], [1.0]])
    mu = EmpiricalMeasure(pts, [0.5, 0.5])
    out = markov_normalize(OperatorMatrix([[1.0, 0.5], [0.5, 1.0]], pts, pts), mu)
    # row sum (1 + 0.5)/2 = 0.75
    np.testing.assert_allclose(out.entries, [[4 / 3, 2 / 3], [2 / 3, 4 / 3]], rtol=1e-15)
    np.testing.assert_allclose(out.apply(np.ones(2)), 1.0, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(1, 60),
    d=st.integers(1, 3),
    log_delta=st.floats(-3, 1),
    seed=st.integers(0, 2**32 - 1),
)
def test_markov_rows_sum_to_one(n, d, log_delta, seed):
    rng = np.random.default_rng(seed)
    pts = random_cloud(rng, n, d)
    w = rng.uniform(0.1, 1.0, n)
    mu = EmpiricalMeasure(pts, w / w.sum())
    p = markov_gaussian(pts, mu, 10.0**log_delta)
    np.testing.assert_allclose(p.entries @ mu.weights, 1.0, rtol=0, atol=1e-12)


def test_markov_normalize_underflow_names_row():
    pts = np.array([[0.0], [0.01]])
    mu = EmpiricalMeasure.uniform(pts)
    far = np.array([[0.0], [50.0]])
    with pytest.raises(UnderflowError, match="row 1.*larger bandwidth"):
        markov_gaussian(far, mu, 1e-3)


def test_markov_normalize_rejects_mismatched_measure():
    pts = np.array([[0.0], [1.0]])
    with pytest.raises(KernelError):
        markov_normalize(OperatorMatrix(np.ones((2, 2)), pts, pts), EmpiricalMeasure.uniform(pts + 1))


def test_empirical_measure_validation():
    with pytest.raises(KernelError):
        EmpiricalMeasure([[0.0], [1.0]], [0.5, 0.6])
    with pytest.raises(KernelError):
        EmpiricalMeasure([[0.0], [1.0]], [1.0, 0.0])
    with pytest.raises(KernelError):
        EmpiricalMeasure(np.zeros((0, 1)), [])


# --- convolve --------------------------------------------------------------


def test_convolve_single_point_measure():
    rows = np.array([[0.0], [1.0], [2.0]])
    mid = np.array([[0.5]])
    cols = np.array([[3.0], [4.0]])
    mu = EmpiricalMeasure(mid, [1.0])
    k1 = OperatorMatrix(np.array([[1.0], [2.0], [3.0]]), rows, mid, [1.0])
    k2 = OperatorMatrix(np.array([[5.0, 7.0]]), mid, cols)
    np.testing.assert_allclose(convolve(k1, k2, mu).entries, np.outer([1, 2, 3], [5, 7]), rtol=1e-15)


def test_convolve_with_constant_markov_kernel():
    pts = np.array([[0.0], [1.0]])
    mu = EmpiricalMeasure(pts, [0.25, 0.75])
    k1 = OperatorMatrix([[1.0, 2.0], [3.0, 5.0]], pts, pts, mu.weights)
    k2 = markov_normalize(OperatorMatrix(np.ones((2, 2)), pts, pts, mu.weights), mu)
    out = convolve(k1, k2, mu).entries
    # hand product: weighted row sums of k1 are 1.75 and 4.5
    np.testing.assert_allclose(out, [[1.75, 1.75], [4.5, 4.5]], rtol=1e-15)


def test_convolve_is_operator_composition():
    rng = np.random.default_rng(11)
    for _ in range(20):
        a, b, c = rng.integers(1, 15, size=3)
        xa, xb, xc = random_cloud(rng, a, 2), random_cloud(rng, b, 2), random_cloud(rng, c, 2)
        wb = rng.uniform(0.1, 1, b)
        wc = rng.uniform(0.1, 1, c)
        mu_b = EmpiricalMeasure(xb, wb / wb.sum())
        k1 = OperatorMatrix(rng.uniform(size=(a, b)), xa, xb, mu_b.weights)
        k2 = OperatorMatrix(rng.uniform(size=(b, c)), xb, xc, wc / wc.sum())
        v = rng.standard_normal(c)
        np.testing.assert_allclose(convolve(k1, k2, mu_b).apply(v), k1.apply(k2.apply(v)), rtol=1e-12, atol=1e-12)


def test_convolve_rejects_mismatch():
    pts = np.array([[0.0], [1.0]])
    k = OperatorMatrix(np.ones((2, 2)), pts, pts)
    with pytest.raises(KernelError):
        convolve(k, k, EmpiricalMeasure.uniform(pts + 0.5))


# --- diffusion kernels -----------------------------------------------------


def test_diffusion_single_point():
    pts = np.array([[0.4, 0.1]])
    k, deg = diffusion_kernel(pts, EmpiricalMeasure.uniform(pts), 0.1)
    np.testing.assert_allclose(k.entries, [[1.0]])
    np.testing.assert_allclose(deg.deg_r, [1.0])
    np.testing.assert_allclose(deg.deg_l, [1.0])


def test_diffusion_two_points_symmetric():
    pts = np.array([[0.0, 0.0], [0.3, 0.4]])
    k, _ = diffusion_kernel(pts, EmpiricalMeasure.uniform(pts), 0.2)
    np.testing.assert_allclose(k.entries, k.entries.T, rtol=1e-15)


def _diffusion_by_loops(pts, w, eps):
    n = len(pts)
    g = [[math.exp(-sum((pts[i] - pts[j]) ** 2) / eps) for j in range(n)] for i in range(n)]
    dr = [sum(w[j] * g[i][j] for j in range(n)) for i in range(n)]
    dl = [sum(w[j] * g[i][j] / dr[j] for j in range(n)) for i in range(n)]
    return np.array(g), np.array(dr), np.array(dl)


def test_diffusion_matches_loop_oracle_and_symmetrization_identity():
    rng = np.random.default_rng(5)
    pts = random_cloud(rng, 10, 2)
    w = rng.uniform(0.2, 1, 10)
    w /= w.sum()
    mu = EmpiricalMeasure(pts, w)
    k, deg = diffusion_kernel(pts, mu, 0.15)
    g, dr, dl = _diffusion_by_loops(pts, w, 0.15)
    np.testing.assert_allclose(deg.deg_r, dr, rtol=1e-13)
    np.testing.assert_allclose(deg.deg_l, dl, rtol=1e-13)
    np.testing.assert_allclose(k.entries, g / np.outer(dl, dr), rtol=1e-13)
    s = deg.symmetrizer
    lhs = s[:, None] * k.entries / s[None, :]
    rhs = g / np.sqrt(np.outer(dr * dl, dr * dl))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_diffusion_kernel_is_markov_over_its_measure():
    rng = np.random.default_rng(6)
    pts = random_cloud(rng, 30, 2)
    mu = EmpiricalMeasure.uniform(pts)
    k, _ = diffusion_kernel(pts, mu, 0.05)
    np.testing.assert_allclose(k.apply(np.ones(30)), 1.0, atol=1e-12)


def test_symmetrize_single_point():
    pts = np.array([[1.0]])
    k, deg = diffusion_kernel(pts, EmpiricalMeasure.uniform(pts), 1.0)
    np.testing.assert_allclose(symmetrize_diffusion(k, deg).entries, [[1.0]])


@pytest.mark.parametrize("seed", range(5))
def test_symmetrized_diffusion_symmetric_spd(seed):
    rng = np.random.default_rng(seed)
    pts = random_cloud(rng, 10, 2)
    k, deg = diffusion_kernel(pts, EmpiricalMeasure.uniform(pts), 0.1)
    s = symmetrize_diffusion(k, deg).entries
    assert np.max(np.abs(s - s.T)) <= 1e-10 * np.max(np.abs(s))
    ev = np.linalg.eigvalsh(0.5 * (s + s.T))
    assert ev.min() >= -1e-8 * ev.max()
    np.linalg.cholesky(0.5 * (s + s.T) + 1e-10 * np.eye(10))
    assert np.all(np.isfinite(deg.symmetrizer)) and deg.symmetrizer.min() > 0


def test_symmetrize_shape_mismatch():
    pts = np.array([[0.0], [1.0]])
    k, deg = diffusion_kernel(pts, EmpiricalMeasure.uniform(pts), 1.0)
    k3 = OperatorMatrix(np.ones((3, 3)), np.zeros((3, 1)), np.zeros((3, 1)))
    with pytest.raises(KernelError):
        symmetrize_diffusion(k3, deg)


def test_out_of_sample_diffusion_agrees_in_sample():
    rng = np.random.default_rng(8)
    pts = random_cloud(rng, 25, 2)
    mu = EmpiricalMeasure.uniform(pts)
    k, deg = diffusion_kernel(pts, mu, 0.08)
    np.testing.assert_allclose(evaluate_kernel(KernelSpec("diffusion", 0.08), pts, pts), k.entries, rtol=1e-13)
    np.testing.assert_allclose(
        evaluate_kernel(KernelSpec("symmetrized-diffusion", 0.08), pts, pts),
        symmetrize_diffusion(k, deg).entries,
        rtol=1e-12,
    )
    np.testing.assert_allclose(
        evaluate_kernel(KernelSpec("markov-gaussian", 0.08), pts, pts), markov_gaussian(pts, mu, 0.08).entries, rtol=1e-13
    )


# --- rkhs_inner ------------------------------------------------------------


def test_rkhs_inner_single_section():
    spec = KernelSpec("gaussian", 0.1)
    assert rkhs_inner([1.0], [[0.3]], [1.0], [[0.3]], spec) == 1.0


def test_reproducing_property():
    rng = np.random.default_rng(2)
    spec = KernelSpec("gaussian", 0.05)
    centers = random_cloud(rng, 12, 2)
    a = rng.standard_normal(12)
    for x in random_cloud(rng, 5, 2):
        fx = evaluate_kernel(spec, x[None, :], centers)[0] @ a
        assert rkhs_inner([1.0], x[None, :], a, centers, spec) == pytest.approx(fx, abs=1e-12)


def test_rkhs_inner_far_apart_sections():
    spec = KernelSpec("gaussian", 0.01)
    a, b = np.array([1.5, -2.0]), np.array([0.5])
    xa = np.array([[0.0, 0.0], [0.0, 0.1]])
    xb = np.array([[1.0, 1.0]])
    d2 = min(np.sum((xa - xb) ** 2, axis=1))
    bound = math.exp(-d2 / 0.01) * np.abs(a).sum() * np.abs(b).sum()
    assert abs(rkhs_inner(a, xa, b, xb, spec)) <= bound


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 15), seed=st.integers(0, 2**32 - 1), family=st.sampled_from(["gaussian", "symmetrized-diffusion"]))
def test_rkhs_inner_symmetric_psd(n, seed, family):
    rng = np.random.default_rng(seed)
    spec = KernelSpec(family, 0.1)
    ref = EmpiricalMeasure.uniform(random_cloud(rng, 20, 2))
    xa, xb = random_cloud(rng, n, 2), random_cloud(rng, n + 1, 2)
    a, b = rng.standard_normal(n), rng.standard_normal(n + 1)
    ab = rkhs_inner(a, xa, b, xb, spec, ref)
    ba = rkhs_inner(b, xb, a, xa, spec, ref)
    assert ab == pytest.approx(ba, rel=1e-12, abs=1e-12)
    assert rkhs_inner(a, xa, a, xa, spec, ref) >= -1e-12 * np.sum(a**2)


def test_rkhs_inner_rejects_nonsymmetric_family():
    with pytest.raises(KernelError):
        rkhs_inner([1.0], [[0.0]], [1.0], [[0.0]], KernelSpec("diffusion", 0.1))
    with pytest.raises(KernelError, match="reference"):
        rkhs_inner([1.0], [[0.0]], [1.0], [[0.0]], KernelSpec("symmetrized-diffusion", 0.1))
