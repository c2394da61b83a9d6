import math

import numpy as np
import pytest

from ionprobe.polarization import (
    apply_waveplates,
    embed_lab,
    hwp_matrix,
    ion_frame_basis,
    polarization_closed_form,
    polarization_pipeline,
    qwp_matrix,
    reconstruct_lab,
    spherical_components,
)

TWO_PI = 2.0 * math.pi
PHASE_QWP = np.exp(-1j * np.pi / 4)
PHASE_HWP = np.exp(-1j * np.pi / 2)


def proportional(a, b, tol=1e-12):
    """True when a = c*b for a single complex c with |c| = 1."""
    a, b = np.asarray(a).ravel(), np.asarray(b).ravel()
    k = np.argmax(np.abs(b))
    c = a[k] / b[k]
    return abs(abs(c) - 1.0) < tol and np.abs(a - c * b).max() < tol


def test_qwp_at_zero():
    expected = PHASE_QWP * np.array([[1, 0], [0, 1j]])
    assert np.abs(qwp_matrix(0.0) - expected).max() < 1e-15


def test_qwp_squared_is_hwp():
    product = qwp_matrix(0.3) @ qwp_matrix(0.3)
    assert proportional(product, hwp_matrix(0.3))


def test_qwp_at_45deg():
    expected = PHASE_QWP * 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
    assert np.abs(qwp_matrix(np.pi / 4) - expected).max() < 1e-15


def test_hwp_at_zero():
    expected = PHASE_HWP * np.array([[1, 0], [0, -1]])
    assert np.abs(hwp_matrix(0.0) - expected).max() < 1e-15


def test_hwp_at_22p5deg():
    expected = PHASE_HWP / math.sqrt(2) * np.array([[1, 1], [1, -1]])
    assert np.abs(hwp_matrix(np.pi / 8) - expected).max() < 1e-15


@pytest.mark.parametrize("theta", [0.1, 0.7, 1.3])
def test_hwp_squared_is_identity(theta):
    assert proportional(hwp_matrix(theta) @ hwp_matrix(theta), np.eye(2))


def test_waveplate_unitarity(rng):
    for _ in range(300):
        angle = rng.uniform(0, math.pi)
        for mat in (qwp_matrix(angle), hwp_matrix(angle)):
            assert np.abs(mat.conj().T @ mat - np.eye(2)).max() < 1e-12


def test_apply_waveplates_at_zero():
    jones = apply_waveplates(0.0, 0.0)
    # pure horizontal output carrying the fixed global phase
    assert abs(jones[0] - (-(1 + 1j) / math.sqrt(2))) < 1e-15
    assert abs(abs(jones[0]) - 1.0) < 1e-15
    assert abs(jones[1]) < 1e-15


def test_apply_waveplates_45deg_linear():
    jones = apply_waveplates(0.0, np.pi / 8)
    assert abs(jones[0]) ** 2 == pytest.approx(0.5, abs=1e-14)
    assert abs(jones[1]) ** 2 == pytest.approx(0.5, abs=1e-14)


def test_apply_waveplates_matches_matrix_product(rng):
    for _ in range(200):
        phi, theta = rng.uniform(0, math.pi, 2)
        via_matrices = hwp_matrix(theta) @ qwp_matrix(phi) @ np.array([1.0, 0.0])
        assert np.abs(apply_waveplates(phi, theta) - via_matrices).max() < 1e-13


def test_apply_waveplates_norm(rng):
    for _ in range(100):
        phi, theta = rng.uniform(0, TWO_PI, 2)
        jones = apply_waveplates(phi, theta)
        assert abs(np.abs(jones[0]) ** 2 + np.abs(jones[1]) ** 2 - 1.0) < 1e-12


def test_embed_lab():
    assert np.allclose(embed_lab(np.array([1.0, 0.0])), [0, 1, 0])
    assert np.allclose(embed_lab(np.array([0.0, 1.0])), [0, 0, 1])


def test_embed_preserves_norm(rng):
    for _ in range(100):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        v /= np.linalg.norm(v)
        assert abs(np.linalg.norm(embed_lab(v)) - 1.0) < 1e-12


def test_basis_unrotated_is_identity():
    basis = ion_frame_basis(0.0, 0.0)
    assert np.allclose(basis.x_hat, [1, 0, 0])
    assert np.allclose(basis.y_hat, [0, 1, 0])
    assert np.allclose(basis.z_hat, [0, 0, 1])


def test_basis_field_along_x():
    basis = ion_frame_basis(np.pi / 2, 0.0)
    assert np.allclose(basis.z_hat, [1, 0, 0], atol=1e-15)


def test_basis_orthonormal(rng):
    for _ in range(100):
        alpha, beta = rng.uniform(0, math.pi), rng.uniform(0, TWO_PI)
        basis = ion_frame_basis(alpha, beta)
        triad = np.stack([basis.x_hat, basis.y_hat, basis.z_hat])
        assert np.abs(triad @ triad.T - np.eye(3)).max() < 1e-12


def test_z_polarized_is_pi_light():
    sph = spherical_components(np.array([0, 0, 1.0]), ion_frame_basis(0.0, 0.0))
    assert abs(sph.eps_pi) == pytest.approx(1.0, abs=1e-14)
    assert abs(sph.eps_minus) < 1e-14 and abs(sph.eps_plus) < 1e-14


def test_circular_light_single_component():
    lab = np.array([1.0, 1.0j, 0.0]) / math.sqrt(2)
    sph = spherical_components(lab, ion_frame_basis(0.0, 0.0))
    mags = sorted([abs(sph.eps_minus), abs(sph.eps_plus)])
    assert mags[0] < 1e-14 and mags[1] == pytest.approx(1.0, abs=1e-14)
    assert abs(sph.eps_pi) < 1e-14


def test_reconstruction_identity(rng):
    for _ in range(100):
        vec = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        vec /= np.linalg.norm(vec)
        basis = ion_frame_basis(rng.uniform(0, math.pi), rng.uniform(0, TWO_PI))
        sph = spherical_components(vec, basis)
        assert np.abs(reconstruct_lab(sph, basis) - vec).max() < 1e-12
        assert abs(sph.norm_squared() - 1.0) < 1e-12


def test_closed_form_lin_perp_lin():
    sph = polarization_closed_form(0.0, 0.0, 0.0, 0.0)
    assert complex(sph.eps_minus) == pytest.approx(-0.5 * (1 - 1j), abs=1e-14)
    assert complex(sph.eps_plus) == pytest.approx(-0.5 * (1j - 1), abs=1e-14)
    assert abs(sph.eps_pi) < 1e-14
    assert abs(sph.eps_minus) ** 2 == pytest.approx(0.5, abs=1e-14)
    assert abs(sph.eps_plus) ** 2 == pytest.approx(0.5, abs=1e-14)


def test_closed_form_45deg_pi_fraction():
    sph = polarization_closed_form(0.0, 0.0, np.pi / 8, 0.0)
    assert abs(sph.eps_pi) ** 2 == pytest.approx(0.5, abs=1e-14)


def test_linear_decomposition_vs_hwp_angle():
    # vertical field, pure linear polarization: sigma components carry
    # |cos 2theta|/sqrt(2) each and the pi component |sin 2theta|
    for theta in np.linspace(0, math.pi, 23):
        sph = polarization_closed_form(0.0, 0.0, theta, 0.0)
        assert abs(sph.eps_minus) == pytest.approx(abs(math.cos(2 * theta)) / math.sqrt(2), abs=1e-12)
        assert abs(sph.eps_plus) == pytest.approx(abs(math.cos(2 * theta)) / math.sqrt(2), abs=1e-12)
        assert abs(sph.eps_pi) == pytest.approx(abs(math.sin(2 * theta)), abs=1e-12)


def test_closed_form_matches_pipeline(rng):
    worst = 0.0
    for _ in range(1000):
        alpha = rng.uniform(0, math.pi)
        beta = rng.uniform(0, TWO_PI)
        theta, phi = rng.uniform(0, math.pi, 2)
        a = polarization_pipeline(alpha, beta, theta, phi).as_array()
        b = polarization_closed_form(alpha, beta, theta, phi).as_array()
        worst = max(worst, float(np.abs(a - b).max()))
    assert worst < 1e-10


def test_closed_form_broadcasts():
    thetas = np.linspace(0, math.pi, 11)
    sph = polarization_closed_form(0.1, 0.2, thetas, 0.05)
    assert sph.eps_pi.shape == thetas.shape
    for i, theta in enumerate(thetas):
        single = polarization_closed_form(0.1, 0.2, theta, 0.05)
        assert abs(sph.eps_minus[i] - single.eps_minus) < 1e-15


def test_norm_conserved_through_stages(rng):
    for _ in range(100):
        phi, theta = rng.uniform(0, TWO_PI, 2)
        alpha, beta = rng.uniform(0, math.pi), rng.uniform(0, TWO_PI)
        jones = apply_waveplates(phi, theta)
        lab = embed_lab(jones)
        assert abs(np.linalg.norm(lab) - 1.0) < 1e-12
        sph = spherical_components(lab, ion_frame_basis(alpha, beta))
        assert abs(sph.norm_squared() - 1.0) < 1e-12
