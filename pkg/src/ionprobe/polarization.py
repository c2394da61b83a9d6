"""Jones calculus for the QWP/HWP stack and spherical-basis decomposition.

Two independent routes produce the beam polarization in the ion (magnetic
field) frame:

* the numeric pipeline: Jones matrices -> lab-frame 3-vector -> rotated
  frame -> spherical components, and
* a closed-form expression in the four angles (field polar/azimuthal alpha,
  beta; HWP theta; QWP phi).

They agree to ~1e-15 and cross-check each other in the test suite.

Conventions, fixed once: the beam propagates along lab x, horizontal
polarization maps to lab y and vertical to lab z; the spherical unit
vectors are e_pm = (x' +- i y')/sqrt(2) and e_pi = z' with z' along the
field; components are the bilinear projections e_q . eps, so the input is
reconstructed as sum_q eps_q * conj(e_q).  Fixed global phase factors
(exp(-i pi/4) on the QWP, exp(-i pi/2) on the HWP) are kept so both routes
match componentwise, not only in magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class IonFrameBasis:
    """Orthonormal triad with z_hat along the magnetic field."""

    x_hat: np.ndarray
    y_hat: np.ndarray
    z_hat: np.ndarray


@dataclass(frozen=True)
class SphericalPolarization:
    """Complex amplitudes of sigma-, pi, and sigma+ light in the ion frame.

    Components may be scalars or broadcast numpy arrays; they satisfy
    |eps_minus|^2 + |eps_pi|^2 + |eps_plus|^2 = 1 for unit input.
    """

    eps_minus: complex | np.ndarray
    eps_pi: complex | np.ndarray
    eps_plus: complex | np.ndarray

    def norm_squared(self):
        return (
            np.abs(self.eps_minus) ** 2
            + np.abs(self.eps_pi) ** 2
            + np.abs(self.eps_plus) ** 2
        )

    def as_array(self) -> np.ndarray:
        return np.asarray([self.eps_minus, self.eps_pi, self.eps_plus])


def qwp_matrix(phi: float) -> np.ndarray:
    """Quarter-wave plate Jones matrix, fast axis at angle phi to horizontal."""
    c, s = np.cos(phi), np.sin(phi)
    return np.exp(-1j * np.pi / 4) * np.array(
        [
            [c * c + 1j * s * s, (1 - 1j) * s * c],
            [(1 - 1j) * s * c, s * s + 1j * c * c],
        ]
    )


def hwp_matrix(theta: float) -> np.ndarray:
    """Half-wave plate Jones matrix, fast axis at angle theta to horizontal."""
    c, s = np.cos(theta), np.sin(theta)
    return np.exp(-1j * np.pi / 2) * np.array(
        [
            [c * c - s * s, 2 * c * s],
            [2 * c * s, s * s - c * c],
        ]
    )


def apply_waveplates(phi, theta):
    """Jones vector after a horizontal input passes the QWP then the HWP.

    Closed form (equal to hwp_matrix(theta) @ qwp_matrix(phi) @ [1, 0]):
        e_h = -(cos(2 phi - 2 theta) + i cos 2 theta)/sqrt(2)
        e_v =  (sin(2 phi - 2 theta) - i sin 2 theta)/sqrt(2)
    Accepts scalars or broadcast arrays.
    """
    delta = 2.0 * np.asarray(phi) - 2.0 * np.asarray(theta)
    e_h = -(np.cos(delta) + 1j * np.cos(2.0 * np.asarray(theta))) / SQRT2
    e_v = (np.sin(delta) - 1j * np.sin(2.0 * np.asarray(theta))) / SQRT2
    return np.stack([np.asarray(e_h), np.asarray(e_v)])


def embed_lab(jones: np.ndarray) -> np.ndarray:
    """Embed a Jones vector in the lab frame: propagation along x,
    horizontal -> y, vertical -> z."""
    e_h, e_v = jones
    return np.asarray([np.zeros_like(e_h), e_h, e_v], dtype=complex)


def ion_frame_basis(alpha: float, beta: float) -> IonFrameBasis:
    """Rotated orthonormal triad whose z axis points along the field
    direction (sin a cos b, sin a sin b, cos a)."""
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    return IonFrameBasis(
        x_hat=np.array([ca * cb, ca * sb, -sa]),
        y_hat=np.array([-sb, cb, 0.0]),
        z_hat=np.array([sa * cb, sa * sb, ca]),
    )


def spherical_components(lab: np.ndarray, basis: IonFrameBasis) -> SphericalPolarization:
    """Project a lab-frame polarization onto the e_-, e_pi, e_+ basis.

    Projections are bilinear (no conjugation): eps_q = e_q . eps with
    e_pm = (x' +- i y')/sqrt(2).  `lab` may be shape (3,) or (3, ...).
    """
    lab = np.asarray(lab, dtype=complex)
    e_x = np.tensordot(basis.x_hat, lab, axes=(0, 0))
    e_y = np.tensordot(basis.y_hat, lab, axes=(0, 0))
    e_z = np.tensordot(basis.z_hat, lab, axes=(0, 0))
    return SphericalPolarization(
        eps_minus=(e_x - 1j * e_y) / SQRT2,
        eps_pi=e_z,
        eps_plus=(e_x + 1j * e_y) / SQRT2,
    )


def reconstruct_lab(spherical: SphericalPolarization, basis: IonFrameBasis) -> np.ndarray:
    """Inverse of spherical_components: eps = sum_q eps_q * conj(e_q).

    With bilinear projections the coefficient of e_q pairs with conj(e_q)
    (equivalently conj(e_+) = e_-), which is what makes this an exact
    inverse.
    """
    e_x = (spherical.eps_plus + spherical.eps_minus) / SQRT2
    e_y = (spherical.eps_plus - spherical.eps_minus) / (1j * SQRT2)
    return (
        np.multiply.outer(basis.x_hat, e_x)
        + np.multiply.outer(basis.y_hat, e_y)
        + np.multiply.outer(basis.z_hat, spherical.eps_pi)
    ).astype(complex)


def polarization_pipeline(alpha, beta, theta, phi) -> SphericalPolarization:
    """Numeric route: waveplates -> lab embedding -> ion-frame projection."""
    jones = apply_waveplates(phi, theta)
    return spherical_components(embed_lab(jones), ion_frame_basis(alpha, beta))


def polarization_closed_form(alpha, beta, theta, phi) -> SphericalPolarization:
    """Closed-form ion-frame polarization for the QWP/HWP stack.

    Broadcasts over any of the four angle arguments.
    """
    alpha, beta = np.asarray(alpha), np.asarray(beta)
    theta, phi = np.asarray(theta), np.asarray(phi)
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    a_term = np.cos(2 * phi - 2 * theta) + 1j * np.cos(2 * theta)
    b_term = np.sin(2 * phi - 2 * theta) - 1j * np.sin(2 * theta)
    return SphericalPolarization(
        eps_minus=-0.5 * ((ca * sb - 1j * cb) * a_term + sa * b_term),
        eps_pi=-(sa * sb * a_term - ca * b_term) / SQRT2,
        eps_plus=-0.5 * ((ca * sb + 1j * cb) * a_term + sa * b_term),
    )
