"""Cached reference trajectories shared by the fixtures and the acceptance suite."""
import math
from functools import cache

import numpy as np

from tdlag import catalog
from tdlag.diffkernel import Box, cos, sin
from tdlag.dynamics import ExternalForce, IntegratorConfig, forced_spray, integrate
from tdlag.riemann import MetricField, potential_lagrangian
from tdlag.semispray import lagrangian_spray

TWO_PI = 2 * math.pi


@cache
def system(name, **overrides):
    return catalog.get(name).system(overrides)


@cache
def harmonic_run(h):
    sys_ = system("harmonic-td")
    return integrate(sys_.spray, (0.0, [1.0], [0.0]), IntegratorConfig(h=h, s_span=(0.0, TWO_PI)))


@cache
def sphere_forced_run():
    sys_ = system("bead-on-sphere-forced")
    return integrate(sys_.spray, sys_.init, IntegratorConfig(h=1e-3, s_span=(0.0, TWO_PI)))


@cache
def sphere_free_quarter():
    sys_ = system("bead-on-sphere-forced", epsilon=0.0)
    return integrate(sys_.spray, (0.0, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), IntegratorConfig(h=1e-3, s_span=(0.0, math.pi / 2)))


def embed(q):
    """Unit sphere in polar angle / azimuth coordinates."""
    th, ph = q[0], q[1]
    return np.array([sin(th) * cos(ph), sin(th) * sin(ph), cos(th)], dtype=object)


def embed_frame(q):
    th, ph = q[0], q[1]
    d_th = np.array([cos(th) * cos(ph), cos(th) * sin(ph), -sin(th)], dtype=object)
    d_ph = np.array([-sin(th) * sin(ph), sin(th) * cos(ph), 0.0 * th], dtype=object)
    return d_th, d_ph


def intrinsic_sphere(epsilon):
    """Sphere spray in (theta, phi): round metric, ambient force pulled back by the embedding."""
    g = MetricField(lambda t, q: np.array([[1.0, 0.0], [0.0, sin(q[0]) ** 2]], dtype=object), 2, name="round")
    box = Box([-1.0, 0.1, -20.0, -3.0, -3.0], [8.0, math.pi - 0.1, 20.0, 3.0, 3.0])
    L = potential_lagrangian(g, None, box, "sphere-intrinsic")
    S = lagrangian_spray(L)
    if epsilon:
        def F(t, q, u):
            x = embed(q)
            d_th, d_ph = embed_frame(q)
            amb = epsilon * sin(t) * (np.array([0.0, 0.0, 1.0]) - x[2] * x)
            return np.array([d_th @ amb, d_ph @ amb], dtype=object)

        S = forced_spray(S, L, ExternalForce(F, 2, name="pulled-back force"))
    return S


@cache
def intrinsic_forced_run():
    # e1 is (pi/2, 0); the ambient velocity (0, 0.6, 0.8) is -0.8 d_theta + 0.6 d_phi there
    S = intrinsic_sphere(system("bead-on-sphere-forced").params["epsilon"])
    return integrate(S, (0.0, [math.pi / 2, 0.0], [-0.8, 0.6]), IntegratorConfig(h=2e-3, s_span=(0.0, TWO_PI)))
