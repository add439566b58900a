"""Deterministic density corpora for stress tests and soundness audits.

Each density is generated from a seed derived as (base_seed, index), so any
corpus element can be rebuilt independently of scheduling or batch size.
"""

from __future__ import annotations

import math

import numpy as np

from .density import (
    Density,
    annulus,
    ball_translate,
    make_ball_density,
    perturbed_ball,
    soft_bump_mixture,
    two_ball_union,
)
from .grids import SphericalGrid

__all__ = ["corpus_density", "generate_corpus", "sandwiched_density", "generate_sandwiched"]


def _rng(base_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((base_seed, index)))


def _random_unit(rng, dim):
    v = rng.standard_normal(dim)
    n = np.linalg.norm(v)
    return v / n if n > 0 else np.eye(dim)[0]


def corpus_density(grid: SphericalGrid, index: int, base_seed: int = 0) -> tuple[str, Density]:
    """Mixed-generator corpus element: balls, ripples, unions, shells, bumps."""
    rng = _rng(base_seed, index)
    N = grid.dim
    kind = index % 6
    if kind == 0:
        ell = int(rng.integers(2, 7)) if N >= 2 else 1
        eps = float(rng.uniform(0.02, 0.22))
        name = f"ripple_l{ell}_e{eps:.3f}"
        return name, perturbed_ball(grid, ell, eps, pole=_random_unit(rng, N))
    if kind == 1:
        shift = float(rng.uniform(0.0, 0.8)) * _random_unit(rng, N)
        return f"translate_{np.linalg.norm(shift):.3f}", ball_translate(grid, shift)
    if kind == 2:
        d = float(rng.uniform(0.0, 2.0))
        split = float(rng.uniform(0.3, 0.7))
        return f"union_d{d:.3f}", two_ball_union(grid, d, split=split, axis=_random_unit(rng, N))
    if kind == 3:
        inner = float(rng.uniform(0.0, 0.6))
        outer = (inner**N + 1.0) ** (1.0 / N)
        return f"annulus_{inner:.3f}", annulus(grid, inner, outer)
    if kind == 4:
        k = int(rng.integers(1, 4))
        centers = rng.uniform(-0.9, 0.9, size=(k, N))
        widths = rng.uniform(0.2, 0.5, size=k)
        amps = rng.uniform(0.5, 1.0, size=k)
        return f"bumps_{k}", soft_bump_mixture(grid, centers, widths, amps)
    # dimmed shell: ball with the outer part of a boundary ripple at partial height
    ell = int(rng.integers(1, 5)) if N >= 2 else 1
    eps = float(rng.uniform(0.05, 0.2))
    level = float(rng.uniform(0.3, 0.95))
    rho = perturbed_ball(grid, ell, eps, pole=_random_unit(rng, N))
    inside = grid.radial.interval_fractions(0.0, 1.0)
    vals = rho.values * (inside + (1.0 - inside) * level)
    return f"dimmed_l{ell}_e{eps:.3f}", Density(grid, vals)


def generate_corpus(grid: SphericalGrid, count: int, base_seed: int = 0):
    for index in range(count):
        yield corpus_density(grid, index, base_seed)


def sandwiched_density(grid: SphericalGrid, index: int, base_seed: int = 0,
                       theta_max: float = 0.05) -> tuple[str, Density]:
    """Shell-sandwiched corpus element (sandwich width below theta_max)."""
    rng = _rng(base_seed, index)
    N = grid.dim
    ell = int(rng.integers(1, 7)) if N >= 2 else 1
    eps = float(rng.uniform(0.2, 0.9)) * theta_max
    rho = perturbed_ball(grid, ell, eps, pole=_random_unit(rng, N))
    if index % 3 == 2:
        level = float(rng.uniform(0.4, 0.95))
        inside = grid.radial.interval_fractions(0.0, 1.0)
        rho = Density(grid, rho.values * (inside + (1.0 - inside) * level))
    return f"sandwiched_l{ell}_e{eps:.4f}", rho


def generate_sandwiched(grid: SphericalGrid, count: int, base_seed: int = 0,
                        theta_max: float = 0.05):
    for index in range(count):
        yield sandwiched_density(grid, index, base_seed, theta_max)
