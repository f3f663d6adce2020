"""Shared scenario builders for the test suite.

The builders return fresh ScenarioConfig objects so tests can derive
variants with with_changes without sharing mutable state.  The three
canonical 2D scenarios (growing crack, contraction measurement, static
base) are the ones the acceptance gate runs at full length; module
tests reuse them at shorter horizons.
"""

import numpy as np
import pytest

from crackdyn import (Domain1D, Domain2D, CrackSchedule, ScenarioConfig,
                      Tensor4Field, Workspace)


def growing_scenario(**overrides):
    """2D unit square, crack growing rightward from the left edge."""
    base = dict(
        name="growing",
        domain=Domain2D(dirichlet=("left", "right")),
        h=0.125,
        crack_points=((0.0, 0.5), (0.75, 0.5)),
        schedule=CrackSchedule.linear(0.25, 0.15),
        elastic=Tensor4Field.isotropic(2, 2.0, 1.0),
        viscous=Tensor4Field.isotropic(2, 0.5, 0.25),
        u0_exprs=("0.1*sin(pi*x)*sin(pi*y)", "0"),
        f_exprs=("sin(2*pi*x)*cos(t)", "0.5*cos(pi*x)*sin(t)"),
        uD_exprs=("0", "0"),
        T=1.0,
        dt=0.01,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def static_scenario(**overrides):
    """Same geometry and data with a stationary crack of extent 0.5."""
    overrides.setdefault("name", "static")
    overrides.setdefault("schedule", CrackSchedule.linear(0.5, 0.0))
    return growing_scenario(**overrides)


def contraction_scenario(**overrides):
    """Data-free scenario with a small viscous tensor, T = 2."""
    base = dict(
        name="contraction",
        domain=Domain2D(dirichlet=("left", "right")),
        h=0.125,
        crack_points=((0.0, 0.5), (0.75, 0.5)),
        schedule=CrackSchedule.linear(0.5, 0.0),
        elastic=Tensor4Field.isotropic(2, 2.0, 1.0),
        viscous=Tensor4Field.isotropic(2, 0.1, 0.05),
        T=2.0,
        dt=0.01,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def bar_scenario(**overrides):
    """1D bar with a breakable midpoint, clamped ends."""
    base = dict(
        name="bar",
        domain=Domain1D(dirichlet=("left", "right")),
        h=0.1,
        crack_points=(0.5,),
        schedule=None,
        elastic=Tensor4Field.isotropic(1, 1.0, 0.5),
        viscous=Tensor4Field.isotropic(1, 0.25, 0.125),
        u0_exprs=("sin(pi*x)",),
        uD_exprs=("0",),
        T=0.5,
        dt=0.01,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)


def workspace_for(config):
    return Workspace(config)
