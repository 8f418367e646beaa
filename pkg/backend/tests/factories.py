import math

import factory

from grid.services import Grid
from integrator.config import NumericsConfig
from memory.kernels import KernelPair, PronyKernel
from model.services import Coupling, Material
from simulations.specs import (
    CertificationConfig,
    InitialData,
    Mode,
    OutputConfig,
    ProblemSpec,
)


class GridFactory(factory.Factory):
    class Meta:
        model = Grid

    dim = 1
    lengths = (math.pi,)
    n_cells = (49,)


class SquareGridFactory(GridFactory):
    dim = 2
    lengths = (math.pi, math.pi)
    n_cells = (15, 15)


class MaterialFactory(factory.Factory):
    class Meta:
        model = Material

    m0 = 1.0
    m1 = 0.1
    gamma = 1.0


class PronyKernelFactory(factory.Factory):
    class Meta:
        model = PronyKernel

    terms = ((0.25, 1.0),)


class KernelPairFactory(factory.Factory):
    class Meta:
        model = KernelPair

    g1 = factory.SubFactory(PronyKernelFactory)
    g2 = factory.SubFactory(PronyKernelFactory)


class CouplingFactory(factory.Factory):
    class Meta:
        model = Coupling

    a = 1.0
    b = 1.0
    p = 1.0
    n = 1


class NumericsFactory(factory.Factory):
    class Meta:
        model = NumericsConfig

    dt = 1e-2
    t_end = 1.0
    memory_mode = "direct"


class InitialDataFactory(factory.Factory):
    class Meta:
        model = InitialData

    u0_modes = (Mode((1,), 0.05),)
    v0_modes = (Mode((2,), 0.05),)


class CertificationFactory(factory.Factory):
    class Meta:
        model = CertificationConfig

    eta_budget = 16
    eta_refinement_steps = 20
    eta_modes = 4


class ProblemSpecFactory(factory.Factory):
    """Small-data problem on a coarse 1D grid."""

    class Meta:
        model = ProblemSpec

    domain = factory.SubFactory(GridFactory)
    material = factory.SubFactory(MaterialFactory)
    numerics = factory.SubFactory(NumericsFactory)
    kernels = factory.SubFactory(KernelPairFactory)
    coupling = factory.SubFactory(CouplingFactory, n=factory.SelfAttribute("..domain.dim"))
    initial = factory.SubFactory(InitialDataFactory)
    outputs = factory.LazyFunction(OutputConfig)
    certification = factory.SubFactory(CertificationFactory)
    seed = factory.Faker("pyint", min_value=0, max_value=10_000)


def config_data(**sections):
    """Minimal JSON config mapping of the default ProblemSpecFactory problem."""
    data = {
        "domain": {"dim": 1, "lengths": [math.pi], "n_cells": [49]},
        "material": {"m0": 1.0, "m1": 0.1, "gamma": 1.0},
        "kernels": {"g1": [{"a": 0.25, "b": 1.0}], "g2": [{"a": 0.25, "b": 1.0}]},
        "coupling": {"a": 1.0, "b": 1.0, "p": 1.0},
        "initial": {
            "u0_modes": [{"index": [1], "amplitude": 0.05}],
            "v0_modes": [{"index": [2], "amplitude": 0.05}],
        },
        "numerics": {"dt": 0.01, "t_end": 1.0, "memory_mode": "direct"},
        "certification": {"eta_budget": 16, "eta_refinement_steps": 20, "eta_modes": 4},
    }
    data.update(sections)
    return data


def blowup_spec(**numerics):
    """Strong in-phase coupling without Kirchhoff stiffening; diverges quickly."""
    return ProblemSpec(
        domain=Grid.interval(math.pi, 49),
        material=Material(m0=1.0),
        numerics=NumericsConfig(
            **{"dt": 1e-3, "t_end": 2.0, "divergence_threshold": 1e6, **numerics}
        ),
        coupling=Coupling(a=10.0, b=10.0, p=1.0),
        initial=InitialData(u0_modes=(Mode((1,), 5.0),), v0_modes=(Mode((1,), 5.0),)),
        certification=CertificationConfig(enabled=False),
    )
