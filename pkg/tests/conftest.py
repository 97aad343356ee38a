import pytest

from fragkernel.kernels import Family, KernelSpec, PowerLaw


def one_component_kernels(n):
    return {
        "random": KernelSpec(Family.RANDOM, n),
        "partially_random": KernelSpec(Family.PARTIALLY_RANDOM, n, kappa=PowerLaw(2)),
        "weighted_gamma-1": KernelSpec(Family.WEIGHTED_FUNCTIONAL, n, weights=PowerLaw(-1)),
        "weighted_gamma0": KernelSpec(Family.WEIGHTED_FUNCTIONAL, n, weights=PowerLaw(0)),
        "weighted_gamma1": KernelSpec(Family.WEIGHTED_FUNCTIONAL, n, weights=PowerLaw(1)),
        "weighted_gamma0.5_kappa": KernelSpec(
            Family.WEIGHTED_FUNCTIONAL, n, kappa=PowerLaw(1.5), weights=PowerLaw(0.5)
        ),
    }


def bicomponent_kernels(n):
    return {
        "bicomponent_random": KernelSpec(Family.BICOMPONENT_RANDOM, n),
        "bicomponent_partially_random": KernelSpec(Family.BICOMPONENT_PARTIALLY_RANDOM, n, kappa=PowerLaw(-1)),
        "bicomponent_independent": KernelSpec(Family.BICOMPONENT_INDEPENDENT, n),
    }


@pytest.fixture
def random3():
    return KernelSpec(Family.RANDOM, 3)
