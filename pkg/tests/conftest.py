import math

import pytest

import kolpot as kp
from kolpot.fundsol import GammaEvaluator
from kolpot.quadrature import QuadratureConfig

# radii chosen so the temporal depth equals one for the first two operators
HEAT1_R = math.sqrt(4.0 * math.pi)
PROTO_R = 2.0 * math.pi / math.sqrt(3.0)


@pytest.fixture(scope="session")
def heat1():
    return kp.heat_operator(1)


@pytest.fixture(scope="session")
def heat2():
    return kp.heat_operator(2)


@pytest.fixture(scope="session")
def proto():
    return kp.kolmogorov_prototype()


@pytest.fixture(scope="session")
def chain():
    return kp.chain_operator()


@pytest.fixture(scope="session")
def all_specs(heat1, heat2, proto, chain):
    return {"heat1": heat1, "heat2": heat2, "proto": proto, "chain": chain}


@pytest.fixture(scope="session")
def evaluators(all_specs):
    return {name: GammaEvaluator(spec) for name, spec in all_specs.items()}


@pytest.fixture(scope="session")
def balls(all_specs, evaluators):
    radii = {"heat1": HEAT1_R, "heat2": 4.0, "proto": PROTO_R, "chain": 4.0}
    return {
        name: kp.lball(spec, radii[name], ev=evaluators[name])
        for name, spec in all_specs.items()
    }


@pytest.fixture()
def quad_cfg():
    return QuadratureConfig(time_tol=1e-8, seed=20240811)
