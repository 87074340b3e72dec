import pytest

from snowlab.core import Invocation
from snowlab.harness import Workload
from snowlab.simnet import RandomPolicy, World, run_to_quiescence


def build_world(protocol: str, k: int, scripts: dict[str, tuple[Invocation, ...]],
                arrival=None) -> World:
    return Workload(protocol, k, scripts, arrival=arrival).build_world()


def run_random(protocol: str, k: int, scripts, seed: int):
    return run_to_quiescence(build_world(protocol, k, scripts), RandomPolicy(seed))


class DrainFirstPolicy:
    """Picks the last enabled action: the network drains before any new
    transaction starts, so transactions execute strictly sequentially."""

    def choose(self, world, actions):
        return len(actions) - 1


@pytest.fixture
def drain_first():
    return DrainFirstPolicy()
