"""snowlab: a laboratory for read-only-transaction protocols.

Four protocols over a deterministic simulated asynchronous network, complete
execution recording, and strict-serializability verification by both a
tag-witness checker and an independent brute-force oracle, plus structural
monitors for the non-blocking / round-count / version-count / write-liveness
read properties.
"""

from .core import (ACK, READ, WRITE, History, Invocation, Key, SequentialState,
                   SystemConfig, TxnRecord, read_txn, realtime_precedes,
                   seq_apply, write_txn)
from .protocols import PROTOCOLS, get_protocol
from .simnet import (Exploration, RandomPolicy, ScriptedPolicy, World, explore,
                     run_to_quiescence, step)
from .harness import (Exhaustive, ExperimentReport, Workload,
                      canonical_snow_scenario, check_history, fuzz_campaign,
                      generate_workload, run_experiment, run_plan)

__version__ = "0.1.0"
