"""Protocol registry."""

from .common import ProtocolSpec, payload_from_wire
from .algo_a import PROTO_A
from .algo_b import PROTO_B
from .algo_c import PROTO_C
from .naive import PROTO_NAIVE

PROTOCOLS: dict[str, ProtocolSpec] = {
    p.name: p for p in (PROTO_A, PROTO_B, PROTO_C, PROTO_NAIVE)
}


def get_protocol(name: str) -> ProtocolSpec:
    try:
        return PROTOCOLS[name]
    except KeyError:
        raise ValueError(f"unknown protocol {name!r}; "
                         f"choose from {sorted(PROTOCOLS)}") from None
