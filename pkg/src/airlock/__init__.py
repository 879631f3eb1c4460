"""Desk-scale data airlock: three isolated trust zones joined only by
one-way persistent queues, moving human-vetted, signed batch jobs toward
restricted data and vetted results back out.

Import map by zone:
 - public zone: gateway (submission, vetting workflow, results release)
 - secure zone: executor + runner (validation, sandboxed execution)
 - restricted zone: vault (sealed datasets, one-time mount credentials)
 - shared substrate: walqueue, audit, attestation, archive, model
 - deployment wires one whole installation; cli holds the operator tools
"""

__all__ = ["AirlockSystem"]

__version__ = "0.1.0"


def __getattr__(name):
    # lazy: the offline signer imports this package and must never pull in
    # the gateway's HTTP stack as a side effect
    if name == "AirlockSystem":
        from .deployment import AirlockSystem

        return AirlockSystem
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
