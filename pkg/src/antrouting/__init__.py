"""Ant Routing for payment-channel networks.

Submodules:

``seedstore``  bucketed AVL forests holding seeds
``protocol``   node state machine and wire codecs
``simnet``     deterministic discrete-event simulator
``capacity``   steady-state throughput model
``scaling``    local workload model, estimators and benchmark harness
``cli``        command-line front end
"""
__version__ = "0.1.0"
