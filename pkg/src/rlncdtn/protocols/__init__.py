"""Forwarding disciplines, seeding and run drivers."""
from .bloom import CountingBloomFilter
from .runs import (default_ttl, density_counts, first_contact_efficiency, place_initial,
                   run_benchmark, run_pipelined, run_plain)
from .seeding import (Seeder, SeedingMode, SeedingReport, default_release_delay, seed_batch,
                      simulate_seeding)
from .state import (SOURCE, ContactOutcome, Feedback, Forwarding, NodeState, ProtocolKind,
                    SimState, handle_contact, handle_contact_delta, handle_contact_gamma)

__all__ = [
    "CountingBloomFilter", "default_ttl", "density_counts", "first_contact_efficiency",
    "place_initial", "run_benchmark", "run_pipelined", "run_plain", "Seeder", "SeedingMode",
    "SeedingReport", "default_release_delay", "seed_batch", "simulate_seeding", "SOURCE",
    "ContactOutcome", "Feedback", "Forwarding", "NodeState", "ProtocolKind", "SimState",
    "handle_contact", "handle_contact_delta", "handle_contact_gamma",
]
