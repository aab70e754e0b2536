"""Directed quantum communication over uniformly coupled XY spin lattices."""

from .channels import (AmplitudeDampingParams, MultiParticleChannelParams, amplitude_damping_capacity,
                       binary_entropy, build_multiparticle_dilation, coherent_information,
                       verify_multiparticle_threshold)
from .experiments import (fit_loglog_slope, find_receiver_width, run_scaling_experiment,
                          scan_propagation_time)
from .lattice import (AbsorbingLayer, AntennaGeometry, LatticeSpec, Region, build_effective_hamiltonian,
                      enumerate_region, make_antenna_barrier, v_antenna)
from .propagation import PropagatorConfig, evolve, evolve_krylov, evolve_separable, group_velocity
from .states import StateVector, WavePacketSpec, inject_delta, make_wavepacket, pickup_probability

__version__ = "0.1.0"

__all__ = [
    "AbsorbingLayer",
    "AmplitudeDampingParams",
    "AntennaGeometry",
    "LatticeSpec",
    "MultiParticleChannelParams",
    "PropagatorConfig",
    "Region",
    "StateVector",
    "WavePacketSpec",
    "amplitude_damping_capacity",
    "binary_entropy",
    "build_effective_hamiltonian",
    "build_multiparticle_dilation",
    "coherent_information",
    "enumerate_region",
    "evolve",
    "evolve_krylov",
    "evolve_separable",
    "find_receiver_width",
    "fit_loglog_slope",
    "group_velocity",
    "inject_delta",
    "make_antenna_barrier",
    "make_wavepacket",
    "pickup_probability",
    "run_scaling_experiment",
    "scan_propagation_time",
    "v_antenna",
    "verify_multiparticle_threshold",
]
