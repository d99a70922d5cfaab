"""Feedback-gain synthesis and simulation for synchronizing networks of
identical neutrally stable continuous-time linear systems.

Workflow: classify the agent matrix (:mod:`netsync.linalg`), validate the
coupling topology (:mod:`netsync.network`), synthesize a diffusive
feedback gain that works for every connected topology
(:mod:`netsync.gains`), then simulate the coupled network and verify
convergence to the predicted common trajectory (:mod:`netsync.simulate`).
The ``netsync`` CLI drives the same pipeline from scenario files.
"""

from .errors import (
    AssumptionError,
    ConfigError,
    IllConditionedSplitError,
    IntegrationError,
    MatrixError,
    NetsyncError,
    TopologyError,
)
from .gains import (
    GainSynthesis,
    LinearAgent,
    basis_invariance_check,
    cesaro_gram,
    cesaro_gram_quadrature,
    gain_residuals,
    synthesize_output_gain,
    synthesize_state_gain,
)
from .linalg import (
    ModalDecomposition,
    SpectrumReport,
    expm,
    is_controllable,
    is_detectable,
    is_neutrally_stable,
    is_observable,
    is_skew_symmetric,
    is_stabilizable,
    modal_split,
    spd_sqrt,
    spectrum,
)
from .network import (
    LyapunovCertificate,
    NetworkTopology,
    ergodic_limit_check,
    lyapunov_certificate,
    random_connected_topology,
    spectral_gap,
    stationary_vector,
    validate_topology,
)
from .scenario import (
    InitialStateSpec,
    ScenarioConfig,
    TopologySpec,
    build_initial_state,
    build_topology,
    config_from_dict,
    config_to_dict,
    load_config,
    write_config,
)
from .simulate import (
    CoupledSystem,
    SimulationRun,
    SpectralReport,
    assemble,
    assemble_skew_coupled,
    modal_error,
    reference_trajectory,
    simulate,
    spectral_check,
)

__version__ = "0.1.0"
