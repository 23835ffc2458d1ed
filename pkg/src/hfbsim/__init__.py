"""Spectral simulator and norm-verification harness for coupled
condensate / pair-excitation (Hartree-Fock-Bogoliubov type) dynamics on a
periodic grid, with an N-sweep measurement harness for Strichartz-type and
collapsing norms and a linear-model estimate validator."""

from .grid import (
    FourierMultiplier,
    GridError,
    GridSpec,
    OneBodyField,
    PairKernel,
    apply_multiplier,
    lp_project,
    make_grid,
    rotate_pair_coords,
)
from .kernels import (
    BogoliubovPair,
    KernelError,
    assemble_densities,
    block_exp_oracle,
    compose,
    delta_kernel,
    sh_ch_from_k,
    trace,
    weighted_compose,
)
from .potential import (
    PotentialError,
    PotentialSpec,
    build_base_potential,
    convolve_density,
    scale_potential,
)
from .evolution import (
    EnergyReport,
    EvolutionError,
    BlowupError,
    GaussianProfile,
    HFBState,
    Trajectory,
    energy_report,
    evolve,
    init_state,
    rank_one_pair_kernel,
    step,
)
from .norms import (
    AdmissiblePair,
    NormError,
    NormReport,
    admissible_pairs,
    collapsing_norm,
    compute_named_norm,
    mixed_norm,
    strichartz_norm,
    time_frac_deriv,
    uniform_in_n_report,
)
from .linear import (
    InequalityRecord,
    LinearProblem,
    evaluate_inequalities,
    manufacture_data,
    solve_linear,
)
from .harness import (
    ConfigError,
    ScenarioConfig,
    emit_report,
    parse_config,
    run_scenario,
    serialize_config,
    sweep_n,
)
