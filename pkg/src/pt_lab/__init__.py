"""Population-transfer laboratory.

Simulation and statistics toolkit for the population-transfer (PT)
protocol in transverse-field spin systems: exact state-vector dynamics
on small instances, closed-form down-folded impurity-band Hamiltonians,
preferred-basis Levy-matrix ensemble statistics, the analog multi-target
Grover comparison, and the hybrid PT + steepest-descent pipeline.
"""

__version__ = "0.1.0"

from .instances import (
    ImpurityBandInstance,
    SpinGlassInstance,
    gen_impurity_band,
    gen_spin_glass,
    classical_energy,
    ib_energy,
    spectrum_summary,
    save_instance,
    load_instance,
)
from .bits import hamming
from .statevector import (
    StateVector,
    EvolutionConfig,
    evolve_trotter,
    exact_eigs,
    transition_probability,
    survival_probability,
    run_pt_protocol,
)
from .downfold import (
    TunnelingParams,
    DownfoldedMatrix,
    theta,
    v_typ,
    tunneling_amplitude,
    build_downfolded,
    pdf_w,
    sample_w,
    extract_numeric_elements,
)
from .pblm import (
    PBLMConfig,
    LevyStableParams,
    MinibandDiagnostics,
    sample_pblm,
    classify_phase,
    omega_predicted,
    sigma_omega,
    mu_omega,
    predicted_gamma_law,
    stable_pdf,
    stable_sample,
    cauchy_shift_pdf,
    extract_gamma,
    site_self_energies,
    participation_ratios,
    fit_stable_quantiles,
    pt_time,
)
from .grover import (
    GroverSetup,
    grover_time,
    build_reduced_hamiltonian,
    perturbative_transfer,
    pt_time_with_error,
)
from .optimize import (
    LocalMinimumRecord,
    AnnealSchedule,
    steepest_descent,
    enumerate_local_minima,
    basin_distribution,
    enrichment_ratio,
    simulated_annealing,
)
