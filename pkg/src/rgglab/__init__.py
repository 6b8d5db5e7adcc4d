"""Simulation laboratory for random geometric graphs over radial Poisson samples."""

from rgglab.density import (
    DensitySpec,
    HeavyTail,
    LightTail,
    NumericFailure,
    RadialMeasure,
    ball_mass,
    ball_volume,
    cube_mass,
    eval_density,
    gaussian_spec,
    heavy_tail_spec,
    light_tail_spec,
    psi,
    psi_inverse,
    psi_prime,
    radial_cdf,
    radial_measure,
    radial_tail,
    sphere_surface_area,
    tail_mass,
)
from rgglab.graph import ConnectivityStats, GeometricGraph, build, iter_edges, stats
from rgglab.harness import (
    ExperimentConfig,
    RSchedule,
    SweepResult,
    TrialRecord,
    density_label,
    parse_density,
    run,
    run_trial,
)
from rgglab.partition import (
    CubePartition,
    InsufficientResolution,
    build_partition,
    check_concentration,
    count_points,
)
from rgglab.sampler import PointCloud, child_seed, radial_ks_statistic, sample
from rgglab.theory import (
    ThresholdReport,
    chernoff_h,
    classify,
    concentration_radii,
    expected_isolated,
    heavy_tail_radii,
    light_tail_radii,
    poisson_tail_bound,
    tail_empty_prob,
    tau,
)

__all__ = [
    "DensitySpec",
    "HeavyTail",
    "LightTail",
    "NumericFailure",
    "RadialMeasure",
    "ConnectivityStats",
    "GeometricGraph",
    "PointCloud",
    "CubePartition",
    "InsufficientResolution",
    "ExperimentConfig",
    "RSchedule",
    "SweepResult",
    "ThresholdReport",
    "TrialRecord",
    "ball_mass",
    "ball_volume",
    "build",
    "build_partition",
    "check_concentration",
    "chernoff_h",
    "child_seed",
    "classify",
    "concentration_radii",
    "count_points",
    "cube_mass",
    "density_label",
    "eval_density",
    "expected_isolated",
    "gaussian_spec",
    "heavy_tail_radii",
    "heavy_tail_spec",
    "iter_edges",
    "light_tail_radii",
    "light_tail_spec",
    "parse_density",
    "poisson_tail_bound",
    "psi",
    "psi_inverse",
    "psi_prime",
    "radial_cdf",
    "radial_ks_statistic",
    "radial_measure",
    "radial_tail",
    "run",
    "run_trial",
    "sample",
    "sphere_surface_area",
    "stats",
    "tail_empty_prob",
    "tail_mass",
    "tau",
]
