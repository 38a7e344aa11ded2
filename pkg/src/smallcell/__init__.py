"""Linear small-cell networks: closed-form handover metrics, speed-based power
control, cell sizing and a time-stepped network simulator."""

from .analytic import (HoConstants, analytic_metrics, capacity_rate, completion_prob,
                       completion_prob_exact, erlang_b, ho_constants, ho_probabilities, ho_rate,
                       load_factor, load_factor_classes, load_factor_continuous, region_rates,
                       service_times)
from .errors import (ApproximationWarning, ConfigError, InsufficientData, InsufficientPowerBudget,
                     InvalidArgument, PreconditionError, RegimeViolation, SmallCellError,
                     UnsupportableVelocity, UnsupportedDimension)
from .model import KMPH, CellGeometry, SpeedModel, TrafficModel, TruncatedGaussianSpeed, UniformSpeed
from .power import (AlphaRule, DiscretePower, EqualPower, LinearPower, MonomialPower, PowerPolicy,
                    SpeedClasses, continuous_optimal_power, discrete_optimal_power,
                    oracle_minimize_discrete, pv_matrix, rho_at_optimum, velocity_limit)
from .scns import MetricsReport, SimConfig, Simulator, estimate_intermediate, run, run_replications
from .sizing import (ScalingSpec, joint_cost, optimal_cell_size_closed_form,
                     optimal_cell_size_numeric)
