"""maxmart: max-martingale path transforms and their distributional laws."""

from .errors import (ConstraintError, DomainError, IntegrabilityError,
                     MaxmartError, NoSolutionError, ValidationError)
from .measures import (AtomicMeasure, OrderVerdict, QuantileProfile,
                       measure_from_spec, pareto_cdf)
from .montecarlo import (GenSpec, McReport, ecdf, generate, ks_distance,
                         last_passage_report, tv_atomic, uniform_law_report)
from .paths import (Path, StopEvent, ay_closed_form, ay_integral_form,
                    ay_inverse, detect_stop, read_path_csv, running_sup,
                    write_path_csv)
from .sde import (recover_driver, solve_bachelier_closed, solve_bachelier_euler,
                  solve_drawdown_closed, solve_drawdown_euler)
from .transforms import (PiecewiseLinearConcave, TransformProfile,
                         affine_profile, compose_profiles, concave_envelope,
                         delta_operator, exp_profile, hl_tail_dual,
                         hl_transform, icx_dominates, identity_profile,
                         log_profile, power_profile, profile_from_measure,
                         profile_from_phi, profile_from_w, stochastic_dominates,
                         u_from_h, v_from_w)
from .embedding import (ay_stopping_index, dominance_report, embed_report,
                        envelope_profile, exit_rule, fixed_time_rule,
                        floor_report)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
