"""Hidden semi-Markov chains: simulation, filtering, smoothing and estimation."""
from .embedding import (EmbeddedModel, build_embedded, embedded_filter, embedded_predict,
                        enumerate_posterior)
from .estimate import (StatisticState, collect_statistics, estimate, initial_statistics,
                       reestimate_a, reestimate_observation, statistics_step, step_G,
                       step_N)
from .filter import (FilterResult, FilterState, b_matrix, filter_step, initial_state,
                     run_filter)
from .kernels import BACKEND
from .model import (JumpKernel, ModelError, NumericalGuardError, ObservationModel,
                    SemiMarkovModel, SojournLaw, exit_probability, gamma, hazard, load_bundled,
                    load_model, model_from_dict, transition_matrix)
from .simulate import (PathRecord, martingale_diagnostic, observe_path, occupation_clock,
                       simulate, simulate_path)
from .smoother import SmootherPass, backward_pass, run_smoother, smooth

__version__ = "0.1.0"
