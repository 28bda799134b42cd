"""Cournot oligopoly with endogenous entry in a stochastic growth model.

Markets host a handful of heterogeneous firms that pay a fixed cost to
operate.  Because the number of active firms rises with aggregate capital,
the economy can have several stable steady states, and large enough shocks
move it into a low-capital, high-markup regime.
"""

from .params import MODEL_VERSION, ModelError, ParamError, ParamSet, param_hash, preset, validate_params
from .technology import TechnologySet, draw_technology, symmetric_technology
from .oligopoly import (MarketEquilibrium, InfeasibleMarket, markup_of_share, market_n_star,
                        solve_market, solve_market_eta1)
from .aggregate import (AggregateState, DrawnEconomy, FirmSet, GridSolution, aggregate_indices,
                        audit_free_entry, solve_firm_set, solve_grid, static_equilibrium,
                        static_equilibrium_variable_fc)
from .dynamics import (MarkovChain, SavingsPolicy, SimPath, euler_residuals, simulate,
                       solve_policy, tauchen)
from .fragility import (SymmetricEconomy, apply_mps, chi, find_steady_states,
                        law_of_motion_deterministic, multiplicity_condition, rental_rate_map,
                        steady_states, sufficient_conditions, toy_economy)
from .experiments import (RecessionSpec, SolvedEconomy, build_economy, crisis_experiment,
                          ergodic, invert_tfp_shocks, irf, moments, policy_experiment,
                          recession_probabilities)

__version__ = MODEL_VERSION
