"""Cooperative heat-and-power trading simulator.

Layers: market primitives, exact community best responses, aggregator
pricing and equilibrium search, a contract ledger with a hash-linked
chain, and credit-weighted consensus over a deterministic message
fabric.  The cli module ties them into runnable scenarios.
"""

from .market import (ChpParams, CityMarket, CommunityParams, Dispatch,
                     EnergySplit, MarketError, PricePair, adaption_coefficients,
                     aggregator_profits, des_utility, energy_split,
                     valid_k_intervals)
from .follower import (FollowerError, KktCase, KktSolution, best_response,
                       interior_stationary, lambda1_quadratic, lambda1_roots,
                       response_derivative_alpha, response_derivative_beta)
from .leader import (city_responses, clamp_optimum, concavity_probe,
                     decoupled_price_optimum, profit_e, profit_e_derivative,
                     profit_h)
from .equilibrium import (NeConfig, NeTrace, NoFixedPoint, SeOutcome, find_ne,
                          stackelberg_outcome)
from .ledger import (Account, BadContractState, Block, Chain, Contract,
                     ContractState, CrossCityPair, EnergyKind,
                     InsufficientBalance, InsufficientCapacity, Ledger,
                     LedgerError, MeterRejected, NotYetDue, Role, TransferEvent,
                     UnknownAccount, export_chain, make_block, make_genesis,
                     merkle_root, sign, sim_secret, validate_block, verify_chain,
                     verify_signature)
from .consensus import (AllCreditsZero, Behavior, ConsensusNode, FaultProfile,
                        RoundOutcome, TooFewNodes, check_quorum, elect_leader,
                        init_credits, min_quorum_cardinality, quorum_weight,
                        run_round, update_credits)
from .netsim import (EventQueue, PhaseNet, RunResult, deliver, make_nodes,
                     run_rounds, write_round_log)

__version__ = "0.1.0"
