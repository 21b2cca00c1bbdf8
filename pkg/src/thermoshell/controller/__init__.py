from .model import ReducedModel, first_order_model, fit_step_response, identify_pump_channel, identify_reduced_model
from .mpc import MpcConfig, MpcController, MpcEstimate, build_problem, mpc_objective, mpc_step
from .pi import PiController, PiGains, pi_step, relay_autotune
from .profiles import SetpointProfile, cooling_staircase, heating_staircase
from .pump import PumpScheduler, pump_schedule
from .qp import solve_box_qp

__all__ = ["ReducedModel", "first_order_model", "fit_step_response", "identify_reduced_model",
           "identify_pump_channel", "MpcConfig", "MpcController", "MpcEstimate", "build_problem", "mpc_objective",
           "mpc_step", "PiController", "PiGains", "pi_step", "relay_autotune", "SetpointProfile",
           "heating_staircase", "cooling_staircase", "PumpScheduler", "pump_schedule", "solve_box_qp"]
