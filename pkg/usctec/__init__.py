"""Storage placement and coded matrix multiplication for elastic clusters with stragglers."""

from .load import solve_lp as solve_lp
from .model import validate as validate
from .config import load_settings as load_settings
from .division import divide as divide
from .division import build_assignment as build_assignment
from .simulator import verify_round as verify_round
from .simulator import evaluate_system as evaluate_system
from .strategies import get_strategy as get_strategy
from .strategies.placement import place as place
