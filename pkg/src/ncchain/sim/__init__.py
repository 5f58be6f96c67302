from .engine import ChainSimulator, run
from .measure import Delivery, measure

__all__ = ["ChainSimulator", "Delivery", "measure", "run"]
