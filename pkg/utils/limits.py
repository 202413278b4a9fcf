import logging
from typing import Dict, Optional

from config import CONFIG
from models.errors import CapExceededError, InputError

logger = logging.getLogger('coarsemed.limits')

MODE_EXHAUSTIVE = "exhaustive"
MODE_SAMPLED = "sampled"


# Command-specific caps for exhaustive mode
# Map of command_name -> CONFIG key bounding the carrier size
COMMAND_LIMITS: Dict[str, str] = {
    # Algebra commands
    "validate": "MATERIALIZE_CAP",
    "closure": "TABLE_CAP",
    "walls": "MATERIALIZE_CAP",
    "cubify": "MATERIALIZE_CAP",

    # Metric commands
    "metric": "MATERIALIZE_CAP",
    "rectify": "MATERIALIZE_CAP",
    "cat0": "MATERIALIZE_CAP",

    # Coarse commands
    "hypmedian": "EXHAUSTIVE_CAP",
    "push": "EXHAUSTIVE_CAP",
    "pull": "EXHAUSTIVE_CAP",
    "lipschitz": "LIPSCHITZ_EXHAUSTIVE_CAP",
    "invariance": "EXHAUSTIVE_CAP",
}


# Commands that can fall back to seeded sampling past the cap
SAMPLING_COMMANDS = {"validate", "hypmedian", "push", "pull", "lipschitz", "invariance"}

def carrier_limit(command_name: str) -> Optional[int]:
    """
    Largest carrier a command accepts in exhaustive mode

    Args:
        command_name (str): The command name

    Returns:
        Optional[int]: The cap, or None when the command has no cap
    """
    key = COMMAND_LIMITS.get(command_name)
    return CONFIG[key] if key else None

def check_carrier(command_name: str, size: int, mode: str = MODE_EXHAUSTIVE):
    """
    Refuse carriers beyond the documented cap in exhaustive mode

    Commands that cannot sample are capped whatever the mode.

    Args:
        command_name (str): The command name
        size (int): Carrier size
        mode (str): 'exhaustive', 'sampled' or 'auto'

    Raises:
        CapExceededError: If the carrier is too large for exhaustive evaluation
    """
    limit = carrier_limit(command_name)
    if limit is None:
        return
    if command_name in SAMPLING_COMMANDS and mode != MODE_EXHAUSTIVE:
        return
    if size > limit:
        logger.error(f"{command_name}: carrier of {size} points exceeds {COMMAND_LIMITS[command_name]}={limit}")
        raise CapExceededError(f"{command_name} refuses {size} points in exhaustive mode (cap {limit})")

def resolve_mode(mode: Optional[str], n: int, cap: int, seed: Optional[int]) -> str:
    """
    Pick exhaustive or sampled evaluation for a carrier of ``n`` points.

    Raises:
        CapExceededError: If exhaustive mode is forced on a carrier beyond ``cap``
        InputError: For an unknown mode, or sampled mode without a seed
    """
    if mode is None:
        mode = MODE_EXHAUSTIVE if n <= cap else MODE_SAMPLED
    if mode == MODE_EXHAUSTIVE:
        if n > cap:
            raise CapExceededError(f"exhaustive mode refuses {n} points (cap {cap})")
        return mode
    if mode == MODE_SAMPLED:
        if seed is None:
            raise InputError("sampled mode needs a seed")
        return mode
    raise InputError(f"unknown mode {mode!r}")
