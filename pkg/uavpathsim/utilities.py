"""
Module containing utilities for UAVPathSim.

Unit conversions, hashing helpers for manifests and checkpoints, the logging setup shared by the command line
tools and the exception types raised throughout the package.
"""

from __future__ import annotations
import hashlib
import json
import logging
import re

import numpy as np


LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'


class ConfigurationError(ValueError):
    """Raised for invalid configurations, unknown configuration keys or an infeasible resource block plan."""


class CapacityError(ConfigurationError):
    """Raised when a base station has fewer resource blocks than its attached devices request."""


class UnstableQueueError(ValueError):
    """Raised when the service rate of an M/D/1 queue does not exceed its arrival rate."""


class DivergenceError(RuntimeError):
    """Raised when the readout of an echo state network becomes non-finite during training."""


class CheckpointMismatchError(ValueError):
    """Raised when a checkpoint was written for a different configuration."""


def configure_logging(verbose: bool = False):
    """Install the root logging handler used by the command line tools

    Args:
        verbose: switch from INFO to DEBUG level
    """
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT, force=True)


def db_to_linear(value_db):
    """Convert a ratio in dB to a linear ratio"""
    return np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    """Convert a linear ratio to dB"""
    return 10.0 * np.log10(np.asarray(value, dtype=float))


def dbm_to_watt(value_dbm):
    """Convert a power in dBm to watt"""
    return db_to_linear(value_dbm) * 1e-3


def watt_to_dbm(value_w):
    """Convert a power in watt to dBm"""
    return linear_to_db(np.asarray(value_w, dtype=float) * 1e3)


def stable_hash(payload) -> str:
    """SHA-256 hex digest of the canonical JSON form of a (nested) dict/list payload

    Keys are sorted and floats are written with ``repr`` precision, so equal payloads always give equal digests.
    """
    text = json.dumps(payload, sort_keys=True, separators=(',', ':'), default=_json_default)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError('Object of type {} is not JSON serializable'.format(type(value).__name__))


def assure_unique_name(unique_name, occupied_names):
    """
    Modify unique name until no duplicate exists in occupied_names. Modification is done by adding (1), (2), etc.

    Args:
        unique_name : string
            string which should be unique
        occupied_names : array-like
            names which are already in use

    Returns:
        unique_name : string
            Modified unique_name if original unique_name was already available in occupied_names
    """
    while unique_name in occupied_names:
        if bool(re.search(r'\([0-9]+\)', unique_name)):
            counter = re.findall(r'\([0-9]+\)', unique_name)[-1]
            unique_name = unique_name.replace(counter, '({})'.format(int(counter[1:-1]) + 1))
        else:
            unique_name = unique_name + ' (1)'

    return unique_name
