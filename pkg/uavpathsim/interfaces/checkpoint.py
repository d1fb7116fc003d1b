"""
Reader and writer for trained deep ESN models.

A checkpoint is one netCDF file (``models.nc`` when a directory is given) with one group per UAV. Each group
holds the float64 matrices ``w_in_<n>``, ``w_<n>`` and ``w_out`` and the header attributes: layer count, layer
sizes, input and action counts, leak rates, spectral radius target, input scale and the configuration hash.
"""

from __future__ import annotations
import logging
import os

import numpy as np
import xarray as xr
from netCDF4 import Dataset

from uavpathsim.learning.deep_esn import DeepEsn, EsnLayer
from uavpathsim.utilities import CheckpointMismatchError

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = 'models.nc'


def checkpoint_file(path) -> str:
    path = os.fspath(path)
    return os.path.join(path, CHECKPOINT_NAME) if os.path.isdir(path) or not path.endswith('.nc') else path


def _to_dataset(esn: DeepEsn, config_hash: str) -> xr.Dataset:
    ds = xr.Dataset()
    for n, layer in enumerate(esn.layers):
        fan_in = 'inputs' if n == 0 else 'units_{}'.format(n - 1)
        ds['w_in_{}'.format(n)] = (['units_{}'.format(n), fan_in], layer.w_in)
        ds['w_{}'.format(n)] = (['units_{}'.format(n), 'recurrent_{}'.format(n)], layer.w)
    ds['w_out'] = (['actions', 'features'], esn.w_out)
    ds.attrs['n_layers'] = len(esn.layers)
    ds.attrs['layer_sizes'] = np.asarray(esn.layer_sizes, dtype=np.int64)
    ds.attrs['n_inputs'] = esn.n_inputs
    ds.attrs['n_actions'] = esn.n_actions
    ds.attrs['leak_rates'] = np.asarray(esn.leak_rates, dtype=float)
    ds.attrs['spectral_radius_target'] = float(esn.spectral_radius_target)
    ds.attrs['input_scale'] = float(esn.input_scale)
    ds.attrs['config_hash'] = config_hash
    return ds


def _from_dataset(ds: xr.Dataset) -> DeepEsn:
    n_layers = int(ds.attrs['n_layers'])
    leaks = np.atleast_1d(ds.attrs['leak_rates'])
    layers = []
    for n in range(n_layers):
        w = np.array(ds['w_{}'.format(n)].values, dtype=np.float64)
        layers.append(EsnLayer(w_in=np.array(ds['w_in_{}'.format(n)].values, dtype=np.float64), w=w,
                               leak=float(leaks[n]), state=np.zeros(w.shape[0])))
    esn = DeepEsn(layers, np.array(ds['w_out'].values, dtype=np.float64),
                  spectral_radius_target=float(ds.attrs['spectral_radius_target']),
                  input_scale=float(ds.attrs['input_scale']))
    if esn.n_inputs != int(ds.attrs['n_inputs']) or esn.n_actions != int(ds.attrs['n_actions']):
        raise ValueError('checkpoint header does not match its matrices')
    return esn


def save_models(models: list[DeepEsn], path, config_hash: str) -> str:
    """Write one group per UAV model

    Args:
        path: directory (created if missing) or .nc file
        config_hash: hash of the configuration the models were trained with

    Returns:
        the written file name
    """
    if not os.fspath(path).endswith('.nc'):
        os.makedirs(path, exist_ok=True)
    fname = checkpoint_file(path)
    if os.path.exists(fname):
        os.remove(fname)
    for uav_id, esn in enumerate(models):
        mode = 'a' if os.path.exists(fname) else 'w'
        _to_dataset(esn, config_hash).to_netcdf(fname, mode=mode, group='uav_{}'.format(uav_id))
    logger.info('Saved %d models to %s', len(models), fname)
    return fname


def load_models(path, config_hash: str | None = None, allow_mismatch: bool = False) -> list[DeepEsn]:
    """Read the models of a checkpoint

    Args:
        path: directory or .nc file
        config_hash: expected configuration hash, not checked when ``None``
        allow_mismatch: load despite a different configuration hash

    Raises:
        FileNotFoundError: no checkpoint at ``path``
        CheckpointMismatchError: the checkpoint was written for another configuration
    """
    fname = checkpoint_file(path)
    if not os.path.exists(fname):
        raise FileNotFoundError('Checkpoint {} was not found'.format(fname))
    with Dataset(fname, 'r') as rootgrp:
        groups = sorted(rootgrp.groups, key=lambda name: int(name.split('_')[1]))

    models = []
    warned = False
    for group in groups:
        with xr.open_dataset(fname, group=group) as stored:
            ds = stored.load()
        stored_hash = ds.attrs.get('config_hash')
        if config_hash is not None and stored_hash != config_hash:
            if not allow_mismatch:
                raise CheckpointMismatchError(
                    'checkpoint {} was trained with configuration {} but the current configuration is {}'.format(
                        fname, stored_hash, config_hash))
            if not warned:
                logger.warning('Loading %s despite configuration hash mismatch', fname)
                warned = True
        models.append(_from_dataset(ds))
    return models
