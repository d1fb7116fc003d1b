"""
This module contains data storing classes
"""
# Global libs
import xarray as xr
import numpy as np
from datetime import datetime
import os

# Local libs


class AbstractResultData:
    """Abstract data class for simulation result data

    Subclassing of xarray datasets is not supported (https://github.com/pydata/xarray/issues/4660,
    https://github.com/pydata/xarray/issues/3980). So, instead we use the answer given in issue 4660, by creating a
    slot attribute for the dataset.

    Args:
        ds: xarray Dataset containing all result data
    """
    __slots__ = ("ds",)
    kind = "abstract"

    def __init__(self):
        self.__class__.ds.__set__(self, xr.Dataset())

        # Timestamp and user metadata are saved when the dataset class is initiated
        self.ds.attrs["kind"] = self.kind
        self.ds.attrs["timestamp"] = datetime.now().strftime("%c")
        try:
            self.ds.attrs["user"] = os.getlogin()
        except OSError:
            # This is used for the testing pipeline
            self.ds.attrs["user"] = "default_user"


class EpisodeMetrics(AbstractResultData):
    """Metrics of one test (or baseline) episode

    Variables over dimension ``uav``: steps, mean_delay_s, energy_j, arrived, mean_power_w, delivered_bits.
    Variable over dimension ``ue``: mean_rate_bps.
    Attributes: episode, seed, scheme, mean_interference_w, efficiency_bits_per_j.
    """
    __slots__ = ()
    kind = "episode_metrics"

    UAV_VARIABLES = ("steps", "mean_delay_s", "energy_j", "arrived", "mean_power_w", "delivered_bits")

    def __init__(self, steps=(), mean_delay_s=(), energy_j=(), arrived=(), mean_power_w=(), delivered_bits=(),
                 mean_rate_bps=(), mean_interference_w=0.0, episode=0, seed=0, scheme=""):
        super().__init__()
        self.ds["steps"] = (["uav"], np.asarray(steps, dtype=int))
        self.ds["mean_delay_s"] = (["uav"], np.asarray(mean_delay_s, dtype=float))
        self.ds["energy_j"] = (["uav"], np.asarray(energy_j, dtype=float))
        # netCDF has no bool type
        self.ds["arrived"] = (["uav"], np.asarray(arrived, dtype=np.int8))
        self.ds["mean_power_w"] = (["uav"], np.asarray(mean_power_w, dtype=float))
        self.ds["delivered_bits"] = (["uav"], np.asarray(delivered_bits, dtype=float))
        self.ds["mean_rate_bps"] = (["ue"], np.asarray(mean_rate_bps, dtype=float))
        self.ds.attrs["mean_interference_w"] = float(mean_interference_w)
        self.ds.attrs["episode"] = int(episode)
        self.ds.attrs["seed"] = int(seed)
        self.ds.attrs["scheme"] = scheme
        energy = float(np.sum(self.ds["energy_j"]))
        self.ds.attrs["efficiency_bits_per_j"] = float(np.sum(self.ds["delivered_bits"])) / energy if energy > 0 else 0.0

    def summary_row(self) -> dict:
        """Per-episode aggregates, averaged over UAVs and UEs"""
        def mean(name):
            values = self.ds[name].values
            return float(np.mean(values)) if values.size else float("nan")

        return {
            "steps": mean("steps"),
            "mean_delay_s": mean("mean_delay_s"),
            "energy_j": mean("energy_j"),
            "arrived": mean("arrived"),
            "mean_power_w": mean("mean_power_w"),
            "ue_rate_bps": mean("mean_rate_bps"),
            "mean_interference_w": float(self.ds.attrs["mean_interference_w"]),
            "efficiency_bits_per_j": float(self.ds.attrs["efficiency_bits_per_j"]),
        }


class LearningCurve(AbstractResultData):
    """Per-iteration training diagnostics

    Variables over dimension ``iteration``: td_error (mean absolute TD error), penalty (mean SINR penalty),
    steps (mean episode length). Attribute ``learn_rate``.
    """
    __slots__ = ()
    kind = "learning_curve"

    def __init__(self, td_error=(), penalty=(), steps=(), learn_rate=0.0):
        super().__init__()
        n = len(td_error)
        self.ds = self.ds.assign_coords(iteration=np.arange(n))
        self.ds["td_error"] = (["iteration"], np.asarray(td_error, dtype=float))
        self.ds["penalty"] = (["iteration"], np.asarray(penalty, dtype=float))
        self.ds["steps"] = (["iteration"], np.asarray(steps, dtype=float))
        self.ds.attrs["learn_rate"] = float(learn_rate)

    def block_means(self, variable="td_error", block=20) -> np.ndarray:
        """Mean of ``variable`` over consecutive blocks of ``block`` iterations (last block may be shorter)"""
        values = self.ds[variable].values
        return np.array([values[start:start + block].mean() for start in range(0, values.size, block)])
