"""
This module contains data storing classes
"""
# Global libs
import logging
import os

import pandas as pd
import xarray as xr
from netCDF4 import Dataset

# Local libs
from uavpathsim.data_storage.data_template import AbstractResultData, EpisodeMetrics, LearningCurve
from uavpathsim.utilities import assure_unique_name

logger = logging.getLogger(__name__)

RESULT_CLASSES = {cls.kind: cls for cls in (EpisodeMetrics, LearningCurve)}


class ResultDataWrapper(dict):
    """
    A wrapping class to store results of different schemes (f.ex. proposed, shortest-path) and different runs
    (f.ex. different seeds or episodes) in a uniform way: ``results[scheme][dataset_name]``
    """
    def add_data(self, scheme, name, dataset_obj):
        """
        Args:
            scheme (str): scheme identifier
            name (str): string identifier for this run
            dataset_obj (AbstractResultData): result container

        Returns:
            the (possibly renamed) dataset name

        Note:
            '&' can not be in the scheme key or dataset key
        """
        if '&' in scheme or '&' in name:
            raise ValueError("'&' is not allowed in scheme or dataset names")
        if scheme not in self:
            self[scheme] = {}
        if name in self[scheme]:
            name = assure_unique_name(name, self[scheme].keys())
        self[scheme][name] = dataset_obj
        return name

    def remove_data(self, branch):
        """
        Remove data from the database

        Args:
            branch (list): ['scheme'] removes a scheme, ['dataset_name', 'scheme'] removes one dataset
        """
        if len(branch) == 1:
            del self[branch[0]]
        elif len(branch) == 2:
            del self[branch[1]][branch[0]]
        else:
            raise ValueError('The list provided can only have 1 or 2 values')

    def save(self, fname='UAVPathSimResults.nc'):
        """
        Save the database to a file.

        Each scheme/dataset pair is saved as a separate group of the netcdf file.

        IMPORTANT: the standard scipy netcdf backend does not support saving to a group
                -> netCDF4 has to be installed. (by default xarray will use netCDF4 if it is installed)

        Args:
            fname (str, optional): file to which database will be saved
        """
        # If the file already exists, it is first removed. Otherwise the .to_netcdf methods below would add the
        # current database to the file.
        if os.path.exists(fname):
            os.remove(fname)

        for scheme in self:
            for datasetname, dataset_obj in self[scheme].items():
                mode = 'a' if os.path.exists(fname) else 'w'
                dataset_obj.ds.to_netcdf(fname, mode=mode, group=scheme + '&' + datasetname)
        logger.info('Saved %d datasets to %s', sum(len(v) for v in self.values()), fname)

    def load(self, fname='UAVPathSimResults.nc'):
        """
        Load the database from a file.

        xr.open_dataset can not automatically find all groups in a netCDF4 file. So we first find the available
        group names in the file, then load the xarray datasets.

        Args:
            fname (str, optional): file from which the database will be loaded

        Returns:
            dict scheme -> list of loaded dataset names

        Raises:
            FileNotFoundError: the file does not exist
        """
        if not os.path.exists(fname):
            raise FileNotFoundError('Requested result file {} was not found'.format(fname))

        with Dataset(fname, "r") as rootgrp:
            group_names = list(rootgrp.groups)

        loaded_data = dict()
        for full_datasetname in group_names:
            scheme, datasetname = full_datasetname.split('&', 1)
            with xr.open_dataset(fname, group=full_datasetname) as stored:
                ds = stored.load()
            result_class = RESULT_CLASSES.get(ds.attrs.get('kind'), AbstractResultData)
            if result_class is AbstractResultData:
                logger.warning('%s data of unknown kind, a plain AbstractResultData object will be made',
                               full_datasetname)
            dataset_obj = result_class()
            dataset_obj.ds = ds
            dataset_obj.ds.attrs["database_file"] = str(fname)
            datasetname = self.add_data(scheme, datasetname, dataset_obj)
            loaded_data.setdefault(scheme, []).append(datasetname)
        return loaded_data

    def to_frame(self) -> pd.DataFrame:
        """One row per stored episode with its aggregated metrics"""
        rows = []
        for scheme in self:
            for datasetname, dataset_obj in self[scheme].items():
                if isinstance(dataset_obj, EpisodeMetrics):
                    row = {'scheme': scheme, 'dataset': datasetname,
                           'seed': int(dataset_obj.ds.attrs['seed']), 'episode': int(dataset_obj.ds.attrs['episode'])}
                    row.update(dataset_obj.summary_row())
                    rows.append(row)
        return pd.DataFrame(rows)
