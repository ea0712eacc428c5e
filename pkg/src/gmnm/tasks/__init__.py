from .dataset import Dataset, load_csv, save_csv
from .fit2d import LEVELS, PRINTED_SIGMA, FitLevel, gaussian_density, sample_fit_dataset, target_2d
from .mnist import IdxFormatError, mnist_load, mnist_split
from .poisson import ExactSolution, PdeConfig, ZeroModel, l2_error, pde_losses, pde_terms
from .timeseries import TsConfig, ts_generate
