"""Valuation duration: dividend strips, duration measures and return predictability."""

from .affine import (ClosedForm2D, MarketCoefficients, ModelParams, ModelParams2D, StripCoefficients,
                     loglinearize, recover_states, recover_states_2d, solve_2d, solve_market_pd,
                     solve_pd_bar, solve_strip_coefficients, valuation_ratio)
from .data import DatedSeries, MarketSnapshot, Panel, align, annual_log_return, load_csv, write_csv
from .errors import DurlabError

__version__ = "0.1.0"
