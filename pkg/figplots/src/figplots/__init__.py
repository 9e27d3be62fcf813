"""Chart renderer for randred benchmark CSV files."""

from .render import (METADATA_KEY, NoDataError, PlotSpec, RenderResult,
                     SchemaError, aggregate, read_embedded_aggregates,
                     read_rows, render)

__version__ = "0.1.0"
