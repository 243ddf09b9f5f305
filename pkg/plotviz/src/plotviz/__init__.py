"""Figure rendering for rydcz scan tables."""

__version__ = "0.1.0"

from .figures import FigureSpec, plot_heatmap, plot_lines  # noqa: F401
from .tables import ScanTable, TableFormatError, load_table  # noqa: F401
