"""fcdkit - Flexible-weighted Chamfer Distance toolkit"""

__version__ = "0.1.0"
