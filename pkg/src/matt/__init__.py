"""MATT: transfer RGB-derived segmentation labels onto co-aligned multispectral imagery."""

__version__ = "0.1.0"
