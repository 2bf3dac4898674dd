"""
oml-stream - online metric learning for streaming multi-label classification.
"""

__version__ = "0.1.0"
__author__ = "Hal"
__email__ = "hal.long@outlook.com"
