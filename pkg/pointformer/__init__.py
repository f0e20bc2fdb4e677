__version__ = "0.1.1"
__author__ = "Val Neekman"
