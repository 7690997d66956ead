"""Election coding: redundant data allocation that protects majority-vote SignSGD from Byzantine workers."""

__version__ = "0.1.0"
