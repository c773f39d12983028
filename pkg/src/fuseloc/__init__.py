"""Planar robot localization: EKF fusion of wheel odometry, compass and map fixes."""

__version__ = "0.1.0"
