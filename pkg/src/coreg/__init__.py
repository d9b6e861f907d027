"""Gaze-EEG co-registration toolkit: record, time-align, and analyze
co-registered eye-tracking and EEG data from online news reading."""

__version__ = "0.1.0"
