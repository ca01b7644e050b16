"""Robust, cost-optimal gain allocation for Foschini-Miljanic power control under edge-adding attacks."""

__version__ = "0.1.0"
