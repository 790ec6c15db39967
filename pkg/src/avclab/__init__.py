"""Desk-scale audiovisual crowd counting laboratory."""

__version__ = "0.1.0"
