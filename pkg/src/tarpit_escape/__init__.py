"""Hybrid random GUI exploration with advisor-guided tarpit escaping."""

__version__ = "0.1.0"
