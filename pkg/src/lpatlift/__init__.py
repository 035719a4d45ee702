"""Lifting of linear preferential attachment trees and the arcsine coalescent."""

__version__ = "0.1.0"
