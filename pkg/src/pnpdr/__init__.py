"""Property directed reachability for linear properties of Petri nets."""

__version__ = "0.1.0"
