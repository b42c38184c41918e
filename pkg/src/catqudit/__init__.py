"""Cat-state qudits, time-averaged effective Hamiltonians and a two-cavity entangling protocol."""

__version__ = "0.1.0"
