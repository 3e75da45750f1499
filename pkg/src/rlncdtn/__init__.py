"""Random linear network coding over delay-tolerant contact networks."""
__version__ = "0.1.0"
