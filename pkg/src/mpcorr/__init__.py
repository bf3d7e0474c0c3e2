"""Maximum-entropy margin-propagation correlator simulation."""
__version__ = "0.1.0"
