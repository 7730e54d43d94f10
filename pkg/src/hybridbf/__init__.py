"""Link- and system-level simulator for 3D hybrid beamforming small cells."""

__version__ = "0.1.0"
