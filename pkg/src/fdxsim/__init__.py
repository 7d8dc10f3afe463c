"""Link-level Monte Carlo simulator and allocation library for the uplink of a
single-cell in-band full-duplex cooperative OFDMA network."""

__version__ = "0.1.0"
