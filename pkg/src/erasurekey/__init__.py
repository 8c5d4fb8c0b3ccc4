"""Group secret agreement over packet-erasure broadcast channels.

A library, simulator, and CLI for establishing a common secret among n
terminals on a lossy broadcast medium, with exact rank-based verification of
what an eavesdropper can and cannot reconstruct.
"""

from erasurekey.field import GF, get_field

__all__ = ["GF", "get_field"]
__version__ = "0.1.0"
