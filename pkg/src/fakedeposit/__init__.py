"""Detection and exploitation of the ERC-20 fake-deposit flaw at bytecode level."""

__version__ = "0.1.0"
