"""Variable-length quantum coding with Huffman codes over the source eigenbasis."""

__version__ = "0.1.0"
