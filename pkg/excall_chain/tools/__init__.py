from .chain import register_chain_tools

__all__ = [
    "register_chain_tools",
]
