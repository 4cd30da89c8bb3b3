from .network import Delivery, NodeRole, SimNetwork, SimNode

__all__ = ["Delivery", "NodeRole", "SimNetwork", "SimNode"]
