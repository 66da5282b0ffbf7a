"""Reference scoring server for the slot-infill remote protocol."""

from .app import PROTOCOL_VERSION, app, create_app
from .toy import ToyInstance

__all__ = ["PROTOCOL_VERSION", "ToyInstance", "app", "create_app"]
