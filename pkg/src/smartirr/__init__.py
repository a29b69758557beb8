"""smartirr: a fully software-simulated smart irrigation platform.

Sensor field simulator -> MQTT-style bus -> append-only store -> data prep ->
C4.5 decision tree -> irrigation controller, with an HTTP/WebSocket gateway
for the operator dashboard.
"""

__version__ = "0.1.0"
