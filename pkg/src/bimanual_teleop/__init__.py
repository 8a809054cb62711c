"""Hardware-free bimanual teleoperation stack.

Layered, bottom up: geometry -> kinematics -> (retargeting, ik,
coordination, safety, haptics, simulator) -> session -> gateway.  Each
layer only imports downward.
"""

__version__ = "0.1.0"
