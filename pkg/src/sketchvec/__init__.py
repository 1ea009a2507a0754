"""Vectorization of rough line sketches into cubic Bezier centerlines.

Stages: ``linex`` (stroke extraction), ``thin`` (skeletonisation), ``pathgraph``
(skeleton to paths), ``bezfit`` (curve fitting); ``evalgen`` builds synthetic
benchmarks and ``cli`` wires everything together.
"""

__version__ = "0.1.0"
