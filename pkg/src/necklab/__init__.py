"""Morse index of harmonic maps on degenerating collars, computed numerically.

Submodules
----------
domain     flat collars, annulus charts and cylinder grids
target     embedded targets (round spheres)
solver     discrete harmonic maps and continuation sweeps
spectrum   Jacobi operator, weights and index/nullity counting
geodesic   index of geodesic segments
neckstats  neck diagnostics (average length, Lorentz norms, geodesic fits)
lab        scenarios, ledgers, cache, reports and the CLI
"""
__version__ = "0.1.0"
