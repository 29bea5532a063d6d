"""Robust stability analysis of reaction networks with piecewise-linear-in-rates Lyapunov certificates."""
