"""Atmosphere, aircraft model, dynamics, integration, optimization and I/O for the climb predictor"""
