"""Coordinated multi-cell downlink beamforming."""
