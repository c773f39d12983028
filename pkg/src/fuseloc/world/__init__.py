"""Occupancy maps, simulated laser scans and a Monte Carlo pose source."""

from fuseloc.world.grid import OccupancyGrid, box_room, load_map, save_map
from fuseloc.world.mcl import MclConfig, ParticleSet, mcl_localize
from fuseloc.world.raycast import LaserScan, cast_rays, ray_cast, simulate_scan

__all__ = [
    "LaserScan", "MclConfig", "OccupancyGrid", "ParticleSet", "box_room", "cast_rays",
    "load_map", "mcl_localize", "ray_cast", "save_map", "simulate_scan",
]
