"""Meshes, cameras, BVH ray queries, depth unprojection and object placement."""

from .bvh import BVH, SphereShape, accelerate, build_bvh, intersect
from .camera import (CameraError, PanoCamera, PerspectiveCamera, pano_direction, pano_dirs, pano_uv,
                     pixel_ray, project_pano, project_persp)
from .depth import DepthMap, depth_to_mesh, unproject
from .mesh import (GeometryError, Hit, Ray, Sphere, TriMesh, box_mesh, merge_meshes,
                   sphere_with_triangles, uv_sphere)
from .placement import PlacementError, place_object
from .scene import Scene

__all__ = [
    "BVH", "SphereShape", "accelerate", "build_bvh", "intersect",
    "CameraError", "PanoCamera", "PerspectiveCamera", "pano_direction", "pano_dirs", "pano_uv",
    "pixel_ray", "project_pano", "project_persp",
    "DepthMap", "depth_to_mesh", "unproject",
    "GeometryError", "Hit", "Ray", "Sphere", "TriMesh", "box_mesh", "merge_meshes",
    "sphere_with_triangles", "uv_sphere",
    "PlacementError", "place_object", "Scene",
]
