"""Radiance manifolds: render images from radiance stored on nested surfaces.

A scalar field defines a set of surfaces; a conditioned sine MLP provides
colour and occupancy on them. Radiance is gridded onto one 2D map per
surface, those maps are super-resolved by a style-modulated CNN, and images
are rendered by intersecting view rays with the surfaces, looking the maps up
and compositing front to back.
"""
from .camera import Camera, orbit_cameras
from .config import SceneConfig, load_config, parse_config
from .errors import (BadMagicError, ConfigError, DomainError, DuplicateNameError, MissingWeightsError,
                     ModelFormatError, RadManifoldError, TruncatedFileError, UnknownDtypeError,
                     WeightFileError)
from .export import (CachedRenderer, Mesh, OccupancyGrid, TexturedMesh, bake_textured_mesh,
                     fuse_occupancy, fusion_cameras, marching_cubes, render_cached)
from .geometry import (Hits, Intersection, Ray, ScalarField, SurfaceSet, eval_scalar_field,
                       init_default_surfaces, intersect_ray, intersect_rays)
from .gridding import MapStack, bg_transform, bg_transform_inverse, grid_manifolds, grid_rays, project_to_map
from .io import load_maps, load_weights, save_maps, save_weights
from .layers import conv2d, modulate_weights, pixel_shuffle
from .losses import (PosePack, ScorePack, adversarial_loss, bicubic_downsample, consistency_loss,
                     patch_adversarial_loss, pose_loss, psnr, softplus, ssim)
from .model import gen_test_model, surfaces_from_params
from .params import NetParams
from .radiance import RadianceBatch, generate_radiance
from .render import (DepthMap, build_epi, composite, composite_gradients, render_depth, render_direct,
                     render_image, sample_map_bilinear)
from .superres import rrdb_forward, superresolve

__version__ = "0.1.0"
