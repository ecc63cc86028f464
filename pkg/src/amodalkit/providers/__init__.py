from .base import (
    OcclusionRelation,
    ProviderEndpoint,
    Providers,
    SafeProviders,
    Score,
    Segment,
    TagSet,
)
from .mock import SceneProviders
from .remote import RemoteProviders

__all__ = [
    "OcclusionRelation",
    "ProviderEndpoint",
    "Providers",
    "RemoteProviders",
    "SafeProviders",
    "SceneProviders",
    "Score",
    "Segment",
    "TagSet",
]
