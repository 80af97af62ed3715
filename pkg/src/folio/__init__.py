"""folio: restoration toolkit for digitized illuminated manuscripts."""

from .errors import (
    DegenerateResultError,
    FolioError,
    IllPosedError,
    InfeasibleDomainError,
    InvalidInputError,
    MalformedAnnotationError,
    NumericalFailureError,
)
from .raster import (
    AnnotationMask,
    FeatureImage,
    Image,
    Label,
    compute_features,
    convert_colorspace,
    decode_annotation,
    encode_annotation,
    load_annotation,
    load_image,
    save_annotation,
    save_image,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationMask",
    "DegenerateResultError",
    "FeatureImage",
    "FolioError",
    "IllPosedError",
    "Image",
    "InfeasibleDomainError",
    "InvalidInputError",
    "Label",
    "MalformedAnnotationError",
    "NumericalFailureError",
    "compute_features",
    "convert_colorspace",
    "decode_annotation",
    "encode_annotation",
    "load_annotation",
    "load_image",
    "save_annotation",
    "save_image",
]
