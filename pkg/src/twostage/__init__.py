"""Two-stage block video codec: sparse self-adaptive inter approximation plus altered-DCT residual coding."""
from .codec import (BlockSyntax, EncoderParams, FrameHeader, decode_block, decode_sequence,
                    encode_block, encode_frame, encode_sequence)
from .dictionary import Dictionary, SearchRange, build_dictionary
from .entropy import StreamError
from .frame_io import load_raw_video, psnr, write_raw_video
from .quantize import dequantize, quantize
from .sparse import SolverConfig, SparseSolution, eomp, omp_baseline
from .transform import AlteredBasis, dct_basis, orthonormalize_against, project_residual

__version__ = "0.1.0"
