"""Dual-conditioned motion generation toolkit.

Subpackages and modules:

- ``numkit``: dense-array reverse-mode gradients over a fixed op set, plus
  a finite-difference gradient checker.
- ``_kernels``: temporal convolution kernels; compiled core with a pure
  numpy fallback selected at import time.
- ``synthdata``: synthetic motion corpus, class-conditional text features
  and a deterministic motion-to-video feature surrogate.
- ``poseclean``: landmark-based validity screening for pose sequences.
- ``duet``: dual-stream fusion block (base fusion, spectral and temporal
  enhancement branches, per-token stream selection).
- ``dash``: distribution-alignment losses between predicted latents and
  video tokens.
- ``guidance``: guided prediction combinators and condition perturbations.
- ``diffusion``: toy latent-diffusion harness (schedule, denoiser,
  training loop, ancestral sampler).
- ``metrics``: seeded generation-quality metric suite.
- ``config`` / ``checkpoint`` / ``cli``: run configuration, array
  container I/O, and the command line.
"""

from . import _kernels

__version__ = "0.1.0"

__all__ = ["_kernels", "__version__"]
