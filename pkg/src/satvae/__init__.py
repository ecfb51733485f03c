"""satvae: channel-flexible VAE toolkit for multispectral Earth observation.

Subpackages:
    data       tile I/O, normalization, harmonization, geospatial splits
    models     wavelength-conditioned hypernetwork VAE
    training   weight distillation + end-to-end finetuning
    metrics    reconstruction-quality metrics and dataset evaluation
    diffusion  latent super-resolution diffusion (VP schedule, EDM, DDIM)
    bench      latency/throughput/memory/parameter benchmarking
    cli        one entrypoint wiring everything together
"""

__version__ = "0.1.0"
