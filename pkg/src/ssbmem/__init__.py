"""Simulator of an EIT vapor memory for tunable single-sideband fields.

The package models the full measurement chain of a warm-vapor
quantum-memory experiment: a weak single-sideband coherent pulse is
stored in a ground-state Zeeman coherence under EIT, retrieved after a
programmable hold time, detected by homodyne synthesis at a finite
sample rate, demodulated digitally, and characterized against the
classical-memory bound in the T-V plane.

Subpackage layout:

- ``medium``       Lambda-system susceptibility, EIT window, optical depth
- ``storage``      phenomenological store/retrieve channel and sweeps
- ``propagation``  1D slow-light storage solver (second backend)
- ``detection``    homodyne record synthesis, quantizer, record files
- ``dsp``          digital demodulation, ensemble statistics, subtraction
- ``benchmark``    SNR, transmission, conditional variance, T-V verdict
- ``sidebands``    two-sideband quadrature algebra and Gaussian channels
- ``runner``       Monte-Carlo sequences, sweeps, report emission
"""

__version__ = "0.1.0"
