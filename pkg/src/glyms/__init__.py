"""Annotation of glycan MSn spectra.

Subsystems:

* :mod:`glyms.elements` / :mod:`glyms.glycans` -- elemental masses, glycan
  trees, derivatization arithmetic.
* :mod:`glyms.ions` -- charge carriers, neutral exchanges/losses, m/z math
  and tolerance matching.
* :mod:`glyms.fragments` -- in-silico glycosidic fragmentation (B/C/Y/Z).
* :mod:`glyms.spectra` -- canonical scan format and mzXML-subset reader.
* :mod:`glyms.engine` -- the annotation engine and streaming archive.
* :mod:`glyms.sage` -- the trainable layered co-occurrence graph classifier.
* :mod:`glyms.evaluation` -- synthetic data, cross-validation, metrics.
* :mod:`glyms.cli` / :mod:`glyms.service` -- command line and curation HTTP
  service.
"""

__version__ = "0.1.0"
