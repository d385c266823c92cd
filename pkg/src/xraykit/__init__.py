"""Local-first chest X-ray second-opinion pipeline.

An out-of-distribution gate decides whether an image is in the classifier's
domain; admitted images get calibrated multi-label disease probabilities and
pixel-level explanations (gradient saliency, class activation maps). All
numeric machinery runs in-repo on float64 numpy.
"""

__version__ = "0.1.0"
