"""Two-stream (appearance + optical flow) video object segmentation with
adversarial unsupervised domain adaptation, at desk scale."""

__version__ = "0.1.0"
