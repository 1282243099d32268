"""adk: dataset engineering and evaluation toolkit for UAV detection pipelines.

Submodules:

- geometry: boxes, annotations, manifests and the primitive box math
- tiling: sliding-window decomposition of large images and detection stitching
- labelio: YOLO txt / VOC xml / Labelme JSON readers, writers and the dataset split
- pseudolabel: confidence filtering, NMS and human-correction merging
- augment: geometric and photometric augmentation with box transforms
- anchors: IoU-metric k-means over ground-truth box shapes
- evalkit: P/R/F1, AP/mAP, confusion matrix and dataset statistics
- lsk: large selective kernel forward pass with a direct-convolution oracle
- review: HTTP service backing the human-in-the-loop review UI
- cli: command-line entry point wiring the above together
"""

__version__ = "0.1.0"
