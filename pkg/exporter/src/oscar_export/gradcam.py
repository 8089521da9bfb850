"""Gradient-weighted class activation maps at a named layer.

The attribution for one image is relu(sum_k w_k A_k) where A are the
activations of the target layer and w_k is the spatial mean of the gradient
of the top-class logit with respect to channel k, bilinearly upsampled to
the input resolution.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from .errors import LayerNotFound


def resolve_layer(model: torch.nn.Module, name: str) -> torch.nn.Module:
    try:
        return model.get_submodule(name)
    except AttributeError as exc:
        raise LayerNotFound(f"model has no submodule {name!r}") from exc


def gradcam(
    model: torch.nn.Module,
    layer_name: str,
    images: torch.Tensor,
    target: torch.Tensor | None = None,
) -> np.ndarray:
    """Raw (pre-normalisation) class activation maps, B x H x W float64.

    ``target`` selects the logit to explain per image; by default the
    model's own top prediction.
    """
    layer = resolve_layer(model, layer_name)
    model.eval()
    captured: dict = {}

    def hook(_module, _inputs, output):
        captured["acts"] = output

    handle = layer.register_forward_hook(hook)
    try:
        images = images.detach().requires_grad_(False)
        with torch.enable_grad():
            logits = model(images)
            acts = captured["acts"]
            if acts.ndim != 4:
                raise LayerNotFound(
                    f"layer {layer_name!r} does not emit B x C x H x W maps"
                )
            if target is None:
                target = logits.detach().argmax(dim=1)
            picked = logits.gather(1, target.view(-1, 1)).sum()
            grads = torch.autograd.grad(picked, acts)[0]
        weights = grads.mean(dim=(2, 3), keepdim=True)
        cam = torch.relu((weights * acts).sum(dim=1, keepdim=True))
        cam = F.interpolate(
            cam, size=images.shape[-2:], mode="bilinear", align_corners=False
        )
    finally:
        handle.remove()
    return cam.squeeze(1).detach().cpu().double().numpy()


def feature_maps(
    model: torch.nn.Module, layer_name: str, images: torch.Tensor
) -> np.ndarray:
    """Activations of the named layer (the tensor before global pooling)."""
    layer = resolve_layer(model, layer_name)
    model.eval()
    captured: dict = {}

    def hook(_module, _inputs, output):
        captured["acts"] = output.detach()

    handle = layer.register_forward_hook(hook)
    try:
        with torch.no_grad():
            model(images)
    finally:
        handle.remove()
    acts = captured["acts"]
    if acts.ndim != 4:
        raise LayerNotFound(
            f"layer {layer_name!r} does not emit B x C x H x W maps"
        )
    return acts.cpu().double().numpy()


def final_linear_head(model: torch.nn.Module) -> tuple[np.ndarray, np.ndarray]:
    """Weights and bias of the last Linear module in the network."""
    last = None
    for module in model.modules():
        if isinstance(module, torch.nn.Linear):
            last = module
    if last is None:
        raise LayerNotFound("model has no Linear head to export")
    weights = last.weight.detach().cpu().double().numpy()
    if last.bias is not None:
        bias = last.bias.detach().cpu().double().numpy()
    else:
        bias = np.zeros(weights.shape[0])
    return weights, bias
