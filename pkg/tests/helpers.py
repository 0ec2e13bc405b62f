"""Shared test utilities: gradient and metric oracles used by several modules."""

import numpy as np
import torch


def label_level_metrics(y_true, y_pred, num_classes):
    """Recompute the whole metrics report straight from label arrays.

    Works from boolean masks over the raw labels rather than from a confusion
    matrix, so it exercises an independent code path.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    n = y_true.size
    per_class = {}
    weighted = {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    for index in range(num_classes):
        tp = int(((y_true == index) & (y_pred == index)).sum())
        fp = int(((y_true != index) & (y_pred == index)).sum())
        fn = int(((y_true == index) & (y_pred != index)).sum())
        tn = n - tp - fp - fn
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        support = int((y_true == index).sum())
        per_class[index] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "accuracy": (tp + tn) / n,
            "support": support,
            "tp": tp,
            "fp": fp,
            "fn": fn,
            "tn": tn,
        }
        weighted["precision"] += support * precision
        weighted["recall"] += support * recall
        weighted["f1"] += support * f1
    return {
        "accuracy": float((y_true == y_pred).mean()),
        "precision": weighted["precision"] / n,
        "recall": weighted["recall"] / n,
        "f1": weighted["f1"] / n,
        "per_class": per_class,
    }


def finite_difference_check(module, x, step=1e-5, rtol=1e-4, atol=1e-8, probe_seed=0):
    """Compare autograd gradients against 64-bit central finite differences.

    The scalar objective is a fixed random projection of the module output so
    every output entry contributes. Checks the gradient of the input and of
    every trainable parameter, entry by entry.
    """
    module = module.double().eval()
    x = x.detach().double().clone().requires_grad_(True)
    gen = torch.Generator().manual_seed(probe_seed)
    with torch.no_grad():
        probe = torch.randn(module(x).shape, dtype=torch.float64, generator=gen)

    def objective():
        return (module(x) * probe).sum()

    params = [p for p in module.parameters() if p.requires_grad]
    analytic = torch.autograd.grad(objective(), [x, *params])
    with torch.no_grad():
        for tensor, grad in zip([x, *params], analytic):
            flat = tensor.view(-1)
            grad_flat = grad.reshape(-1)
            for idx in range(flat.numel()):
                orig = flat[idx].item()
                flat[idx] = orig + step
                plus = objective().item()
                flat[idx] = orig - step
                minus = objective().item()
                flat[idx] = orig
                numeric = (plus - minus) / (2.0 * step)
                expected = grad_flat[idx].item()
                tol = atol + rtol * max(abs(numeric), abs(expected))
                assert abs(numeric - expected) <= tol, (
                    f"gradient mismatch on tensor of shape {tuple(tensor.shape)} "
                    f"entry {idx}: numeric={numeric:.10g} autograd={expected:.10g}"
                )
