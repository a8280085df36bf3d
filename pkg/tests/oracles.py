"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written the slow, obvious way (pure-Python
loops, explicit tallies) and shares no code with the implementations under
test beyond tokenization conventions.
"""
from __future__ import annotations

import math
import re
from collections import Counter

import torch

_WORDS = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def scl_brute_force(z, labels, tau, reduction="sum"):
    """Literal double-loop supervised contrastive loss on plain floats."""
    n = len(z)

    def sim(a, b):
        return sum(x * y for x, y in zip(a, b))

    total = 0.0
    for i in range(n):
        phi = [e for e in range(n) if e != i and labels[e] == labels[i]]
        if not phi:
            continue
        others = [a for a in range(n) if a != i]
        denom = sum(math.exp(sim(z[i], z[a]) / tau) for a in others)
        inner = sum(math.log(math.exp(sim(z[i], z[e]) / tau) / denom) for e in phi)
        total += -inner / len(phi)
    return total / n if reduction == "mean" else total


def ce_by_hand(z, targets, weights=None, reduction="sum"):
    """Per-sample cross entropy from explicit softmax arithmetic."""
    total = 0.0
    for row, gold in zip(z, targets):
        denom = sum(math.exp(v) for v in row)
        term = -math.log(math.exp(row[gold]) / denom)
        if weights is not None:
            term *= weights[gold]
        total += term
    return total / len(z) if reduction == "mean" else total


def weighted_f1_tally(preds, golds, labels):
    """Confusion-tally weighted F1 built from scratch on Counters."""
    tp, fp, fn = Counter(), Counter(), Counter()
    for p, g in zip(preds, golds):
        if p == g:
            tp[g] += 1
        else:
            fp[p] += 1
            fn[g] += 1
    total = len(golds)
    score = 0.0
    for label in labels:
        support = tp[label] + fn[label]
        if support == 0:
            continue
        predicted = tp[label] + fp[label]
        precision = tp[label] / predicted if predicted else 0.0
        recall = tp[label] / support
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        score += f1 * support / total
    return score


def match_all_spans(text, pairs):
    """Exhaustive all-substrings lexicon matcher with greedy span selection."""
    tokens = [t.lower() for t in _WORDS.findall(text)]
    phrase_map = {}
    for phrase, polarity in pairs:
        key = tuple(t.lower() for t in _WORDS.findall(phrase))
        if key and key not in phrase_map:
            phrase_map[key] = (phrase, polarity)
    spans = []
    for i in range(len(tokens)):
        for j in range(i + 1, len(tokens) + 1):
            hit = phrase_map.get(tuple(tokens[i:j]))
            if hit:
                spans.append((i, j, hit))
    spans.sort(key=lambda s: (s[0], -(s[1] - s[0])))
    chosen, next_free = [], 0
    for i, j, hit in spans:
        if i >= next_free:
            chosen.append(hit)
            next_free = j
    return chosen


def central_difference(f, x: torch.Tensor, h: float = 1e-6) -> torch.Tensor:
    """Central finite-difference gradient of scalar f() with respect to x,
    mutating x coordinate-by-coordinate."""
    grad = torch.zeros_like(x)
    flat, grad_flat = x.view(-1), grad.view(-1)
    with torch.no_grad():
        for idx in range(flat.numel()):
            orig = float(flat[idx])
            flat[idx] = orig + h
            upper = float(f())
            flat[idx] = orig - h
            lower = float(f())
            flat[idx] = orig
            grad_flat[idx] = (upper - lower) / (2 * h)
    return grad


def relative_error(a: torch.Tensor, b: torch.Tensor) -> float:
    return float((a - b).norm() / max(float(a.norm()), float(b.norm()), 1e-12))


def adamw_expected_update(p0, grad, *, lr, weight_decay, beta1=0.9, beta2=0.999, eps=1e-8):
    """First-step decoupled-weight-decay Adam update, composed by hand."""
    theta = p0 * (1 - lr * weight_decay)
    m_hat = (1 - beta1) * grad / (1 - beta1)
    v_hat = (1 - beta2) * grad * grad / (1 - beta2)
    return theta - lr * m_hat / (v_hat.sqrt() + eps)


def majority_vote(per_model_predictions, order):
    """Column-wise majority vote with first-max tie-break along `order`."""
    n = len(per_model_predictions[0])
    out = []
    for col in range(n):
        counts = Counter(preds[col] for preds in per_model_predictions)
        best = max(order, key=lambda label: (counts.get(label, 0), -order.index(label)))
        out.append(best)
    return out
