import numpy as np
import pytest
import torch

from dosiqa.rating_stats import KONIQ_SCALE, QualityScale


@pytest.fixture
def scale5():
    return KONIQ_SCALE


@pytest.fixture
def scale100():
    return QualityScale.bins(5, 0.0, 100.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _torch_seed():
    torch.manual_seed(0)


def random_simplex(rng, n, c=5):
    """Rows drawn from a flat Dirichlet, some with exact zeros."""
    p = rng.dirichlet(np.ones(c), size=n)
    mask = rng.random((n, c)) < 0.1
    p[mask] = 0.0
    empty = p.sum(axis=1) == 0
    p[empty, 0] = 1.0
    return p / p.sum(axis=1, keepdims=True)


def small_head(hidden=8, levels=5, in_dim=24, open_gates=False, seed=0, **cfg):
    """float64 head instance used by gradient checks and contract tests."""
    from dosiqa.network import QualityHead, SlmConfig
    from dosiqa.rating_stats import QualityScale

    torch.manual_seed(seed)
    config = SlmConfig(num_levels=levels, hidden_channels=hidden, **cfg)
    head = QualityHead(in_dim, config, QualityScale.integer(levels, 1)).double()
    if open_gates:
        with torch.no_grad():
            for g in (head.long_term.gate_a, head.long_term.gate_w):
                g.weight.normal_(0, 0.5)
                g.bias.normal_(0, 0.5)
    return head


def finite_difference_errors(loss_fn, params, step=1e-5):
    """Per-tensor relative error between autograd and central differences.

    Error is ``|g_auto - g_fd| / max(|g_auto|, |g_fd|)`` in the 2-norm over the
    tensor, with an absolute floor so tensors whose gradient is ~0 pass when
    both estimates agree to ``1e-10``.
    """
    for p in params.values():
        p.grad = None
    loss_fn().backward()
    out = {}
    with torch.no_grad():
        for name, p in params.items():
            auto = p.grad.detach().clone().reshape(-1)
            flat = p.data.view(-1)
            fd = torch.empty_like(auto)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + step
                up = loss_fn().item()
                flat[i] = orig - step
                down = loss_fn().item()
                flat[i] = orig
                fd[i] = (up - down) / (2 * step)
            diff = torch.linalg.norm(auto - fd).item()
            scale = max(torch.linalg.norm(auto).item(), torch.linalg.norm(fd).item())
            out[name] = 0.0 if diff <= 1e-10 else diff / scale
    return out


def head_loss_fn(head, fused, target, weights=None):
    from dosiqa.losses import LossWeights, loss_terms

    weights = weights or LossWeights()
    return lambda: loss_terms(head(fused), target, weights)["total"]


# --- acceptance bookkeeping -----------------------------------------------

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Call ``criterion(ok, detail)`` once; prints and records one PASS/FAIL line."""
    name = request.node.name.removeprefix("test_")

    def record(ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
