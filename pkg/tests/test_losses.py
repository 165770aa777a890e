import itertools
import math

import numpy as np
import pytest
import torch

from dosiqa.errors import ConfigError, ScaleMismatch, ValidationError
from dosiqa.losses import (
    LossName,
    LossWeights,
    Provenance,
    emd_loss,
    esd_loss,
    l1_loss,
    loss_terms,
    route_labels,
    total_loss,
)
from dosiqa.network.model import QualityPrediction, readout
from dosiqa.rating_stats import (
    LabelCategory,
    OpinionDistribution,
    QualityScale,
    SampleLabels,
    expected_sos,
    gaussian_dos,
)

from conftest import random_simplex


def emd_oracle(p, t):
    """Plain-loop RMS of CDF differences."""
    acc_p = acc_t = 0.0
    sq = []
    for a, b in zip(p, t):
        acc_p += a
        acc_t += b
        sq.append((acc_t - acc_p) ** 2)
    return math.sqrt(math.fsum(sq) / len(sq))


def od(p, scale):
    return OpinionDistribution(np.asarray(p, dtype=float), scale)


def fake_prediction(d, scale):
    d = torch.as_tensor(np.asarray(d), dtype=torch.float64) if not torch.is_tensor(d) else d
    mos, sos = readout(d, torch.tensor(scale.scores, dtype=torch.float64))
    return QualityPrediction(d, d, d, mos, sos)


# --- weights ---------------------------------------------------------------

def test_weights_defaults_and_invariants():
    w = LossWeights()
    assert (w.alpha, w.beta, w.gamma) == (200.0, 10.0, 1.0)
    with pytest.raises(ConfigError):
        LossWeights(enabled=frozenset())
    with pytest.raises(ConfigError):
        LossWeights(0.0, 0.0, 0.0)
    with pytest.raises(ConfigError):
        LossWeights(-1.0)
    assert LossWeights.from_dict(w.to_dict()) == w
    assert w.scaled("ESD", 2.0).gamma == 2.0


# --- routing ---------------------------------------------------------------

def test_route_ground_truth_passthrough(scale5):
    d = od([0, 0, 1, 0, 0], scale5)
    t = route_labels(SampleLabels(3.0, LabelCategory.DOS_AVAILABLE, dos=d), scale5)
    assert t.dos_target is d
    assert t.provenance is Provenance.GROUND_TRUTH_DOS


def test_route_mos_only_chains_quadratic_law(scale5):
    t = route_labels(SampleLabels(3.0, LabelCategory.MOS_ONLY), scale5, 0.1477)
    assert t.provenance is Provenance.GAUSSIAN_FROM_MOS_ONLY
    assert t.dos_target == gaussian_dos(3.0, math.sqrt(0.1477 * 4), scale5)
    assert t.sos_reference == pytest.approx(0.76864, abs=5e-6)


def test_route_mos_sos_uses_given_sos_for_target_only(scale5):
    t = route_labels(SampleLabels(2.0, LabelCategory.MOS_SOS_AVAILABLE, sos=0.4), scale5, 0.1477)
    assert t.provenance is Provenance.GAUSSIAN_FROM_MOS_SOS
    assert t.dos_target == gaussian_dos(2.0, 0.4, scale5)
    # the ESD reference always comes from the quadratic law
    assert t.sos_reference == expected_sos(2.0, scale5, 0.1477)


def test_route_missing_sos_rejected():
    with pytest.raises(ValidationError):
        SampleLabels(3.0, LabelCategory.MOS_SOS_AVAILABLE)


def test_route_endpoint_mos_is_clamped(scale5):
    for mos in (1.0, 5.0):
        t = route_labels(SampleLabels(mos, LabelCategory.MOS_ONLY), scale5)
        assert t.sos_reference > 0
        assert t.mos_target == mos
        assert np.isclose(t.dos_target.probs.sum(), 1.0)


# --- component losses ------------------------------------------------------

def test_emd_examples(scale5):
    a = od([1, 0, 0, 0, 0], scale5)
    assert emd_loss(a, a) == 0.0
    assert emd_loss(od([0, 1, 0, 0, 0], scale5), a) == pytest.approx(math.sqrt(1 / 5), abs=1e-15)
    assert emd_loss(od([0, 0, 0, 0, 1], scale5), a) == pytest.approx(math.sqrt(4 / 5), abs=1e-15)


def test_emd_matches_oracle_numpy_and_torch(scale5, rng):
    P, T = random_simplex(rng, 300), random_simplex(rng, 300)
    batch = emd_loss(torch.tensor(P), torch.tensor(T)).numpy()
    for i, (p, t) in enumerate(zip(P, T)):
        ref = emd_oracle(p, t)
        assert abs(emd_loss(od(p, scale5), od(t, scale5)) - ref) <= 1e-12
        assert abs(batch[i] - ref) <= 1e-12


def test_emd_scale_mismatch(scale5):
    other = QualityScale.integer(4, 1)
    with pytest.raises(ScaleMismatch):
        emd_loss(od([1, 0, 0, 0, 0], scale5), od([1, 0, 0, 0], other))
    with pytest.raises(ScaleMismatch):
        emd_loss(torch.ones(2, 5) / 5, torch.ones(2, 4) / 4)


def test_l1_and_esd_examples():
    assert l1_loss(3.0, 3.0) == 0.0
    assert l1_loss(2.5, 4.0) == 1.5
    assert l1_loss(4.0, 2.5) == 1.5
    assert esd_loss(0.7, 0.7) == 0.0
    assert esd_loss(0.5, 0.7686) == pytest.approx(0.072146, abs=5e-7)
    assert esd_loss(1.0, 0.0) == 1.0


def test_emd_zero_gradient_is_finite():
    p = torch.tensor([[0.2, 0.2, 0.2, 0.2, 0.2]], dtype=torch.float64, requires_grad=True)
    emd_loss(p, p.detach().clone()).sum().backward()
    assert torch.isfinite(p.grad).all()


# --- total loss ------------------------------------------------------------

def test_total_weighted_sum_arithmetic(scale5, monkeypatch):
    import dosiqa.losses as L

    monkeypatch.setattr(L, "emd_loss", lambda p, t: torch.tensor([0.1], dtype=torch.float64))
    monkeypatch.setattr(L, "l1_loss", lambda p, t: torch.tensor([0.2], dtype=torch.float64))
    monkeypatch.setattr(L, "esd_loss", lambda p, t: torch.tensor([0.3], dtype=torch.float64))
    pred = fake_prediction([[0.2] * 5], scale5)
    tgt = route_labels(SampleLabels(3.0, LabelCategory.MOS_ONLY), scale5)
    assert float(total_loss(pred, tgt)) == pytest.approx(22.3, abs=1e-12)


def test_total_zero_when_consistent(scale5):
    d = gaussian_dos(3.0, expected_sos(3.0, scale5, 0.1477), scale5)
    pred = fake_prediction([d.probs], scale5)
    tgt = route_labels(SampleLabels(3.0, LabelCategory.DOS_AVAILABLE, dos=d), scale5, 0.1477)
    # sos of the discretized target differs slightly from the law; EMD and L1 vanish
    terms = loss_terms(pred, tgt, LossWeights())
    assert float(terms["emd"]) == 0.0
    assert float(terms["l1"]) == pytest.approx(0.0, abs=1e-15)


def test_esd_only_ignores_distribution_error(scale5):
    sos_ref = expected_sos(3.0, scale5, 0.1477)
    # a two-point distribution centred on 3 with exactly this spread
    q = sos_ref ** 2 / 2.0
    d = [0.0, q, 1 - 2 * q, q, 0.0]
    pred = fake_prediction([d], scale5)
    tgt = route_labels(SampleLabels(1.5, LabelCategory.MOS_ONLY), scale5, 0.1477)
    tgt = tgt.__class__(tgt.dos_target, 1.5, sos_ref, tgt.provenance)
    only_esd = LossWeights(enabled=frozenset({LossName.ESD}))
    assert float(total_loss(pred, tgt, only_esd)) == pytest.approx(0.0, abs=1e-12)
    assert float(total_loss(pred, tgt)) > 1.0


def test_every_loss_subset_finite_with_gradient(scale5, rng):
    logits = torch.tensor(rng.normal(size=(6, 5)), requires_grad=True)
    labels = [SampleLabels(float(m), LabelCategory.MOS_ONLY) for m in rng.uniform(1, 5, 6)]
    from dosiqa.losses import collate_targets

    tgt = collate_targets([route_labels(l, scale5) for l in labels], torch.float64)
    names = list(LossName)
    for r in range(1, 4):
        for sub in itertools.combinations(names, r):
            logits.grad = None
            pred = fake_prediction(torch.softmax(logits, dim=1), scale5)
            loss = total_loss(pred, tgt, LossWeights(enabled=frozenset(sub)))
            assert torch.isfinite(loss) and float(loss.detach()) >= 0
            loss.backward()
            assert logits.grad.abs().sum() > 0, sub
