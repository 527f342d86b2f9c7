import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from moco_kit.errors import ShapeError
from moco_kit.hadc import MaskHead, WeightPredictor, fuse_k, loss_mask, mask_head_k, predict_weights_k

from conftest import tiny_model

D64 = torch.float64


def central_difference(f, x, h=1e-6):
    grad = torch.zeros_like(x)
    flat = x.view(-1)
    for i in range(flat.numel()):
        old = flat[i].item()
        flat[i] = old + h
        up = f().item()
        flat[i] = old - h
        dn = f().item()
        flat[i] = old
        grad.view(-1)[i] = (up - dn) / (2 * h)
    return grad


def rel_err(a, b):
    return (torch.linalg.norm(a - b) / torch.clamp(torch.linalg.norm(b), min=1e-12)).item()


def test_weights_shape_and_range():
    torch.manual_seed(0)
    p = WeightPredictor(8)
    w = predict_weights_k(p, torch.randn(2, 5, 8), torch.randn(2, 5, 8))
    assert w.shape == (2, 5, 1)
    assert torch.all((w > 0) & (w < 1))
    with pytest.raises(ShapeError):
        p(torch.randn(2, 5, 8), torch.randn(2, 4, 8))


def test_zero_last_layer_gives_one_half():
    p = WeightPredictor(8)
    with torch.no_grad():
        p.fc3.weight.zero_()
        p.fc3.bias.zero_()
    assert torch.all(p(torch.randn(1, 3, 8), torch.randn(1, 3, 8)) == 0.5)


def test_gate_bias_sets_initial_level():
    p = WeightPredictor(8, gate_bias=-2.0)
    with torch.no_grad():
        p.fc3.weight.zero_()
    assert torch.allclose(p(torch.randn(1, 3, 8), torch.randn(1, 3, 8)),
                          torch.sigmoid(torch.tensor(-2.0)))


def test_weight_gradient_wrt_structure_features():
    torch.manual_seed(0)
    p = WeightPredictor(6).to(D64)
    s = torch.randn(1, 4, 6, dtype=D64, requires_grad=True)
    a = torch.randn(1, 4, 6, dtype=D64)
    probe = torch.randn(1, 4, 1, dtype=D64)
    (p(s, a) * probe).sum().backward()
    x = s.detach().clone()
    fd = central_difference(lambda: (p(x, a) * probe).sum(), x)
    assert rel_err(s.grad, fd) < 1e-4


def test_fuse_examples():
    a = torch.tensor([[[1.0], [2.0]]])
    s = torch.tensor([[[10.0], [10.0]]])
    w = torch.tensor([[[0.0], [0.5]]])
    assert fuse_k(a, s, w).flatten().tolist() == [1.0, 7.0]
    assert torch.equal(fuse_k(a, s, torch.zeros_like(w)), a)
    assert torch.equal(fuse_k(a, torch.zeros_like(s), torch.rand_like(w)), a)
    with pytest.raises(ShapeError):
        fuse_k(a, s[:, :1], w)
    with pytest.raises(ShapeError):
        fuse_k(a, s, torch.zeros(1, 2, 3))


@settings(max_examples=50)
@given(st.lists(st.floats(-1e6, 1e6), min_size=6, max_size=6), st.floats(0, 1))
def test_fuse_is_identity_when_gate_times_guidance_is_zero(values, w):
    a = torch.tensor(values, dtype=D64).reshape(1, 2, 3)
    s = torch.zeros_like(a)
    assert torch.equal(fuse_k(a, s, torch.full((1, 2, 1), w, dtype=D64)), a)
    assert torch.equal(fuse_k(a, torch.randn_like(a), torch.zeros(1, 2, 1, dtype=D64)), a)


def test_mask_head_matches_mask_latent_shape():
    model = tiny_model()
    w = torch.rand(2, model.backbone.token_count, 1)
    pred = mask_head_k(model.hadc[0].mask_head, w)
    mask = (torch.rand(2, 4, 16, 16, 1) > 0.5).float()
    assert pred.shape == model.mask_latent(mask).shape
    assert torch.equal(pred, mask_head_k(model.hadc[0].mask_head, w))
    with pytest.raises(ShapeError):
        model.hadc[0].mask_head(torch.rand(2, 5, 1))


def test_mask_head_upsamples_to_a_finer_grid():
    torch.manual_seed(0)
    head = MaskHead((1, 2, 2), (1, 2, 2), out_channels=3)
    assert head(torch.rand(1, 4, 1)).shape == (1, 1, 3, 4, 4)


def test_mask_head_gradient():
    torch.manual_seed(0)
    head = MaskHead((1, 2, 2), (1, 1, 1), out_channels=3).to(D64)
    w = torch.rand(1, 4, 1, dtype=D64, requires_grad=True)
    probe = torch.randn(1, 1, 3, 2, 2, dtype=D64)
    (head(w) * probe).sum().backward()
    x = w.detach().clone()
    fd = central_difference(lambda: (head(x) * probe).sum(), x)
    assert rel_err(w.grad, fd) < 1e-4


def test_loss_mask_examples():
    m = torch.zeros(1)
    assert loss_mask([torch.tensor([0.5]), torch.tensor([1.0])], m).item() == 1.25
    assert loss_mask([m.clone(), m.clone()], m).item() == 0.0
    preds = [torch.tensor([0.3]), torch.tensor([0.9])]
    assert loss_mask(preds * 2, m).item() == 2 * loss_mask(preds, m).item()
    with pytest.raises(ShapeError):
        loss_mask([torch.zeros(2)], m)
    with pytest.raises(ShapeError):
        loss_mask([], m)


def test_mask_loss_gradient_through_predictor_parameters():
    model = tiny_model(dtype=D64)
    torch.manual_seed(3)
    s = torch.randn(1, model.backbone.token_count, 32, dtype=D64)
    a = torch.randn(1, model.backbone.token_count, 32, dtype=D64)
    m = torch.randn(1, *model.latent_shape, dtype=D64)
    blk = model.hadc[0]

    def f():
        return loss_mask([blk.mask_head(blk.predictor(s, a))], m)

    f().backward()
    param = blk.predictor.fc3.weight
    fd = central_difference(f, param.data)
    assert rel_err(param.grad, fd) < 1e-3
