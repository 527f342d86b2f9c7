import torch

from moco_kit.model import apply_freeze_plan, freeze_plan

from conftest import tiny_model


def test_branch_features_have_token_shape_and_start_at_zero():
    model = tiny_model()
    text = model.encode_text(["a man walks", "a girl jumps"])
    g_s = torch.rand(2, 4, 16, 16, 3)
    feats = model.encode_structure(g_s, text, 7)
    assert len(feats) == model.n_structure_blocks == 2
    for s in feats:
        assert s.shape == (2, model.backbone.token_count, 32)
        assert torch.all(s == 0)


def test_branch_blocks_are_copies_of_the_backbone():
    model = tiny_model()
    for k, block in enumerate(model.structure_branch.blocks):
        ref = model.backbone.blocks[k].state_dict()
        for name, value in block.state_dict().items():
            assert torch.equal(value, ref[name])
    assert torch.equal(model.structure_branch.patch_embed.weight, model.backbone.patch_embed.weight)


def test_copy_from_resyncs_after_backbone_changes():
    model = tiny_model()
    with torch.no_grad():
        model.backbone.blocks[0].mlp[0].weight.add_(1.0)
    model.structure_branch.copy_from(model.backbone)
    assert torch.equal(model.structure_branch.blocks[0].mlp[0].weight,
                       model.backbone.blocks[0].mlp[0].weight)


def test_freeze_plan_partitions_every_parameter_once():
    model = tiny_model()
    plan = freeze_plan(model)
    names = [n for n, _ in model.named_parameters()]
    assert sorted(plan["frozen"] + plan["trainable"]) == sorted(names)
    assert not set(plan["frozen"]) & set(plan["trainable"])
    assert "backbone.blocks.0.attn.q.weight" in plan["frozen"]
    assert "hadc.0.predictor.fc1.weight" in plan["trainable"]
    assert any(n.startswith("structure_branch.inject") for n in plan["trainable"])
    assert any(n.startswith("text.") for n in plan["frozen"])
    apply_freeze_plan(model)
    for n, p in model.named_parameters():
        assert p.requires_grad == (n in plan["trainable"])


def test_conditional_equals_unconditional_at_init():
    model = tiny_model()
    text = model.encode_text(["a man walks"])
    z = torch.randn(1, *model.latent_shape)
    g_s = torch.rand(1, 4, 16, 16, 3)
    with torch.no_grad():
        a = model.predict_noise(z, 9, text).eps_hat
        b = model.predict_noise(z, 9, text, g_s).eps_hat
        c = model.predict_noise(z, 9, text, g_s, hadc=False).eps_hat
    assert torch.equal(a, b) and torch.equal(a, c)
