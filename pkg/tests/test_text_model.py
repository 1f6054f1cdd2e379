import numpy as np
import pytest

from protestlens.corpus import Vocabulary
from protestlens.errors import LengthError, VocabularyError
from protestlens.tensor import Tensor, functional as F
from protestlens.text import (
    LABELS,
    LOCAL,
    TextClassifier,
    TextModelConfig,
    classify_text,
    collate,
    embed_sequence,
    make_flags,
    text_layer_forward,
)
from protestlens.text.model import init_text_params
from protestlens.tensor import OptimizerState, adamw_step

CFG = TextModelConfig(vocab_size=30, max_len=24, d_model=8, n_heads=2, n_layers=2, window=4, dropout=0.0)


def _model(seed=0, cfg=CFG):
    return TextClassifier(cfg, seed=seed, dtype=np.float64)


def test_zero_tables_embed_to_zero():
    z = Tensor(np.zeros((30, 8)))
    out = embed_sequence([2, 4, 7], z, Tensor(np.zeros((24, 8))), CFG)
    np.testing.assert_array_equal(out.data, 0.0)


def test_embedding_is_table_lookup(rng):
    tok, pos = Tensor(rng.standard_normal((30, 8))), Tensor(rng.standard_normal((24, 8)))
    one = embed_sequence([9], tok, pos, CFG)
    np.testing.assert_array_equal(one.data, (tok.data[9] + pos.data[0])[None])
    two = embed_sequence([2, 5], tok, pos, CFG)
    np.testing.assert_array_equal(two.data, np.stack([tok.data[2] + pos.data[0], tok.data[5] + pos.data[1]]))


def test_embedding_errors(rng):
    tok, pos = Tensor(np.zeros((30, 8))), Tensor(np.zeros((24, 8)))
    with pytest.raises(VocabularyError):
        embed_sequence([2, 30], tok, pos, CFG)
    with pytest.raises(LengthError):
        embed_sequence([2] * 25, tok, pos, CFG)


def _layer0(model):
    return model.layer_weights(0)


def test_zeroed_output_projections_make_layer_identity(rng):
    w = _layer0(_model())
    for name in ("attn.wo", "attn.bo", "ffn.w2", "ffn.b2"):
        w[name].data[...] = 0
    x = Tensor(rng.standard_normal((4, 8)))
    out = text_layer_forward(x, w, CFG, make_flags(4, 4, (0,)))
    np.testing.assert_array_equal(out.data, x.data)


def test_layer_shape_contract(rng):
    out = text_layer_forward(Tensor(rng.standard_normal((4, 8))), _layer0(_model()), CFG, make_flags(4, 4, (0,)))
    assert out.shape == (4, 8)
    assert np.all(np.isfinite(out.data))


def _perturbed_rows(model, ids, flags, j):
    base = model.hidden(ids[None], flags[None]).data[0]
    ids2 = ids.copy()
    ids2[j] = 3 + (ids[j] - 2) % 25  # a different real token
    moved = model.hidden(ids2[None], flags[None]).data[0]
    return np.abs(moved - base).max(axis=-1) > 1e-12


def test_receptive_field_without_global_tokens(rng):
    model = _model(seed=3)
    ids = rng.integers(3, 30, size=20)
    flags = np.full(20, LOCAL, dtype=np.int8)
    reach = (CFG.window // 2) * CFG.n_layers
    for j in (0, 7, 19):
        changed = _perturbed_rows(model, ids, flags, j)
        far = np.abs(np.arange(20) - j) > reach
        assert not changed[far].any()
        assert changed[j]


def test_cls_reaches_every_position_in_one_layer(rng):
    cfg = TextModelConfig(vocab_size=30, max_len=24, d_model=8, n_heads=2, n_layers=1, window=2, dropout=0.0)
    model = _model(seed=4, cfg=cfg)
    ids = np.concatenate([[2], rng.integers(3, 30, size=15)])
    flags = make_flags(16, 16, (0,))
    base = model.hidden(ids[None], flags[None]).data[0]
    # perturb only the CLS input; a non-constant direction survives LayerNorm
    model.params["tok_emb"].data[2] += rng.standard_normal(8)
    moved = model.hidden(ids[None], flags[None]).data[0]
    assert (np.abs(moved - base).max(axis=-1) > 1e-9).all()


def test_padding_is_inert(rng):
    model = _model(seed=5)
    short = [2, *rng.integers(3, 30, size=6).tolist()]
    alone = collate([short], CFG)
    padded = collate([short, [2] * 20], CFG)
    h1 = model.hidden(alone.ids, alone.flags).data[0]
    h2 = model.hidden(padded.ids, padded.flags).data[0, :7]
    np.testing.assert_allclose(h1, h2, atol=1e-6)
    np.testing.assert_allclose(model.logits(alone).data[0], model.logits(padded).data[0], atol=1e-6)


def test_vocabulary_permutation_invariance(rng):
    model = _model(seed=6)
    batch = collate([[2, *rng.integers(3, 30, size=9).tolist()]], CFG)
    perm = np.concatenate([[0, 1, 2], 3 + rng.permutation(27)])  # new id -> old id
    inverse = np.argsort(perm)
    permuted = TextClassifier(CFG, params={k: Tensor(v.data.copy()) for k, v in model.params.items()})
    permuted.params["tok_emb"].data[...] = model.params["tok_emb"].data[perm]
    ids2 = inverse[batch.ids]
    np.testing.assert_allclose(permuted.logits(collate([ids2[0].tolist()], CFG)).data,
                               model.logits(batch).data, atol=1e-12)


def _vocab():
    return Vocabulary(["[PAD]", "[UNK]", "[CLS]", "protest", "march", "rally", "stock", "game", "film", "city"])


def test_zero_head_gives_half():
    cfg = TextModelConfig(vocab_size=10, max_len=16, d_model=8, n_heads=2, n_layers=1, window=4)
    model = TextClassifier(cfg, seed=1)
    model.params["head.w"].data[...] = 0
    model.params["head.b"].data[...] = 0
    out = classify_text("protest march in the city", _vocab(), model)
    assert out["probability"] == 0.5
    assert out["label"] == "non-protest"


def test_empty_and_very_long_text():
    cfg = TextModelConfig(vocab_size=10, max_len=16, d_model=8, n_heads=2, n_layers=1, window=4)
    model = TextClassifier(cfg, seed=1)
    empty = classify_text("!!!", _vocab(), model)
    assert 0 < empty["probability"] < 1
    long_text = " ".join(["protest", "stock"] * 5000)
    assert len(long_text.split()) == 10_000
    out = classify_text(long_text, _vocab(), model)
    head = classify_text(" ".join(["protest", "stock"] * 8)[: len("protest stock") * 8 + 7], _vocab(), model)
    assert out["probability"] == pytest.approx(head["probability"], abs=1e-7)
    assert out["label"] in LABELS


def test_overfits_eight_planted_examples():
    vocab = _vocab()
    texts = ["protest march city", "rally protest", "march rally city", "city protest rally",
             "stock film", "game city film", "stock game", "film stock city"]
    labels = np.array([1, 1, 1, 1, 0, 0, 0, 0])
    cfg = TextModelConfig(vocab_size=10, max_len=16, d_model=16, n_heads=2, n_layers=1, window=4, dropout=0.0)
    model = TextClassifier(cfg, seed=0)
    batch = collate([[2, *vocab.encode(t)] for t in texts], cfg, labels)
    state = OptimizerState.for_params(model.params, lr=1e-2, weight_decay=0.0)
    for step in range(500):
        for p in model.params.values():
            p.grad = None
        loss = model.loss(batch, training=True)
        if float(loss.data) < 0.01:
            break
        loss.backward()
        adamw_step(model.params, state)
    assert float(model.loss(batch, training=False).data) < 0.01
    preds = [classify_text(t, vocab, model)["label"] for t in texts]
    assert preds == [LABELS[y] for y in labels]
