"""Encoder stack semantics, parameter accounting, checkpoints, and
attention export."""

import json

import numpy as np
import pytest

from crysgram.errors import CheckpointError, CrysgramError
from crysgram.nn import (
    EncoderConfig,
    EncoderState,
    Tensor,
    desk_config,
    deserialize_attention,
    encoder_forward,
    export_attention,
    export_cls_rows,
    load_state,
    paper_config,
    save_state,
    serialize_attention,
)
from crysgram.tokens.embedding import EmbeddedInput

RNG = np.random.default_rng(11)


def make_input(L=9, d=32, batch=None, dtype=np.float64):
    shape = (L, d) if batch is None else (batch, L, d)
    mask = np.ones(shape[:-1][-1] if batch is None else (batch, L), dtype=int)
    if batch is None:
        mask = np.ones(L, dtype=int)
        mask[-2:] = 0
    else:
        mask[:, -2:] = 0
    return EmbeddedInput(matrix=Tensor(RNG.normal(size=shape).astype(dtype)),
                         attention_mask=mask,
                         token_labels=tuple(f"t{i}" for i in range(L)))


class TestForward:
    def test_eval_mode_is_deterministic(self):
        config = desk_config(vocab_size=11, d_model=32, dtype="float64")
        state = EncoderState(config, seed=0)
        x = make_input()
        h1, c1, _ = encoder_forward(x, state, config, mode="eval")
        h2, c2, _ = encoder_forward(x, state, config, mode="eval")
        np.testing.assert_array_equal(h1.data, h2.data)
        np.testing.assert_array_equal(c1.data, c2.data)

    def test_train_with_zero_dropout_equals_eval(self):
        config = desk_config(vocab_size=11, d_model=32, dtype="float64",
                             attention_dropout=0.0, hidden_dropout=0.0,
                             head_dropout=0.0)
        state = EncoderState(config, seed=0)
        x = make_input()
        h_train, _, _ = encoder_forward(x, state, config, mode="train",
                                        rng=np.random.default_rng(5))
        h_eval, _, _ = encoder_forward(x, state, config, mode="eval")
        np.testing.assert_allclose(h_train.data, h_eval.data, atol=0)

    def test_train_dropout_changes_output(self):
        config = desk_config(vocab_size=11, d_model=32, dtype="float64")
        state = EncoderState(config, seed=0)
        x = make_input()
        h_train, _, _ = encoder_forward(x, state, config, mode="train",
                                        rng=np.random.default_rng(5))
        h_eval, _, _ = encoder_forward(x, state, config, mode="eval")
        assert not np.allclose(h_train.data, h_eval.data)

    def test_zero_layer_stack_is_identity(self):
        config = EncoderConfig(vocab_size=11, n_layers=0, n_heads=2,
                               d_model=16, dtype="float64")
        state = EncoderState(config, seed=0)
        x = make_input(L=5, d=16)
        hidden, cls, attn = encoder_forward(x, state, config)
        np.testing.assert_array_equal(hidden.data, x.matrix.data)
        np.testing.assert_array_equal(cls.data, x.matrix.data[0])
        assert attn.n_layers == 0

    def test_cls_is_row_zero(self):
        config = desk_config(vocab_size=11, d_model=32, dtype="float64")
        state = EncoderState(config, seed=2)
        x = make_input()
        hidden, cls, _ = encoder_forward(x, state, config)
        np.testing.assert_array_equal(cls.data, hidden.data[0])

    def test_batched_matches_single(self):
        config = desk_config(vocab_size=11, d_model=32, dtype="float64")
        state = EncoderState(config, seed=2)
        single = make_input(L=7)
        batched = EmbeddedInput(
            matrix=Tensor(np.stack([single.matrix.data] * 3)),
            attention_mask=np.stack([single.attention_mask] * 3))
        h1, c1, _ = encoder_forward(single, state, config)
        hb, cb, _ = encoder_forward(batched, state, config)
        for b in range(3):
            np.testing.assert_allclose(hb.data[b], h1.data, atol=1e-12)
            np.testing.assert_allclose(cb.data[b], c1.data, atol=1e-12)

    def test_length_overflow_raises(self):
        config = desk_config(vocab_size=11, d_model=32, max_seq_len=8)
        state = EncoderState(config, seed=0)
        with pytest.raises(ValueError):
            encoder_forward(make_input(L=9, d=32), state, config)

    def test_recorded_attention_rows_sum_to_one(self):
        config = desk_config(vocab_size=11, d_model=32, dtype="float64")
        state = EncoderState(config, seed=4)
        x = make_input(L=9)
        _, _, attn = encoder_forward(x, state, config)
        valid = x.attention_mask.astype(bool)
        for layer in attn.layers:
            sums = layer.sum(axis=-1)
            np.testing.assert_allclose(sums, np.ones_like(sums), atol=1e-6)
            assert (layer[:, :, ~valid] == 0.0).all()


class TestParameterCount:
    @pytest.mark.parametrize("maker,vocab", [(desk_config, 97),
                                             (paper_config, 1306)])
    def test_closed_form(self, maker, vocab):
        config = maker(vocab)
        state = EncoderState(config, seed=0)
        d, ff, v = config.d_model, config.d_ff, config.vocab_size
        embed = v * d + config.max_seq_len * d + (config.d_formula * d + d)
        per_layer = (4 * (d * d + d) + 2 * (2 * d)
                     + (d * ff + ff) + (ff * d + d))
        heads = v + (d * d + d) + (d * 6 + 6) + (d * d + d) + (d * 1 + 1)
        expected = embed + config.n_layers * per_layer + heads
        assert state.parameter_count() == expected

    def test_paper_preset_dimensions(self):
        config = paper_config(100)
        assert (config.n_layers, config.n_heads, config.d_model) == (8, 12, 768)
        assert config.d_ff == 4 * 768

    def test_invalid_head_split(self):
        with pytest.raises(ValueError):
            EncoderConfig(vocab_size=10, d_model=30, n_heads=4)


class TestCheckpoint:
    def test_roundtrip_identical_params(self, tmp_path):
        config = desk_config(vocab_size=13, d_model=16, n_layers=1)
        state = EncoderState(config, seed=9)
        path = tmp_path / "model.ckpt"
        save_state(state, path, global_step=17, rng_seed=9)
        loaded, header = load_state(path)
        assert header["global_step"] == 17
        assert header["rng_seed"] == 9
        assert loaded.config == config
        for name, p in state.named_parameters():
            np.testing.assert_array_equal(loaded[name].data, p.data)

    def test_save_load_save_byte_identical(self, tmp_path):
        config = desk_config(vocab_size=13, d_model=16, n_layers=1)
        state = EncoderState(config, seed=1)
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_state(state, p1, global_step=3, rng_seed=1)
        loaded, _ = load_state(p1)
        save_state(loaded, p2, global_step=3, rng_seed=1)
        assert p1.read_bytes() == p2.read_bytes()

    def test_corrupt_blob_detected(self, tmp_path):
        config = desk_config(vocab_size=13, d_model=16, n_layers=1)
        state = EncoderState(config, seed=1)
        path = tmp_path / "model.ckpt"
        save_state(state, path)
        raw = bytearray(path.read_bytes())
        raw[-3] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError):
            load_state(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOTACKPT" + b"\x00" * 32)
        with pytest.raises(CheckpointError):
            load_state(path)


class TestAttentionExport:
    def make_map(self):
        config = desk_config(vocab_size=11, d_model=32, dtype="float64")
        state = EncoderState(config, seed=4)
        x = make_input(L=9)
        _, _, attn = encoder_forward(x, state, config)
        return attn

    def test_layer_head_shapes(self):
        attn = self.make_map()
        doc = export_attention(attn, layers=[-1])
        key = str(attn.n_layers - 1)
        arr = np.asarray(doc["layers"][key])
        assert arr.shape == (4, 9, 9)
        assert doc["token_labels"] == [f"t{i}" for i in range(9)]

    def test_row_sums_preserved_in_serialization(self):
        attn = self.make_map()
        restored = deserialize_attention(serialize_attention(attn))
        for index, arr in restored.items():
            valid = attn.attention_mask.reshape(-1).astype(bool)
            sums = arr.sum(axis=-1)
            np.testing.assert_allclose(sums, np.ones_like(sums), atol=1e-6)
            assert (arr[:, :, ~valid] == 0.0).all()

    def test_serialization_roundtrip_exact(self):
        attn = self.make_map()
        restored = deserialize_attention(serialize_attention(attn))
        for index, arr in restored.items():
            np.testing.assert_allclose(arr, attn.layers[index], atol=1e-9)

    def test_cls_rows(self):
        attn = self.make_map()
        rows = export_cls_rows(attn, layer=-1)
        assert rows.shape == (4, 9)
        np.testing.assert_allclose(rows, attn.layers[-1][:, 0, :])

    def test_empty_map_errors(self):
        from crysgram.nn.encoder import AttentionMap
        with pytest.raises(CrysgramError):
            export_attention(AttentionMap())

    def test_layer_out_of_range(self):
        attn = self.make_map()
        with pytest.raises(CrysgramError):
            export_attention(attn, layers=[5])

    def test_deterministic_serialization(self):
        attn = self.make_map()
        assert serialize_attention(attn) == serialize_attention(attn)
        json.loads(serialize_attention(attn))
