"""
VAE 对照组测试
"""

import numpy as np
import pytest

from src.core import autodiff as ad
from src.core.autodiff import Tape
from src.core.encoder import EncoderConfig, init_weights
from src.core.optimizer import AdamState, adam_step
from src.core.training import TrainConfig, encode_dataset, train
from src.core.vae_baseline import DecoderConfig, decode, init_decoder_weights, vae_step_loss


def _models(pixels=6, latent_dim=2):
    encoder = init_weights(EncoderConfig(pixels, (5,), latent_dim, 'tanh', seed=0))
    decoder = init_decoder_weights(DecoderConfig(latent_dim, (5,), pixels, 'tanh', seed=1))
    return encoder, decoder


class TestDecoder:

    def test_output_in_unit_interval(self, rng):
        _, decoder = _models()
        out = decode(rng.normal(scale=5.0, size=(4, 2)), decoder)
        assert out.shape == (4, 6)
        assert np.all((out > 0.0) & (out < 1.0))

    def test_zero_weights_give_one_half(self, rng):
        _, decoder = _models()
        for p in decoder.parameters():
            p.value[...] = 0.0
        np.testing.assert_array_equal(decode(rng.normal(size=(3, 2)), decoder), 0.5)

    def test_single_latent_vector(self):
        _, decoder = _models()
        assert decode(np.zeros(2), decoder).shape == (6,)

    def test_non_finite_latent_rejected(self):
        _, decoder = _models()
        with pytest.raises(FloatingPointError):
            decode(np.array([np.nan, 0.0]), decoder)

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            DecoderConfig(0)


class TestLoss:

    def test_loss_is_finite_and_positive(self, rng):
        encoder, decoder = _models()
        x = rng.uniform(size=(3, 6))
        step = vae_step_loss(x, encoder, decoder, 0.98, rng.standard_normal((3, 2)))
        assert np.isfinite(step.loss) and step.loss > 0.0
        assert float(step.loss) == pytest.approx(float(step.bce) + float(step.reg))

    def test_regularizer_left_out_of_loss(self, rng):
        encoder, decoder = _models()
        x = rng.uniform(size=(3, 6))
        step = vae_step_loss(x, encoder, decoder, 0.98, rng.standard_normal((3, 2)), use_l2=False)
        assert float(step.loss) == float(step.bce)
        assert float(step.reg) >= 0.0

    def test_gradient_matches_finite_differences(self, rng):
        encoder, decoder = _models()
        x = rng.uniform(size=(3, 6))
        noise = rng.standard_normal((3, 2))

        def loss_fn(tape):
            return vae_step_loss(x, encoder, decoder, 0.98, noise, tape).loss

        parameters = encoder.parameters() + decoder.parameters()
        assert ad.grad_check_parameters(loss_fn, parameters, floor=1e-6) < 1e-4

    def test_overfits_single_image(self, rng):
        encoder, decoder = _models()
        image = np.array([[0.0, 1.0, 1.0, 0.0, 1.0, 0.0]])
        parameters = encoder.parameters() + decoder.parameters()
        state = AdamState()
        for _ in range(500):
            tape = Tape()
            step = vae_step_loss(image, encoder, decoder, 0.98, rng.standard_normal((1, 2)), tape)
            tape.backward(step.loss)
            adam_step(parameters, state, 0.05)
        assert float(ad.value_of(step.bce)) < 0.05


class TestDecoderSwitch:

    def test_encoder_outputs_do_not_depend_on_decoder(self, tiny_images):
        outputs = []
        for setup in ('autoencode-cipae', 'autoencode-vae'):
            config = TrainConfig(setup=setup, latent_dim=2, forget=16, batch_size=8, epochs=0,
                                 hidden_dims=(8,), decoder_hidden_dims=(8,), seed=3)
            outputs.append(encode_dataset(train(config, tiny_images).encoder, tiny_images))
        np.testing.assert_array_equal(outputs[0][0], outputs[1][0])
        np.testing.assert_array_equal(outputs[0][1], outputs[1][1])
