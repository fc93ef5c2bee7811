import numpy as np
import pytest

from channel_model import ChannelRealization, SubcarrierGains


@pytest.fixture
def canonical_gains():
    """sigma2=1, P_s=1, g_sr=4, g_s=(1, 0.5), g_r=(2, 0.5)."""
    return SubcarrierGains(4.0, np.array([1.0, 0.5]), np.array([2.0, 0.5]))


@pytest.fixture
def canonical_channel():
    return ChannelRealization(
        gain_sr=np.array([4.0]),
        gain_su=np.array([[1.0, 0.5]]),
        gain_ru=np.array([[2.0, 0.5]]),
        noise_power=1.0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_stack(rng):
    """Factory for random (gain_sr, gain_su, gain_ru) stacks with a strong S-R link."""
    def make(count, num_users=3, sr_scale=20.0, su_scale=1.0, ru_scale=5.0):
        gain_sr = rng.exponential(sr_scale, size=count) + 1e-6
        gain_su = rng.exponential(su_scale, size=(count, num_users)) + 1e-6
        gain_ru = rng.exponential(ru_scale, size=(count, num_users)) + 1e-6
        return gain_sr, gain_su, gain_ru
    return make
