"""OFDM transmitter, Rayleigh+AWGN channel with adversarial injection, OFDM receiver.

The whole transmit -> channel -> receive chain is differentiable end to end;
channel gain and noise draws are treated as constants during backprop. All
random sampling takes an explicit torch.Generator, never a hidden global RNG.

Frame layout is (batch, N_p + N_d, N_c, 2) real, last axis (real, imag).
Row 0..N_p-1 are pilot symbols; the rest carry the latent: one unitary IFFT
over the d/2 complex symbols, a cyclic prefix of the last N_cp time-domain
samples prepended, zero padding up to N_d * N_c, then a reshape into rows of
N_c. N_d = ceil((d/2 + N_cp) / N_c).
"""

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import ConfigError, EqualizationError, ShapeError


@dataclass(frozen=True)
class OFDMConfig:
    latent_dim: int = 1134
    n_subcarriers: int = 64    # N_c
    cp_len: int = 16           # N_cp
    n_pilots: int = 1          # N_p
    clip_ratio: float | None = None
    pilot_seed: int = 2024
    gain_floor: float = 1e-3
    rayleigh_var: float = 1.5  # sigma^2 of the complex channel gain

    def __post_init__(self):
        if self.latent_dim % 2 != 0:
            raise ConfigError(f"latent_dim must be even, got {self.latent_dim}")
        if self.cp_len >= self.n_subcarriers:
            raise ConfigError("cp_len must be smaller than n_subcarriers")
        if self.n_pilots < 1:
            raise ConfigError("need at least one pilot symbol")
        if self.clip_ratio is not None and self.clip_ratio <= 0:
            raise ConfigError(f"clip_ratio must be > 0, got {self.clip_ratio}")

    @property
    def half_dim(self):
        return self.latent_dim // 2

    @property
    def n_data_symbols(self):
        """N_d = ceil((d/2 + N_cp) / N_c)."""
        return math.ceil((self.half_dim + self.cp_len) / self.n_subcarriers)

    @property
    def frame_symbols(self):
        return self.n_pilots + self.n_data_symbols

    def frame_shape(self):
        return (self.frame_symbols, self.n_subcarriers, 2)

    def data_shape(self):
        """Shape of the data portion of a frame (the perturbation target)."""
        return (self.n_data_symbols, self.n_subcarriers, 2)

    def pilot_sequence(self, dtype=torch.complex64):
        """Deterministic unit-magnitude QPSK-like sequence shared by both ends."""
        rng = np.random.default_rng(self.pilot_seed)
        phases = math.pi / 4 + (math.pi / 2) * rng.integers(0, 4, self.n_subcarriers)
        seq = np.exp(1j * phases)
        return torch.as_tensor(seq, dtype=dtype)


@dataclass
class ChannelState:
    """Per-frame complex gain and noise variance (E|N|^2 per complex sample)."""

    gain: torch.Tensor         # complex, shape (batch,) or scalar
    noise_variance: float = 0.0

    def __post_init__(self):
        if self.noise_variance < 0:
            raise ConfigError("noise_variance must be >= 0")


def _as_batch(latent):
    if latent.ndim == 1:
        return latent.unsqueeze(0), True
    if latent.ndim == 2:
        return latent, False
    raise ShapeError(f"expected latent of shape (d,) or (batch, d), got {tuple(latent.shape)}")


def to_complex(latent):
    """Pair consecutive reals into complex symbols: (..., d) -> (..., d/2)."""
    if latent.shape[-1] % 2 != 0:
        raise ShapeError(f"latent dimension {latent.shape[-1]} is odd")
    pairs = latent.reshape(*latent.shape[:-1], latent.shape[-1] // 2, 2)
    return torch.view_as_complex(pairs.contiguous())


def from_complex(symbols):
    """Inverse of to_complex: (..., d/2) complex -> (..., d) real."""
    pairs = torch.view_as_real(symbols)
    return pairs.reshape(*pairs.shape[:-2], pairs.shape[-2] * 2)


def clip(signal, ratio):
    """Cap time-domain magnitudes at ratio * sqrt(mean power), preserving phase.

    Operates per frame (mean power over the trailing sample axis).
    """
    if ratio <= 0:
        raise ConfigError(f"clip ratio must be > 0, got {ratio}")
    power = signal.abs().pow(2).mean(dim=-1, keepdim=True)
    cap = ratio * power.sqrt()
    mag = signal.abs()
    scale = torch.where(mag > cap, cap / mag.clamp_min(1e-30), torch.ones_like(mag))
    return signal * scale


def papr_db(signal):
    """Peak-to-average power ratio of a complex time-domain signal, in dB."""
    power = signal.abs().pow(2)
    return 10.0 * torch.log10(power.amax(dim=-1) / power.mean(dim=-1))


def ofdm_transmit(latent, cfg):
    """Latent (batch, d) -> frame (batch, N_p + N_d, N_c, 2)."""
    latent, single = _as_batch(latent)
    if latent.shape[-1] != cfg.latent_dim:
        raise ShapeError(
            f"latent dim {latent.shape[-1]} != configured {cfg.latent_dim}"
        )
    symbols = to_complex(latent)                       # (b, d/2)
    time = torch.fft.ifft(symbols, norm="ortho")       # unitary, power preserving
    with_cp = torch.cat([time[..., -cfg.cp_len:], time], dim=-1)
    if cfg.clip_ratio is not None:
        with_cp = clip(with_cp, cfg.clip_ratio)
    total = cfg.n_data_symbols * cfg.n_subcarriers
    pad = total - with_cp.shape[-1]
    padded = torch.nn.functional.pad(torch.view_as_real(with_cp), (0, 0, 0, pad))
    data = torch.view_as_complex(padded).reshape(-1, cfg.n_data_symbols, cfg.n_subcarriers)
    pilot = cfg.pilot_sequence(dtype=data.dtype).to(data.device)
    pilot = pilot.expand(data.shape[0], cfg.n_pilots, cfg.n_subcarriers)
    frame = torch.view_as_real(torch.cat([pilot, data], dim=1))
    return frame.squeeze(0) if single else frame


def signal_power(frame, cfg):
    """Mean per-complex-symbol power of the data portion of a frame batch."""
    if frame.ndim == 3:
        frame = frame.unsqueeze(0)
    data = frame[:, cfg.n_pilots:]
    return float(data.pow(2).sum(dim=-1).mean())


def sample_channel_gain(batch, cfg, generator, dtype=torch.float32):
    """Draw CN(0, sigma^2) frame gains: |H|^2 has mean cfg.rayleigh_var."""
    scale = math.sqrt(cfg.rayleigh_var / 2.0)
    re = torch.randn(batch, generator=generator, dtype=dtype) * scale
    im = torch.randn(batch, generator=generator, dtype=dtype) * scale
    return torch.complex(re, im)


def noise_power_for_snr(p_sig, snr_db):
    """sigma_n^2 = p_sig / 10^(snr_db / 10)."""
    if p_sig <= 0:
        raise ConfigError(f"signal power must be > 0, got {p_sig}")
    return p_sig / (10.0 ** (snr_db / 10.0))


def perturbation_budget(p_sig, psr_db):
    """p_max = p_sig * 10^(psr_db / 10)."""
    if p_sig <= 0:
        raise ConfigError(f"signal power must be > 0, got {p_sig}")
    return p_sig * (10.0 ** (psr_db / 10.0))


def apply_channel(frame, state, perturbation=None, generator=None):
    """Y = H * X + delta + N over complex frame symbols.

    The perturbation, when present, covers only the data portion of the
    frame (shape (N_d, N_c, 2), optionally batched); pilot rows receive no
    delta. Gain and noise draws are constants for autograd.
    """
    single = frame.ndim == 3
    if single:
        frame = frame.unsqueeze(0)
    symbols = torch.view_as_complex(frame.contiguous())
    b, n_rows, n_sub = symbols.shape
    gain = state.gain.to(symbols.device)
    if gain.ndim == 0:
        gain = gain.expand(b)
    if gain.shape[0] != b:
        raise ShapeError(f"{gain.shape[0]} channel gains for {b} frames")
    out = gain[:, None, None] * symbols
    if perturbation is not None:
        if perturbation.ndim == 3:
            perturbation = perturbation.unsqueeze(0).expand(b, -1, -1, -1)
        n_pilot_rows = n_rows - perturbation.shape[1]
        if (perturbation.shape[0] != b or n_pilot_rows < 0
                or perturbation.shape[2:] != (n_sub, 2)):
            raise ShapeError(
                f"perturbation shape {tuple(perturbation.shape[1:])} does not "
                f"fit the data portion of frames with {n_rows} x {n_sub} symbols"
            )
        delta = torch.view_as_complex(perturbation.contiguous())
        zeros = torch.zeros(b, n_pilot_rows, n_sub, dtype=delta.dtype, device=delta.device)
        out = out + torch.cat([zeros, delta], dim=1)
    if state.noise_variance > 0:
        std = math.sqrt(state.noise_variance / 2.0)
        re = torch.randn(out.shape, generator=generator, dtype=frame.dtype, device=frame.device)
        im = torch.randn(out.shape, generator=generator, dtype=frame.dtype, device=frame.device)
        out = out + torch.complex(re, im) * std
    result = torch.view_as_real(out)
    return result.squeeze(0) if single else result


def channel_estimate(rx_pilot, tx_pilot):
    """Least-squares flat-channel estimate: mean over subcarriers of rx_k / tx_k."""
    if torch.any(tx_pilot.abs() == 0):
        raise ConfigError("tx pilot contains a zero entry")
    return (rx_pilot / tx_pilot).mean(dim=-1)


def equalize(symbols, gain, floor=1e-3):
    """Zero-forcing equalization symbols / gain; raises below the gain floor."""
    gain = torch.as_tensor(gain)
    if torch.any(gain.abs() < floor):
        raise EqualizationError(f"channel gain magnitude below floor {floor}")
    while gain.ndim < symbols.ndim:
        gain = gain.unsqueeze(-1)
    return symbols / gain


def _clamp_gain(gain, floor):
    """Clamp gain magnitude at the floor, preserving phase; zero gains get phase 1."""
    mag = gain.abs()
    unit = torch.where(
        mag > 0, gain / mag.clamp_min(1e-30),
        torch.ones_like(gain),
    )
    return torch.where(mag < floor, unit * floor, gain), mag < floor


def ofdm_receive_with_info(frame, cfg, on_fade="raise"):
    """Receive a frame batch; also return estimated gains and fade flags.

    Steps: split pilots from data, discard the zero pad using the known
    latent dimension, remove the cyclic prefix, FFT back to frequency
    domain, estimate the flat channel gain from the pilots, equalize.
    """
    if on_fade not in ("raise", "clamp"):
        raise ConfigError(f"on_fade must be raise or clamp, got {on_fade}")
    single = frame.ndim == 3
    if single:
        frame = frame.unsqueeze(0)
    if frame.shape[1:] != cfg.frame_shape():
        raise ShapeError(
            f"frame shape {tuple(frame.shape[1:])} != expected {cfg.frame_shape()}"
        )
    symbols = torch.view_as_complex(frame.contiguous())
    rx_pilot = symbols[:, :cfg.n_pilots].mean(dim=1)       # (b, N_c)
    data = symbols[:, cfg.n_pilots:].reshape(symbols.shape[0], -1)
    payload = data[:, :cfg.half_dim + cfg.cp_len]          # discard zero pad
    time = payload[:, cfg.cp_len:]                         # remove cyclic prefix
    freq = torch.fft.fft(time, norm="ortho")
    tx_pilot = cfg.pilot_sequence(dtype=symbols.dtype).to(symbols.device)
    gain = channel_estimate(rx_pilot, tx_pilot)
    fades = gain.abs() < cfg.gain_floor
    if on_fade == "raise":
        if bool(fades.any()):
            raise EqualizationError(
                f"estimated gain magnitude below floor {cfg.gain_floor}"
            )
    else:
        gain, fades = _clamp_gain(gain, cfg.gain_floor)
    equalized = freq / gain[:, None]
    latent = from_complex(equalized)
    if single:
        return latent.squeeze(0), gain.squeeze(0), fades.squeeze(0)
    return latent, gain, fades


def ofdm_receive(frame, cfg, on_fade="raise"):
    """Frame (batch, N_p + N_d, N_c, 2) -> latent (batch, d)."""
    latent, _, _ = ofdm_receive_with_info(frame, cfg, on_fade=on_fade)
    return latent
