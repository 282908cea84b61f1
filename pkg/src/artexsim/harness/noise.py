"""Background native transfers among dedicated noise wallets."""

from __future__ import annotations

from ..errors import InsufficientFunding
from .world import World


def generate_noise(world: World) -> int:
    """Schedule the configured number of noise transfers; returns the count."""
    cfg = world.config.noise_trades
    if cfg.count == 0:
        return 0
    rng = world.noise_rng
    wallets = world.noise_wallets
    times = sorted(int(t) for t in rng.integers(0, cfg.horizon, size=cfg.count))
    lo, hi = world.units(cfg.min_amount), world.units(cfg.max_amount)
    for t in times:
        src, dst = (int(i) for i in rng.choice(len(wallets), size=2, replace=False))
        amount = int(rng.integers(lo, hi + 1))
        world.scheduler.at(t, _noise_transfer, world, src, dst, amount, trade="noise")
    return cfg.count


def _noise_transfer(world: World, src: int, dst: int, amount: int) -> None:
    wallets = world.noise_wallets
    need = amount + world.ledger.gas_fee
    for k in range(len(wallets)):
        i = (src + k) % len(wallets)
        if i != dst and world.ledger.balance(wallets[i].address) >= need:
            world.ledger.transfer_native(wallets[i].keys, wallets[dst].address, amount)
            return
    raise InsufficientFunding("noise wallets are exhausted; raise noise_trades.funding")
