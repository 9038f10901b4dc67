"""Module addresses: weight paths, hook sites and aliases for common checkpoint naming schemes."""
from __future__ import annotations

import re

from microedit.shared.exception import AddressError

from .models import ModelConfig

ATTN_PARTS = ('q', 'k', 'v', 'o')
MLP_PARTS = ('up', 'down')

_ALIASES: list[tuple[re.Pattern[str], str]] = [
    (re.compile(r'^transformer\.h\.(\d+)\.mlp\.fc_out$'), 'blocks.{0}.mlp.down'),
    (re.compile(r'^transformer\.h\.(\d+)\.mlp\.fc_in$'), 'blocks.{0}.mlp.up'),
    (re.compile(r'^transformer\.h\.(\d+)\.attn\.(q|k|v|out)_proj$'), 'blocks.{0}.attn.{1}'),
    (re.compile(r'^model\.layers(?:\.(\d+)|\[(\d+)\])\.mlp\.down_proj$'), 'blocks.{0}.mlp.down'),
    (re.compile(r'^model\.layers(?:\.(\d+)|\[(\d+)\])\.mlp\.up_proj$'), 'blocks.{0}.mlp.up'),
    (re.compile(r'^model\.layers(?:\.(\d+)|\[(\d+)\])\.self_attn\.(q|k|v|o)_proj$'), 'blocks.{0}.attn.{1}'),
]


def weight_addresses(config: ModelConfig) -> list[str]:
    """Every addressable weight tensor, in a fixed canonical order."""
    addresses = ['embed', 'pos_embed']
    for i in range(config.n_layers):
        addresses += [f'blocks.{i}.ln1.scale', f'blocks.{i}.ln1.shift']
        addresses += [f'blocks.{i}.attn.{p}' for p in ATTN_PARTS]
        addresses += [f'blocks.{i}.ln2.scale', f'blocks.{i}.ln2.shift']
        addresses += [f'blocks.{i}.mlp.{p}' for p in MLP_PARTS]
    addresses += ['ln_f.scale', 'ln_f.shift', 'unembed']
    return addresses


def weight_shape(config: ModelConfig, address: str) -> tuple[int, ...]:
    d, v = config.d_model, config.vocab_size
    leaf = address.rsplit('.', 1)[-1]
    if address == 'embed' or address == 'unembed':
        return (v, d)
    if address == 'pos_embed':
        return (config.context_len, d)
    if leaf in ('scale', 'shift'):
        return (d,)
    if leaf == 'up':
        return (config.d_mlp, d)
    if leaf == 'down':
        return (d, config.d_mlp)
    return (d, d)


def hook_sites(config: ModelConfig) -> list[str]:
    sites = ['embed']
    for i in range(config.n_layers):
        sites += [f'blocks.{i}.ln1']
        sites += [f'blocks.{i}.attn.{p}' for p in ATTN_PARTS]
        sites += [f'blocks.{i}.ln2', f'blocks.{i}.mlp.up', f'blocks.{i}.mlp.act', f'blocks.{i}.mlp.down', f'blocks.{i}']
    sites += ['ln_f', 'unembed']
    return sites


def resolve_alias(name: str) -> str:
    """Map a common checkpoint module name onto the native `blocks.<i>...` form.

    Names already in native form pass through; a trailing `.weight` is dropped.
    """
    name = name.strip()
    if name.endswith('.weight'):
        name = name[: -len('.weight')]
    for pattern, native in _ALIASES:
        match = pattern.match(name)
        if match:
            groups = [g for g in match.groups() if g is not None]
            if groups[-1] == 'out':
                groups[-1] = 'o'
            return native.format(*groups)
    return name


def resolve_address(config: ModelConfig, name: str) -> str:
    address = resolve_alias(name)
    if address not in set(weight_addresses(config)):
        raise AddressError(f'Unresolved module address {name!r}', details={'address': name})
    return address


def layer_of(address: str) -> int:
    match = re.match(r'^blocks\.(\d+)\.', address)
    if not match:
        raise AddressError(f'Address {address!r} does not name a block module', details={'address': address})
    return int(match.group(1))
