"""Paths that connect left configurations to the empty one.

Run:  python3 demos/04_vacuum_paths.py
"""

from rpchain.model import InteractionSpec, ModelParams
from rpchain.paths import LeftSpace, check_path, connect_to_vacuum, keyex_table, leading_order_fit

ell = 5
config = (-5, -3, -2)
path = connect_to_vacuum(config, ell)
print(f"path from {config} at ell={ell} ({len(path)} moves, order {path.order} in tau):")
for move, nxt in zip(path.moves, path.configs[1:]):
    print(f"  {move.kind:>4} {move.action:<10} {str(move.sites):<9} -> {nxt}")
print("checker:", check_path(path))

# The amplitude of the path operator scales like tau^(number of pair moves).
space = LeftSpace(ModelParams(ell=3, g=0.3, interaction=InteractionSpec.power_law(1.5), n_max=1))
print("\nlog-log slopes at ell=3:")
for c in [(-1,), (-2,), (-3,), (-3, -2, -1)]:
    f = leading_order_fit(connect_to_vacuum(c, 3), space)
    print(f"  {str(c):<12} order {f['order']}  slope {f['slope']:.4f}")

# Joining two paths through the vacuum links every pair of configurations.
configs = [(), (-1,), (-2,), (-3,), (-2, -1), (-3, -1), (-3, -2), (-3, -2, -1)]
table = keyex_table(space, configs)
print(f"\nlinked pairs: {sum(v is not None for v in table.values())} of {len(table)}")
