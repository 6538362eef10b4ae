import jax

# Regret identities are asserted to 1e-9 and below; float32 is not enough.
jax.config.update("jax_enable_x64", True)
# Label streams must not depend on whether the CLI has run setup first.
jax.config.update("jax_threefry_partitionable", True)

__version__ = "0.1.0"
