"""Sets up the environment for games and sweeps."""

import os

import jax


OUTPUT_DIR_ENV = "ISOREG_OUTPUT_DIR"


def default_output_dir() -> str:
    """Returns the output directory from the environment, or the cwd."""
    return os.environ.get(OUTPUT_DIR_ENV, os.getcwd())


def resolve_output_path(path: str) -> str:
    """Resolves a relative output path against the default output directory."""
    if os.path.isabs(path):
        return path
    return os.path.join(default_output_dir(), path)


def setup_environment(base_dir: str = "") -> str:
    """
    Sets up the output directory and JAX configuration.

    Args:
        base_dir: Directory for results and the JAX compilation cache. Falls
            back to `$ISOREG_OUTPUT_DIR` or the current directory.

    Returns:
        The directory that was prepared.
    """
    base_dir = base_dir or default_output_dir()
    os.makedirs(base_dir, exist_ok=True)
    os.environ[OUTPUT_DIR_ENV] = base_dir

    # Setting up JAX cache directories and configurations
    jax_cache_dir = os.path.join(base_dir, "jax_cache")
    os.makedirs(jax_cache_dir, exist_ok=True)
    jax.config.update("jax_compilation_cache_dir", jax_cache_dir)
    return base_dir
