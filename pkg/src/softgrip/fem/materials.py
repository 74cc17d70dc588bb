"""Per-tetrahedron material assignment from the 22-block stiffness vector."""

from dataclasses import dataclass

import numpy as np

from ..geometry.finger import TetMesh

E_MIN = 0.7e6   # Pa
E_MAX = 24.0e6  # Pa
POISSON = 0.45
GRIPPER_DENSITY = 1100.0  # kg/m^3, printed elastomer


def validate_stiffness(k: np.ndarray, n_blocks: int = 22) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    if k.shape != (n_blocks,):
        raise ValueError(f"stiffness vector must have {n_blocks} entries, "
                         f"got shape {k.shape}")
    if (k < E_MIN).any() or (k > E_MAX).any():
        bad = int(np.argmax((k < E_MIN) | (k > E_MAX)))
        raise ValueError(
            f"stiffness entry {bad} = {k[bad]:.4g} Pa outside "
            f"[{E_MIN:.2g}, {E_MAX:.2g}] Pa"
        )
    return k


@dataclass
class MaterialMap:
    """Stable neo-Hookean coefficients per tetrahedron.

    mu and lam are the Lame parameters of the target linear response;
    the stable formulation shifts lam by mu so the rest state is
    stress-free and inversion stays finite.
    """

    youngs: np.ndarray       # (n_t,) E per tet, Pa
    mu: np.ndarray           # (n_t,)
    lam_stable: np.ndarray   # (n_t,) lam + mu
    alpha: np.ndarray        # (n_t,) 1 + mu / lam_stable
    poisson: float
    density: float

    @property
    def max_youngs(self) -> float:
        return float(self.youngs.max())

    def p_wave_speed(self) -> float:
        """Fastest dilatational wave speed, used for the CFL substep count."""
        e = self.max_youngs
        m = e * (1 - self.poisson) / ((1 + self.poisson)
                                      * (1 - 2 * self.poisson))
        return float(np.sqrt(m / self.density))


def map_stiffness(k: np.ndarray, mesh: TetMesh, poisson: float = POISSON,
                  density: float = GRIPPER_DENSITY,
                  n_blocks: int = 22) -> MaterialMap:
    """Assign every tet the Young's modulus of its block."""
    k = validate_stiffness(k, n_blocks)
    if not (0 <= poisson < 0.5):
        raise ValueError(f"Poisson ratio must be in [0, 0.5), got {poisson}")
    e = k[mesh.block_ids]
    mu = e / (2 * (1 + poisson))
    lam = e * poisson / ((1 + poisson) * (1 - 2 * poisson))
    lam_stable = lam + mu
    return MaterialMap(
        youngs=e,
        mu=mu,
        lam_stable=lam_stable,
        alpha=1.0 + mu / lam_stable,
        poisson=poisson,
        density=density,
    )
