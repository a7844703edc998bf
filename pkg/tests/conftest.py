import numpy as np
import pytest

from floqcc.bath import Ohmic, StructuredPeak, map_collective_coordinate
from floqcc.floquet import build_quasienergy_operator, decompose_operator, solve_floquet
from floqcc.generator import BathChannel, build_liouvillian, steady_state
from floqcc.model import (
    SupersystemSpec,
    build_coupling_operators,
    build_supersystem_fourier,
)

# Fig. 2 caption parameters (units of omega0)
FIG2 = dict(
    omega0=1.0, g=1e-3, gamma=4e-4, d_c=1e-3, d_h=5e-3, beta_c=25.0, beta_h=2.22
)


def fig2_spec(omega_L: float, n_fock: int = 8, g: float | None = None,
              coupling_form: str = "sinusoidal") -> SupersystemSpec:
    """Resonance-locked supersystem at the Fig. 2 parameter set."""
    cc = map_collective_coordinate(
        StructuredPeak(d_c=FIG2["d_c"], gamma=FIG2["gamma"], omega_res=FIG2["omega0"] - omega_L)
    )
    return SupersystemSpec(
        omega0=FIG2["omega0"],
        g=FIG2["g"] if g is None else g,
        omega_L=omega_L,
        omega_cc=cc.omega_cc,
        n_fock=n_fock,
        lambda0=cc.lambda0,
        beta_h=FIG2["beta_h"],
        beta_c=FIG2["beta_c"],
        hot_bath=Ohmic(d_h=FIG2["d_h"], omega_ref=FIG2["omega0"]),
        residual_bath=cc.residual,
        coupling_form=coupling_form,
    )


def solve_pipeline(spec: SupersystemSpec, k_ext: int, k_rho=None, method="auto",
                   n_window=None):
    """bath -> model -> floquet -> generator chain for tests."""
    h = build_supersystem_fourier(spec)
    fs = solve_floquet(build_quasienergy_operator(h, spec.omega_L, k_ext))
    ops = build_coupling_operators(spec)
    channels = [BathChannel("hot", ops.s_hot, spec.hot_bath, beta=spec.beta_h)]
    jumps = [decompose_operator(ops.s_hot, fs, n_window=n_window)]
    if spec.residual_bath is not None:
        channels.append(
            BathChannel("cold", ops.s_cold_residual, spec.residual_bath, beta=spec.beta_c)
        )
        jumps.append(decompose_operator(ops.s_cold_residual, fs, n_window=n_window))
    liouv = build_liouvillian(h, fs, channels, jumps)
    rho, info = steady_state(liouv, k_rho=k_rho, method=method)
    return h, fs, liouv, rho, info


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
