from .continuous import assemble_continuous
from .ipdg import assemble_ipdg
from .nodal_dg import assemble_nodal_dg
from .system import (
    AssembledSystem,
    GridFunction,
    SemiDiscreteSystem,
    Space,
    as_function,
    export_matrix_market,
    l2_error,
    project_initial,
    to_first_order,
)

ASSEMBLERS = {
    "cg": assemble_continuous,
    "ipdg": assemble_ipdg,
    "ndg": assemble_nodal_dg,
}


def assemble(family, mesh, l, c=1.0, sigma=0.0, bc="dirichlet", alpha=None, flux="upwind"):
    """Dispatch to one of the three discretizations by family name."""
    if family == "cg":
        return assemble_continuous(mesh, l, c=c, sigma=sigma, bc=bc)
    if family == "ipdg":
        return assemble_ipdg(mesh, l, c=c, sigma=sigma, alpha=alpha, bc=bc)
    if family == "ndg":
        return assemble_nodal_dg(mesh, l, c=c, sigma=sigma, bc=bc, flux=flux)
    raise ValueError(f"unknown discretization family {family!r}")
