"""Finite element kernel walkthrough: meshes, assembly, and convergence.

Solves -Laplace(u) = 2 pi^2 sin(pi x) sin(pi y) on the unit square with
homogeneous Dirichlet conditions, whose exact solution is
sin(pi x) sin(pi y), and reports the L2 convergence rate for P1 and P2
elements over a sequence of meshes.
"""

import numpy as np

import eimrb as er


def exact(xy):
    return np.sin(np.pi * xy[:, 0]) * np.sin(np.pi * xy[:, 1])


def rhs(xy):
    return 2 * np.pi**2 * exact(xy)


def l2_error(space, values):
    xq = space.quad_phys_points()
    uh = np.einsum("tn,nq->tq", values[space.elem_dofs], space._phi)
    ue = exact(xq.reshape(-1, 2)).reshape(uh.shape)
    return np.sqrt(np.einsum("q,t,tq->", space.quad_weights, space._detj,
                             (uh - ue) ** 2))


mesh = er.build_mesh(4)
print(f"mesh with n=4: {mesh.n_triangles} triangles, "
      f"{len(mesh.vertices)} vertices, total area {mesh.triangle_areas().sum():.12f}")

for degree in (1, 2):
    errors, hs = [], []
    for n in (8, 16, 32):
        space = er.build_space(er.build_mesh(n), degree)
        op, vec = er.apply_dirichlet(space, er.assemble_stiffness(space),
                                     er.assemble_load(space, rhs))
        u = er.solve_sparse(op, vec)
        errors.append(l2_error(space, u))
        hs.append(1.0 / n)
    rate = np.polyfit(np.log(hs), np.log(errors), 1)[0]
    print(f"P{degree}: L2 errors {[f'{e:.3e}' for e in errors]}  "
          f"fitted rate {rate:.2f} (expected {degree + 1})")
