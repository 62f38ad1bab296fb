"""Symbolic oracle for the 3D frame element stiffness.

Derives the local stiffness from the strain energy of Hermite-interpolated
bending fields and linear axial/torsion fields, rotates it to global axes and
writes the resulting matrices as a C++ header of frozen values.

Run:  python3 tests/oracles/frame_stiffness_oracle.py > tests/oracles/frame_stiffness_oracle.hpp
"""
import sympy as sp

x, L = sp.symbols("x L", positive=True)
E, G, Iy, Iz, J, A = sp.symbols("E G Iy Iz J A", positive=True)

s = x / L
hermite = [1 - 3 * s**2 + 2 * s**3, L * (s - 2 * s**2 + s**3), 3 * s**2 - 2 * s**3, L * (-s**2 + s**3)]
linear = [1 - s, s]

# Local DOF order per node: u, v, w, rx, ry, rz.
q = sp.symbols("q0:12")
u = linear[0] * q[0] + linear[1] * q[6]
phi = linear[0] * q[3] + linear[1] * q[9]
# x-y plane: slope dv/dx = rz.
v = hermite[0] * q[1] + hermite[1] * q[5] + hermite[2] * q[7] + hermite[3] * q[11]
# x-z plane: slope dw/dx = -ry.
w = hermite[0] * q[2] - hermite[1] * q[4] + hermite[2] * q[8] - hermite[3] * q[10]

energy = sp.Rational(1, 2) * sp.integrate(
    E * A * sp.diff(u, x) ** 2 + G * J * sp.diff(phi, x) ** 2
    + E * Iz * sp.diff(v, x, 2) ** 2 + E * Iy * sp.diff(w, x, 2) ** 2,
    (x, 0, L),
)
k_local = sp.hessian(energy, q)


def local_axes(xi, xj):
    d = sp.Matrix(xj) - sp.Matrix(xi)
    ex = d / d.norm()
    aux = sp.Matrix([0, 0, 1])
    if ex.cross(aux).norm() < sp.Rational(1, 10**6):
        aux = sp.Matrix([1, 0, 0])
    ez = aux - aux.dot(ex) * ex
    ez = ez / ez.norm()
    ey = ez.cross(ex)
    return sp.Matrix.vstack(ex.T, ey.T, ez.T), d.norm()


CASES = {
    "oblique": dict(xi=[sp.Rational(3, 10), -sp.Rational(1, 5), sp.Rational(1, 10)],
                    xj=[sp.Rational(21, 10), sp.Rational(7, 5), sp.Rational(13, 10)],
                    props=dict(E=210e6, G=80e6, Iy=3e-5, Iz=2e-5, J=1e-5, A=4e-3)),
    "vertical": dict(xi=[0, 0, 0], xj=[0, 0, 3],
                     props=dict(E=199e6, G=76.5e6, Iy=6.6e-5, Iz=3.3e-6, J=6.93e-5, A=4.3e-3)),
}

print("// Generated by frame_stiffness_oracle.py. Do not edit by hand.")
print("#pragma once")
print("#include <array>\n")
print("namespace oracle {\n")
print("struct FrameCase {")
print("  std::array<double, 3> xi, xj;")
print("  double E, G, Iy, Iz, J, A;")
print("  std::array<double, 144> k;  // global stiffness, row-major")
print("};\n")
for name, c in CASES.items():
    R, length = local_axes(c["xi"], c["xj"])
    T = sp.zeros(12, 12)
    for b in range(4):
        T[3 * b:3 * b + 3, 3 * b:3 * b + 3] = R
    p = c["props"]
    kl = k_local.subs({E: sp.Float(p["E"], 30), G: sp.Float(p["G"], 30), Iy: sp.Float(p["Iy"], 30),
                       Iz: sp.Float(p["Iz"], 30), J: sp.Float(p["J"], 30), A: sp.Float(p["A"], 30), L: length})
    kg = (T.T * kl * T).evalf(30)
    fmt = lambda v: "{:.17e}".format(float(v))
    print(f"inline const FrameCase k_{name}{{")
    print("    {" + ", ".join(fmt(v) for v in c["xi"]) + "},")
    print("    {" + ", ".join(fmt(v) for v in c["xj"]) + "},")
    print("    " + ", ".join(repr(p[k]) for k in ["E", "G", "Iy", "Iz", "J", "A"]) + ",")
    print("    {{")
    for r in range(12):
        print("        " + ", ".join(fmt(kg[r, cc]) for cc in range(12)) + ",")
    print("    }}};\n")
print("}  // namespace oracle")
