"""Smoke test for the surfield Python bindings.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`.
"""

import math

import surfield


def main():
    mesh = surfield.Mesh.circle(4)
    assert mesh.n_vertices == 32
    assert abs(mesh.total_measure() - 32 * 2 * math.sin(math.pi / 32)) < 1e-12

    op = surfield.Operator(mesh, "circle_experiment")
    density = surfield.Density.circle_paper(1e4, 1.5)
    poly = surfield.ChebyshevPoly.for_operator(op, density)
    assert poly.active_degree <= poly.degree

    noise = surfield.white_noise(op.n, 7)
    assert noise == surfield.white_noise(op.n, 7)
    z = surfield.sample_field(op, poly, noise)
    exact = surfield.exact_sample(op, density, noise)
    diff = math.sqrt(sum((a - b) ** 2 for a, b in zip(z, exact)))
    rel = diff / math.sqrt(sum(b * b for b in exact))
    assert rel < 1e-8, rel

    sphere = surfield.Mesh.icosphere(2)
    assert sphere.n_vertices == 162
    sop = surfield.Operator(sphere, "matern", kappa2=10.0)
    zs = surfield.sample_field(
        sop,
        surfield.ChebyshevPoly.for_operator(sop, surfield.Density.matern(10.0, 1.5)),
        surfield.white_noise(sop.n, 1),
    )
    assert len(zs) == 162 and all(math.isfinite(v) for v in zs)

    assert surfield.degree_rule(math.exp(-1), 1, 1.0) == 10
    assert abs(surfield.fit_slope([(1.0, 1.0), (2.0, 4.0)]) - 2.0) < 1e-12

    passed, text = surfield.run_oracle_suite()
    assert passed, text
    print(f"ok: circle rel. error {rel:.2e}, oracle suite passed")


if __name__ == "__main__":
    main()
