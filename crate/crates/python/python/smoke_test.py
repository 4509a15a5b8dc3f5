"""Smoke test for the dictapprox_py extension module."""

import math

import dictapprox_py as da


def main():
    inst = da.generate(d=16, n=120, m=5, k=2, noise_ratio=0.0, seed=7)
    x = inst["X"]
    assert len(x) == 16 and len(x[0]) == 120
    assert inst["gamma_star"] == 0.0

    cfg = da.LearnConfig(2, 5, max(1.0, inst["lambda"]), 0.25)
    assert abs(cfg.tau - 0.0625 / 32.0) < 1e-15
    model, trace = da.dict_approx(x, cfg)
    final_psi = trace["records"][-1]["psi"]
    assert final_psi <= 0.25, final_psi
    assert model.max_code_len() <= cfg.sparsity_cap
    frob = sum(v * v for row in x for v in row)
    assert abs(model.residual_frob_sq(x) / frob - final_psi) <= 1e-8 * max(final_psi, 1e-12)
    again = da.DictModel.from_json(model.to_json())
    assert again.atoms == model.atoms

    planted = da.generate(d=16, n=60, m=5, k=2, rho=0.1, seed=8)
    model, res = da.outlier_dict_approx(planted["X"], da.LearnConfig(2, 5, 1.0, 0.1), 0.1)
    assert len(res["outlier_indices"]) == 6

    sol = da.solve_tc([[1.0, 0.0], [0.0, 0.5]], 0.5)
    assert sol["x"] == [1.0, 0.0] and sol["hit_set"] == [0]
    value, hits = da.evaluate_tc([[1.0, 0.0], [0.0, 1.0]], [1.0, 0.0], 0.25)
    assert value == 1.0 and hits == [0]

    assert abs(da.eval_2_to_p([[1.0, 0.0], [0.0, 1.0]], 4.0, [1.0, 1.0]) - 2 ** -0.25) < 1e-15
    bound = da.lower_bound_2_to_p([[3.0, -4.0]], 4.0)
    assert abs(bound["value"] - 5.0) < 1e-12

    assert da.psi_hat([1.0, 4.0, 9.0], 1.0 / 3.0) == 5.0

    try:
        da.LearnConfig(1, 1, 1.0, 2.0)
    except ValueError:
        pass
    else:
        raise AssertionError("epsilon > 1 accepted")

    assert math.isfinite(final_psi)
    print("smoke test passed")


if __name__ == "__main__":
    main()
