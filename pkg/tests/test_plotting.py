import pytest

from covroc import plotting
from covroc.cli import curves_payload
from covroc.simulation import MonteCarloPlan, generate_scenario, run_monte_carlo
from covroc.testing import BandwidthPolicy, TestConfig, run_test

PNG = b"\x89PNG\r\n\x1a\n"


@pytest.fixture(scope="module")
def data():
    return generate_scenario("C", 80, 80, seed=2)


def test_curves_png_is_deterministic(tmp_path, data):
    payload = curves_payload(data, [3.0, 8.0], 50, BandwidthPolicy())
    a = plotting.plot_curves(payload, tmp_path / "a.png")
    b = plotting.plot_curves(payload, tmp_path / "b.png")
    assert a.read_bytes()[:8] == PNG
    assert a.read_bytes() == b.read_bytes()


def test_curves_without_conditional(tmp_path, data):
    payload = curves_payload(data, [], 30, BandwidthPolicy())
    assert plotting.plot_curves(payload, tmp_path / "c.png").stat().st_size > 0


def test_bootstrap_panels(tmp_path, data):
    res = run_test(data, TestConfig(B=15, grid_size=30))
    assert plotting.plot_bootstrap(res, tmp_path / "b.png").read_bytes()[:8] == PNG


def test_rejection_panels(tmp_path):
    plan = MonteCarloPlan("A", sample_sizes=((20, 20), (25, 30)), n_s=2, alphas=(0.05, 0.1),
                          rhos=(0.5, 0.25), test=TestConfig(B=5, grid_size=20))
    table = run_monte_carlo(plan)
    assert plotting.plot_rejections(table, tmp_path / "r.png").read_bytes()[:8] == PNG
