import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinbath.mle import (
    CoherenceLibrary,
    DensityEstimate,
    RatePDF,
    benchmark_error,
    build_library,
    build_pdf,
    estimate_density,
    library_from_sweep,
    likelihood_surface,
    read_library,
    write_library,
)
from spinbath.fitting import run_sweep


def lognormal_rates(mu, sigma, n, seed):
    rng = np.random.default_rng(seed)
    return 10 ** (mu + sigma * rng.standard_normal(n))


def synthetic_library(seed=0, n=400):
    """Cells whose rates scale linearly with density and thickness."""
    thicknesses = np.array([2.0, 4.0, 8.0])
    densities = np.array([1.0, 2.0, 4.0, 8.0])
    cells = {}
    for i, t in enumerate(thicknesses):
        for j, d in enumerate(densities):
            mu = np.log10(d * np.sqrt(t))
            cells[(i, j)] = np.sort(
                lognormal_rates(mu, 0.15, n, seed + 17 * i + j))
    return CoherenceLibrary(thicknesses=thicknesses, densities=densities,
                            cells=cells)


# --- rate PDF -----------------------------------------------------------

def test_pdf_normalization():
    pdf = build_pdf(lognormal_rates(0.5, 0.3, 5000, seed=1))
    assert pdf.integral() == pytest.approx(1.0, abs=1e-6)


def test_pdf_matches_lognormal_shape():
    mu, sig = 0.0, 0.25
    pdf = build_pdf(lognormal_rates(mu, sig, 200000, seed=2), n_bins=60)
    x = 10 ** np.linspace(mu - 2 * sig, mu + 2 * sig, 25)
    expect = (np.exp(-0.5 * ((np.log10(x) - mu) / sig) ** 2)
              / (x * np.log(10.0) * sig * np.sqrt(2 * np.pi)))
    assert np.allclose(pdf.raw(x), expect, rtol=0.08)


def test_pdf_floor_engages_outside_support():
    samples = lognormal_rates(0.0, 0.2, 300, seed=3)
    pdf = build_pdf(samples)
    far = np.array([samples.min() / 100.0, samples.max() * 100.0])
    assert np.all(pdf.raw(far) == 0.0)
    assert np.all(pdf(far) == pdf.floor)
    assert pdf.floor == pytest.approx(
        1.0 / (10.0 * 300 * (samples.max() - samples.min())))


def test_pdf_degenerate_spike():
    pdf = build_pdf(np.full(50, 2.0))
    assert pdf(np.array([2.0]))[0] > pdf.floor
    assert pdf(np.array([5.0]))[0] == pdf.floor


def test_pdf_rejects_bad_samples():
    with pytest.raises(ValueError):
        build_pdf(np.array([]))
    with pytest.raises(ValueError):
        build_pdf(np.array([1.0, -2.0]))
    with pytest.raises(ValueError):
        build_pdf(np.array([1.0, np.inf]))


# --- likelihood surface -------------------------------------------------

def test_likelihood_recovers_generating_cell():
    lib = synthetic_library()
    # data drawn from the (t=4, d=4) cell distribution
    rates = lognormal_rates(np.log10(4.0 * np.sqrt(4.0)), 0.15, 200, seed=9)
    surf = likelihood_surface(rates, lib)
    i, a = surf.argmax
    assert lib.thicknesses[i] == 4.0
    assert surf.densities[a] == pytest.approx(4.0, abs=0.5)


def test_likelihood_permutation_invariance():
    lib = synthetic_library()
    rates = lognormal_rates(np.log10(2.0), 0.15, 50, seed=4)
    s1 = likelihood_surface(rates, lib)
    s2 = likelihood_surface(rates[::-1].copy(), lib)
    assert np.array_equal(s1.log_likelihood, s2.log_likelihood)


def test_loglikelihood_doubles_with_duplicated_data():
    lib = synthetic_library()
    rates = lognormal_rates(np.log10(2.0), 0.15, 40, seed=5)
    s1 = likelihood_surface(rates, lib)
    s2 = likelihood_surface(np.concatenate([rates, rates]), lib)
    assert np.allclose(s2.log_likelihood, 2.0 * s1.log_likelihood)


def test_likelihood_rejects_unsupported_data():
    lib = synthetic_library()
    with pytest.raises(ValueError):
        likelihood_surface(np.array([1e9, 2e9]), lib)
    with pytest.raises(ValueError):
        likelihood_surface(np.array([]), lib)
    with pytest.raises(ValueError):
        likelihood_surface(np.array([-1.0]), lib)


def test_estimate_density_from_linecut():
    lib = synthetic_library()
    rates = lognormal_rates(np.log10(4.0 * np.sqrt(4.0)), 0.15, 400, seed=6)
    surf = likelihood_surface(rates, lib)
    est = estimate_density(surf, 4.0)
    assert est.fixed_thickness == 4.0
    assert est.rho_mle == pytest.approx(4.0, abs=0.6)
    assert est.rho_sigma > 0


def test_density_estimate_validation():
    with pytest.raises(ValueError):
        DensityEstimate(rho_mle=3.0, rho_sigma=0.0, fixed_thickness=2.0)


# --- benchmark ----------------------------------------------------------

def test_benchmark_error_decreases_with_n():
    lib = synthetic_library(n=600)
    bm = benchmark_error(lib, [2, 8, 32], trials=120, fixed_thickness=4.0,
                         seed=1)
    errs = bm.mean_relative_error
    assert errs[0] > errs[-1]
    assert bm.exponent > 0
    assert np.allclose(errs, np.sqrt(bm.mean_squared_error))


def test_benchmark_requires_enough_trials():
    lib = synthetic_library()
    with pytest.raises(ValueError):
        benchmark_error(lib, [2, 4], trials=10, fixed_thickness=4.0, seed=0)


# --- construction and serialization ------------------------------------

def test_build_library_from_engine():
    lib = build_library(np.array([3.0]), np.array([2.0, 5.0, 10.0, 20.0]),
                        60, seed=8)
    assert set(lib.cells) == {(0, j) for j in range(4)}
    for samples in lib.cells.values():
        assert np.all(samples > 0)
        assert np.all(np.diff(samples) >= 0)
    assert lib.provenance["schema"] == "spinbath-library-1"
    # median rate increases with density
    med = [np.median(lib.cells[(0, j)]) for j in range(4)]
    assert med[0] < med[-1]


def test_library_from_sweep_matches_build():
    grid = run_sweep([3.0], [2.0, 5.0, 10.0, 20.0], 60, seed=8,
                     placement_mode="continuum-poisson")
    lib1 = library_from_sweep(grid)
    lib2 = build_library(np.array([3.0]), np.array([2.0, 5.0, 10.0, 20.0]),
                         60, seed=8)
    for key in lib2.cells:
        assert np.array_equal(lib1.cells[key], lib2.cells[key])


def test_library_round_trip():
    lib = synthetic_library(n=30)
    buf = io.StringIO()
    write_library(lib, buf)
    text = buf.getvalue()
    back = read_library(io.StringIO(text))
    assert np.array_equal(back.thicknesses, lib.thicknesses)
    assert np.array_equal(back.densities, lib.densities)
    for key in lib.cells:
        assert np.array_equal(back.cells[key], lib.cells[key])
    buf2 = io.StringIO()
    write_library(back, buf2)
    # idempotent up to provenance defaults
    assert buf2.getvalue().splitlines()[4:] == text.splitlines()[4:]


def test_library_rejects_empty_cell():
    with pytest.raises(ValueError):
        CoherenceLibrary(thicknesses=np.array([1.0]),
                         densities=np.array([1.0]),
                         cells={(0, 0): np.array([])})


@given(scale=st.floats(0.6, 2.0))
@settings(max_examples=20, deadline=None)
def test_argmax_scale_consistency(scale):
    # in a single-thickness library whose rates scale linearly with
    # density, scaling the data scales the density argmax accordingly
    thicknesses = np.array([4.0])
    densities = np.array([1.0, 2.0, 4.0, 8.0])
    cells = {(0, j): np.sort(lognormal_rates(np.log10(d), 0.15, 400,
                                             seed=11 + j))
             for j, d in enumerate(densities)}
    lib = CoherenceLibrary(thicknesses=thicknesses, densities=densities,
                           cells=cells)
    rates = lognormal_rates(np.log10(2.0), 0.15, 300, seed=7)
    surf = likelihood_surface(rates * scale, lib)
    _, a = surf.argmax
    assert surf.densities[a] == pytest.approx(2.0 * scale, rel=0.3)
