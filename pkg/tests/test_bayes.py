from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from agrichain.bayes import (
    PosteriorMatrix,
    PriorMatrix,
    deviation_from_class,
    run_sbu,
    sbu_step,
    write_convergence_csv,
)
from agrichain.errors import ShapeMismatchError
from agrichain.kinetics import ResponseClass


def test_uniform_prior():
    p = PriorMatrix.uniform(3)
    assert p.probs.shape == (5, 3)
    np.testing.assert_allclose(p.probs, 0.2)


def test_shape_checks():
    with pytest.raises(ShapeMismatchError):
        PriorMatrix(np.ones((4, 2)))
    with pytest.raises(ShapeMismatchError):
        sbu_step(PriorMatrix.uniform(2), np.ones((5, 3)))


def test_uniform_prior_returns_normalised_likelihood():
    f = np.array([[0.1, 0.0], [0.3, 0.0], [0.6, 0.0], [0.0, 0.5], [0.0, 0.5]])
    post, nxt = sbu_step(PriorMatrix.uniform(2), f)
    np.testing.assert_allclose(post.probs, f / f.sum(axis=0))
    assert post.step == nxt.step == 1


def test_zero_likelihood_column_gives_zero_posterior_and_keeps_prior():
    prior = PriorMatrix(np.array([[0.5, 0.2], [0.5, 0.2], [0, 0.2], [0, 0.2], [0, 0.2]]))
    f = np.array([[0, 0.2], [0, 0.2], [1, 0.2], [0, 0.2], [0, 0.2]], dtype=float)
    post, nxt = sbu_step(prior, f)
    assert post.zero_columns.tolist() == [0]
    np.testing.assert_allclose(nxt.probs[:, 0], prior.probs[:, 0])
    assert deviation_from_class(post)[0] == 1.0


def test_unobserved_class_is_not_erased_from_the_carried_prior():
    f = np.array([[0.0], [0.0], [0.7], [0.3], [0.0]])
    _, nxt = sbu_step(PriorMatrix.uniform(1), f)
    assert np.all(nxt.probs > 0)
    assert nxt.probs.sum() == pytest.approx(1.0)


def test_run_sbu_stops_on_epsilon():
    f = np.array([[0.0], [0.0], [0.9], [0.1], [0.0]])
    res = run_sbu(PriorMatrix.uniform(1), [f] * 200, epsilon=1e-6)
    assert 1 < res.steps < 200
    assert res.distances[-1] <= 1e-6
    assert res.posterior.argmax_classes().tolist() == [ResponseClass.C.index]
    posterior, steps = res
    assert steps == res.steps


def test_run_sbu_argument_checks():
    with pytest.raises(ValueError):
        run_sbu(PriorMatrix.uniform(1), [], 1e-5)
    with pytest.raises(ValueError):
        run_sbu(PriorMatrix.uniform(1), [np.ones((5, 1))], 0.0)


def test_csv_writers(tmp_path):
    PosteriorMatrix(np.full((5, 2), 0.2)).to_csv(tmp_path / "p.csv", ["a", "b"])
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "class,a,b"
    write_convergence_csv(tmp_path / "d.csv", [0.5, 0.1])
    assert (tmp_path / "d.csv").read_text().splitlines() == ["step,d", "1,0.5", "2,0.1"]


matrices = arrays(np.float64, (5, 3), elements=st.floats(0, 1))


@settings(max_examples=80, deadline=None)
@given(matrices, matrices)
def test_posterior_columns_are_distributions(prior_raw, f):
    prior_raw = prior_raw + 1e-3
    prior = PriorMatrix(prior_raw / prior_raw.sum(axis=0))
    post, nxt = sbu_step(prior, f)
    sums = post.probs.sum(axis=0)
    assert np.all((np.abs(sums - 1) < 1e-9) | (sums == 0))
    assert np.all(post.probs >= 0)
    np.testing.assert_allclose(nxt.probs.sum(axis=0), 1.0)
