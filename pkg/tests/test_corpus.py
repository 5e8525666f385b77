import numpy as np
import pytest

from lrapomdp import corpus
from lrapomdp.chain import gain
from lrapomdp.model import validate
from lrapomdp.strategy import FiniteRecallStrategy, recall_words, to_finite_memory

from oracles import oracle_gain


@pytest.mark.parametrize("name", sorted(corpus.MODELS))
def test_models_are_valid(name):
    assert validate(corpus.MODELS[name]()).ok


@pytest.mark.parametrize("name", sorted(corpus.MODELS))
def test_no_bundled_strategy_beats_value(name):
    pomdp = corpus.MODELS[name]()
    best = max(oracle_gain(pomdp, pomdp.initial_belief,
                           to_finite_memory(s, pomdp.n_signals, pomdp.n_actions))
               for s in corpus.strategies_for(name).values())
    assert best == pytest.approx(corpus.value(name), abs=1e-9)


def test_recall_one_tables_complete():
    tables = list(corpus.ex2_recall_tables(1))
    assert len(tables) == 2 ** (1 + 2 * 2)
    assert len({tuple(sorted(t.table.items())) for t in tables}) == 32


@pytest.mark.parametrize("recall", [1, 2])
def test_pruned_entries_never_matter(recall):
    """Overwriting unconsultable entries leaves the gain unchanged."""
    ex2 = corpus.ex2()
    p1 = ex2.initial_belief
    keep = corpus.consultable_words(ex2, p1, recall)
    words = recall_words(recall, 2, 2)
    rng = np.random.default_rng(recall)
    for _ in range(300):
        table = {w: int(rng.integers(2)) for w in words}
        pruned = {w: (a if w in keep else 0) for w, a in table.items()}
        g1 = gain(ex2, p1, to_finite_memory(FiniteRecallStrategy(recall, table, 2, 2)))
        g2 = gain(ex2, p1, to_finite_memory(FiniteRecallStrategy(recall, pruned, 2, 2)))
        assert g1 == pytest.approx(g2, abs=1e-12)


def test_consultable_words_cover_simulated_windows():
    from lrapomdp.simulate import simulate
    ex2 = corpus.ex2()
    keep = corpus.consultable_words(ex2, ex2.initial_belief, 2)
    rng = np.random.default_rng(3)
    for seed in range(30):
        table = {w: int(rng.integers(2)) for w in recall_words(2, 2, 2)}
        fr = FiniteRecallStrategy(2, table, 2, 2)
        sigma = to_finite_memory(fr)
        trace, _ = simulate(ex2, ex2.initial_belief, sigma, 40, seed)
        hist = list(zip(trace.actions.tolist(), trace.signals.tolist()))
        for t in range(len(hist)):
            window = tuple(hist[max(0, t - 2):t])
            assert window in keep
