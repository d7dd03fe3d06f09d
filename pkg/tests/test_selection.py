from svmfuzz.coverage import RUNTIME, Branch
from svmfuzz.engine.selection import ADAPTIVE, AFL, SeedPool, fit_to_survive

B = Branch(RUNTIME, 10, 20)
C = Branch(RUNTIME, 30, 31)


def test_closer_seed_wins():
    pool = fit_to_survive([1, 2], {}, {1: {B: 101}, 2: {B: 51}}, {B})
    assert pool.adaptive == {B: (51, 2)}
    assert pool.members() == [(2, ADAPTIVE)]


def test_ties_go_to_earliest():
    pool = fit_to_survive([1, 2, 3], {}, {1: {B: 7}, 2: {B: 5}, 3: {B: 5}}, {B})
    assert pool.adaptive[B] == (5, 2)


def test_useless_seed_discarded():
    pool = fit_to_survive([1, 2], {2: [C]}, {1: {B: 9}, 2: {B: 3}}, {B})
    assert {s for s, _ in pool.members()} == {2}
    assert pool.members() == [(2, AFL)]


def test_single_seed_selected_for_each_branch():
    pool = fit_to_survive([4], {}, {4: {B: 9, C: 2}}, {B, C})
    assert pool.adaptive == {B: (9, 4), C: (2, 4)}
    assert len(pool) == 1


def test_incumbent_kept_unless_strictly_beaten():
    pool = fit_to_survive([5], {}, {5: {B: 40}}, {B}, incumbent={B: (40, 1)})
    assert pool.adaptive[B] == (40, 1)
    pool = fit_to_survive([5], {}, {5: {B: 39}}, {B}, incumbent={B: (40, 1)})
    assert pool.adaptive[B] == (39, 5)


def test_afl_only_mode():
    pool = fit_to_survive([1, 2], {1: [C]}, {2: {B: 1}}, {B}, adaptive=False)
    assert pool.adaptive == {}
    assert pool.members() == [(1, AFL)]


def test_afl_provenance_takes_precedence():
    pool = SeedPool(afl=[3], adaptive={B: (1, 3), C: (2, 4)})
    assert pool.members() == [(3, AFL), (4, ADAPTIVE)]
