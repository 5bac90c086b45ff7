#include <doctest.h>

#include <cmath>

#include "hhmm/error.hpp"
#include "hhmm/generation.hpp"
#include "hhmm/selection.hpp"
#include "oracles.hpp"

using namespace hhmm;

TEST_CASE("aic examples") {
  CHECK(aic(-100.0, 10) == 220.0);
  CHECK(aic(0.0, 0) == 0.0);
  CHECK(aic(-37.25, 6) - aic(-37.25, 5) == 2.0);
}

TEST_CASE("bic examples") {
  CHECK(std::abs(bic(-100.0, 10, 100) - (10.0 * std::log(100.0) + 200.0)) <= 1e-12);
  CHECK(bic(-100.0, 10, 100) == doctest::Approx(246.0517).epsilon(1e-7));
  CHECK(bic(-12.5, 7, 1) == 25.0);
  CHECK_THROWS_AS(bic(-1.0, 1, 0), InputError);
  for (std::size_t n : {8, 50, 1000}) {
    for (std::size_t dof : {1, 4, 30}) CHECK(bic(-55.0, dof, n) > aic(-55.0, dof));
  }
}

TEST_CASE("best_n_states prefers fewer states on ties and skips failures") {
  std::vector<SelectionRow> rows(3);
  for (std::size_t k = 0; k < 3; ++k) rows[k].n_states = k + 1;
  rows[0].aic = 10.0;
  rows[1].aic = 8.0;
  rows[2].aic = 8.0;
  rows[0].bic = 5.0;
  rows[1].bic = 5.0;
  rows[2].bic = 9.0;
  CHECK(best_n_states(rows, false) == 2);
  CHECK(best_n_states(rows, true) == 1);
  rows[0].failed = true;
  CHECK(best_n_states(rows, true) == 2);
  for (auto& r : rows) r.failed = true;
  CHECK(best_n_states(rows, true) == 0);
}

TEST_CASE("order_sweep rows and single-candidate range") {
  const ModelSpec truth_spec = oracle::make_spec(2, 2, {2}, CovarianceType::Diagonal);
  oracle::Rng rng(4);
  const HHMMParams truth = oracle::random_params(rng, truth_spec, 4.0);
  const auto data = sample(truth_spec, truth, 4, 60, 9).sequences;
  TrainConfig cfg;
  cfg.n_iter = 10;
  cfg.init_type = InitType::KMeans;

  const SelectionReport single = order_sweep(truth_spec, data, 3, 3, cfg);
  REQUIRE(single.rows.size() == 1);
  CHECK(single.best_by_aic == 3);
  CHECK(single.best_by_bic == 3);

  const SelectionReport sweep = order_sweep(truth_spec, data, 1, 3, cfg);
  REQUIRE(sweep.rows.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    const SelectionRow& row = sweep.rows[k];
    CHECK(row.n_states == k + 1);
    ModelSpec s = truth_spec;
    s.n_states = k + 1;
    CHECK(row.dof == count_free_parameters(s));
    CHECK(row.aic == aic(row.log_likelihood, row.dof));
    CHECK(row.bic == bic(row.log_likelihood, row.dof, 240));
  }
  CHECK_THROWS_AS(order_sweep(truth_spec, data, 3, 2, cfg), InputError);
  CHECK_THROWS_AS(order_sweep(truth_spec, data, 0, 2, cfg), InputError);
}
