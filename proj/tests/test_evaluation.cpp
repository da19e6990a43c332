#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fbdnn/error.hpp"
#include "fbdnn/evaluation.hpp"

using namespace fbdnn;

namespace {

using Idx = std::vector<std::size_t>;

SimDesign tiny_design() {
  SimDesign d;
  d.model = 1;
  d.n_per_class = 15;
  d.p = 7;
  d.grid_size = 8;
  return d;
}

SelectionConfig tiny_selection() {
  SelectionConfig c;
  c.grid.hidden = {{6}};
  c.grid.truncations = {3};
  c.path.warmup_epochs = 15;
  c.path.epochs_per_step = 1;
  c.path.multiplier = 0.25;
  return c;
}

}  // namespace

TEST_CASE("exact match and false positives") {
  const Idx truth{1, 2, 3, 4, 5};
  auto r = emr_fp(Idx{1, 2, 3, 4, 5}, truth, 50);
  CHECK(r.match == 1);
  CHECK(r.fp == 0);
  r = emr_fp(Idx{1, 2, 3, 4, 5, 9}, truth, 50);
  CHECK(r.match == 0);
  CHECK(r.fp == 1);
  r = emr_fp(Idx{1, 2, 3}, truth, 50);
  CHECK(r.match == 0);
  CHECK(r.fp == 0);
  r = emr_fp(Idx{5, 4, 3, 2, 1, 1}, truth, 50);
  CHECK(r.match == 1);
  r = emr_fp(Idx{}, truth, 50);
  CHECK(r.match == 0);
  CHECK_THROWS_AS(emr_fp(Idx{0}, truth, 50), DomainError);
  CHECK_THROWS_AS(emr_fp(Idx{51}, truth, 50), DomainError);
}

TEST_CASE("accuracy") {
  CHECK(accuracy(std::vector<int>{1, 2, 3, 3}, std::vector<int>{1, 2, 3, 1}) == 0.75);
  CHECK_THROWS_AS(accuracy(std::vector<int>{}, std::vector<int>{}), ShapeError);
}

TEST_CASE("aggregate averages successful rows only") {
  std::vector<ReplicateRow> rows(3);
  rows[0].emr = 1;
  rows[0].fp = 0;
  rows[0].accuracy = 0.9;
  rows[0].p0 = 5;
  rows[1].emr = 0;
  rows[1].fp = 3;
  rows[1].accuracy = 0.7;
  rows[1].p0 = 8;
  rows[2].ok = false;
  const auto a = aggregate_rows(rows);
  CHECK(a.replicates == 3);
  CHECK(a.failed == 1);
  CHECK(a.emr == 0.5);
  CHECK(a.fp == 1.5);
  CHECK(a.accuracy == doctest::Approx(0.8));
  CHECK(a.p0 == 6.5);
  rows.resize(1);
  rows[0].ok = false;
  CHECK(std::isnan(aggregate_rows(rows).emr));
}

TEST_CASE("replicate reports are seed-determined and worker-independent") {
  const auto d = tiny_design();
  const auto cfg = tiny_selection();
  const std::vector<Criterion> crits{Criterion::fbic, Criterion::mr};
  const auto one = run_replicates(d, cfg, crits, 2, 40, 1);
  const auto two = run_replicates(d, cfg, crits, 2, 40, 2);
  REQUIRE(one.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    std::ostringstream a, b;
    write_report_csv(a, one[k]);
    write_report_csv(b, two[k]);
    CHECK(a.str() == b.str());
    CHECK(report_to_json(one[k]).dump() == report_to_json(two[k]).dump());
    // Header, two replicate rows and the mean row.
    const auto text = a.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    CHECK(one[k].rows[1].seed == 41);
    CHECK(one[k].aggregate.replicates == 2);
  }
  CHECK(one[0].criterion == Criterion::fbic);
  CHECK(one[1].criterion == Criterion::mr);
  const auto& r = one[0].rows[0];
  REQUIRE(r.ok);
  CHECK(r.accuracy >= 0.0);
  CHECK(r.accuracy <= 1.0);
  CHECK(r.p0 == r.selected.size());
}

TEST_CASE("a failing replicate is reported, not fatal") {
  const auto d = tiny_design();
  auto cfg = tiny_selection();
  cfg.path.max_steps = 0;
  const std::vector<Criterion> crits{Criterion::fbic};
  const auto reps = run_replicates(d, cfg, crits, 2, 0, 1);
  REQUIRE(reps.size() == 1);
  CHECK(reps[0].aggregate.failed == 2);
  CHECK_FALSE(reps[0].rows[0].error.empty());
  std::ostringstream out;
  write_report_csv(out, reps[0]);
  CHECK(out.str().find("failed") != std::string::npos);
  CHECK(out.str().find("mean,,0/2,") != std::string::npos);
}

TEST_CASE("report JSON carries the design without the seed") {
  MetricsReport rep;
  rep.design = tiny_design();
  rep.design.seed = 99;
  rep.rows.resize(1);
  rep.rows[0].selected = {1, 2};
  rep.aggregate = aggregate_rows(rep.rows);
  const auto j = report_to_json(rep);
  CHECK(j["design"]["model"] == "I");
  CHECK_FALSE(j["design"].contains("seed"));
  CHECK(j["replicates"][0]["selected"].size() == 2);
  std::ostringstream t;
  write_timing_csv(t, rep);
  CHECK(t.str().rfind("replicate,seed,seconds\n", 0) == 0);
}
