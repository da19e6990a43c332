#include <doctest.h>

#include <sstream>

#include "fbdnn/config.hpp"
#include "fbdnn/error.hpp"

using namespace fbdnn;

TEST_CASE("key-value parsing") {
  std::istringstream in(
      "# comment\n"
      "\n"
      "tau = 1   # trailing comment\n"
      "  hidden=50;100,100\n"
      "tau = 2\n");
  const auto kv = parse_key_values(in);
  CHECK(kv.size() == 2);
  CHECK(kv.at("tau") == "2");
  CHECK(kv.at("hidden") == "50;100,100");
  std::istringstream bad("no equals sign\n");
  CHECK_THROWS_AS(parse_key_values(bad), ConfigError);
}

TEST_CASE("applying values") {
  RunConfig c;
  apply_config({{"tau", "1"},
                {"hidden", "50;100,100"},
                {"truncations", "4;6"},
                {"criteria", "fbic;mr"},
                {"model", "III"},
                {"split", "0.5,0.25,0.25"},
                {"lambda_start_rule", "gradient"},
                {"mr_ties", "sparse"},
                {"workers", "3"}},
               c);
  CHECK(c.selection.tau == 1.0);
  CHECK(c.selection.grid.hidden == std::vector<std::vector<std::size_t>>{{50}, {100, 100}});
  CHECK(c.selection.grid.truncations == std::vector<std::size_t>{4, 6});
  CHECK(c.criteria == std::vector<Criterion>{Criterion::fbic, Criterion::mr});
  CHECK(c.design.model == 3);
  CHECK(c.selection.ratios.train == 0.5);
  CHECK(c.selection.path.lambda_start_rule == LambdaStartRule::gradient);
  CHECK(c.selection.mr_ties == TieBreak::sparse);
  CHECK(c.workers == 3);
  CHECK_THROWS_AS(apply_config({{"colour", "blue"}}, c), ConfigError);
  CHECK_THROWS_AS(apply_config({{"tau", "x"}}, c), ConfigError);
  CHECK_THROWS_AS(apply_config({{"p", "-3"}}, c), ConfigError);
}

TEST_CASE("written configuration reads back unchanged") {
  RunConfig c;
  c.selection.grid.hidden = {{50}, {50, 50}};
  c.selection.grid.dropouts = {0.0, 0.2};
  c.selection.path.epochs_per_step = 2;
  c.selection.penalty_n = PenaltyN::validation;
  c.design.model = 5;
  c.design.noise_sd = 0.25;
  c.criteria = {Criterion::mr};
  c.seed = 123456789;
  std::ostringstream first;
  write_config(first, c);
  std::istringstream in(first.str());
  RunConfig back;
  apply_config(parse_key_values(in), back);
  std::ostringstream second;
  write_config(second, back);
  CHECK(first.str() == second.str());
  CHECK(back.selection.grid.hidden == c.selection.grid.hidden);
  CHECK(back.selection.path.lambda_max == c.selection.path.lambda_max);
}

TEST_CASE("hidden grid text form") {
  const auto g = parse_hidden_grid("100;100,100;50");
  CHECK(g.size() == 3);
  CHECK(format_hidden_grid(g) == "100;100,100;50");
  CHECK_THROWS_AS(parse_hidden_grid(""), ConfigError);
  CHECK_THROWS_AS(parse_hidden_grid("100;;50"), ConfigError);
}
