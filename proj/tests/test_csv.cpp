#include <doctest.h>

#include <sstream>

#include "sdid/csv.hpp"
#include "sdid/errors.hpp"

using namespace sdid;

TEST_CASE("csv reads header and rows") {
  std::istringstream in("unit,period,outcome\nFlint,2021,22.7\n\"St. Louis\",2021,13.8\n");
  csv::Table table = csv::read(in);
  CHECK(table.header == std::vector<std::string>{"unit", "period", "outcome"});
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[1][0] == "St. Louis");
  CHECK(table.column("period") == 1);
  CHECK(table.column("absent") == -1);
  CHECK_THROWS_AS(table.require_column("absent"), Error);
}

TEST_CASE("csv handles quoted commas and escaped quotes") {
  std::istringstream in("unit,note\n\"A, B\",\"say \"\"hi\"\"\"\n");
  csv::Table table = csv::read(in);
  CHECK(table.rows[0][0] == "A, B");
  CHECK(table.rows[0][1] == "say \"hi\"");
}

TEST_CASE("csv rejects ragged rows and empty input") {
  std::istringstream ragged("a,b\n1\n");
  CHECK_THROWS_AS(csv::read(ragged), Error);
  std::istringstream empty("");
  CHECK_THROWS_AS(csv::read(empty), Error);
}

TEST_CASE("numeric parsing is strict") {
  CHECK(csv::parse_double("15.49", "ctx") == doctest::Approx(15.49));
  CHECK(csv::parse_int("2024", "ctx") == 2024);
  CHECK_THROWS_AS(csv::parse_double("12x", "ctx"), Error);
  CHECK_THROWS_AS(csv::parse_int("12.5", "ctx"), Error);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, -7.3, 0.04651482, 1e-9, 123456.789, 800e9}) {
    CHECK(csv::parse_double(csv::format_double(v), "ctx") == v);
  }
}

TEST_CASE("escape_field quotes only when needed") {
  CHECK(csv::escape_field("Flint") == "Flint");
  CHECK(csv::escape_field("a,b") == "\"a,b\"");
  CHECK(csv::escape_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
}
