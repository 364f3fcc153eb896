#include <doctest.h>

#include <sstream>

#include "clusteriv/csv.hpp"

using namespace clusteriv;

namespace {

InputSpec basic_spec() {
  InputSpec s;
  s.outcome_col = "y";
  s.treatment_col = "d";
  s.instrument_col = "z";
  s.cluster_col = "g";
  return s;
}

Dataset parse(const std::string& text, const InputSpec& spec) {
  std::istringstream in(text);
  return load_csv_stream(in, spec);
}

}  // namespace

TEST_CASE("four-row file parses into two clusters") {
  Dataset d = parse(
      "y,d,z,g\n"
      "1,0,0,a\n"
      "3,1,1,a\n"
      "2,0,0,b\n"
      "5,1,1,b\n",
      basic_spec());
  CHECK(d.n_units() == 4);
  CHECK(d.n_clusters() == 2);
  CHECK(d.y[3] == 5.0);
  CHECK(d.z[1] == 1.0);
}

TEST_CASE("cluster ids follow first appearance order") {
  Dataset d = parse(
      "y,d,z,g\n"
      "1,0,0,B\n"
      "2,1,1,A\n"
      "3,0,0,B\n"
      "4,1,1,A\n",
      basic_spec());
  CHECK(d.idx.group_of(0) == 0);
  CHECK(d.idx.group_of(1) == 1);
  CHECK(d.idx.group_of(2) == 0);
  CHECK(d.idx.group_of(3) == 1);
  CHECK(d.idx.label(0) == "B");
  CHECK(d.idx.label(1) == "A");
}

TEST_CASE("non-binary treatment reports line number") {
  CHECK_THROWS_WITH_AS(parse(
                           "y,d,z,g\n"
                           "1,0,0,a\n"
                           "3,2,1,a\n",
                           basic_spec()),
                       doctest::Contains("line 3"), NonBinaryColumn);
  CHECK_THROWS_AS(parse(
                      "y,d,z,g\n"
                      "1,0,0.5,a\n"
                      "3,1,1,a\n",
                      basic_spec()),
                  NonBinaryColumn);
}

TEST_CASE("quoted fields, embedded commas, CRLF") {
  Dataset d = parse(
      "y,d,z,g\r\n"
      "\"1.5\",0,0,\"site, one\"\r\n"
      "2.5,1,1,\"site, one\"\r\n"
      "0,0,0,\"site \"\"two\"\"\"\r\n"
      "1,1,1,\"site \"\"two\"\"\"\r\n",
      basic_spec());
  CHECK(d.y[0] == 1.5);
  CHECK(d.n_clusters() == 2);
  CHECK(d.idx.label(0) == "site, one");
  CHECK(d.idx.label(1) == "site \"two\"");
}

TEST_CASE("covariate columns land in declaration order") {
  InputSpec s = basic_spec();
  s.covariate_cols = {"x2", "x1"};
  Dataset d = parse(
      "y,x1,d,z,g,x2\n"
      "1,10,0,0,a,-1\n"
      "2,20,1,1,a,-2\n"
      "3,30,0,0,b,-3\n"
      "4,40,1,1,b,-4\n",
      s);
  CHECK(d.x(0, 0) == -1.0);
  CHECK(d.x(0, 1) == 10.0);
  CHECK(d.covariate_names[0] == "x2");
}

TEST_CASE("missing value: error by default, drop_row on request") {
  const std::string text =
      "y,d,z,g\n"
      "1,0,0,a\n"
      ",1,1,a\n"
      "2,0,0,b\n"
      "5,1,1,b\n";
  CHECK_THROWS_WITH_AS(parse(text, basic_spec()), doctest::Contains("line 3"),
                       MissingValue);
  InputSpec drop = basic_spec();
  drop.missing_policy = MissingPolicy::drop_row;
  Dataset d = parse(text, drop);
  CHECK(d.n_units() == 3);
  CHECK(d.n_clusters() == 2);
}

TEST_CASE("structural errors") {
  CHECK_THROWS_AS(parse("y,d,z,g\n", basic_spec()), ParseError);  // no rows
  CHECK_THROWS_AS(parse(
                      "y,d,z\n"
                      "1,0,0\n",
                      basic_spec()),
                  ParseError);  // cluster column absent
  CHECK_THROWS_AS(parse(
                      "y,d,z,g\n"
                      "1,0,0\n",
                      basic_spec()),
                  ParseError);  // ragged row
  CHECK_THROWS_AS(parse(
                      "y,d,z,g\n"
                      "one,0,0,a\n",
                      basic_spec()),
                  ParseError);  // non-numeric outcome
  InputSpec dup = basic_spec();
  dup.covariate_cols = {"y"};
  CHECK_THROWS_AS(parse("y,d,z,g\n1,0,0,a\n", dup), ParseError);  // dup name
}

TEST_CASE("blank trailing line is ignored") {
  Dataset d = parse(
      "y,d,z,g\n"
      "1,0,0,a\n"
      "2,1,1,a\n"
      "\n",
      basic_spec());
  CHECK(d.n_units() == 2);
}
