#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "alert_surface/errors.hpp"
#include "alert_surface/io.hpp"
#include "alert_surface/random.hpp"
#include "doctest.h"

using namespace alert_surface;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto p = std::filesystem::temp_directory_path() / ("alert_surface_io_" + name);
  std::ofstream(p, std::ios::binary) << content;
  return p;
}

std::string error_of(const std::string& text, const ColumnMap& map = {}) {
  try {
    parse_dataset_text(text, map);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("dataset CSV parsing") {
  const Dataset d = parse_dataset_text("x1,x2,y\n1,0,99.5\n2,0.1,98\n7,10,3.25\n");
  REQUIRE(d.size() == 3);
  CHECK(d.observations()[2].y == 3.25);
  CHECK(d.domain_x1().hi == 7.0);

  const ColumnMap map = parse_column_map("time=x1,dose=x2,response=y");
  const Dataset e = parse_dataset_text("time,dose,response\r\n1,0,99.5\r\n2,0.1,98\r\n7,10,3.25\r\n", map);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(e.observations()[i].x1 == d.observations()[i].x1);
    CHECK(e.observations()[i].x2 == d.observations()[i].x2);
    CHECK(e.observations()[i].y == d.observations()[i].y);
  }
  CHECK(parse_dataset_text("id,\"y\",x2,x1\na,1,2,3\n").observations()[0].x1 == 3.0);
  const auto file = temp_file("ok.csv", "x1,x2,y\n1,2,3\n");
  CHECK(parse_dataset_csv(file).size() == 1);
  CHECK_THROWS_AS(parse_dataset_csv("/nonexistent/nope.csv"), InvalidArgument);
}

TEST_CASE("dataset CSV errors") {
  CHECK(error_of("x1,x2,y\n1,2,abc\n").find("line 2") != std::string::npos);
  CHECK(error_of("x1,x2,y\n1,2,3\n\n4,5,nan\n").find("line 4") != std::string::npos);
  CHECK(error_of("x1,x2,y\n1,2\n").find("line 2") != std::string::npos);
  CHECK(error_of("x1,y\n1,2\n").find("missing column 'x2'") != std::string::npos);
  CHECK(error_of("").find("empty") != std::string::npos);
  CHECK(error_of("x1,x2,y\n").find("no data rows") != std::string::npos);
  CHECK(error_of("x1,x2,y\n1,2,inf\n").find("not finite") != std::string::npos);
  CHECK_THROWS_AS(parse_column_map("time:x1"), InvalidArgument);
  CHECK_THROWS_AS(parse_column_map("time=z"), InvalidArgument);
}

TEST_CASE("dataset round trip is exact") {
  Stream rng(stream_key({31}));
  std::vector<Observation> obs;
  for (int i = 0; i < 500; ++i) {
    obs.push_back({rng.uniform() * 7, std::exp(20 * rng.uniform() - 10), (rng.uniform() - 0.5) * 1e6});
  }
  obs.push_back({1e-300, 0.1, -0.0});
  const Dataset d(obs);
  std::ostringstream out;
  write_dataset_csv(out, d);
  const Dataset back = parse_dataset_text(out.str());
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(back.observations()[i].x1 == d.observations()[i].x1);
    CHECK(back.observations()[i].x2 == d.observations()[i].x2);
    CHECK(back.observations()[i].y == d.observations()[i].y);
  }
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(format_number(4.0) == "4");
}

TEST_CASE("design files") {
  const auto p = temp_file("design.csv", "x1,x2,weight\n0,0,0.25\n10,12,0.75\n");
  const SupportDesign d = load_design_csv(p);
  CHECK(d.points.size() == 2);
  CHECK(d.weights[1] == 0.75);
  CHECK_THROWS_AS(load_design_csv(temp_file("bad.csv", "x1,x2,weight\n0,0,-1\n")), DataError);
}

TEST_CASE("analysis config") {
  const AnalysisConfig c = parse_analysis_config(R"({
    "model": {"family": "td2pll", "sigma_terms": ["intercept", "x2"]},
    "hypothesis": {"dimension": "fixed_x1", "fixed_value": 4, "form": "undercut",
                   "lambda": 50, "alpha": 0.1},
    "bootstrap": {"b1": 50, "b2": 5, "algorithm": "fast", "seed": 9, "retry_limit": 3},
    "grid": {"x1": {"min": 1, "max": 7, "points": 61}, "x2": {"points": 11}},
    "data": {"columns": {"x1": "time"}, "reference": [1, 0]}
  })");
  CHECK(c.sigma_terms.size() == 2);
  CHECK(c.hypothesis.form == Form::undercut);
  CHECK(*c.hypothesis.fixed_value == 4.0);
  CHECK(c.hypothesis.alpha == 0.1);
  CHECK(c.bootstrap.algorithm == Algorithm::fast);
  CHECK(c.bootstrap.seed == 9);
  CHECK(c.grid_x1.points == 61);
  CHECK_FALSE(c.grid_x2.min.has_value());
  CHECK(c.columns.x1 == "time");
  CHECK(c.columns.y == "y");
  CHECK(*c.reference == Point2{1, 0});

  CHECK_THROWS_AS(parse_analysis_config(R"({"hypothesis": {"form": "sideways"}})"), InvalidArgument);
  CHECK_THROWS_AS(parse_analysis_config(R"({"bootstrap": {"b3": 1}})"), InvalidArgument);
  CHECK_THROWS_AS(parse_analysis_config("[1,"), InvalidArgument);
  CHECK_THROWS_AS(parse_analysis_config(R"({"bootstrap": {"b1": "many"}})"), InvalidArgument);
}

TEST_CASE("grids resolve from the data") {
  const Dataset d = parse_dataset_text("x1,x2,y\n1,0,1\n7,10,2\n");
  AnalysisConfig c;
  c.grid_x1.points = 7;
  const EvalGrid g = resolve_grid(c, d);
  CHECK(g.x1 == std::vector<double>{1, 2, 3, 4, 5, 6, 7});
  CHECK(g.x2.back() == 10.0);
  c.grid_x2.max = 5.0;
  CHECK_THROWS_AS(resolve_grid(c, d), InvalidArgument);
}

TEST_CASE("report writers") {
  ConfidenceSurface s;
  s.x1 = {4};
  s.x2 = {0, 0.5};
  s.delta_hat = {100, 60};
  s.sigma_delta = {0, 2};
  s.band = {100, 65};
  std::ostringstream csv;
  write_surface_csv(csv, s);
  CHECK(csv.str() == "x1,x2,delta,sigma_delta,band\n4,0,100,0,100\n4,0.5,60,2,65\n");

  MEDContour c;
  c.points = {{1, 2.5}};
  std::ostringstream med;
  write_contour_csv(med, c);
  CHECK(med.str() == "d1,d2\n1,2.5\n");

  StudySummary sum;
  sum.scenario = "x";
  sum.runs = 2;
  sum.analyzed = 2;
  std::ostringstream js;
  write_study_json(js, sum);
  const std::string j = js.str();
  const char* keys[] = {"scenario", "runs", "excluded", "rejection_proportion", "alert_median",
                        "alert_sd", "recall_mean", "recall_sd", "precision_mean", "precision_sd",
                        "onset_mean", "onset_sd", "offset_mean", "offset_sd", "rmse_quartiles"};
  std::size_t last = 0;
  for (const char* k : keys) {
    const auto pos = j.find(std::string("\"") + k + "\"");
    CHECK(pos != std::string::npos);
    CHECK(pos >= last);
    last = pos;
  }
  CHECK(j.find("\"alert_median\": null") != std::string::npos);
}
