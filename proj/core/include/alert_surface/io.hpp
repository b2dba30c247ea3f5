#pragma once

// CSV datasets and designs, the analysis configuration, and the report
// writers used by the command-line tool.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "alert_surface/alert.hpp"
#include "alert_surface/bootstrap.hpp"
#include "alert_surface/estimator.hpp"
#include "alert_surface/model.hpp"
#include "alert_surface/simulation.hpp"

namespace alert_surface {

/// Header names holding x1, x2 and y.
struct ColumnMap {
  std::string x1 = "x1";
  std::string x2 = "x2";
  std::string y = "y";
};

/// Parses "time=x1,dose=x2,response=y" (source=target pairs). Unmentioned
/// targets keep their default names.
ColumnMap parse_column_map(std::string_view spec);

/// Comma-separated with a header row. Extra columns are ignored. Throws
/// DataError for missing columns, an empty file, unparsable or non-finite
/// fields (naming the 1-based line), and InvalidArgument if unreadable.
Dataset parse_dataset_csv(const std::filesystem::path& path, const ColumnMap& columns = {},
                          std::optional<Interval> domain_x1 = std::nullopt,
                          std::optional<Interval> domain_x2 = std::nullopt,
                          std::optional<Point2> reference = std::nullopt);

/// Same as parse_dataset_csv on in-memory text.
Dataset parse_dataset_text(std::string_view text, const ColumnMap& columns = {},
                           std::optional<Interval> domain_x1 = std::nullopt,
                           std::optional<Interval> domain_x2 = std::nullopt,
                           std::optional<Point2> reference = std::nullopt);

/// Header x1,x2,y; values with 17 significant digits.
void write_dataset_csv(std::ostream& out, const Dataset& data);

/// Support points with weights, columns x1,x2,weight.
SupportDesign load_design_csv(const std::filesystem::path& path);

/// General-format decimal with 17 significant digits.
std::string format_number(double v);

struct AxisSpec {
  std::optional<double> min;
  std::optional<double> max;
  std::size_t points = 101;
};

struct AnalysisConfig {
  std::string family = "td2pll";
  std::vector<SigmaTerm> sigma_terms = constant_sigma_terms();
  Hypothesis hypothesis;
  BootstrapConfig bootstrap;
  AxisSpec grid_x1;
  AxisSpec grid_x2;
  ColumnMap columns;
  std::optional<Point2> reference;
};

/// Reads the JSON layout documented in the README. Missing keys keep their
/// defaults. Throws InvalidArgument on bad JSON, unknown keys or enum values.
AnalysisConfig parse_analysis_config(std::string_view json_text);

/// Grid from the config, filling unset bounds from the data's domains.
/// Throws InvalidArgument if the grid does not cover the observed covariates.
EvalGrid resolve_grid(const AnalysisConfig& cfg, const Dataset& data);

void write_fit_json(std::ostream& out, const FitResult& fit);
/// Columns x1,x2,delta,sigma_delta,band in row-major order.
void write_surface_csv(std::ostream& out, const ConfidenceSurface& surface);
/// Outcome plus an echo of the resolved configuration and grid.
void write_alert_json(std::ostream& out, const AlertOutcome& outcome, const AnalysisConfig& cfg,
                      const EvalGrid& grid);
/// Columns d1,d2.
void write_contour_csv(std::ostream& out, const MEDContour& contour);
void write_study_json(std::ostream& out, const StudySummary& summary);

}  // namespace alert_surface
