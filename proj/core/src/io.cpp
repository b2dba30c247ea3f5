#include "alert_surface/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "alert_surface/errors.hpp"
#include "json.hpp"

namespace alert_surface {

namespace {

using ojson = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string_view unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(unquote(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Table {
  std::vector<std::string> header;
  // (line number, fields)
  std::vector<std::pair<std::size_t, std::vector<std::string_view>>> rows;
};

Table parse_table(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  Table t;
  std::size_t line_no = 0;
  bool have_header = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (!have_header) {
      for (auto f : fields) t.header.emplace_back(f);
      have_header = true;
    } else {
      t.rows.emplace_back(line_no, std::move(fields));
    }
  }
  if (!have_header) throw DataError("CSV input is empty");
  return t;
}

std::size_t column_index(const Table& t, const std::string& name) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw DataError("CSV is missing column '" + name + "'");
  return static_cast<std::size_t>(it - t.header.begin());
}

double field_value(const Table& t, std::size_t row, std::size_t col) {
  const auto& [line, fields] = t.rows[row];
  if (col >= fields.size()) {
    throw DataError("line " + std::to_string(line) + ": expected " +
                    std::to_string(t.header.size()) + " fields, got " +
                    std::to_string(fields.size()));
  }
  const auto v = parse_double(fields[col]);
  if (!v) {
    throw DataError("line " + std::to_string(line) + ": column '" + t.header[col] +
                    "' is not numeric ('" + std::string(fields[col]) + "')");
  }
  if (!std::isfinite(*v)) {
    throw DataError("line " + std::to_string(line) + ": column '" + t.header[col] +
                    "' is not finite");
  }
  return *v;
}

ojson number_or_null(const std::optional<double>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

ojson axis_json(const std::vector<double>& axis) {
  return ojson{{"min", axis.front()}, {"max", axis.back()}, {"points", axis.size()}};
}

template <typename T>
void read_if(const ojson& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

void reject_unknown(const ojson& j, std::initializer_list<std::string_view> known,
                    const std::string& where) {
  if (!j.is_object()) throw InvalidArgument("config section '" + where + "' must be an object");
  for (const auto& [k, _] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw InvalidArgument("unknown config key '" + where + k + "'");
    }
  }
}

AxisSpec read_axis(const ojson& j, const std::string& where) {
  reject_unknown(j, {"min", "max", "points"}, where);
  AxisSpec a;
  if (j.contains("min")) a.min = j.at("min").get<double>();
  if (j.contains("max")) a.max = j.at("max").get<double>();
  read_if(j, "points", a.points);
  return a;
}

void dump(std::ostream& out, const ojson& j) { out << j.dump(2) << '\n'; }

}  // namespace

ColumnMap parse_column_map(std::string_view spec) {
  ColumnMap m;
  for (auto pair : split_fields(spec)) {
    if (pair.empty()) continue;
    const auto eq = pair.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument("column mapping '" + std::string(pair) + "' is not source=target");
    }
    const std::string source(trim(pair.substr(0, eq)));
    const auto target = trim(pair.substr(eq + 1));
    if (target == "x1") {
      m.x1 = source;
    } else if (target == "x2") {
      m.x2 = source;
    } else if (target == "y") {
      m.y = source;
    } else {
      throw InvalidArgument("column mapping target must be x1, x2 or y, got '" +
                            std::string(target) + "'");
    }
  }
  return m;
}

Dataset parse_dataset_text(std::string_view text, const ColumnMap& columns,
                           std::optional<Interval> domain_x1, std::optional<Interval> domain_x2,
                           std::optional<Point2> reference) {
  const Table t = parse_table(text);
  const std::size_t c1 = column_index(t, columns.x1);
  const std::size_t c2 = column_index(t, columns.x2);
  const std::size_t cy = column_index(t, columns.y);
  if (t.rows.empty()) throw DataError("CSV has a header but no data rows");
  std::vector<Observation> obs;
  obs.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    obs.push_back({field_value(t, r, c1), field_value(t, r, c2), field_value(t, r, cy)});
  }
  return Dataset(std::move(obs), domain_x1, domain_x2, reference);
}

Dataset parse_dataset_csv(const std::filesystem::path& path, const ColumnMap& columns,
                          std::optional<Interval> domain_x1, std::optional<Interval> domain_x2,
                          std::optional<Point2> reference) {
  return parse_dataset_text(read_file(path), columns, domain_x1, domain_x2, reference);
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "x1,x2,y\n";
  for (const auto& o : data.observations()) {
    out << format_number(o.x1) << ',' << format_number(o.x2) << ',' << format_number(o.y) << '\n';
  }
}

SupportDesign load_design_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const Table t = parse_table(text);
  const std::size_t c1 = column_index(t, "x1");
  const std::size_t c2 = column_index(t, "x2");
  const std::size_t cw = column_index(t, "weight");
  if (t.rows.empty()) throw DataError("design file has no rows");
  SupportDesign d;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    d.points.push_back({field_value(t, r, c1), field_value(t, r, c2)});
    const double w = field_value(t, r, cw);
    if (w < 0.0) {
      throw DataError("line " + std::to_string(t.rows[r].first) + ": negative design weight");
    }
    d.weights.push_back(w);
  }
  return d;
}

AnalysisConfig parse_analysis_config(std::string_view json_text) {
  ojson j;
  try {
    j = ojson::parse(json_text);
  } catch (const ojson::exception& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  AnalysisConfig cfg;
  try {
    reject_unknown(j, {"model", "hypothesis", "bootstrap", "grid", "data"}, "");
    if (j.contains("model")) {
      const auto& m = j["model"];
      reject_unknown(m, {"family", "sigma_terms"}, "model.");
      read_if(m, "family", cfg.family);
      if (m.contains("sigma_terms")) {
        const auto& s = m["sigma_terms"];
        if (s.is_string()) {
          cfg.sigma_terms = parse_sigma_terms(s.get<std::string>());
        } else {
          cfg.sigma_terms.clear();
          for (const auto& t : s) cfg.sigma_terms.push_back(parse_sigma_term(t.get<std::string>()));
        }
      }
    }
    if (j.contains("hypothesis")) {
      const auto& h = j["hypothesis"];
      reject_unknown(h, {"dimension", "fixed_value", "form", "lambda", "alpha"}, "hypothesis.");
      auto& hyp = cfg.hypothesis;
      if (h.contains("dimension")) hyp.dimension = parse_dimension(h["dimension"].get<std::string>());
      if (h.contains("fixed_value") && !h["fixed_value"].is_null()) {
        hyp.fixed_value = h["fixed_value"].get<double>();
      }
      if (h.contains("form")) hyp.form = parse_form(h["form"].get<std::string>());
      read_if(h, "lambda", hyp.lambda);
      read_if(h, "alpha", hyp.alpha);
    }
    if (j.contains("bootstrap")) {
      const auto& b = j["bootstrap"];
      reject_unknown(b, {"b1", "b2", "algorithm", "seed", "retry_limit"}, "bootstrap.");
      read_if(b, "b1", cfg.bootstrap.b1);
      read_if(b, "b2", cfg.bootstrap.b2);
      if (b.contains("algorithm")) {
        cfg.bootstrap.algorithm = parse_algorithm(b["algorithm"].get<std::string>());
      }
      read_if(b, "seed", cfg.bootstrap.seed);
      read_if(b, "retry_limit", cfg.bootstrap.retry_limit);
    }
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      reject_unknown(g, {"x1", "x2"}, "grid.");
      if (g.contains("x1")) cfg.grid_x1 = read_axis(g["x1"], "grid.x1.");
      if (g.contains("x2")) cfg.grid_x2 = read_axis(g["x2"], "grid.x2.");
    }
    if (j.contains("data")) {
      const auto& d = j["data"];
      reject_unknown(d, {"columns", "reference"}, "data.");
      if (d.contains("columns")) {
        const auto& c = d["columns"];
        reject_unknown(c, {"x1", "x2", "y"}, "data.columns.");
        read_if(c, "x1", cfg.columns.x1);
        read_if(c, "x2", cfg.columns.x2);
        read_if(c, "y", cfg.columns.y);
      }
      if (d.contains("reference")) {
        const auto r = d["reference"].get<std::vector<double>>();
        if (r.size() != 2) throw InvalidArgument("data.reference must be an [x1, x2] pair");
        cfg.reference = Point2{r[0], r[1]};
      }
    }
  } catch (const ojson::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  return cfg;
}

EvalGrid resolve_grid(const AnalysisConfig& cfg, const Dataset& data) {
  const Interval d1{cfg.grid_x1.min.value_or(data.domain_x1().lo),
                    cfg.grid_x1.max.value_or(data.domain_x1().hi)};
  const Interval d2{cfg.grid_x2.min.value_or(data.domain_x2().lo),
                    cfg.grid_x2.max.value_or(data.domain_x2().hi)};
  for (const auto& o : data.observations()) {
    if (!d1.contains(o.x1) || !d2.contains(o.x2)) {
      throw InvalidArgument("grid [" + format_number(d1.lo) + ", " + format_number(d1.hi) +
                            "] x [" + format_number(d2.lo) + ", " + format_number(d2.hi) +
                            "] does not cover the observed covariates");
    }
  }
  EvalGrid grid = EvalGrid::uniform(d1, cfg.grid_x1.points, d2, cfg.grid_x2.points);
  validate(grid);
  return grid;
}

void write_fit_json(std::ostream& out, const FitResult& fit) {
  ojson j;
  j["family"] = fit.family->name;
  j["param_names"] = fit.family->param_names;
  j["theta_hat"] = fit.theta_hat;
  j["vartheta_hat"] = fit.vartheta_hat ? ojson(*fit.vartheta_hat) : ojson(nullptr);
  ojson terms = ojson::array();
  for (auto t : fit.sigma_terms) terms.push_back(std::string(to_string(t)));
  j["sigma_terms"] = terms;
  j["sigma_pooled"] = number_or_null(fit.sigma_pooled);
  j["loglik"] = fit.loglik;
  j["converged"] = fit.converged;
  j["n"] = fit.n;
  j["iterations"] = fit.iterations;
  dump(out, j);
}

void write_surface_csv(std::ostream& out, const ConfidenceSurface& s) {
  out << "x1,x2,delta,sigma_delta,band\n";
  for (std::size_t i = 0; i < s.x1.size(); ++i) {
    for (std::size_t k = 0; k < s.x2.size(); ++k) {
      const std::size_t p = s.index(i, k);
      out << format_number(s.x1[i]) << ',' << format_number(s.x2[k]) << ','
          << format_number(s.delta_hat[p]) << ',' << format_number(s.sigma_delta[p]) << ','
          << format_number(s.band[p]) << '\n';
    }
  }
}

void write_alert_json(std::ostream& out, const AlertOutcome& o, const AnalysisConfig& cfg,
                      const EvalGrid& grid) {
  ojson j;
  j["reject"] = o.reject;
  if (o.dimension == Dimension::surface) {
    ojson curve = ojson::array();
    for (std::size_t i = 0; i < o.curve_x1.size(); ++i) {
      curve.push_back({{"x1", o.curve_x1[i]}, {"x2", number_or_null(o.alert_curve[i])}});
    }
    j["alert_curve"] = curve;
    j["t_est"] = o.t_est;
  } else {
    j["alert_dose"] = number_or_null(o.alert_dose);
    j["t_est"] = nullptr;
  }
  j["c"] = o.quantile_c;
  j["lambda"] = o.lambda;
  j["alpha"] = o.alpha;

  const auto& hyp = cfg.hypothesis;
  ojson terms = ojson::array();
  for (auto t : cfg.sigma_terms) terms.push_back(std::string(to_string(t)));
  ojson c;
  c["model"] = {{"family", cfg.family}, {"sigma_terms", terms}};
  c["hypothesis"] = {{"dimension", std::string(to_string(hyp.dimension))},
                     {"fixed_value", number_or_null(hyp.fixed_value)},
                     {"form", std::string(to_string(hyp.form))},
                     {"lambda", hyp.lambda},
                     {"alpha", hyp.alpha},
                     {"reference", {hyp.reference.x1, hyp.reference.x2}}};
  c["bootstrap"] = {{"b1", cfg.bootstrap.b1},
                    {"b2", cfg.bootstrap.b2},
                    {"algorithm", std::string(to_string(cfg.bootstrap.algorithm))},
                    {"seed", cfg.bootstrap.seed},
                    {"retry_limit", cfg.bootstrap.retry_limit}};
  c["grid"] = {{"x1", axis_json(grid.x1)}, {"x2", axis_json(grid.x2)}};
  j["config"] = c;
  dump(out, j);
}

void write_contour_csv(std::ostream& out, const MEDContour& contour) {
  out << "d1,d2\n";
  for (const auto& p : contour.points) {
    out << format_number(p.x1) << ',' << format_number(p.x2) << '\n';
  }
}

void write_study_json(std::ostream& out, const StudySummary& s) {
  ojson j;
  j["scenario"] = s.scenario;
  j["runs"] = s.runs;
  j["excluded"] = s.excluded;
  j["rejection_proportion"] = s.rejection_proportion;
  j["alert_median"] = number_or_null(s.alert_median);
  j["alert_sd"] = number_or_null(s.alert_sd);
  j["recall_mean"] = number_or_null(s.recall_mean);
  j["recall_sd"] = number_or_null(s.recall_sd);
  j["precision_mean"] = number_or_null(s.precision_mean);
  j["precision_sd"] = number_or_null(s.precision_sd);
  j["onset_mean"] = number_or_null(s.onset_mean);
  j["onset_sd"] = number_or_null(s.onset_sd);
  j["offset_mean"] = number_or_null(s.offset_mean);
  j["offset_sd"] = number_or_null(s.offset_sd);
  j["rmse_quartiles"] = s.rmse_quartiles;
  j["analyzed"] = s.analyzed;
  j["rejection_proportion_surface"] = s.rejection_proportion_surface;
  j["true_alert"] = number_or_null(s.true_alert);
  ojson errors = ojson::array();
  for (const auto& e : s.alert_error) {
    errors.push_back(
        {{"x1", e.x1}, {"count", e.count}, {"q10", e.q10}, {"q50", e.q50}, {"q90", e.q90}});
  }
  j["alert_error"] = errors;
  j["seed"] = s.seed;
  j["b1"] = s.b1;
  j["b2"] = s.b2;
  j["algorithm"] = std::string(to_string(s.algorithm));
  dump(out, j);
}

}  // namespace alert_surface
