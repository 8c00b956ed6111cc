#include "sdid/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sdid/csv.hpp"
#include "sdid/errors.hpp"

namespace sdid {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string resolve(const fs::path& base, const std::string& path) {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_absolute()) return p.string();
  return (base / p).lexically_normal().string();
}

DonorCriteria parse_criteria(const json& j) {
  DonorCriteria criteria;
  if (j.contains("population_min")) criteria.population_min = j["population_min"].get<double>();
  if (j.contains("population_max")) criteria.population_max = j["population_max"].get<double>();
  if (j.contains("poverty_rate_min")) criteria.poverty_rate_min = j["poverty_rate_min"].get<double>();
  if (j.contains("pct_nh_black_min")) criteria.pct_nh_black_min = j["pct_nh_black_min"].get<double>();
  if (j.contains("top_n_by_population")) {
    criteria.top_n_by_population = j["top_n_by_population"].get<int>();
  }
  if (j.contains("exclusions")) {
    for (const auto& e : j["exclusions"]) criteria.exclusions.insert(e.get<std::string>());
  }
  return criteria;
}

FactorModelSpec parse_sim_spec(const json& j, std::uint64_t default_seed) {
  FactorModelSpec spec;
  spec.seed = default_seed;
  if (j.contains("n_donors")) spec.n_donors = j["n_donors"].get<int>();
  if (j.contains("n_pre")) spec.n_pre = j["n_pre"].get<int>();
  if (j.contains("n_post")) spec.n_post = j["n_post"].get<int>();
  if (j.contains("n_factors")) spec.n_factors = j["n_factors"].get<int>();
  if (j.contains("factor_loading_scale")) {
    spec.factor_loading_scale = j["factor_loading_scale"].get<double>();
  }
  if (j.contains("noise_sd")) spec.noise_sd = j["noise_sd"].get<double>();
  if (j.contains("unit_effect_sd")) spec.unit_effect_sd = j["unit_effect_sd"].get<double>();
  if (j.contains("time_effect_sd")) spec.time_effect_sd = j["time_effect_sd"].get<double>();
  if (j.contains("true_tau")) spec.true_tau = j["true_tau"].get<double>();
  if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  return spec;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) raise(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

fs::path ensure_out_dir(const RunConfig& config) {
  if (config.out_dir.empty()) raise(ErrorCode::ConfigError, "output directory not set");
  fs::path dir(config.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) raise(ErrorCode::IoError, "cannot create output directory '" + config.out_dir + "'");
  return dir;
}

int report_error(const Error& err) {
  json j;
  j["error"]["code"] = to_string(err.code());
  j["error"]["message"] = err.what();
  std::cerr << j.dump() << std::endl;
  return static_cast<int>(classify(err.code()));
}

int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const Error& err) {
    return report_error(err);
  } catch (const std::exception& ex) {
    json j;
    j["error"]["code"] = "InternalError";
    j["error"]["message"] = ex.what();
    std::cerr << j.dump() << std::endl;
    return 1;
  }
}

struct PreparedRun {
  Panel raw_panel;        // donor-restricted, original outcome scale
  Panel estimation_panel; // residualized when covariates are configured
  std::vector<std::string> donors;
  std::vector<std::string> warnings;
};

PreparedRun prepare(const RunConfig& config) {
  PreparedRun run;
  if (config.panel_csv.empty()) raise(ErrorCode::ConfigError, "panel csv path not set");
  Panel panel =
      load_panel_file(config.panel_csv, config.schema, config.assignment, config.panel_kind);

  bool needs_chars = config.donor_criteria.has_value() || !config.covariates.empty();
  CharacteristicsTable chars;
  if (needs_chars) {
    if (config.characteristics_csv.empty()) {
      raise(ErrorCode::ConfigError,
            "donor criteria / covariates need a characteristics_csv input");
    }
    chars = load_characteristics_file(config.characteristics_csv);
  }

  if (config.donor_criteria) {
    auto donors = filter_donors(chars, *config.donor_criteria, panel.treated_unit);
    std::vector<std::string> present;
    for (const auto& d : donors) {
      if (panel.unit_index(d) >= 0) present.push_back(d);
    }
    if (present.empty()) {
      raise(ErrorCode::EmptyDonorPool, "no donor from the criteria appears in the panel");
    }
    panel = restrict_units(panel, present);
    run.donors = present;
  } else if (config.donor_list) {
    panel = restrict_units(panel, *config.donor_list);
    run.donors = *config.donor_list;
    std::sort(run.donors.begin(), run.donors.end());
  } else {
    run.donors = panel.donor_units();
    std::sort(run.donors.begin(), run.donors.end());
  }

  run.raw_panel = panel;
  if (!config.covariates.empty()) {
    ResidualizedPanel residualized = residualize_covariates(panel, chars, config.covariates);
    run.estimation_panel = std::move(residualized.panel);
    for (const auto& column : residualized.dropped_columns) {
      run.warnings.push_back("covariate '" + column + "' dropped as collinear");
    }
  } else {
    run.estimation_panel = panel;
  }
  return run;
}

void write_donor_csv(const fs::path& dir, const std::vector<std::string>& donors) {
  std::ostringstream out;
  out << "unit\n";
  for (const auto& d : donors) out << csv::escape_field(d) << '\n';
  write_file(dir / "donors.csv", out.str());
}

json inference_bundle(const EstimateResult& estimate_result, const PlaceboDistribution& dist,
                      const RunConfig& config) {
  json j;
  InferenceResult inference =
      run_inference(estimate_result.tau_hat, dist, config.inference_mode);
  j["inference"] = json::parse(inference_to_json(inference));
  RmspeRatioTest ratio = rmspe_ratio_test(dist);
  j["rmspe_ratio_test"] = {{"treated_ratio", ratio.treated_ratio},
                           {"ratio_min", ratio.ratio_min},
                           {"ratio_max", ratio.ratio_max},
                           {"p", ratio.p}};
  OverfitReport overfit = overfit_diagnostic(dist);
  j["overfit"] = {{"overfit", overfit.overfit},
                  {"treated_pre_rmspe", overfit.treated_pre_rmspe},
                  {"treated_ratio", overfit.treated_ratio},
                  {"pre_rmspe_trigger", overfit.pre_rmspe_trigger},
                  {"ratio_trigger", overfit.ratio_trigger}};
  if (overfit.overfit) j["overfit"]["advisory"] = overfit.advisory;
  if (!dist.warnings.empty()) j["warnings"] = dist.warnings;
  return j;
}

void write_weight_artifacts(const fs::path& dir, const Panel& panel,
                            const EstimateResult& result) {
  {
    std::ostringstream out;
    if (result.unit_weights) {
      std::vector<std::string> labels = panel.donor_units();
      write_weights_csv(out, "unit", labels, emitted_weights(result.unit_weights->weights));
    } else {
      out << "unit,weight\n";
    }
    write_file(dir / "weights_unit.csv", out.str());
  }
  {
    std::ostringstream out;
    if (result.time_weights) {
      std::vector<std::string> labels;
      for (int idx : panel.pre_indices()) labels.push_back(std::to_string(panel.periods[idx]));
      write_weights_csv(out, "period", labels, emitted_weights(result.time_weights->weights));
    } else {
      out << "period,weight\n";
    }
    write_file(dir / "weights_time.csv", out.str());
  }
}

// ---------------------------------------------------------------------------
// Minimal SVG line renderer for the optional static figure output.
// ---------------------------------------------------------------------------

struct SvgSeries {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;
};

std::string render_svg_lines(const std::vector<SvgSeries>& series, double vline_x,
                             const std::string& title) {
  const double width = 800, height = 500;
  const double left = 70, right = 20, top = 40, bottom = 50;
  double x_min = vline_x, x_max = vline_x, y_min = 0, y_max = 1;
  bool first = true;
  for (const auto& s : series) {
    for (auto [x, y] : s.points) {
      if (first) {
        x_min = x_max = x;
        y_min = y_max = y;
        first = false;
      }
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max == y_min) y_max = y_min + 1;
  double pad = 0.08 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;
  auto sx = [&](double x) {
    return left + (x - x_min) / (x_max - x_min) * (width - left - right);
  };
  auto sy = [&](double y) {
    return height - bottom - (y - y_min) / (y_max - y_min) * (height - top - bottom);
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width << ' ' << height
      << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n";
  // axes
  out << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right
      << "\" y2=\"" << height - bottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << height - bottom << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << left << "\" y=\"" << height - bottom + 20
      << "\" text-anchor=\"middle\" font-size=\"12\">" << csv::format_double(x_min)
      << "</text>\n";
  out << "<text x=\"" << width - right << "\" y=\"" << height - bottom + 20
      << "\" text-anchor=\"middle\" font-size=\"12\">" << csv::format_double(x_max)
      << "</text>\n";
  out << "<text x=\"" << left - 8 << "\" y=\"" << sy(y_min) << "\" text-anchor=\"end\" "
      << "font-size=\"12\">" << csv::format_double(y_min) << "</text>\n";
  out << "<text x=\"" << left - 8 << "\" y=\"" << sy(y_max) << "\" text-anchor=\"end\" "
      << "font-size=\"12\">" << csv::format_double(y_max) << "</text>\n";
  // treatment-start marker
  if (vline_x >= x_min && vline_x <= x_max) {
    out << "<line x1=\"" << sx(vline_x) << "\" y1=\"" << top << "\" x2=\"" << sx(vline_x)
        << "\" y2=\"" << height - bottom << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  }
  double legend_y = top;
  for (const auto& s : series) {
    out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      if (i) out << ' ';
      out << csv::format_double(sx(s.points[i].first)) << ','
          << csv::format_double(sy(s.points[i].second));
    }
    out << "\"/>\n";
    out << "<text x=\"" << width - right - 150 << "\" y=\"" << legend_y << "\" font-size=\"12\" "
        << "fill=\"" << s.color << "\">" << s.label << "</text>\n";
    legend_y += 16;
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace

RunConfig load_run_config(const std::string& path, const FlagOverrides& overrides) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    raise(ErrorCode::ConfigError, "config parse failure: " + std::string(ex.what()));
  }

  RunConfig config;
  fs::path base = fs::path(path).parent_path();
  try {
    if (j.contains("panel")) {
      const auto& jp = j["panel"];
      config.panel_csv = resolve(base, jp.value("csv", ""));
      if (jp.contains("kind")) config.panel_kind = parse_outcome_kind(jp["kind"].get<std::string>());
      if (jp.contains("columns")) {
        const auto& jc = jp["columns"];
        config.schema.unit = jc.value("unit", config.schema.unit);
        config.schema.period = jc.value("period", config.schema.period);
        config.schema.outcome = jc.value("outcome", config.schema.outcome);
        config.schema.numerator = jc.value("numerator", config.schema.numerator);
        config.schema.denominator = jc.value("denominator", config.schema.denominator);
      }
    }
    if (j.contains("assignment")) {
      config.assignment.treated_unit = j["assignment"].value("treated_unit", "");
      config.assignment.treatment_start = j["assignment"].value("treatment_start", 0);
    }
    config.characteristics_csv = resolve(base, j.value("characteristics_csv", ""));
    if (j.contains("method")) {
      config.estimator.method = parse_method(j["method"].get<std::string>());
    }
    if (j.contains("zeta") && !j["zeta"].is_null()) {
      config.estimator.zeta_override = j["zeta"].get<double>();
    }
    if (j.contains("solver")) {
      config.estimator.solver.tol = j["solver"].value("tol", config.estimator.solver.tol);
      config.estimator.solver.max_iter =
          j["solver"].value("max_iter", config.estimator.solver.max_iter);
    }
    if (j.contains("inference")) {
      config.inference_mode = parse_inference_mode(j["inference"].get<std::string>());
    }
    if (j.contains("placebo")) {
      config.placebo_keep_treated = j["placebo"].value("keep_treated", false);
    }
    config.seed = j.value("seed", static_cast<std::uint64_t>(0));
    config.out_dir = j.value("out_dir", config.out_dir);

    if (j.contains("donors")) {
      const auto& jd = j["donors"];
      if (jd.contains("criteria") && jd.contains("list")) {
        raise(ErrorCode::ConfigError, "donors: give either criteria or list, not both");
      }
      if (jd.contains("criteria")) config.donor_criteria = parse_criteria(jd["criteria"]);
      if (jd.contains("list")) {
        config.donor_list = jd["list"].get<std::vector<std::string>>();
      }
    }
    if (j.contains("covariates")) {
      config.covariates = j["covariates"].get<std::vector<std::string>>();
    }
    if (j.contains("figures")) {
      config.statewide_csv = resolve(base, j["figures"].value("statewide_csv", ""));
      config.render_svg = j["figures"].value("render_svg", false);
    }
    if (j.contains("panels")) {
      for (const auto& [name, jp] : j["panels"].items()) {
        NamedPanelSource source;
        if (jp.is_string()) {
          source.csv = resolve(base, jp.get<std::string>());
        } else {
          source.csv = resolve(base, jp.value("csv", ""));
          if (jp.contains("kind")) source.kind = parse_outcome_kind(jp["kind"].get<std::string>());
        }
        config.panels[name] = source;
      }
    }
    if (j.contains("sensitivity")) {
      const auto& js = j["sensitivity"];
      SpecGrid grid;
      grid.estimator = config.estimator;
      grid.inference_mode = config.inference_mode;
      grid.covariate_columns = config.covariates;
      grid.outcomes = js.value("outcomes", std::vector<std::string>{});
      if (js.contains("donor_pools")) {
        for (const auto& jp : js["donor_pools"]) {
          PoolSpec pool;
          pool.name = jp.value("name", "pool" + std::to_string(grid.donor_pools.size()));
          if (jp.contains("criteria")) pool.criteria = parse_criteria(jp["criteria"]);
          if (jp.contains("list")) {
            pool.explicit_donors = jp["list"].get<std::vector<std::string>>();
          }
          config.grid_pool_names.push_back(pool.name);
          grid.donor_pools.push_back(std::move(pool));
        }
      }
      if (grid.donor_pools.empty()) grid.donor_pools.push_back({"all", std::nullopt, std::nullopt});
      if (js.contains("pre_period_starts")) {
        for (const auto& v : js["pre_period_starts"]) {
          if (v.is_null()) grid.pre_period_starts.push_back(std::nullopt);
          else grid.pre_period_starts.push_back(v.get<int>());
        }
      }
      if (grid.pre_period_starts.empty()) grid.pre_period_starts.push_back(std::nullopt);
      if (js.contains("covariate_toggles")) {
        grid.covariate_toggles = js["covariate_toggles"].get<std::vector<bool>>();
      }
      if (grid.covariate_toggles.empty()) grid.covariate_toggles.push_back(false);
      config.grid = std::move(grid);
    }
    if (j.contains("composition")) {
      config.composition_outcomes =
          j["composition"].value("outcomes", std::vector<std::string>{});
    }
    config.sim_spec = parse_sim_spec(j.value("simulate", json::object()), config.seed);
    if (j.contains("simulate")) {
      config.sim_reps = j["simulate"].value("n_reps", config.sim_reps);
    }
  } catch (const json::exception& ex) {
    raise(ErrorCode::ConfigError, "config field error: " + std::string(ex.what()));
  }

  if (overrides.out_dir) config.out_dir = *overrides.out_dir;
  if (overrides.seed) {
    config.seed = *overrides.seed;
    config.sim_spec.seed = *overrides.seed;
  }
  if (overrides.method) config.estimator.method = parse_method(*overrides.method);
  if (overrides.inference) config.inference_mode = parse_inference_mode(*overrides.inference);
  if (config.grid) {
    config.grid->estimator = config.estimator;
    config.grid->inference_mode = config.inference_mode;
  }
  return config;
}

int cmd_estimate(const RunConfig& config) {
  return guarded([&] {
    PreparedRun run = prepare(config);
    if (run.estimation_panel.donor_units().size() < 2) {
      raise(ErrorCode::InsufficientDonors, "estimate needs at least 2 donors for inference");
    }
    fs::path dir = ensure_out_dir(config);

    EstimateResult result = estimate(run.estimation_panel, config.estimator);
    for (const auto& w : run.warnings) result.warnings.push_back(w);
    PlaceboDistribution dist = placebo_distribution(run.estimation_panel, config.estimator,
                                                    config.placebo_keep_treated);

    write_file(dir / "estimate.json", estimate_to_json(result) + "\n");
    {
      std::ostringstream out;
      write_estimate_csv(out, result);
      write_file(dir / "estimate.csv", out.str());
    }
    write_weight_artifacts(dir, run.estimation_panel, result);
    write_file(dir / "inference.json", inference_bundle(result, dist, config).dump(2) + "\n");
    write_donor_csv(dir, run.donors);
  });
}

int cmd_placebo(const RunConfig& config) {
  return guarded([&] {
    PreparedRun run = prepare(config);
    fs::path dir = ensure_out_dir(config);

    EstimateResult result = estimate(run.estimation_panel, config.estimator);
    PlaceboDistribution dist = placebo_distribution(run.estimation_panel, config.estimator,
                                                    config.placebo_keep_treated);

    {
      std::ostringstream out;
      write_placebo_csv(out, dist);
      write_file(dir / "placebo_distribution.csv", out.str());
    }
    write_file(dir / "placebo_distribution.json", placebo_to_json(dist) + "\n");
    write_file(dir / "inference.json", inference_bundle(result, dist, config).dump(2) + "\n");
    {
      RmspeRatioTest ratio = rmspe_ratio_test(dist);
      std::ostringstream out;
      out << "specification,estimate,treated_ratio,ratio_min,ratio_max,p\n";
      out << to_string(config.estimator.method) << ',' << csv::format_double(result.tau_hat)
          << ',' << csv::format_double(ratio.treated_ratio) << ','
          << csv::format_double(ratio.ratio_min) << ',' << csv::format_double(ratio.ratio_max)
          << ',' << csv::format_double(ratio.p) << '\n';
      write_file(dir / "rmspe_report.csv", out.str());
    }
    write_donor_csv(dir, run.donors);
  });
}

int cmd_figures(const RunConfig& config) {
  return guarded([&] {
    PreparedRun run = prepare(config);
    fs::path dir = ensure_out_dir(config);
    const Panel& panel = run.raw_panel;
    int treated = panel.treated_index();
    auto donors = panel.donor_indices();
    auto pre = panel.pre_indices();

    // Weights come from the estimation scale; the plotted series stay raw.
    EstimateResult fit = estimate_sdid(run.estimation_panel, config.estimator.zeta_override,
                                       config.estimator.solver);
    const Eigen::VectorXd omega = fit.unit_weights->weights;
    const Eigen::VectorXd lambda = fit.time_weights->weights;

    // (a) treated vs donor average vs optional statewide series
    std::vector<SvgSeries> trend_series;
    {
      std::ostringstream out;
      out << "series,period,value,treatment_start\n";
      SvgSeries treated_series{panel.treated_unit, "#c0392b", {}};
      SvgSeries donor_series{"donor_average", "#2980b9", {}};
      for (std::size_t jdx = 0; jdx < panel.n_periods(); ++jdx) {
        auto j = static_cast<Eigen::Index>(jdx);
        out << csv::escape_field(panel.treated_unit) << ',' << panel.periods[jdx] << ','
            << csv::format_double(panel.outcomes(treated, j)) << ',' << panel.treatment_start
            << '\n';
        treated_series.points.emplace_back(panel.periods[jdx], panel.outcomes(treated, j));
      }
      for (std::size_t jdx = 0; jdx < panel.n_periods(); ++jdx) {
        auto j = static_cast<Eigen::Index>(jdx);
        double mean = 0.0;
        for (int i : donors) mean += panel.outcomes(i, j);
        mean /= static_cast<double>(donors.size());
        out << "donor_average," << panel.periods[jdx] << ',' << csv::format_double(mean) << ','
            << panel.treatment_start << '\n';
        donor_series.points.emplace_back(panel.periods[jdx], mean);
      }
      trend_series.push_back(std::move(treated_series));
      trend_series.push_back(std::move(donor_series));
      if (!config.statewide_csv.empty()) {
        csv::Table table = csv::read_file(config.statewide_csv);
        int pcol = table.require_column("period");
        int vcol = table.column("value");
        if (vcol < 0) vcol = table.require_column("outcome");
        SvgSeries statewide{"statewide", "#7f8c8d", {}};
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
          std::string context = "statewide row " + std::to_string(r + 2);
          long long period = csv::parse_int(table.rows[r][pcol], context);
          double value = csv::parse_double(table.rows[r][vcol], context);
          out << "statewide," << period << ',' << csv::format_double(value) << ','
              << panel.treatment_start << '\n';
          statewide.points.emplace_back(static_cast<double>(period), value);
        }
        trend_series.push_back(std::move(statewide));
      }
      write_file(dir / "figure_trend.csv", out.str());
    }

    // (b) treated vs omega-weighted synthetic series, lambda bars on pre
    std::vector<SvgSeries> fit_series;
    {
      // Level adjustment so the synthetic series matches the treated unit in
      // the lambda-weighted pre-period sense.
      double treated_base = 0.0, synth_base = 0.0;
      for (std::size_t t = 0; t < pre.size(); ++t) {
        double synth_t = 0.0;
        for (std::size_t i = 0; i < donors.size(); ++i) {
          synth_t += omega(static_cast<Eigen::Index>(i)) * panel.outcomes(donors[i], pre[t]);
        }
        treated_base +=
            lambda(static_cast<Eigen::Index>(t)) * panel.outcomes(treated, pre[t]);
        synth_base += lambda(static_cast<Eigen::Index>(t)) * synth_t;
      }
      double level = treated_base - synth_base;

      std::ostringstream out;
      out << "period,treated,synthetic,lambda_weight,treatment_start\n";
      SvgSeries treated_series{panel.treated_unit, "#c0392b", {}};
      SvgSeries synth_series{"synthetic", "#2980b9", {}};
      for (std::size_t jdx = 0; jdx < panel.n_periods(); ++jdx) {
        auto j = static_cast<Eigen::Index>(jdx);
        double synth = 0.0;
        for (std::size_t i = 0; i < donors.size(); ++i) {
          synth += omega(static_cast<Eigen::Index>(i)) * panel.outcomes(donors[i], j);
        }
        synth += level;
        double lambda_weight = 0.0;
        for (std::size_t t = 0; t < pre.size(); ++t) {
          if (pre[t] == static_cast<int>(jdx)) {
            lambda_weight = lambda(static_cast<Eigen::Index>(t));
          }
        }
        out << panel.periods[jdx] << ',' << csv::format_double(panel.outcomes(treated, j)) << ','
            << csv::format_double(synth) << ',' << csv::format_double(lambda_weight) << ','
            << panel.treatment_start << '\n';
        treated_series.points.emplace_back(panel.periods[jdx], panel.outcomes(treated, j));
        synth_series.points.emplace_back(panel.periods[jdx], synth);
      }
      fit_series.push_back(std::move(treated_series));
      fit_series.push_back(std::move(synth_series));
      write_file(dir / "figure_sdid_fit.csv", out.str());
    }

    // (c) per-donor pre-period alignment after time weighting
    {
      double treated_base = 0.0;
      for (std::size_t t = 0; t < pre.size(); ++t) {
        treated_base += lambda(static_cast<Eigen::Index>(t)) * panel.outcomes(treated, pre[t]);
      }
      std::ostringstream out;
      out << "unit,omega_weight,lambda_weighted_pre_mean,treated_lambda_weighted_pre_mean,gap,"
             "treatment_start\n";
      Eigen::VectorXd shown = emitted_weights(omega);
      for (std::size_t i = 0; i < donors.size(); ++i) {
        double donor_base = 0.0;
        for (std::size_t t = 0; t < pre.size(); ++t) {
          donor_base +=
              lambda(static_cast<Eigen::Index>(t)) * panel.outcomes(donors[i], pre[t]);
        }
        out << csv::escape_field(panel.units[donors[i]]) << ','
            << csv::format_double(shown(static_cast<Eigen::Index>(i))) << ','
            << csv::format_double(donor_base) << ',' << csv::format_double(treated_base) << ','
            << csv::format_double(donor_base - treated_base) << ',' << panel.treatment_start
            << '\n';
      }
      write_file(dir / "figure_alignment.csv", out.str());
    }

    if (config.render_svg) {
      write_file(dir / "figure_trend.svg",
                 render_svg_lines(trend_series, panel.treatment_start, "Outcome trends"));
      write_file(dir / "figure_sdid_fit.svg",
                 render_svg_lines(fit_series, panel.treatment_start,
                                  "Synthetic difference-in-differences fit"));
    }
  });
}

int cmd_sensitivity(const RunConfig& config) {
  return guarded([&] {
    if (!config.grid && config.composition_outcomes.empty()) {
      raise(ErrorCode::ConfigError, "config has no sensitivity or composition section");
    }
    fs::path dir = ensure_out_dir(config);

    std::map<std::string, Panel> panels;
    auto load_named = [&](const std::string& name) {
      if (panels.count(name)) return;
      auto it = config.panels.find(name);
      if (it == config.panels.end()) {
        raise(ErrorCode::ConfigError, "no panel source named '" + name + "' in config");
      }
      panels.emplace(name, load_panel_file(it->second.csv, config.schema, config.assignment,
                                           it->second.kind));
    };

    json combined;
    if (config.grid) {
      for (const auto& outcome : config.grid->outcomes) load_named(outcome);
      CharacteristicsTable chars;
      if (!config.characteristics_csv.empty()) {
        chars = load_characteristics_file(config.characteristics_csv);
      }
      auto results = run_spec_grid(*config.grid, panels, chars);
      std::ostringstream out;
      write_grid_csv(out, results);
      write_file(dir / "sensitivity_grid.csv", out.str());
      combined["grid"] = json::parse(grid_to_json(results));
    }
    if (!config.composition_outcomes.empty()) {
      std::map<std::string, Panel> composition_panels;
      for (const auto& outcome : config.composition_outcomes) {
        load_named(outcome);
        composition_panels.emplace(outcome, panels.at(outcome));
      }
      auto results =
          composition_checks(composition_panels, config.estimator, config.inference_mode);
      std::ostringstream out;
      write_grid_csv(out, results);
      write_file(dir / "composition.csv", out.str());
      combined["composition"] = json::parse(grid_to_json(results));
    }
    write_file(dir / "sensitivity.json", combined.dump(2) + "\n");
  });
}

int cmd_simulate(const RunConfig& config) {
  return guarded([&] {
    fs::path dir = ensure_out_dir(config);
    MonteCarloSummary summary = monte_carlo(config.sim_spec, config.sim_reps, config.estimator);
    write_file(dir / "simulation_summary.json", monte_carlo_to_json(summary) + "\n");
    std::ostringstream out;
    write_monte_carlo_csv(out, summary);
    write_file(dir / "simulation_summary.csv", out.str());
  });
}

int cmd_validate(const RunConfig& config) {
  int exit_code = guarded([&] {
    if (config.panel_csv.empty()) raise(ErrorCode::ConfigError, "panel csv path not set");
    Panel panel =
        load_panel_file(config.panel_csv, config.schema, config.assignment, config.panel_kind);
    ValidationReport report = validate_panel(panel);

    json j;
    auto issues = [](const std::vector<ValidationIssue>& list) {
      json out = json::array();
      for (const auto& issue : list) {
        json ji;
        ji["code"] = to_string(issue.code);
        ji["unit"] = issue.unit;
        if (issue.period) ji["period"] = *issue.period;
        ji["message"] = issue.message;
        out.push_back(std::move(ji));
      }
      return out;
    };
    j["errors"] = issues(report.errors);
    j["warnings"] = issues(report.warnings);
    j["valid"] = report.ok();
    std::cout << j.dump(2) << std::endl;
    if (!config.out_dir.empty()) {
      fs::path dir = ensure_out_dir(config);
      write_file(dir / "validation.json", j.dump(2) + "\n");
    }
    if (!report.ok()) {
      raise(report.errors.front().code, "panel validation failed: " +
                                            report.errors.front().message);
    }
  });
  return exit_code;
}

}  // namespace sdid
