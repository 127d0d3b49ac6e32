#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "metagam/fit.hpp"
#include "metagam/meta.hpp"
#include "metagam/parallel.hpp"
#include "metagam/sim.hpp"
#include "metagam/stats.hpp"
#include "metagam/strip.hpp"
#include "metagam/svg.hpp"
#include "metagam/table.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// exit codes: 2 parse/input, 3 rank-deficient design, 4 schema violation,
// 5 simulation failure
constexpr int kExitParse = 2;
constexpr int kExitRankDeficient = 3;
constexpr int kExitSchema = 4;
constexpr int kExitSimulation = 5;

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fit_summary(const metagam::FittedGam& m) {
  std::ostringstream out;
  out << "n: " << m.n << "\n";
  if (m.n_subjects) out << "groups: " << *m.n_subjects << "\n";
  out << "scale: " << fmt6(m.scale) << "\n";
  out << "edf_total: " << fmt6(m.edf_total) << "\n";
  out << "r2_adj: " << fmt6(m.r2_adj) << "\n";
  out << "term,edf,lambda,pvalue\n";
  for (const metagam::TermFit& t : m.smooths) {
    out << t.spec.id << "," << fmt6(t.edf) << "," << fmt6(t.lambda) << "," << fmt6(t.pvalue)
        << "\n";
  }
  if (m.random_intercept) {
    out << m.random_intercept->column << " (ridge)," << fmt6(m.random_intercept->edf) << ","
        << fmt6(m.random_intercept->lambda) << ",\n";
  }
  return out.str();
}

int cmd_fit(const std::string& csv_path, const std::string& formula_text,
            const std::string& out_path) {
  metagam::ColumnTable data;
  metagam::ModelFormula formula;
  try {
    data = metagam::read_csv(csv_path);
    formula = metagam::parse_formula(formula_text);
  } catch (const metagam::Error& e) {
    std::cerr << "metagam fit: " << e.what() << "\n";
    return kExitParse;
  }
  try {
    metagam::FittedGam model = metagam::fit_gam(data, formula);
    metagam::save_local(model, out_path);
    metagam::write_text_file(out_path + ".summary.txt", fit_summary(model));
    std::cout << "wrote " << out_path << "\n";
    return 0;
  } catch (const metagam::RankDeficientDesign& e) {
    std::cerr << "metagam fit: " << e.what() << "\n";
    return kExitRankDeficient;
  } catch (const metagam::Error& e) {
    std::cerr << "metagam fit: " << e.what() << "\n";
    return kExitParse;
  }
}

int cmd_strip(const std::string& model_path, const std::string& label,
              const std::string& out_path) {
  try {
    metagam::FittedGam model = metagam::load_local(model_path);
    metagam::StrippedModel sm = metagam::strip_rawdata(model, label);
    metagam::save_stripped(sm, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
  } catch (const metagam::SchemaViolation& e) {
    std::cerr << "metagam strip: " << model_path << ": " << e.what() << "\n";
    return kExitSchema;
  } catch (const metagam::VersionMismatch& e) {
    std::cerr << "metagam strip: " << model_path << ": " << e.what() << "\n";
    return kExitSchema;
  } catch (const metagam::Error& e) {
    std::cerr << "metagam strip: " << e.what() << "\n";
    return kExitParse;
  }
}

std::string meta_csv(const metagam::MetaFit& meta, const Eigen::VectorXd& lo,
                     const Eigen::VectorXd& hi) {
  std::ostringstream out;
  out << meta.grid_var << ",fit,se,tau2,ci_low,ci_high\n";
  for (Eigen::Index i = 0; i < meta.grid_x.size(); ++i) {
    out << fmt6(meta.grid_x[i]) << "," << fmt6(meta.pooled_fit[i]) << ","
        << fmt6(meta.pooled_se[i]) << "," << fmt6(meta.tau2[i]) << "," << fmt6(lo[i]) << ","
        << fmt6(hi[i]) << "\n";
  }
  return out.str();
}

int cmd_meta(const std::vector<std::string>& stripped_paths, const std::string& grid_spec,
             const std::string& term, const std::string& method_name, bool intercept,
             bool range_restrict, double alpha, const std::string& out_dir) {
  std::vector<metagam::StrippedModel> models;
  for (const std::string& path : stripped_paths) {
    try {
      models.push_back(metagam::load_stripped(path));
    } catch (const metagam::SchemaViolation& e) {
      std::cerr << "metagam meta: " << path << ": " << e.what() << "\n";
      return kExitSchema;
    } catch (const metagam::VersionMismatch& e) {
      std::cerr << "metagam meta: " << path << ": " << e.what() << "\n";
      return kExitSchema;
    } catch (const metagam::Error& e) {
      std::cerr << "metagam meta: " << path << ": " << e.what() << "\n";
      return kExitParse;
    }
  }
  try {
    const metagam::ColumnTable grid = metagam::parse_grid_spec(grid_spec);
    const metagam::PoolMethod method =
        method_name == "dl" ? metagam::PoolMethod::DL : metagam::PoolMethod::FE;
    std::vector<metagam::CohortPrediction> preds;
    for (const metagam::StrippedModel& sm : models) {
      preds.push_back(metagam::predict_for_meta(sm, term, grid, intercept));
    }
    metagam::MetaFit meta = metagam::pool_pointwise(preds, method, range_restrict);
    auto [lo, hi] = metagam::confidence_band(meta, alpha);
    metagam::HeterogeneityCurve het = metagam::cochran_q(preds);
    metagam::DominanceCurve dom = metagam::dominance(meta);

    fs::create_directories(out_dir);
    metagam::write_text_file((fs::path(out_dir) / "meta.csv").string(), meta_csv(meta, lo, hi));

    const auto& palette = metagam::SvgPlot::palette();
    metagam::SvgPlot band_plot(760, 520, "Pooled fit: " + term, meta.grid_var, "estimate");
    band_plot.band(meta.grid_x, lo, hi, "#1b9e77", 0.25);
    band_plot.line(meta.grid_x, meta.pooled_fit, "#1b9e77", 2.0, false);
    std::vector<std::pair<std::string, std::string>> legend{{"pooled", "#1b9e77"}};
    for (std::size_t m = 0; m < preds.size(); ++m) {
      const std::string& color = palette[(m + 1) % palette.size()];
      band_plot.line(preds[m].grid_x, preds[m].pred.fit, color, 1.0, true);
      legend.emplace_back(preds[m].label, color);
    }
    band_plot.legend(legend);
    band_plot.save((fs::path(out_dir) / "band.svg").string());

    metagam::SvgPlot dom_plot(760, 520, "Dominance: " + term, meta.grid_var, "weight share");
    dom_plot.stacked_area(dom.grid_x, dom.fractions, palette);
    std::vector<std::pair<std::string, std::string>> dom_legend;
    for (std::size_t m = 0; m < dom.cohort_labels.size(); ++m) {
      dom_legend.emplace_back(dom.cohort_labels[m], palette[m % palette.size()]);
    }
    dom_plot.legend(dom_legend);
    dom_plot.save((fs::path(out_dir) / "dominance.svg").string());

    metagam::SvgPlot het_plot(760, 520, "Heterogeneity: " + term, meta.grid_var, "Q - df");
    het_plot.include(het.grid_x, het.ci_low);
    het_plot.include(het.grid_x, het.ci_high);
    het_plot.band(het.grid_x, het.ci_low, het.ci_high, "#7570b3", 0.25);
    het_plot.line(het.grid_x, (het.q.array() - het.df).matrix(), "#7570b3", 2.0, false);
    het_plot.hline(0.0, "#444444", true);
    het_plot.save((fs::path(out_dir) / "heterogeneity.svg").string());

    if (meta.zero_se_warning) {
      std::cerr << "warning: at least one cohort reported a zero standard error and was "
                   "dropped pointwise\n";
    }
    std::cout << "wrote " << out_dir << "/meta.csv\n";
    return 0;
  } catch (const metagam::Error& e) {
    std::cerr << "metagam meta: " << e.what() << "\n";
    return kExitParse;
  }
}

int cmd_plot(const std::vector<std::string>& stripped_paths, const std::string& grid_spec,
             const std::string& term, bool intercept, double alpha, const std::string& out_path) {
  try {
    std::vector<metagam::StrippedModel> models;
    for (const std::string& path : stripped_paths) models.push_back(metagam::load_stripped(path));
    const metagam::ColumnTable grid = metagam::parse_grid_spec(grid_spec);
    const double z = metagam::stats::norm_quantile(1.0 - alpha / 2.0);
    metagam::SvgPlot plot(760, 520, "Cohort fits: " + term,
                          models.front().model.term(term).spec.covariate, "estimate");
    const auto& palette = metagam::SvgPlot::palette();
    std::vector<std::pair<std::string, std::string>> legend;
    std::vector<metagam::CohortPrediction> preds;
    for (const auto& sm : models) {
      preds.push_back(metagam::predict_for_meta(sm, term, grid, intercept));
    }
    for (const auto& p : preds) {
      plot.include(p.grid_x, (p.pred.fit - z * p.pred.se).eval());
      plot.include(p.grid_x, (p.pred.fit + z * p.pred.se).eval());
    }
    for (std::size_t m = 0; m < preds.size(); ++m) {
      const std::string& color = palette[m % palette.size()];
      plot.band(preds[m].grid_x, (preds[m].pred.fit - z * preds[m].pred.se).eval(),
                (preds[m].pred.fit + z * preds[m].pred.se).eval(), color, 0.15);
      plot.line(preds[m].grid_x, preds[m].pred.fit, color, 1.8, false);
      legend.emplace_back(preds[m].label, color);
    }
    plot.legend(legend);
    plot.save(out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
  } catch (const metagam::SchemaViolation& e) {
    std::cerr << "metagam plot: " << e.what() << "\n";
    return kExitSchema;
  } catch (const metagam::VersionMismatch& e) {
    std::cerr << "metagam plot: " << e.what() << "\n";
    return kExitSchema;
  } catch (const metagam::Error& e) {
    std::cerr << "metagam plot: " << e.what() << "\n";
    return kExitParse;
  }
}

int run_simulation_config(const json& cfg, const std::string& out_dir) {
  const std::string kind = cfg.value("kind", std::string());
  fs::create_directories(out_dir);
  if (kind == "estimation") {
    metagam::sim::EstimationScenario sc;
    sc.n_total = cfg.value("n_total", sc.n_total);
    sc.sigma = cfg.value("sigma", sc.sigma);
    sc.replications = cfg.value("replications", sc.replications);
    sc.seed = cfg.value("seed", static_cast<std::uint64_t>(1));
    sc.threads = cfg.value("threads", 0);
    if (cfg.contains("schemes")) {
      sc.schemes.clear();
      for (const auto& s : cfg["schemes"]) {
        sc.schemes.push_back(metagam::sim::scheme_from_string(s.get<std::string>()));
      }
    }
    metagam::sim::EstimationReport report = metagam::sim::run_estimation(sc);
    metagam::write_text_file((fs::path(out_dir) / "estimation.csv").string(),
                             metagam::sim::estimation_csv(report));
    metagam::write_text_file((fs::path(out_dir) / "estimation_fits.svg").string(),
                             metagam::sim::estimation_panel_svg(report));
    std::cout << "estimation report written to " << out_dir << " (runtime "
              << fmt6(report.runtime_seconds) << " s)\n";
    return 0;
  }
  if (kind == "power") {
    auto scenario_from = [&](const json& j) {
      metagam::sim::PowerScenario sc;
      sc.n_total = j.value("n_total", sc.n_total);
      sc.sigma = j.value("sigma", sc.sigma);
      sc.replications = j.value("replications", sc.replications);
      sc.seed = j.value("seed", static_cast<std::uint64_t>(1));
      sc.threads = j.value("threads", 0);
      sc.n_cohorts = j.value("n_cohorts", sc.n_cohorts);
      sc.basis_dim = j.value("basis_dim", sc.basis_dim);
      sc.alpha = j.value("alpha", sc.alpha);
      const std::string effect = j.value("effect", std::string("group_interaction"));
      sc.interaction = (effect != "null");
      return sc;
    };
    if (cfg.contains("n_total_sweep")) {
      std::vector<metagam::sim::PowerReport> sweep;
      std::vector<double> xs;
      for (const auto& nj : cfg["n_total_sweep"]) {
        json sub = cfg;
        sub.erase("n_total_sweep");
        sub["n_total"] = nj;
        metagam::sim::PowerScenario sc = scenario_from(sub);
        sweep.push_back(metagam::sim::run_power(sc));
        xs.push_back(nj.get<double>());
        const std::string tag = "n" + std::to_string(nj.get<long>());
        metagam::write_text_file((fs::path(out_dir) / ("power_" + tag + ".csv")).string(),
                                 metagam::sim::power_csv(sweep.back()));
      }
      metagam::write_text_file((fs::path(out_dir) / "power_curve.svg").string(),
                               metagam::sim::power_curve_svg(sweep, "total sample size", xs));
      std::cout << "power sweep written to " << out_dir << "\n";
      return 0;
    }
    metagam::sim::PowerScenario sc = scenario_from(cfg);
    metagam::sim::PowerReport report = metagam::sim::run_power(sc);
    metagam::write_text_file((fs::path(out_dir) / "power.csv").string(),
                             metagam::sim::power_csv(report));
    metagam::write_text_file((fs::path(out_dir) / "power_quantiles.csv").string(),
                             metagam::sim::power_quantiles_csv(report));
    std::cout << "power report written to " << out_dir << " (runtime "
              << fmt6(report.runtime_seconds) << " s)\n";
    return 0;
  }
  std::cerr << "metagam simulate: config 'kind' must be 'estimation' or 'power'\n";
  return kExitParse;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override) {
  json cfg;
  try {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "metagam simulate: cannot read '" << config_path << "'\n";
      return kExitParse;
    }
    cfg = json::parse(in);
  } catch (const std::exception& e) {
    std::cerr << "metagam simulate: bad config: " << e.what() << "\n";
    return kExitParse;
  }
  if (seed_override) cfg["seed"] = *seed_override;
  try {
    return run_simulation_config(cfg, out_dir);
  } catch (const metagam::sim::SimulationFailure& e) {
    std::cerr << "metagam simulate: " << e.what() << "\n";
    return kExitSimulation;
  } catch (const metagam::Error& e) {
    std::cerr << "metagam simulate: " << e.what() << "\n";
    return kExitParse;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-cohort GAM fitting and raw-data-free pointwise meta-analysis"};
  app.require_subcommand(1);

  // fit
  std::string fit_csv, fit_formula, fit_out = "model.json";
  CLI::App* fit = app.add_subcommand("fit", "Fit a penalized additive model to a CSV dataset");
  fit->add_option("csv", fit_csv, "input CSV file")->required();
  fit->add_option("--formula", fit_formula, "model formula, e.g. 'y ~ s(x, k=10) + g'")
      ->required();
  fit->add_option("--out", fit_out, "output model file (local format)");

  // strip
  std::string strip_in, strip_label = "cohort", strip_out;
  CLI::App* strip = app.add_subcommand("strip", "Remove everything but aggregates from a fit");
  strip->add_option("model", strip_in, "fitted model file")->required();
  strip->add_option("--label", strip_label, "cohort label stored in the stripped model");
  strip->add_option("--out", strip_out, "output .metagam.json path")->required();

  // meta
  std::vector<std::string> meta_in;
  std::string meta_grid, meta_term, meta_method = "fe", meta_out = "meta_out";
  bool meta_intercept = false, meta_range_restrict = false;
  double meta_alpha = 0.05;
  CLI::App* meta = app.add_subcommand("meta", "Pointwise meta-analysis of stripped models");
  meta->add_option("models", meta_in, "two or more .metagam.json files")->required();
  meta->add_option("--grid", meta_grid, "grid spec, e.g. 'Age=20:90:0.1,Sex=Female'")->required();
  meta->add_option("--term", meta_term, "smooth term id, e.g. 's(Age)'")->required();
  meta->add_option("--method", meta_method, "pooling method: fe or dl")
      ->check(CLI::IsMember({"fe", "dl"}));
  meta->add_flag("--intercept", meta_intercept, "add each cohort's intercept to the term");
  meta->add_flag("--range-restrict", meta_range_restrict,
                 "drop cohorts outside their observed covariate range");
  meta->add_option("--alpha", meta_alpha, "confidence band level is 1 - alpha");
  meta->add_option("--out-dir", meta_out, "output directory");

  // plot
  std::vector<std::string> plot_in;
  std::string plot_grid, plot_term, plot_out = "cohorts.svg";
  bool plot_intercept = false;
  double plot_alpha = 0.05;
  CLI::App* plot = app.add_subcommand("plot", "Plot per-cohort fits from stripped models");
  plot->add_option("models", plot_in, "one or more .metagam.json files")->required();
  plot->add_option("--grid", plot_grid, "grid spec")->required();
  plot->add_option("--term", plot_term, "smooth term id")->required();
  plot->add_flag("--intercept", plot_intercept, "add each cohort's intercept");
  plot->add_option("--alpha", plot_alpha, "band level is 1 - alpha");
  plot->add_option("--out", plot_out, "output SVG path");

  // simulate
  std::string sim_config, sim_out = "sim_out";
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  CLI::App* simulate = app.add_subcommand("simulate", "Run a simulation scenario from JSON config");
  simulate->add_option("config", sim_config, "JSON scenario config")->required();
  simulate->add_option("--out-dir", sim_out, "output directory");
  simulate->add_option("--seed", sim_seed, "override the config seed")
      ->each([&](const std::string&) { sim_seed_set = true; });

  CLI11_PARSE(app, argc, argv);

  if (fit->parsed()) return cmd_fit(fit_csv, fit_formula, fit_out);
  if (strip->parsed()) return cmd_strip(strip_in, strip_label, strip_out);
  if (meta->parsed()) {
    return cmd_meta(meta_in, meta_grid, meta_term, meta_method, meta_intercept,
                    meta_range_restrict, meta_alpha, meta_out);
  }
  if (plot->parsed()) {
    return cmd_plot(plot_in, plot_grid, plot_term, plot_intercept, plot_alpha, plot_out);
  }
  if (simulate->parsed()) {
    return cmd_simulate(sim_config, sim_out,
                        sim_seed_set ? std::optional<std::uint64_t>(sim_seed) : std::nullopt);
  }
  return 0;
}
