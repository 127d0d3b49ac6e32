#include "metagam/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numbers>
#include <sstream>

#include "metagam/fit.hpp"
#include "metagam/meta.hpp"
#include "metagam/parallel.hpp"
#include "metagam/stats.hpp"
#include "metagam/svg.hpp"

namespace metagam::sim {

namespace {

double raw_shape(int j, double x) {
  switch (j) {
    case 0: return 0.95 * std::sin(std::numbers::pi * x);
    case 1: return 0.65 * std::tanh(2.5 * (x - 0.5));
    case 2: {
      const double b1 = std::exp(-std::pow((x - 0.23) / 0.13, 2));
      const double b2 = 0.75 * std::exp(-std::pow((x - 0.70) / 0.10, 2));
      return 1.90 * (b1 + b2);
    }
    case 3: return 0.22 * (x - 0.5);
    default: throw InvalidSpec("true function index out of range");
  }
}

// centering constants over the canonical grid, computed once
const std::array<double, 4>& shape_centers() {
  static const std::array<double, 4> centers = [] {
    std::array<double, 4> c{};
    constexpr int kGrid = 10001;
    for (int j = 0; j < 4; ++j) {
      double sum = 0.0;
      for (int i = 0; i < kGrid; ++i) sum += raw_shape(j, i / double(kGrid - 1));
      c[j] = sum / kGrid;
    }
    return c;
  }();
  return centers;
}

double true_function(int j, double x) { return raw_shape(j, x) - shape_centers()[j]; }

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

ModelFormula estimation_formula() {
  ModelFormula f;
  f.response = "y";
  const int dims[4] = {20, 10, 30, 5};
  // identified by sum-to-zero over the common unit interval so the term
  // estimates are directly comparable across cohorts
  std::vector<double> reference(101);
  for (int i = 0; i <= 100; ++i) reference[static_cast<std::size_t>(i)] = i / 100.0;
  for (int j = 0; j < 4; ++j) {
    FormulaSmooth s;
    s.covariate = "x" + std::to_string(j);
    s.id = "s(" + s.covariate + ")";
    s.basis_dim = dims[j];
    s.constraint = Constraint::sum_to_zero_over(reference);
    f.smooth_terms.push_back(std::move(s));
  }
  return f;
}

// sample sizes proportional to the 300/500/800/1000/1400 pattern
std::vector<int> unequal_sizes(int n_total) {
  const double fractions[5] = {300.0 / 4000, 500.0 / 4000, 800.0 / 4000, 1000.0 / 4000,
                               1400.0 / 4000};
  std::vector<int> sizes(5);
  double cum = 0.0;
  int assigned = 0;
  for (int i = 0; i < 5; ++i) {
    cum += fractions[i];
    const int upto = (i == 4) ? n_total : static_cast<int>(std::lround(cum * n_total));
    sizes[static_cast<std::size_t>(i)] = upto - assigned;
    assigned = upto;
  }
  return sizes;
}

std::vector<int> equal_sizes(int n_total, int cohorts) {
  std::vector<int> sizes(static_cast<std::size_t>(cohorts), n_total / cohorts);
  for (int i = 0; i < n_total % cohorts; ++i) sizes[static_cast<std::size_t>(i)] += 1;
  return sizes;
}

std::vector<std::vector<int>> split_indices(Scheme scheme, int n, const std::vector<double>& x1,
                                            const std::vector<double>& x2, long rep) {
  std::vector<std::vector<int>> cohorts;
  if (scheme == Scheme::mega) {
    std::vector<int> all(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    cohorts.push_back(std::move(all));
    return cohorts;
  }
  const std::vector<int> sizes =
      (scheme == Scheme::equal) ? equal_sizes(n, 5) : unequal_sizes(n);
  if (scheme != Scheme::unequal_range) {
    int at = 0;
    for (int s : sizes) {
      std::vector<int> idx(static_cast<std::size_t>(s));
      for (int i = 0; i < s; ++i) idx[static_cast<std::size_t>(i)] = at + i;
      at += s;
      cohorts.push_back(std::move(idx));
    }
    return cohorts;
  }
  // conditional splits: cohort 1 from x2 < 0.5, cohort 2 from x2 >= 0.5,
  // cohort 3 from x1 < 0.5, cohort 4 from x1 >= 0.5, cohort 5 the remainder
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  auto take = [&](int want, const std::function<bool(int)>& pred) {
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(want));
    for (int i = 0; i < n && static_cast<int>(idx.size()) < want; ++i) {
      if (!taken[static_cast<std::size_t>(i)] && pred(i)) {
        idx.push_back(i);
        taken[static_cast<std::size_t>(i)] = 1;
      }
    }
    if (static_cast<int>(idx.size()) < want) {
      throw SimulationFailure(rep, "not enough rows satisfying a range-split predicate");
    }
    return idx;
  };
  cohorts.push_back(take(sizes[0], [&](int i) { return x2[static_cast<std::size_t>(i)] < 0.5; }));
  cohorts.push_back(take(sizes[1], [&](int i) { return x2[static_cast<std::size_t>(i)] >= 0.5; }));
  cohorts.push_back(take(sizes[2], [&](int i) { return x1[static_cast<std::size_t>(i)] < 0.5; }));
  cohorts.push_back(take(sizes[3], [&](int i) { return x1[static_cast<std::size_t>(i)] >= 0.5; }));
  std::vector<int> rest;
  for (int i = 0; i < n; ++i) {
    if (!taken[static_cast<std::size_t>(i)]) rest.push_back(i);
  }
  if (static_cast<int>(rest.size()) != sizes[4]) {
    throw SimulationFailure(rep, "range-split cohorts do not partition the dataset");
  }
  cohorts.push_back(std::move(rest));
  return cohorts;
}

ColumnTable subset_table(const std::vector<std::vector<double>>& cols,
                         const std::vector<std::string>& names, const std::vector<int>& idx) {
  ColumnTable t;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    std::vector<double> v(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      v[i] = cols[c][static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    }
    t.add_numeric(names[c], std::move(v));
  }
  return t;
}

// centered term estimate whose standard errors include the intercept
// uncertainty
TermPrediction predict_with_intercept_se(const FittedGam& m, const std::string& term,
                                         const ColumnTable& grid) {
  TermPrediction pred = predict_term(m, term, grid, false);
  pred.se = predict_term(m, term, grid, true).se;
  return pred;
}

CohortPrediction as_cohort_prediction(const FittedGam& m, std::string label,
                                      const std::string& grid_var, const Eigen::VectorXd& grid_x,
                                      TermPrediction pred) {
  CohortPrediction cp;
  cp.label = std::move(label);
  cp.n = m.n;
  cp.grid_var = grid_var;
  cp.grid_x = grid_x;
  cp.in_range.assign(static_cast<std::size_t>(grid_x.size()), 1);
  const auto it = m.covariate_stats.find(grid_var);
  if (it != m.covariate_stats.end()) {
    for (Eigen::Index i = 0; i < grid_x.size(); ++i) {
      if (grid_x[i] < it->second.min || grid_x[i] > it->second.max) {
        cp.in_range[static_cast<std::size_t>(i)] = 0;
      }
    }
  }
  cp.pred = std::move(pred);
  return cp;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (static_cast<double>(v.size()) - 1.0));
}

}  // namespace

std::array<std::function<double(double)>, 4> make_true_functions() {
  std::array<std::function<double(double)>, 4> fns;
  for (int j = 0; j < 4; ++j) {
    fns[static_cast<std::size_t>(j)] = [j](double x) { return true_function(j, x); };
  }
  return fns;
}

double lifespan_trajectory(double age) {
  const double rise = 35000.0 * (1.0 - std::exp(-(age - 4.0) / 9.0));
  const double over = std::max(age - 28.0, 0.0);
  return 85000.0 + rise - 5.5 * over * over;
}

double lifespan_group_effect(double age) {
  const double over = std::max(age - 40.0, 0.0) / 54.0;
  return -1250.0 * over * over;
}

std::string scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::mega: return "mega";
    case Scheme::equal: return "equal";
    case Scheme::unequal: return "unequal";
    case Scheme::unequal_range: return "unequal_range";
  }
  throw InvalidSpec("bad scheme");
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "mega") return Scheme::mega;
  if (name == "equal") return Scheme::equal;
  if (name == "unequal") return Scheme::unequal;
  if (name == "unequal_range") return Scheme::unequal_range;
  throw InvalidSpec("unknown scheme '" + name + "'");
}

EstimationReport run_estimation(const EstimationScenario& scenario) {
  const auto t0 = std::chrono::steady_clock::now();
  if (scenario.n_total < 100) throw InvalidSpec("estimation scenario needs n_total >= 100");
  if (scenario.replications < 1) throw InvalidSpec("need at least one replication");
  if (scenario.schemes.empty()) throw InvalidSpec("no schemes requested");

  const int G = scenario.grid_points;
  Eigen::VectorXd grid(G);
  for (int g = 0; g < G; ++g) grid[g] = g / double(G - 1);
  std::array<Eigen::VectorXd, 4> truth;
  for (int j = 0; j < 4; ++j) {
    truth[static_cast<std::size_t>(j)].resize(G);
    for (int g = 0; g < G; ++g) truth[static_cast<std::size_t>(j)][g] = true_function(j, grid[g]);
  }
  ColumnTable grid_table;
  {
    std::vector<double> gx(grid.data(), grid.data() + G);
    for (int j = 0; j < 4; ++j) grid_table.add_numeric("x" + std::to_string(j), gx);
  }

  const ModelFormula formula = estimation_formula();
  const double zcrit = stats::norm_quantile(0.975);
  const std::size_t S = scenario.schemes.size();

  struct RepOut {
    // [scheme][term]
    std::vector<std::array<double, 4>> rmse, cover;
    std::vector<std::array<Eigen::VectorXd, 4>> fit;
  };
  std::vector<RepOut> results(static_cast<std::size_t>(scenario.replications));

  auto one_rep = [&](std::size_t rep) {
    std::mt19937_64 rng = stream_rng(scenario.seed, rep);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const int n = scenario.n_total;
    std::vector<std::vector<double>> cols(5, std::vector<double>(static_cast<std::size_t>(n)));
    const std::vector<std::string> names = {"x0", "x1", "x2", "x3", "y"};
    for (int i = 0; i < n; ++i) {
      double yi = scenario.sigma * gauss(rng);
      for (int j = 0; j < 4; ++j) {
        const double x = unif(rng);
        cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = x;
        yi += true_function(j, x);
      }
      cols[4][static_cast<std::size_t>(i)] = yi;
    }

    RepOut out;
    out.rmse.resize(S);
    out.cover.resize(S);
    out.fit.resize(S);
    try {
      for (std::size_t s = 0; s < S; ++s) {
        const Scheme scheme = scenario.schemes[s];
        const auto cohorts =
            split_indices(scheme, n, cols[1], cols[2], static_cast<long>(rep));
        std::vector<FittedGam> fits;
        fits.reserve(cohorts.size());
        for (const auto& idx : cohorts) {
          fits.push_back(fit_gam(subset_table(cols, names, idx), formula));
        }
        for (int j = 0; j < 4; ++j) {
          const std::string term = "s(x" + std::to_string(j) + ")";
          Eigen::VectorXd fit, se;
          if (scheme == Scheme::mega) {
            TermPrediction p = predict_with_intercept_se(fits[0], term, grid_table);
            fit = std::move(p.fit);
            se = std::move(p.se);
          } else {
            // cohorts are dropped at grid points outside their observed
            // covariate range; at least two remain everywhere by construction
            std::vector<CohortPrediction> preds;
            preds.reserve(fits.size());
            for (std::size_t m = 0; m < fits.size(); ++m) {
              preds.push_back(as_cohort_prediction(
                  fits[m], "cohort" + std::to_string(m), "x" + std::to_string(j), grid,
                  predict_with_intercept_se(fits[m], term, grid_table)));
            }
            MetaFit meta = pool_pointwise(preds, PoolMethod::FE, true);
            fit = std::move(meta.pooled_fit);
            se = std::move(meta.pooled_se);
          }
          const Eigen::ArrayXd err = fit.array() - truth[static_cast<std::size_t>(j)].array();
          out.rmse[s][static_cast<std::size_t>(j)] = std::sqrt(err.square().mean());
          out.cover[s][static_cast<std::size_t>(j)] =
              (err.abs() <= zcrit * se.array()).cast<double>().mean();
          out.fit[s][static_cast<std::size_t>(j)] = std::move(fit);
        }
      }
    } catch (const SimulationFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw SimulationFailure(static_cast<long>(rep), e.what());
    }
    results[rep] = std::move(out);
  };

  const int threads = scenario.threads > 0 ? scenario.threads : thread_budget();
  parallel_for(static_cast<std::size_t>(scenario.replications), threads, one_rep);

  EstimationReport report;
  report.scenario = scenario;
  report.grid = grid;
  report.truth = truth;
  for (std::size_t s = 0; s < S; ++s) {
    const std::string key = scheme_name(scenario.schemes[s]);
    std::array<EstimationCell, 4> cells;
    std::array<Eigen::VectorXd, 4> mean_fit;
    for (int j = 0; j < 4; ++j) {
      std::vector<double> rmse, cover;
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(G);
      for (const RepOut& r : results) {
        rmse.push_back(r.rmse[s][static_cast<std::size_t>(j)]);
        cover.push_back(r.cover[s][static_cast<std::size_t>(j)]);
        acc += r.fit[s][static_cast<std::size_t>(j)];
      }
      cells[static_cast<std::size_t>(j)] = {mean_of(rmse), sd_of(rmse), mean_of(cover),
                                            sd_of(cover)};
      mean_fit[static_cast<std::size_t>(j)] = acc / static_cast<double>(results.size());
    }
    report.cells.emplace(key, cells);
    report.mean_fit.emplace(key, std::move(mean_fit));
  }
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string estimation_csv(const EstimationReport& report) {
  std::ostringstream out;
  out << "scheme,term,rmse_mean,rmse_sd,coverage_mean,coverage_sd\n";
  for (Scheme scheme : report.scenario.schemes) {
    const std::string key = scheme_name(scheme);
    const auto& cells = report.cells.at(key);
    for (int j = 0; j < 4; ++j) {
      const auto& c = cells[static_cast<std::size_t>(j)];
      out << key << ",f" << j << "," << fmt6(c.rmse_mean) << "," << fmt6(c.rmse_sd) << ","
          << fmt6(c.coverage_mean) << "," << fmt6(c.coverage_sd) << "\n";
    }
  }
  return out.str();
}

std::string estimation_panel_svg(const EstimationReport& report) {
  // four sub-plots composed as nested <svg> elements
  const int W = 1100, H = 820;
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(W) +
         "\" height=\"" + std::to_string(H) + "\" viewBox=\"0 0 " + std::to_string(W) + " " +
         std::to_string(H) + "\">\n";
  const auto& palette = SvgPlot::palette();
  for (int j = 0; j < 4; ++j) {
    SvgPlot plot(W / 2, H / 2, "f" + std::to_string(j), "x" + std::to_string(j), "term fit");
    std::vector<std::pair<std::string, std::string>> legend;
    plot.include(report.grid, report.truth[static_cast<std::size_t>(j)]);
    int ci = 0;
    for (Scheme scheme : report.scenario.schemes) {
      plot.include(report.grid,
                   report.mean_fit.at(scheme_name(scheme))[static_cast<std::size_t>(j)]);
      ++ci;
    }
    ci = 0;
    for (Scheme scheme : report.scenario.schemes) {
      const std::string& color = palette[static_cast<std::size_t>(ci) % palette.size()];
      plot.line(report.grid, report.mean_fit.at(scheme_name(scheme))[static_cast<std::size_t>(j)],
                color, 1.6, false);
      legend.emplace_back(scheme_name(scheme), color);
      ++ci;
    }
    plot.line(report.grid, report.truth[static_cast<std::size_t>(j)], "#000000", 1.6, true);
    legend.emplace_back("truth", "#000000");
    if (j == 0) plot.legend(legend);
    std::string sub = plot.render();
    // strip the XML prolog of the nested document
    sub = sub.substr(sub.find("<svg"));
    const int x = (j % 2) * (W / 2), y = (j / 2) * (H / 2);
    out += "<svg x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
           std::to_string(W / 2) + "\" height=\"" + std::to_string(H / 2) + "\" " +
           sub.substr(5);
  }
  out += "</svg>\n";
  return out;
}

PowerReport run_power(const PowerScenario& scenario) {
  const auto t0 = std::chrono::steady_clock::now();
  if (scenario.n_cohorts < 2) throw InvalidSpec("power scenario needs at least 2 cohorts");
  if (scenario.n_total < 20 * scenario.n_cohorts) {
    throw InvalidSpec("power scenario n_total too small for the cohort count");
  }

  ModelFormula formula;
  formula.response = "y";
  {
    FormulaSmooth main;
    main.covariate = "x1";
    main.id = "s(x1)";
    main.basis_dim = scenario.basis_dim;
    formula.smooth_terms.push_back(main);
    FormulaSmooth inter;
    inter.covariate = "x1";
    inter.by = "x2";
    inter.id = "s(x1):x2";
    inter.basis_dim = scenario.basis_dim;
    formula.smooth_terms.push_back(inter);
    formula.linear_terms.push_back("x2");
  }
  const std::string interaction_term = "s(x1):x2";

  std::vector<std::string> combiners;
  for (PValueMethod m : all_pvalue_methods()) combiners.push_back(pvalue_method_name(m));

  struct RepOut {
    double mega = 1.0, single = 1.0;
    std::map<std::string, double> combined;
  };
  std::vector<RepOut> results(static_cast<std::size_t>(scenario.replications));

  auto one_rep = [&](std::size_t rep) {
    std::mt19937_64 rng = stream_rng(scenario.seed, rep);
    std::uniform_real_distribution<double> age_dist(4.0, 94.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const int n = scenario.n_total;
    std::vector<std::vector<double>> cols(3, std::vector<double>(static_cast<std::size_t>(n)));
    const std::vector<std::string> names = {"x1", "x2", "y"};
    for (int i = 0; i < n; ++i) {
      const double age = age_dist(rng);
      const double group = unif(rng) < 0.5 ? 0.0 : 1.0;
      double y = lifespan_trajectory(age) + scenario.sigma * gauss(rng);
      if (scenario.interaction && group > 0.5) y += lifespan_group_effect(age);
      cols[0][static_cast<std::size_t>(i)] = age;
      cols[1][static_cast<std::size_t>(i)] = group;
      cols[2][static_cast<std::size_t>(i)] = y;
    }

    RepOut out;
    try {
      std::vector<double> pvals;
      const std::vector<int> sizes = equal_sizes(n, scenario.n_cohorts);
      int at = 0;
      for (int c = 0; c < scenario.n_cohorts; ++c) {
        std::vector<int> idx(static_cast<std::size_t>(sizes[static_cast<std::size_t>(c)]));
        for (int i = 0; i < sizes[static_cast<std::size_t>(c)]; ++i) {
          idx[static_cast<std::size_t>(i)] = at + i;
        }
        at += sizes[static_cast<std::size_t>(c)];
        FittedGam fit = fit_gam(subset_table(cols, names, idx), formula);
        pvals.push_back(fit.term(interaction_term).pvalue);
      }
      out.single = pvals.front();
      for (PValueMethod m : all_pvalue_methods()) {
        // cohorts are equal-sized, so equal combination weights apply
        out.combined[pvalue_method_name(m)] = combine_pvalues(pvals, m);
      }
      std::vector<int> all(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
      FittedGam mega = fit_gam(subset_table(cols, names, all), formula);
      out.mega = mega.term(interaction_term).pvalue;
    } catch (const std::exception& e) {
      throw SimulationFailure(static_cast<long>(rep), e.what());
    }
    results[rep] = std::move(out);
  };

  const int threads = scenario.threads > 0 ? scenario.threads : thread_budget();
  parallel_for(static_cast<std::size_t>(scenario.replications), threads, one_rep);

  PowerReport report;
  report.scenario = scenario;
  report.analyses.push_back("mega");
  for (const std::string& c : combiners) report.analyses.push_back(c);
  report.analyses.push_back("single_cohort");
  for (const std::string& a : report.analyses) report.pvalues[a] = {};
  for (const RepOut& r : results) {
    report.pvalues["mega"].push_back(r.mega);
    report.pvalues["single_cohort"].push_back(r.single);
    for (const auto& [name, p] : r.combined) report.pvalues[name].push_back(p);
  }
  for (const std::string& a : report.analyses) {
    const std::vector<double>& p = report.pvalues[a];
    double rejected = 0.0;
    for (double v : p) rejected += (v < scenario.alpha) ? 1.0 : 0.0;
    report.rejection_rate[a] = rejected / static_cast<double>(p.size());
    report.ks_uniform[a] = stats::ks_distance_uniform(p.data(), p.size());
  }
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string power_csv(const PowerReport& report) {
  std::ostringstream out;
  out << "analysis,rejection_rate,ks_uniform\n";
  for (const std::string& a : report.analyses) {
    out << a << "," << fmt6(report.rejection_rate.at(a)) << "," << fmt6(report.ks_uniform.at(a))
        << "\n";
  }
  return out.str();
}

std::string power_quantiles_csv(const PowerReport& report) {
  const double probs[7] = {0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90};
  std::ostringstream out;
  out << "analysis,q01,q05,q10,q25,q50,q75,q90\n";
  for (const std::string& a : report.analyses) {
    std::vector<double> p = report.pvalues.at(a);
    std::sort(p.begin(), p.end());
    out << a;
    for (double prob : probs) {
      out << "," << fmt6(stats::quantile_sorted(p.data(), p.size(), prob));
    }
    out << "\n";
  }
  return out.str();
}

std::string power_curve_svg(const std::vector<PowerReport>& sweep, const std::string& xlabel,
                            const std::vector<double>& xvalues) {
  if (sweep.empty() || sweep.size() != xvalues.size()) {
    throw InvalidSpec("power sweep and x values must align");
  }
  SvgPlot plot(760, 520, "Power to detect the group interaction", xlabel, "power");
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(
      xvalues.data(), static_cast<Eigen::Index>(xvalues.size()));
  plot.set_domain(x.minCoeff(), x.maxCoeff(), 0.0, 1.0);
  const std::vector<std::string> shown = {"mega", "stouffer", "tippett", "single_cohort"};
  std::vector<std::pair<std::string, std::string>> legend;
  const auto& palette = SvgPlot::palette();
  for (std::size_t a = 0; a < shown.size(); ++a) {
    Eigen::VectorXd ys(static_cast<Eigen::Index>(sweep.size()));
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      ys[static_cast<Eigen::Index>(i)] = sweep[i].rejection_rate.at(shown[a]);
    }
    plot.line(x, ys, palette[a % palette.size()], 2.0, false);
    legend.emplace_back(shown[a], palette[a % palette.size()]);
  }
  plot.hline(0.05, "#888888", true);
  plot.legend(legend);
  return plot.render();
}

}  // namespace metagam::sim
