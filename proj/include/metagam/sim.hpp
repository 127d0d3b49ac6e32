#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "metagam/errors.hpp"

namespace metagam::sim {

/// A replication failed; carries the replication index for reporting.
class SimulationFailure : public Error {
public:
  SimulationFailure(long rep, const std::string& what)
      : Error("replication " + std::to_string(rep) + ": " + what), replication(rep) {}
  long replication;
};

/// The four analytic test functions on [0, 1]: smooth unimodal, monotone
/// sigmoid, bimodal, and near-flat. Each is centered so its mean over the
/// canonical 10,001-point grid is zero.
std::array<std::function<double(double)>, 4> make_true_functions();

/// Lifespan-like trajectory on ages [4, 94]: steep growth to the mid-20s,
/// a plateau, then accelerating decline. Volume units.
double lifespan_trajectory(double age);

/// Group-interaction effect: zero before age 40, then growing atrophy.
double lifespan_group_effect(double age);

enum class Scheme { mega, equal, unequal, unequal_range };
std::string scheme_name(Scheme scheme);
Scheme scheme_from_string(const std::string& name);

struct EstimationScenario {
  int n_total = 4000;
  double sigma = 1.0;
  int replications = 200;
  std::uint64_t seed = 1;
  std::vector<Scheme> schemes = {Scheme::mega, Scheme::equal, Scheme::unequal,
                                 Scheme::unequal_range};
  int grid_points = 201;
  int threads = 0;  // 0: thread_budget()
};

struct EstimationCell {
  double rmse_mean = 0, rmse_sd = 0;
  double coverage_mean = 0, coverage_sd = 0;
};

struct EstimationReport {
  EstimationScenario scenario;
  std::map<std::string, std::array<EstimationCell, 4>> cells;  // keyed by scheme name
  Eigen::VectorXd grid;
  std::array<Eigen::VectorXd, 4> truth;
  std::map<std::string, std::array<Eigen::VectorXd, 4>> mean_fit;
  double runtime_seconds = 0;
};

/// Replicated function-estimation experiment: per replication one dataset is
/// drawn, split per scheme, fitted per cohort (basis dims 20/10/30/5), pooled
/// with fixed-effects weights, and scored against the truth on the grid.
EstimationReport run_estimation(const EstimationScenario& scenario);

std::string estimation_csv(const EstimationReport& report);
std::string estimation_panel_svg(const EstimationReport& report);

struct PowerScenario {
  int n_total = 3000;
  double sigma = 3500.0;
  bool interaction = true;  // false: null hypothesis holds
  int n_cohorts = 6;
  int replications = 500;
  std::uint64_t seed = 1;
  int basis_dim = 10;
  double alpha = 0.05;
  int threads = 0;
};

struct PowerReport {
  PowerScenario scenario;
  std::vector<std::string> analyses;  // fixed order: mega, combiners, single
  std::map<std::string, std::vector<double>> pvalues;
  std::map<std::string, double> rejection_rate;
  std::map<std::string, double> ks_uniform;
  double runtime_seconds = 0;
};

/// Replicated interaction test: per replication the dataset is split into
/// equal cohorts, the varying-coefficient model is fitted per cohort, and the
/// interaction p-values are combined with all six methods; a mega fit and a
/// single-cohort fit serve as references.
PowerReport run_power(const PowerScenario& scenario);

std::string power_csv(const PowerReport& report);
std::string power_quantiles_csv(const PowerReport& report);
std::string power_curve_svg(const std::vector<PowerReport>& sweep, const std::string& xlabel,
                            const std::vector<double>& xvalues);

}  // namespace metagam::sim
