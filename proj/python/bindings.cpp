#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "metagam/fit.hpp"
#include "metagam/meta.hpp"
#include "metagam/sim.hpp"
#include "metagam/spline.hpp"
#include "metagam/strip.hpp"
#include "metagam/table.hpp"

namespace py = pybind11;
using namespace metagam;

namespace {

ColumnTable table_from_dict(const py::dict& data) {
  ColumnTable t;
  for (auto item : data) {
    const std::string name = py::cast<std::string>(item.first);
    py::object col = py::reinterpret_borrow<py::object>(item.second);
    try {
      t.add_numeric(name, py::cast<std::vector<double>>(col));
    } catch (const py::cast_error&) {
      t.add_factor(name, py::cast<std::vector<std::string>>(col));
    }
  }
  return t;
}

py::dict prediction_to_dict(const TermPrediction& p) {
  py::dict out;
  out["fit"] = p.fit;
  out["se"] = p.se;
  out["includes_intercept"] = p.includes_intercept;
  return out;
}

PoolMethod pool_method_from(const std::string& name) {
  if (name == "fe" || name == "FE") return PoolMethod::FE;
  if (name == "dl" || name == "DL") return PoolMethod::DL;
  throw InvalidSpec("pooling method must be 'fe' or 'dl'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Penalized-spline GAM fitting and pointwise meta-analysis";

  py::register_exception<RankDeficientDesign>(m, "RankDeficientDesignError");
  py::register_exception<SchemaViolation>(m, "SchemaViolationError");
  py::register_exception<VersionMismatch>(m, "VersionMismatchError");
  static py::exception<Error> base_error(m, "MetagamError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const RankDeficientDesign&) {
      throw;  // handled by the registered exception above
    } catch (const SchemaViolation&) {
      throw;
    } catch (const VersionMismatch&) {
      throw;
    } catch (const Error& e) {
      py::set_error(base_error, e.what());
    }
  });

  py::class_<FittedGam>(m, "FittedGam")
      .def_property_readonly("n", [](const FittedGam& f) { return f.n; })
      .def_property_readonly("scale", [](const FittedGam& f) { return f.scale; })
      .def_property_readonly("edf_total", [](const FittedGam& f) { return f.edf_total; })
      .def_property_readonly("r2_adj", [](const FittedGam& f) { return f.r2_adj; })
      .def_property_readonly("coefficients",
                             [](const FittedGam& f) { return f.coefficients; })
      .def_property_readonly("covariance", [](const FittedGam& f) { return f.covariance; })
      .def_property_readonly("terms",
                             [](const FittedGam& f) {
                               std::vector<std::string> ids;
                               for (const TermFit& t : f.smooths) ids.push_back(t.spec.id);
                               return ids;
                             })
      .def("term_edf", [](const FittedGam& f, const std::string& id) { return f.term(id).edf; })
      .def("term_lambda",
           [](const FittedGam& f, const std::string& id) { return f.term(id).lambda; })
      .def("term_pvalue",
           [](const FittedGam& f, const std::string& id) { return term_pvalue(f, id); })
      .def(
          "predict_term",
          [](const FittedGam& f, const std::string& id, const py::dict& grid,
             bool include_intercept) {
            return prediction_to_dict(predict_term(f, id, table_from_dict(grid),
                                                   include_intercept));
          },
          py::arg("term"), py::arg("grid"), py::arg("include_intercept") = false);

  py::class_<StrippedModel>(m, "StrippedModel")
      .def_property_readonly("cohort_label",
                             [](const StrippedModel& s) { return s.cohort_label; })
      .def_property_readonly("n", [](const StrippedModel& s) { return s.model.n; })
      .def_property_readonly("format_version",
                             [](const StrippedModel& s) { return s.format_version; })
      .def("to_json", [](const StrippedModel& s) { return serialize(s); })
      .def_static("from_json", [](const std::string& text) { return deserialize(text); })
      .def("save", [](const StrippedModel& s, const std::string& path) { save_stripped(s, path); })
      .def_static("load", [](const std::string& path) { return load_stripped(path); })
      .def(
          "predict_term",
          [](const StrippedModel& s, const std::string& id, const py::dict& grid,
             bool include_intercept) {
            return prediction_to_dict(predict_term(s.model, id, table_from_dict(grid),
                                                   include_intercept));
          },
          py::arg("term"), py::arg("grid"), py::arg("include_intercept") = false);

  m.def(
      "fit_gam",
      [](const py::dict& data, const std::string& formula) {
        return fit_gam(table_from_dict(data), parse_formula(formula));
      },
      py::arg("data"), py::arg("formula"),
      "Fit a penalized additive model; data is a dict of equal-length columns.");

  m.def(
      "strip_rawdata",
      [](const FittedGam& fit, const std::string& label) { return strip_rawdata(fit, label); },
      py::arg("fit"), py::arg("cohort_label") = "cohort");

  m.def(
      "place_knots",
      [](const std::vector<double>& x, int basis_dim, const std::string& rule) {
        KnotRule r = rule == "uniform" ? KnotRule::uniform : KnotRule::quantile;
        KnotSequence ks = place_knots(x, basis_dim, r);
        py::dict out;
        out["interior"] = ks.interior;
        out["low"] = ks.low;
        out["high"] = ks.high;
        return out;
      },
      py::arg("x"), py::arg("basis_dim"), py::arg("rule") = "quantile");

  m.def(
      "pool",
      [](const std::vector<StrippedModel>& models, const std::string& term, const py::dict& grid,
         const std::string& method, bool intercept, bool range_restrict) {
        const ColumnTable g = table_from_dict(grid);
        std::vector<CohortPrediction> preds;
        preds.reserve(models.size());
        for (const StrippedModel& sm : models) {
          preds.push_back(predict_for_meta(sm, term, g, intercept));
        }
        MetaFit meta = pool_pointwise(preds, pool_method_from(method), range_restrict);
        HeterogeneityCurve het = cochran_q(preds);
        py::dict out;
        out["grid"] = meta.grid_x;
        out["fit"] = meta.pooled_fit;
        out["se"] = meta.pooled_se;
        out["tau2"] = meta.tau2;
        out["weights"] = meta.weights;
        out["cohorts"] = meta.cohort_labels;
        out["q"] = het.q;
        out["q_df"] = het.df;
        return out;
      },
      py::arg("models"), py::arg("term"), py::arg("grid"), py::arg("method") = "fe",
      py::arg("intercept") = false, py::arg("range_restrict") = false);

  m.def(
      "combine_pvalues",
      [](const std::vector<double>& p, const std::string& method,
         const std::optional<std::vector<double>>& weights) {
        return combine_pvalues(p, pvalue_method_from_string(method), weights);
      },
      py::arg("p"), py::arg("method") = "stouffer", py::arg("weights") = py::none());

  m.def("true_functions_value", [](int j, double x) {
    auto fns = sim::make_true_functions();
    if (j < 0 || j > 3) throw InvalidSpec("true function index must be 0..3");
    return fns[static_cast<std::size_t>(j)](x);
  });
}
