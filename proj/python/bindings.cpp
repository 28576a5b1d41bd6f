#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "dustmns/efficiency.hpp"
#include "dustmns/errors.hpp"
#include "dustmns/estimators.hpp"
#include "dustmns/mathkit.hpp"
#include "dustmns/montecarlo.hpp"
#include "dustmns/report_io.hpp"

namespace py = pybind11;

namespace {

// Reports cross the boundary as JSON text; the Python side decodes them.
std::string estimate_text(const dustmns::EstimateReport& r) {
    auto doc = dustmns::estimate_json(r);
    doc["details"] = dustmns::estimate_details_json(r);
    return doc.dump();
}

}  // namespace

PYBIND11_MODULE(_dustmns, m) {
    m.doc() = "DUST-MNS sampling analytics";

    py::register_exception<dustmns::ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<dustmns::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("calibration_map", &dustmns::math::calibration_map, py::arg("x"), py::arg("k"));
    m.def("max_exceed_prob", &dustmns::math::max_exceed_prob, py::arg("theta"), py::arg("k"));
    m.def("reg_inc_beta", &dustmns::math::reg_inc_beta, py::arg("c"), py::arg("alpha"),
          py::arg("beta"));

    m.def("theta_star", &dustmns::theta_star, py::arg("k"));
    m.def("delta_theta", &dustmns::delta_theta, py::arg("theta"), py::arg("k"));
    m.def("re_mns_vs_dustsrs", &dustmns::re_mns_vs_dustsrs, py::arg("theta"), py::arg("k"));
    m.def("lambda_bound", &dustmns::lambda_bound, py::arg("eta0"), py::arg("n"),
          py::arg("mean_lag"));
    m.def("beta_model_re", &dustmns::beta_model_re, py::arg("c"), py::arg("alpha"),
          py::arg("beta"), py::arg("k"));

    m.def("exact_bias", &dustmns::exact_bias, py::arg("n"), py::arg("k"), py::arg("theta"));
    m.def("leading_bias", &dustmns::leading_bias, py::arg("n"), py::arg("k"), py::arg("theta"));
    m.def(
        "var_dust_mns",
        [](double theta, int n, int k) { return dustmns::var_dust_mns(theta, n, k).value; },
        py::arg("theta"), py::arg("n"), py::arg("k"));

    m.def(
        "_estimate_dust_mns",
        [](int r_n, int n, int k) { return estimate_text(dustmns::estimate_dust_mns(r_n, n, k)); },
        py::arg("r_n"), py::arg("n"), py::arg("k"));
    m.def(
        "_estimate_tau",
        [](int r_n, int n, int k, double tau) {
            return estimate_text(dustmns::estimate_imperfect(r_n, n, k, dustmns::TauModel{tau}));
        },
        py::arg("r_n"), py::arg("n"), py::arg("k"), py::arg("tau"));

    m.def(
        "table_csv",
        [](const std::string& which) {
            const auto kind = dustmns::parse_table_kind(which);
            std::ostringstream os;
            dustmns::write_table_csv(dustmns::make_table(kind, dustmns::default_grid(kind)), os);
            return os.str();
        },
        py::arg("which"));
}
