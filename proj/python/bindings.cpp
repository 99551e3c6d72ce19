#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kpst/dist.hpp"
#include "kpst/error.hpp"
#include "kpst/kps.hpp"
#include "kpst/montecarlo.hpp"
#include "kpst/report.hpp"

namespace py = pybind11;
using namespace kpst;

namespace {

KpsSample make_sample(const Matrix& vhat, const Matrix& z, const std::optional<std::vector<std::string>>& clusters) {
    if (clusters) return KpsSample::with_labels(vhat, z, *clusters);
    return KpsSample(vhat, z);
}

KpsOptions make_options(bool normalize, const std::string& formula, std::optional<double> rtol) {
    KpsOptions o;
    o.normalize = normalize;
    if (formula == "simplified") {
        o.formula = Formula::Simplified;
    } else if (formula != "full") {
        throw Error(ErrorCode::InvalidArgument, "formula must be 'full' or 'simplified'");
    }
    if (rtol) o.rank_policy = Tolerance{*rtol};
    return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Kronecker product structure test";
    m.attr("__version__") = std::string(version());

    py::register_exception<Error>(m, "KpsError", PyExc_ValueError);

    py::class_<NkpFit>(m, "NkpFit")
        .def_readonly("g1", &NkpFit::g1)
        .def_readonly("g2", &NkpFit::g2)
        .def_readonly("ds", &NkpFit::ds)
        .def_readonly("gap_ok", &NkpFit::gap_ok)
        .def_readonly("warnings", &NkpFit::warnings)
        .def_property_readonly("singular_values", [](const NkpFit& f) { return Vector(f.svd.sigma()); });

    py::class_<KpsResult>(m, "KpsResult")
        .def_readonly("statistic", &KpsResult::statistic)
        .def_readonly("df", &KpsResult::df)
        .def_readonly("p_value", &KpsResult::p_value)
        .def_readonly("clustered", &KpsResult::clustered)
        .def_readonly("normalized", &KpsResult::normalized)
        .def_readonly("n", &KpsResult::n)
        .def_readonly("n_effective", &KpsResult::n_effective)
        .def_readonly("p", &KpsResult::p)
        .def_readonly("k", &KpsResult::k)
        .def_readonly("nkp", &KpsResult::nkp)
        .def_readonly("warnings", &KpsResult::warnings)
        .def_property_readonly("method", [](const KpsResult& r) { return std::string(to_string(r.method)); })
        .def("reject", &KpsResult::reject, py::arg("level") = 0.05)
        .def("__repr__", [](const KpsResult& r) {
            return "KpsResult(method='" + std::string(to_string(r.method)) + "', statistic=" + std::to_string(r.statistic) +
                   ", df=" + std::to_string(r.df) + ", p_value=" + std::to_string(r.p_value) + ")";
        });

    m.def(
        "kpst",
        [](const Matrix& vhat, const Matrix& z, std::optional<std::vector<std::string>> clusters, bool normalize,
           const std::string& formula, std::optional<double> rtol) {
            return kpst::kpst(make_sample(vhat, z, clusters), make_options(normalize, formula, rtol));
        },
        py::arg("vhat"), py::arg("z"), py::arg("clusters") = py::none(), py::arg("normalize") = true,
        py::arg("formula") = "full", py::arg("rtol") = py::none(), "KPST statistic for residuals vhat (n x p) and regressors z (n x k).");
    m.def(
        "kpst_star",
        [](const Matrix& vhat, const Matrix& z, std::optional<std::vector<std::string>> clusters, bool normalize,
           const std::string& formula, std::optional<double> rtol) {
            return kpst::kpst_star(make_sample(vhat, z, clusters), make_options(normalize, formula, rtol));
        },
        py::arg("vhat"), py::arg("z"), py::arg("clusters") = py::none(), py::arg("normalize") = true,
        py::arg("formula") = "full", py::arg("rtol") = py::none());

    m.def("nearest_kps", &nearest_kps, py::arg("r"), py::arg("p"), py::arg("k"));
    m.def("degrees_of_freedom", &degrees_of_freedom, py::arg("p"), py::arg("k"));
    m.def("rearrange", &rearrange, py::arg("a"), py::arg("p"), py::arg("k"));
    m.def("duplication_matrix", &duplication_matrix, py::arg("m"));

    m.def("chi2_cdf", &chi2_cdf, py::arg("x"), py::arg("df"));
    m.def("chi2_sf", &chi2_sf, py::arg("x"), py::arg("df"));
    m.def("chi2_quantile", &chi2_quantile, py::arg("prob"), py::arg("df"));
    m.def(
        "noncentral_chi2_cdf", [](double x, int df, double delta) { return noncentral_chi2_cdf(x, {df, delta}); },
        py::arg("x"), py::arg("df"), py::arg("noncentrality"));

    m.def(
        "simulate_null",
        [](Index p, Index k, Index n, const std::string& dgp, std::uint64_t seed, std::uint64_t stream) {
            RngStream rng(seed, stream);
            KpsSample s = mc::dgp_null(p, k, n, mc::parse_dgp(dgp), rng);
            return py::make_tuple(s.vhat(), s.z());
        },
        py::arg("p"), py::arg("k"), py::arg("n"), py::arg("dgp") = "homoskedastic", py::arg("seed") = 0,
        py::arg("stream") = 0, "Draws (V, Z) from the null design.");
    m.def(
        "simulate_local",
        [](Index n, double sigma, std::uint64_t seed, std::uint64_t stream) {
            RngStream rng(seed, stream);
            KpsSample s = mc::dgp_local(n, sigma, rng);
            return py::make_tuple(s.vhat(), s.z());
        },
        py::arg("n"), py::arg("sigma"), py::arg("seed") = 0, py::arg("stream") = 0);
}
