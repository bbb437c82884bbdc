// Python bindings for the ebmnm core library.
#include "ebmnm/core.hpp"
#include "ebmnm/io.hpp"
#include "ebmnm/mixture.hpp"
#include "ebmnm/posterior.hpp"
#include "ebmnm/sim.hpp"
#include "ebmnm/solvers.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ebmnm;

namespace {

Noise make_noise(const py::object& noise) {
  if (py::isinstance<py::list>(noise) || py::isinstance<py::tuple>(noise)) {
    return PerObservationNoise{noise.cast<std::vector<Matrix>>()};
  }
  return SharedNoise{noise.cast<Matrix>()};
}

Penalty make_penalty(const std::string& kind, std::optional<double> lambda, Eigen::Index R) {
  const double lam = lambda.value_or(static_cast<double>(R));
  if (kind == "none") return Penalty::none();
  if (kind == "iw") return Penalty::inverse_wishart(lam);
  if (kind == "nn") return Penalty::nuclear_norm(lam);
  throw Error(ErrorKind::InvalidConfig, "penalty must be none, iw or nn");
}

Algorithm make_algorithm(const std::string& s) {
  if (s == "ted") return Algorithm::TED;
  if (s == "ed") return Algorithm::ED;
  if (s == "fa") return Algorithm::FA;
  throw Error(ErrorKind::InvalidConfig, "algorithm must be ted, ed or fa");
}

ComponentConstraint make_constraint(const std::string& s) {
  if (s == "free") return ComponentConstraint::free();
  if (s == "rank1") return ComponentConstraint::rank1();
  throw Error(ErrorKind::InvalidConfig, "constraint must be free or rank1");
}

py::list trace_list(const std::vector<TracePoint>& t) {
  py::list out;
  for (const auto& p : t) out.append(py::make_tuple(p.iteration, p.objective, p.seconds));
  return out;
}

}  // namespace

PYBIND11_MODULE(_ebmnm, m) {
  m.doc() = "Empirical Bayes multivariate normal means with mixture-of-normals priors";

  py::register_exception<Error>(m, "EbmnmError", PyExc_ValueError);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](const Matrix& x, const py::object& noise) { return Dataset(x, make_noise(noise)); }),
           py::arg("x"), py::arg("noise"),
           "x is n x R; noise is one R x R matrix or a list of n of them")
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("dim", &Dataset::dim)
      .def_property_readonly("x", &Dataset::x)
      .def_property_readonly("shared_noise", &Dataset::shared_noise)
      .def("noise", py::overload_cast<Eigen::Index>(&Dataset::noise, py::const_), py::arg("j") = 0);

  py::class_<MixturePrior>(m, "MixturePrior")
      .def(py::init([](const Vector& pi, const std::vector<Matrix>& U, std::optional<Vector> s,
                       std::optional<std::vector<std::string>> constraints) {
             const auto K = pi.size();
             std::vector<ComponentConstraint> cons(static_cast<std::size_t>(K));
             if (constraints) {
               if (static_cast<Eigen::Index>(constraints->size()) != K) {
                 throw Error(ErrorKind::InvariantViolation, "one constraint per component");
               }
               for (std::size_t k = 0; k < cons.size(); ++k) cons[k] = make_constraint((*constraints)[k]);
             }
             return MixturePrior(pi, U, s.value_or(Vector::Ones(K)), std::move(cons));
           }),
           py::arg("pi"), py::arg("U"), py::arg("s") = py::none(), py::arg("constraints") = py::none())
      .def_property_readonly("K", &MixturePrior::K)
      .def_property_readonly("dim", &MixturePrior::dim)
      .def_property_readonly("pi", &MixturePrior::pi)
      .def_property_readonly("U", [](const MixturePrior& p) { return p.U(); })
      .def_property_readonly("s", &MixturePrior::s)
      .def_property_readonly("constraints",
                             [](const MixturePrior& p) {
                               std::vector<std::string> out;
                               for (const auto& c : p.constraints()) out.emplace_back(to_string(c.kind));
                               return out;
                             })
      .def("to_json", [](const MixturePrior& p) { return io::serialize_prior(p); })
      .def_static("from_json", &io::deserialize_prior, py::arg("text"));

  m.def(
      "random_init",
      [](int R, int K, std::uint64_t seed, const std::string& constraint) {
        return random_init(R, K, seed, std::vector<ComponentConstraint>(static_cast<std::size_t>(K),
                                                                        make_constraint(constraint)));
      },
      py::arg("R"), py::arg("K"), py::arg("seed") = 1, py::arg("constraint") = "free");

  m.def(
      "fit",
      [](const Dataset& d, const MixturePrior& init, const std::string& algorithm, const std::string& penalty,
         std::optional<double> lam, int max_iterations, double tolerance, int warm_start, int threads) {
        FitConfig cfg;
        cfg.algorithm = make_algorithm(algorithm);
        cfg.penalty = make_penalty(penalty, lam, d.dim());
        cfg.maxIterations = max_iterations;
        cfg.tolerance = tolerance;
        cfg.warmStartEDIterations = warm_start;
        cfg.K = static_cast<int>(init.K());
        cfg.threads = threads;
        std::optional<FitResult> res;
        {
          py::gil_scoped_release release;
          res.emplace(fit(d, init, cfg));
        }
        const FitResult& r = *res;
        py::dict out;
        out["prior"] = r.prior;
        out["trace"] = trace_list(r.trace.perIteration);
        out["warm_start_trace"] = trace_list(r.trace.warmStart);
        out["converged"] = r.trace.converged;
        out["iterations"] = r.trace.iterationsRun;
        out["objective"] = r.trace.perIteration.back().objective;
        return out;
      },
      py::arg("data"), py::arg("init"), py::arg("algorithm") = "ted", py::arg("penalty") = "none",
      py::arg("lam") = py::none(), py::arg("max_iterations") = 2000, py::arg("tolerance") = 0.01,
      py::arg("warm_start") = 0, py::arg("threads") = 1);

  m.def("log_likelihood", &log_likelihood, py::arg("data"), py::arg("prior"), py::arg("threads") = 1);
  m.def(
      "penalized_log_likelihood",
      [](const Dataset& d, const MixturePrior& p, const std::string& penalty, std::optional<double> lam) {
        return penalized_log_likelihood(d, p, make_penalty(penalty, lam, d.dim()));
      },
      py::arg("data"), py::arg("prior"), py::arg("penalty") = "none", py::arg("lam") = py::none());
  m.def("responsibilities", &responsibilities, py::arg("data"), py::arg("prior"), py::arg("threads") = 1);

  m.def(
      "summarize",
      [](const Dataset& d, const MixturePrior& p, int threads) {
        const PosteriorSummary s = summarize(d, p, threads);
        py::dict out;
        out["mean"] = s.mean;
        out["sd"] = s.sd;
        out["lfsr"] = s.lfsr;
        return out;
      },
      py::arg("data"), py::arg("prior"), py::arg("threads") = 1);

  m.def(
      "simulate",
      [](const std::string& scenario, int n, int n_test, int R, std::uint64_t seed) {
        if (scenario != "hybrid" && scenario != "rank1") {
          throw Error(ErrorKind::InvalidScenario, "scenario must be hybrid or rank1");
        }
        SimulatedData sim =
            generate({scenario == "hybrid" ? ScenarioKind::Hybrid : ScenarioKind::RankOne, n, n_test, R, seed});
        py::dict out;
        out["train"] = sim.train;
        out["test"] = sim.test ? py::cast(*sim.test) : py::none();
        out["theta"] = sim.truth.theta;
        out["theta_test"] = sim.truth.thetaTest;
        out["prior"] = sim.truth.prior;
        out["labels"] = sim.truth.labels;
        return out;
      },
      py::arg("scenario") = "hybrid", py::arg("n") = 1000, py::arg("n_test") = 0, py::arg("R") = 5,
      py::arg("seed") = 1);

  m.def("kl_divergence", &kl_divergence, py::arg("test"), py::arg("truth"), py::arg("fitted"),
        py::arg("threads") = 1);

  m.def(
      "empirical_fsr",
      [](const Matrix& mean, const Matrix& lfsr, const Matrix& theta, double threshold) {
        const FsrResult r = empirical_fsr(PosteriorSummary{mean, Matrix::Zero(mean.rows(), mean.cols()), lfsr},
                                          theta, threshold);
        return py::make_tuple(r.fsr, r.count);
      },
      py::arg("mean"), py::arg("lfsr"), py::arg("theta"), py::arg("threshold") = 0.05);

  m.def(
      "ted_update",
      [](const Dataset& d, const Vector& w, const Matrix& current, double scale, const std::string& penalty,
         std::optional<double> lam, bool rank_one) {
        return ted_update({d, w, scale, make_penalty(penalty, lam, d.dim()), current}, rank_one);
      },
      py::arg("data"), py::arg("weights"), py::arg("current"), py::arg("scale") = 1.0, py::arg("penalty") = "none",
      py::arg("lam") = py::none(), py::arg("rank_one") = false);
  m.def(
      "ed_update",
      [](const Dataset& d, const Vector& w, const Matrix& current, double scale, const std::string& penalty,
         std::optional<double> lam) {
        return ed_update({d, w, scale, make_penalty(penalty, lam, d.dim()), current});
      },
      py::arg("data"), py::arg("weights"), py::arg("current"), py::arg("scale") = 1.0, py::arg("penalty") = "none",
      py::arg("lam") = py::none());
  m.def(
      "fa_update",
      [](const Dataset& d, const Vector& w, const Vector& u) {
        return fa_update({d, w, 1.0, Penalty::none(), u * u.transpose()}, u);
      },
      py::arg("data"), py::arg("weights"), py::arg("u"));
  m.def(
      "scale_factor_update",
      [](const Matrix& U, const std::string& penalty) { return scale_factor_update(U, make_penalty(penalty, 1.0, 1)); },
      py::arg("U"), py::arg("penalty"));
}
